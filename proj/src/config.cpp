#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "cellipse/pipeline.hpp"
#include "keyvalue.hpp"

namespace cellipse {

using detail::KeyValue;
using detail::parse_number;

void PipelineConfig::validate() const {
  if (k < 2) throw ConfigError("k must be at least 2");
  if (!(target_sigma > 0)) throw ConfigError("target_sigma must be positive");
  if (!(kmeans_tol > 0) || kmeans_max_iter < 1) throw ConfigError("invalid k-means settings");
  if (min_area < 1) throw ConfigError("min_area must be at least 1");
  if (contour_smoothing < 0) throw ConfigError("contour_smoothing must be non-negative");
  if (!(edge_offset >= 0)) throw ConfigError("edge_offset must be non-negative");
  if (!(histogram_bin_width > 0)) throw ConfigError("histogram_bin_width must be positive");
  try {
    concavity.validate();
    combine.validate();
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
}

namespace {

using Setter = std::function<void(PipelineConfig&, const KeyValue&)>;

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table{
      {"k", [](auto& c, const auto& kv) { c.k = parse_number<int>(kv); }},
      {"enable_decorrelation",
       [](auto& c, const auto& kv) { c.enable_decorrelation = detail::parse_bool(kv); }},
      {"target_sigma", [](auto& c, const auto& kv) { c.target_sigma = parse_number<double>(kv); }},
      {"seed", [](auto& c, const auto& kv) { c.seed = parse_number<std::uint64_t>(kv); }},
      {"kmeans_tol", [](auto& c, const auto& kv) { c.kmeans_tol = parse_number<double>(kv); }},
      {"kmeans_max_iter", [](auto& c, const auto& kv) { c.kmeans_max_iter = parse_number<int>(kv); }},
      {"min_area", [](auto& c, const auto& kv) { c.min_area = parse_number<std::size_t>(kv); }},
      {"nStep", [](auto& c, const auto& kv) { c.concavity.n_step = parse_number<int>(kv); }},
      {"dTh", [](auto& c, const auto& kv) { c.concavity.d_th = parse_number<double>(kv); }},
      {"theta_min", [](auto& c, const auto& kv) { c.concavity.theta_min = parse_number<double>(kv); }},
      {"theta_max", [](auto& c, const auto& kv) { c.concavity.theta_max = parse_number<double>(kv); }},
      {"contour_smoothing",
       [](auto& c, const auto& kv) { c.contour_smoothing = parse_number<int>(kv); }},
      {"disTh", [](auto& c, const auto& kv) { c.combine.dis_th = parse_number<double>(kv); }},
      {"eTh", [](auto& c, const auto& kv) { c.combine.e_th = parse_number<double>(kv); }},
      {"dMinTh", [](auto& c, const auto& kv) { c.combine.d_min_th = parse_number<double>(kv); }},
      {"separation_factor",
       [](auto& c, const auto& kv) { c.combine.separation_factor = parse_number<double>(kv); }},
      {"edge_offset", [](auto& c, const auto& kv) { c.edge_offset = parse_number<double>(kv); }},
      {"histogram_bin_width",
       [](auto& c, const auto& kv) { c.histogram_bin_width = parse_number<double>(kv); }},
  };
  return table;
}

}  // namespace

PipelineConfig parse_config(std::string_view text) {
  PipelineConfig config;
  for (const auto& kv : detail::parse_key_values(text)) {
    const auto it = setters().find(kv.key);
    if (it == setters().end())
      throw ConfigError("line " + std::to_string(kv.line) + ": unknown key " + kv.key);
    it->second(config, kv);
  }
  config.validate();
  return config;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string format_config(const PipelineConfig& c) {
  using detail::format_number;
  std::string out;
  auto line = [&](std::string_view key, const std::string& value) {
    out += std::string(key) + " = " + value + '\n';
  };
  out += "# segmentation\n";
  line("k", std::to_string(c.k));
  line("enable_decorrelation", c.enable_decorrelation ? "true" : "false");
  line("target_sigma", format_number(c.target_sigma));
  line("seed", std::to_string(c.seed));
  line("kmeans_tol", format_number(c.kmeans_tol));
  line("kmeans_max_iter", std::to_string(c.kmeans_max_iter));
  line("min_area", std::to_string(c.min_area));
  out += "# contour\n";
  line("nStep", std::to_string(c.concavity.n_step));
  line("dTh", format_number(c.concavity.d_th));
  line("theta_min", format_number(c.concavity.theta_min));
  line("theta_max", format_number(c.concavity.theta_max));
  line("contour_smoothing", std::to_string(c.contour_smoothing));
  out += "# ellipse\n";
  line("disTh", format_number(c.combine.dis_th));
  line("eTh", format_number(c.combine.e_th));
  line("dMinTh", format_number(c.combine.d_min_th));
  line("separation_factor", format_number(c.combine.separation_factor));
  line("edge_offset", format_number(c.edge_offset));
  out += "# reports\n";
  line("histogram_bin_width", format_number(c.histogram_bin_width));
  return out;
}

}  // namespace cellipse
