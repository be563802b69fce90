#include "cellipse/cli.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "cellipse/errors.hpp"
#include "cellipse/pipeline.hpp"
#include "cellipse/raster.hpp"
#include "cellipse/synthbench.hpp"

namespace cellipse {

unsigned worker_count_from_env() {
  unsigned n = 0;
  if (const char* env = std::getenv("CELLIPSE_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) n = static_cast<unsigned>(v);
  }
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  return n;
}

namespace {

struct AnalyzeArgs {
  std::vector<std::string> inputs;
  std::string config_path;
  std::string out_dir = ".";
  bool emit_annotated = false;
  bool emit_csv = false;
  bool emit_hist = false;
  std::optional<std::uint64_t> seed;
};

struct BenchArgs {
  int scenes = 10;
  std::string spec_path;
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  int cells_min = 0;
  int cells_max = 0;
};

struct ImageReport {
  bool ok = false;
  std::string message;
};

// Distinct output stems for inputs that share a file name.
std::vector<std::string> image_ids(const std::vector<std::string>& inputs) {
  std::vector<std::string> ids;
  std::map<std::string, int> seen;
  for (const auto& in : inputs) {
    std::string stem = std::filesystem::path(in).stem().string();
    if (stem.empty()) stem = "image";
    const int n = seen[stem]++;
    ids.push_back(n == 0 ? stem : stem + "_" + std::to_string(n));
  }
  return ids;
}

ImageReport analyze_one(const std::string& input, const std::string& id, const AnalyzeArgs& args,
                        const PipelineConfig& config) {
  ImageReport report;
  try {
    const PixelImage img = load_image(input);
    const DetectionResult result = run_pipeline(img, config, id);
    const std::filesystem::path out(args.out_dir);
    if (args.emit_csv) write_csv(result, out / (id + ".csv"));
    if (args.emit_hist) {
      for (const auto& [cls, count] : result.per_class_counts) {
        const auto bins = area_histogram(result, cls, config.histogram_bin_width);
        write_text_file(out / (id + "_hist_class" + std::to_string(cls) + ".csv"),
                        format_histogram_csv(bins));
      }
    }
    if (args.emit_annotated) render_annotated(img, result, out / (id + "_annotated.png"));

    std::ostringstream msg;
    msg << input << ": " << result.cells.size() << " cells";
    for (const auto& [cls, count] : result.per_class_counts) msg << " [class " << cls << ": " << count << "]";
    msg << " in " << format_fixed(result.total_milliseconds, 1) << " ms";
    report.ok = true;
    report.message = msg.str();
  } catch (const std::exception& e) {
    report.message = "error: " + input + ": " + e.what();
  }
  return report;
}

int run_analyze(const AnalyzeArgs& args, std::ostream& out, std::ostream& err) {
  PipelineConfig config;
  try {
    if (!args.config_path.empty()) config = load_config(args.config_path);
    if (args.seed) config.seed = *args.seed;
    config.validate();
    std::filesystem::create_directories(args.out_dir);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }

  const auto ids = image_ids(args.inputs);
  std::vector<ImageReport> reports(args.inputs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < args.inputs.size(); i = next++)
      reports[i] = analyze_one(args.inputs[i], ids[i], args, config);
  };
  const unsigned threads =
      std::min<unsigned>(worker_count_from_env(), static_cast<unsigned>(args.inputs.size()));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  int code = 0;
  for (const auto& r : reports) {
    (r.ok ? out : err) << r.message << '\n';
    if (!r.ok) code = 2;
  }
  return code;
}

int run_bench_command(const BenchArgs& args, std::ostream& out, std::ostream& err) {
  BenchOptions options;
  try {
    if (!args.spec_path.empty()) options.spec = load_scene_spec(args.spec_path);
    if (!args.config_path.empty()) options.config = load_config(args.config_path);
    if (args.seed) options.config.seed = *args.seed;
    if (args.scenes < 1) throw ConfigError("--scenes must be positive");
    if (args.cells_max > 0) {
      if (args.cells_min < 0 || args.cells_min > args.cells_max)
        throw ConfigError("--cells-min must not exceed --cells-max");
      options.cells_per_scene = {args.cells_min, args.cells_max};
    }
    std::filesystem::create_directories(args.out_dir);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  options.scenes = args.scenes;

  try {
    const auto outcomes = run_bench(options);
    const auto path = std::filesystem::path(args.out_dir) / "bench_metrics.csv";
    write_text_file(path, format_metrics_csv(outcomes));
    double count = 0, matched = 0, rmse = 0, area = 0;
    for (const auto& o : outcomes) {
      count += o.metrics.count_error;
      matched += o.metrics.matched_fraction;
      rmse += o.metrics.center_rmse;
      area += o.metrics.area_mae;
    }
    const double n = static_cast<double>(outcomes.size());
    out << "scenes " << outcomes.size() << ": count_error " << format_fixed(count / n, 4)
        << ", matched_frac " << format_fixed(matched / n, 4) << ", center_rmse "
        << format_fixed(rmse / n, 3) << ", area_mae " << format_fixed(area / n, 2) << '\n'
        << "wrote " << path.string() << '\n';
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace

int cli_main(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Detects, splits and counts touching elliptical cells in colour micrographs."};
  app.name("cellipse");
  app.require_subcommand(1);

  AnalyzeArgs analyze;
  auto* analyze_cmd = app.add_subcommand("analyze", "Run the detector over images");
  analyze_cmd->add_option("inputs", analyze.inputs, "PNG or PPM images")->required();
  analyze_cmd->add_option("--config", analyze.config_path, "key = value configuration file");
  analyze_cmd->add_option("--out", analyze.out_dir, "Output directory");
  analyze_cmd->add_flag("--emit-annotated", analyze.emit_annotated, "Write <id>_annotated.png");
  analyze_cmd->add_flag("--emit-csv", analyze.emit_csv, "Write <id>.csv with one row per cell");
  analyze_cmd->add_flag("--emit-hist", analyze.emit_hist, "Write per-class area histograms");
  analyze_cmd->add_option("--seed", analyze.seed, "Override the k-means seed");

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "Score the detector on synthetic scenes");
  bench_cmd->add_option("--scenes", bench.scenes, "Number of scenes");
  bench_cmd->add_option("--spec", bench.spec_path, "key = value scene specification");
  bench_cmd->add_option("--config", bench.config_path, "key = value detector configuration");
  bench_cmd->add_option("--out", bench.out_dir, "Output directory");
  bench_cmd->add_option("--seed", bench.seed, "Override the k-means seed");
  bench_cmd->add_option("--cells-min", bench.cells_min, "Fewest cells per scene");
  bench_cmd->add_option("--cells-max", bench.cells_max, "Most cells per scene");

  auto* print_cmd = app.add_subcommand("print-config", "Print the default configuration");

  std::vector<std::string> argv(args.rbegin(), args.rend());
  if (!argv.empty()) argv.pop_back();  // program name
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n' << app.help();
    return 1;
  }

  if (analyze_cmd->parsed()) return run_analyze(analyze, out, err);
  if (bench_cmd->parsed()) return run_bench_command(bench, out, err);
  if (print_cmd->parsed()) {
    out << format_config(PipelineConfig{});
    return 0;
  }
  return 1;
}

int cli_main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return cli_main(args, std::cout, std::cerr);
}

}  // namespace cellipse
