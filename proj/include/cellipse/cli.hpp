#pragma once

#include <iosfwd>
#include <span>
#include <string>

namespace cellipse {

/// Exit codes: 0 success, 1 usage error, 2 when any image failed.
int cli_main(std::span<const std::string> args, std::ostream& out, std::ostream& err);
int cli_main(int argc, char** argv);

/// Worker count from CELLIPSE_THREADS (unset or 0 means hardware concurrency).
unsigned worker_count_from_env();

}  // namespace cellipse
