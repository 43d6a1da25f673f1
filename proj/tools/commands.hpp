#pragma once

#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace diffpool::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // numerical or assertion failure
inline constexpr int kExitUsage = 2;    // usage or configuration error

/// Full command line minus the program name, e.g. {"train", "--model", "lp", ...}.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Defaults for every section of the run configuration file.
nlohmann::json default_run_config();

}  // namespace diffpool::cli
