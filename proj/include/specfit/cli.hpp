#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "specfit/estimators.hpp"
#include "specfit/oracle.hpp"
#include "specfit/report.hpp"

namespace specfit::cli {

namespace fs = std::filesystem;

enum ExitCode : int { ok = 0, validation_failure = 1, numerical_failure = 2 };

struct SimulateOptions {
    std::string config;  // preset name or config path
    fs::path out;
    std::optional<std::uint64_t> seed;
};

// Writes sources.csv, sources_deriv.csv, mixtures.csv, truth_A.csv,
// truth_xi.csv, truth_scale.csv and config.txt into `out`.
void cmd_simulate(const SimulateOptions& opts);

inline const std::vector<std::string> methods = {"ols",          "gls",       "agls",  "agls-scale",
                                                 "agmle-hetero", "agmle-ar1", "oracle"};

struct FitOptions {
    std::string method;
    fs::path data;
    fs::path out;
    // Single-spectrum `nu,value` files used instead of data/sources.csv.
    std::vector<fs::path> source_files;
    EstimatorConfig estimator;
    OracleConfig oracle;
};

RunReport cmd_fit(const FitOptions& opts, std::ostream& log);

// Writes comparison_summary.csv, comparison_params.csv and
// comparison_long.csv into `out`.
void cmd_compare(const std::vector<fs::path>& reports, const fs::path& out, std::ostream& log);

void cmd_report(const fs::path& report, std::ostream& log);

// Full command line front end; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace specfit::cli
