#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "specfit/estimators.hpp"

namespace specfit {

// Serialized outcome of one `fit` run. A report directory holds
//   fit_A.csv       row_id,<source names>            estimated weights
//   fit_params.csv  param,index,value                sigma/tau/rho/scale estimates
//   fit_diag.csv    key,value                        method, convergence, errors, timing
// and, when available, fit_xi.csv, fit_ci.csv and fit_truth.csv.
struct RunReport {
    struct Errors {
        double mean_abs = 0.0;
        double max_abs = 0.0;
        double total_abs = 0.0;
    };

    std::string method;
    std::vector<std::string> sources;
    Matrix a_hat;
    std::optional<Matrix> xi_hat;
    std::optional<Matrix> ci_half_width;
    std::optional<Matrix> truth;
    std::optional<Vector> sigma;
    std::optional<double> tau;
    std::optional<Vector> rho;
    std::optional<Vector> scale;
    std::size_t iterations = 1;
    bool converged = true;
    std::optional<double> final_loglik;
    std::size_t flagged_rows = 0;
    double wall_time_s = 0.0;
    std::string data_fingerprint;
    std::optional<Errors> errors;
};

RunReport::Errors weight_errors(const Matrix& estimate, const Matrix& truth);

RunReport make_report(const FitResult& fit, const std::vector<std::string>& sources,
                      const std::string& fingerprint, double wall_time_s,
                      const std::optional<Matrix>& truth);

void write_report(const std::filesystem::path& dir, const RunReport& report);
RunReport read_report(const std::filesystem::path& dir);

}  // namespace specfit
