#include "specfit/report.hpp"

#include <map>

#include "specfit/error.hpp"
#include "specfit/io.hpp"

namespace specfit {

namespace fs = std::filesystem;

RunReport::Errors weight_errors(const Matrix& estimate, const Matrix& truth) {
    if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols()) {
        throw ValidationError("estimate is " + std::to_string(estimate.rows()) + "x" +
                              std::to_string(estimate.cols()) + " but truth is " +
                              std::to_string(truth.rows()) + "x" + std::to_string(truth.cols()));
    }
    const Matrix diff = (estimate - truth).cwiseAbs();
    return {diff.mean(), diff.maxCoeff(), diff.sum()};
}

RunReport make_report(const FitResult& fit, const std::vector<std::string>& sources,
                      const std::string& fingerprint, double wall_time_s,
                      const std::optional<Matrix>& truth) {
    RunReport r;
    r.method = fit.method;
    r.sources = sources;
    r.a_hat = fit.a_hat;
    r.xi_hat = fit.xi_hat;
    r.ci_half_width = fit.ci_half_width;
    r.sigma = fit.sigma_hat;
    r.tau = fit.tau_hat;
    r.rho = fit.rho_hat;
    r.scale = fit.scale_hat;
    r.iterations = fit.iterations;
    r.converged = fit.converged;
    r.final_loglik = fit.final_loglik;
    r.flagged_rows = fit.flagged_rows.size();
    r.wall_time_s = wall_time_s;
    r.data_fingerprint = fingerprint;
    if (truth) {
        r.truth = truth;
        r.errors = weight_errors(fit.a_hat, *truth);
    }
    return r;
}

void write_report(const fs::path& dir, const RunReport& r) {
    fs::create_directories(dir);
    io::write_labeled_csv(dir / "fit_A.csv", r.sources, r.a_hat);
    if (r.xi_hat) io::write_labeled_csv(dir / "fit_xi.csv", r.sources, *r.xi_hat);
    if (r.ci_half_width) io::write_labeled_csv(dir / "fit_ci.csv", r.sources, *r.ci_half_width);
    if (r.truth) io::write_labeled_csv(dir / "fit_truth.csv", r.sources, *r.truth);

    io::CsvTable params;
    params.header = {"param", "index", "value"};
    auto vec = [&](const char* name, const std::optional<Vector>& v) {
        if (!v) return;
        for (Eigen::Index k = 0; k < v->size(); ++k) {
            params.rows.push_back({name, std::to_string(k), io::format_double((*v)[k])});
        }
    };
    vec("sigma", r.sigma);
    if (r.tau) params.rows.push_back({"tau", "", io::format_double(*r.tau)});
    vec("rho", r.rho);
    vec("scale", r.scale);
    io::write_csv(dir / "fit_params.csv", params);

    io::CsvTable diag;
    diag.header = {"key", "value"};
    auto add = [&](const std::string& k, const std::string& v) { diag.rows.push_back({k, v}); };
    add("method", r.method);
    add("rows", std::to_string(r.a_hat.rows()));
    add("sources", std::to_string(r.a_hat.cols()));
    add("iterations", std::to_string(r.iterations));
    add("converged", r.converged ? "true" : "false");
    if (r.final_loglik) add("final_loglik", io::format_double(*r.final_loglik));
    add("flagged_rows", std::to_string(r.flagged_rows));
    add("wall_time_s", io::format_double(r.wall_time_s));
    add("data_fingerprint", r.data_fingerprint);
    if (r.errors) {
        add("mean_abs_error", io::format_double(r.errors->mean_abs));
        add("max_abs_error", io::format_double(r.errors->max_abs));
        add("total_abs_error", io::format_double(r.errors->total_abs));
    }
    io::write_csv(dir / "fit_diag.csv", diag);
}

RunReport read_report(const fs::path& dir) {
    if (!fs::exists(dir / "fit_A.csv") || !fs::exists(dir / "fit_diag.csv")) {
        throw ValidationError(dir.string() + " is not a fit report directory");
    }
    RunReport r;
    auto a = io::read_labeled_csv(dir / "fit_A.csv");
    r.sources = a.columns;
    r.a_hat = std::move(a.values);
    if (fs::exists(dir / "fit_xi.csv")) r.xi_hat = io::read_labeled_csv(dir / "fit_xi.csv", true).values;
    if (fs::exists(dir / "fit_ci.csv")) r.ci_half_width = io::read_labeled_csv(dir / "fit_ci.csv").values;
    if (fs::exists(dir / "fit_truth.csv")) r.truth = io::read_labeled_csv(dir / "fit_truth.csv").values;

    const auto diag_path = dir / "fit_diag.csv";
    const auto diag = io::read_csv(diag_path);
    std::map<std::string, std::string> kv;
    for (std::size_t i = 0; i < diag.rows.size(); ++i) {
        if (diag.rows[i].size() != 2) {
            throw ValidationError(diag_path.string() + ":" + std::to_string(diag.line_numbers[i]) +
                                  ": expected key,value");
        }
        kv[diag.rows[i][0]] = diag.rows[i][1];
    }
    auto need = [&](const std::string& k) -> const std::string& {
        const auto it = kv.find(k);
        if (it == kv.end()) throw ValidationError(diag_path.string() + ": missing '" + k + "'");
        return it->second;
    };
    auto num = [&](const std::string& k) { return io::parse_double(need(k), diag_path.string() + " " + k); };
    r.method = need("method");
    r.iterations = static_cast<std::size_t>(num("iterations"));
    r.converged = need("converged") == "true";
    if (kv.count("final_loglik")) r.final_loglik = num("final_loglik");
    r.flagged_rows = static_cast<std::size_t>(num("flagged_rows"));
    r.wall_time_s = num("wall_time_s");
    r.data_fingerprint = need("data_fingerprint");
    if (kv.count("mean_abs_error")) {
        r.errors = RunReport::Errors{num("mean_abs_error"), num("max_abs_error"), num("total_abs_error")};
    }

    const auto params_path = dir / "fit_params.csv";
    if (fs::exists(params_path)) {
        const auto params = io::read_csv(params_path);
        std::map<std::string, std::vector<double>> lists;
        for (std::size_t i = 0; i < params.rows.size(); ++i) {
            const auto& row = params.rows[i];
            const auto at = params_path.string() + ":" + std::to_string(params.line_numbers[i]);
            if (row.size() != 3) throw ValidationError(at + ": expected param,index,value");
            const double v = io::parse_double(row[2], at, true);
            if (row[0] == "tau") {
                r.tau = v;
            } else {
                lists[row[0]].push_back(v);
            }
        }
        auto to_vec = [](const std::vector<double>& v) { return Vector(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()))); };
        if (lists.count("sigma")) r.sigma = to_vec(lists["sigma"]);
        if (lists.count("rho")) r.rho = to_vec(lists["rho"]);
        if (lists.count("scale")) r.scale = to_vec(lists["scale"]);
    }
    return r;
}

}  // namespace specfit
