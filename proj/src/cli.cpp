#include "specfit/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>

#include <CLI11.hpp>

#include "specfit/config.hpp"
#include "specfit/error.hpp"
#include "specfit/io.hpp"
#include "specfit/simulator.hpp"

namespace specfit::cli {

namespace {

// Removes every file it tracked unless released.
class OutputGuard {
public:
    void track(const fs::path& p) { files_.push_back(p); }
    void release() { files_.clear(); }
    ~OutputGuard() {
        std::error_code ec;
        for (const auto& f : files_) fs::remove(f, ec);
    }

private:
    std::vector<fs::path> files_;
};

std::string fixed(double v, int digits = 6) {
    std::ostringstream os;
    os << std::setprecision(digits) << v;
    return os.str();
}

std::string list(const std::optional<Vector>& v) {
    if (!v) return "-";
    std::string out;
    for (Eigen::Index k = 0; k < v->size(); ++k) out += (k ? " " : "") + fixed((*v)[k], 4);
    return out;
}

void print_summary(const RunReport& r, std::ostream& log) {
    log << std::left << std::setw(14) << "method" << r.method << '\n'
        << std::setw(14) << "rows" << r.a_hat.rows() << '\n'
        << std::setw(14) << "iterations" << r.iterations << (r.converged ? " (converged)" : " (not converged)")
        << '\n';
    if (r.errors) {
        log << std::setw(14) << "mean |err|" << fixed(r.errors->mean_abs) << '\n'
            << std::setw(14) << "max |err|" << fixed(r.errors->max_abs) << '\n'
            << std::setw(14) << "total |err|" << fixed(r.errors->total_abs) << '\n';
    }
    if (r.sigma) log << std::setw(14) << "sigma" << list(r.sigma) << '\n';
    if (r.tau) log << std::setw(14) << "tau" << fixed(*r.tau, 4) << '\n';
    if (r.rho) log << std::setw(14) << "rho" << list(r.rho) << '\n';
    if (r.scale) log << std::setw(14) << "scale" << list(r.scale) << '\n';
    if (r.final_loglik) log << std::setw(14) << "loglik" << fixed(*r.final_loglik, 10) << '\n';
    log << std::setw(14) << "wall time" << fixed(r.wall_time_s, 4) << " s\n";
}

}  // namespace

void cmd_simulate(const SimulateOptions& opts) {
    SimConfig cfg = load_sim_config(opts.config);
    if (opts.seed) cfg.seed = *opts.seed;
    const SourceLibrary lib = gen_sources(cfg);
    const Simulation sim = gen_mixtures(lib, cfg);

    fs::create_directories(opts.out);
    OutputGuard guard;
    auto target = [&](const char* name) {
        const fs::path p = opts.out / name;
        guard.track(p);
        return p;
    };
    io::write_sources_csv(target("sources.csv"), lib);
    io::write_derivatives_csv(target("sources_deriv.csv"), lib);
    io::write_mixtures_csv(target("mixtures.csv"), sim.mixtures);
    io::write_labeled_csv(target("truth_A.csv"), lib.names(), sim.truth.a);
    io::write_labeled_csv(target("truth_xi.csv"), lib.names(), sim.truth.xi);
    io::CsvTable scale;
    scale.header = {"source", "v"};
    for (std::size_t j = 0; j < lib.size(); ++j) {
        scale.rows.push_back({lib.names()[j], io::format_double(sim.truth.scale[static_cast<Eigen::Index>(j)])});
    }
    io::write_csv(target("truth_scale.csv"), scale);
    {
        const fs::path p = target("config.txt");
        std::ofstream out(p);
        out << serialize_sim_config(cfg);
        if (!out) throw ValidationError("failed writing " + p.string());
    }
    guard.release();
}

RunReport cmd_fit(const FitOptions& opts, std::ostream& log) {
    if (std::find(methods.begin(), methods.end(), opts.method) == methods.end()) {
        throw ValidationError("unknown method '" + opts.method + "'");
    }
    const fs::path mix_path = opts.data / "mixtures.csv";
    if (!fs::exists(mix_path)) throw ValidationError("missing " + mix_path.string());
    std::vector<fs::path> inputs{mix_path};
    std::optional<SourceLibrary> lib;
    if (opts.source_files.empty()) {
        const fs::path src_path = opts.data / "sources.csv";
        if (!fs::exists(src_path)) throw ValidationError("missing " + src_path.string());
        lib = io::read_sources_csv(src_path);
        inputs.push_back(src_path);
    } else {
        std::vector<Spectrum> spectra;
        std::vector<std::string> names;
        for (const auto& f : opts.source_files) {
            spectra.push_back(io::read_spectrum_csv(f));
            names.push_back(f.stem().string());
            inputs.push_back(f);
        }
        lib = SourceLibrary(spectra, names);
    }
    const MixtureSet x = io::read_mixtures_csv(mix_path);
    if (!x.grid().matches(lib->grid())) {
        throw ValidationError("grid mismatch: mixtures on " + x.grid().describe() + ", sources on " +
                              lib->grid().describe());
    }

    std::optional<Matrix> truth;
    const fs::path truth_path = opts.data / "truth_A.csv";
    if (fs::exists(truth_path)) {
        auto t = io::read_labeled_csv(truth_path);
        if (t.values.rows() == static_cast<Eigen::Index>(x.rows()) &&
            t.values.cols() == static_cast<Eigen::Index>(lib->size())) {
            truth = std::move(t.values);
        }
    }

    const auto start = std::chrono::steady_clock::now();
    FitResult fit;
    try {
        const auto& m = opts.method;
        if (m == "ols") {
            fit = ols_fit(x, *lib);
        } else if (m == "gls") {
            fit = feasible_gls_fit(x, *lib);
        } else if (m == "agls") {
            fit = agls_fit(x, *lib, opts.estimator);
        } else if (m == "agls-scale") {
            fit = agls_scale_fit(x, *lib, opts.estimator);
        } else if (m == "agmle-hetero") {
            fit = agmle_hetero(x, *lib, opts.estimator);
        } else if (m == "agmle-ar1") {
            fit = agmle_ar1(x, *lib, opts.estimator);
        } else {
            fit = oracle_fit(x, *lib, opts.oracle);
        }
    } catch (const RankDeficient& e) {
        throw RankDeficient(e.basis_index(), opts.method + ": " + e.what());
    } catch (const NotPositiveDefinite& e) {
        throw NotPositiveDefinite(opts.method + ": " + e.what());
    } catch (const ValidationError& e) {
        throw ValidationError(opts.method + ": " + e.what());
    }
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    const RunReport report = make_report(fit, lib->names(), io::hex(io::fingerprint(inputs)), elapsed, truth);
    const fs::path out = opts.out.empty() ? opts.data / ("fit-" + opts.method) : opts.out;
    write_report(out, report);
    print_summary(report, log);
    log << std::left << std::setw(14) << "written to" << out.string() << '\n';
    return report;
}

void cmd_compare(const std::vector<fs::path>& dirs, const fs::path& out, std::ostream& log) {
    if (dirs.size() < 2) throw ValidationError("compare needs at least two reports");
    std::vector<RunReport> reports;
    for (const auto& d : dirs) reports.push_back(read_report(d));
    const auto& first = reports.front();
    for (std::size_t r = 1; r < reports.size(); ++r) {
        const auto& other = reports[r];
        if (other.data_fingerprint != first.data_fingerprint) {
            throw ValidationError("reports " + dirs.front().string() + " and " + dirs[r].string() +
                                  " were fitted on different data (fingerprints " + first.data_fingerprint +
                                  " vs " + other.data_fingerprint + ")");
        }
        if (other.a_hat.rows() != first.a_hat.rows() || other.sources != first.sources) {
            throw ValidationError("reports " + dirs.front().string() + " and " + dirs[r].string() +
                                  " share no common rows and sources");
        }
    }

    io::CsvTable summary;
    summary.header = {"method", "rows", "mean_abs_error", "max_abs_error", "total_abs_error",
                      "iterations", "converged", "wall_time_s"};
    io::CsvTable params;
    params.header = {"method", "param", "index", "value"};
    io::CsvTable longform;
    longform.header = {"row", "method", "source", "estimate", "truth"};

    const std::optional<Matrix>* truth = nullptr;
    for (const auto& r : reports) {
        if (r.truth) {
            truth = &r.truth;
            break;
        }
    }
    for (const auto& r : reports) {
        std::optional<RunReport::Errors> err = r.errors;
        if (!err && truth) err = weight_errors(r.a_hat, **truth);
        auto num_or_nan = [](const std::optional<double>& v) { return v ? io::format_double(*v) : "nan"; };
        summary.rows.push_back({r.method, std::to_string(r.a_hat.rows()),
                                num_or_nan(err ? std::optional(err->mean_abs) : std::nullopt),
                                num_or_nan(err ? std::optional(err->max_abs) : std::nullopt),
                                num_or_nan(err ? std::optional(err->total_abs) : std::nullopt),
                                std::to_string(r.iterations), r.converged ? "true" : "false",
                                io::format_double(r.wall_time_s)});
        auto vec = [&](const char* name, const std::optional<Vector>& v) {
            if (!v) return;
            for (Eigen::Index k = 0; k < v->size(); ++k) {
                params.rows.push_back({r.method, name, std::to_string(k), io::format_double((*v)[k])});
            }
        };
        vec("sigma", r.sigma);
        if (r.tau) params.rows.push_back({r.method, "tau", "", io::format_double(*r.tau)});
        vec("rho", r.rho);
        vec("scale", r.scale);
        for (Eigen::Index i = 0; i < r.a_hat.rows(); ++i) {
            for (Eigen::Index j = 0; j < r.a_hat.cols(); ++j) {
                longform.rows.push_back({std::to_string(i), r.method, r.sources[static_cast<std::size_t>(j)],
                                         io::format_double(r.a_hat(i, j)),
                                         truth ? io::format_double((**truth)(i, j)) : "nan"});
            }
        }
    }

    fs::create_directories(out);
    OutputGuard guard;
    for (const char* name : {"comparison_summary.csv", "comparison_params.csv", "comparison_long.csv"}) {
        guard.track(out / name);
    }
    io::write_csv(out / "comparison_summary.csv", summary);
    io::write_csv(out / "comparison_params.csv", params);
    io::write_csv(out / "comparison_long.csv", longform);
    guard.release();

    log << std::left << std::setw(14) << "method" << std::setw(14) << "mean |err|" << std::setw(14)
        << "max |err|" << "iterations\n";
    for (const auto& row : summary.rows) {
        log << std::setw(14) << row[0] << std::setw(14) << row[2].substr(0, 10) << std::setw(14)
            << row[3].substr(0, 10) << row[5] << '\n';
    }
}

void cmd_report(const fs::path& dir, std::ostream& log) {
    print_summary(read_report(dir), log);
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Distortion-robust spectral mixture fitting"};
    app.require_subcommand(1);

    SimulateOptions sim;
    auto* simulate = app.add_subcommand("simulate", "generate synthetic sources and mixtures");
    simulate->add_option("--config", sim.config, "preset name or config file")->required();
    simulate->add_option("--out", sim.out, "output directory")->required();
    std::optional<std::uint64_t> seed;
    simulate->add_option("--seed", seed, "override the config seed");

    FitOptions fit;
    auto* fitcmd = app.add_subcommand("fit", "estimate mixing weights");
    fitcmd->add_option("--method", fit.method, "estimator")->required()->check(CLI::IsMember(methods));
    fitcmd->add_option("--data", fit.data, "directory with mixtures.csv and sources.csv")->required();
    fitcmd->add_option("--out", fit.out, "report directory (default <data>/fit-<method>)");
    fitcmd->add_option("--source", fit.source_files, "nu,value spectrum file, repeatable");
    fitcmd->add_option("--max-iter", fit.estimator.max_iterations, "iteration cap")->check(CLI::PositiveNumber);
    fitcmd->add_option("--tol", fit.estimator.tol, "relative convergence tolerance")->check(CLI::PositiveNumber);
    fitcmd->add_option("--taylor-order", fit.estimator.taylor_order, "1 or 2")->check(CLI::Range(1, 2));
    fitcmd->add_option("--trim", fit.estimator.trim, "samples dropped at each end");
    fitcmd->add_option("--xi-max", fit.oracle.xi_max, "oracle shift half-range");
    fitcmd->add_option("--xi-step", fit.oracle.xi_step, "oracle shift step");

    std::vector<fs::path> compare_dirs;
    fs::path compare_out;
    auto* compare = app.add_subcommand("compare", "compare fit reports on the same data");
    compare->add_option("reports", compare_dirs, "report directories")->required()->expected(2, -1);
    compare->add_option("--out", compare_out, "output directory")->required();

    fs::path report_dir;
    auto* report = app.add_subcommand("report", "summarize a fit report");
    report->add_option("dir", report_dir, "report directory")->required();

    std::string show;
    auto* presets = app.add_subcommand("presets", "list bundled simulation presets");
    presets->add_option("--show", show, "print one preset");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? ok : validation_failure;
    }

    std::size_t threads = 0;
    if (const char* env = std::getenv("SPECFIT_THREADS")) {
        try {
            threads = static_cast<std::size_t>(std::stoul(env));
        } catch (const std::exception&) {
            err << "error: SPECFIT_THREADS must be a non-negative integer\n";
            return validation_failure;
        }
    }

    try {
        if (*simulate) {
            sim.seed = seed;
            cmd_simulate(sim);
            out << "wrote simulation to " << sim.out.string() << '\n';
        } else if (*fitcmd) {
            fit.estimator.threads = threads;
            fit.oracle.threads = threads;
            cmd_fit(fit, out);
        } else if (*compare) {
            cmd_compare(compare_dirs, compare_out, out);
        } else if (*report) {
            cmd_report(report_dir, out);
        } else if (*presets) {
            if (show.empty()) {
                for (const auto& n : preset_names()) out << n << '\n';
            } else {
                out << preset_text(show);
            }
        }
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << '\n';
        return numerical_failure;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return validation_failure;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return validation_failure;
    }
    return ok;
}

}  // namespace specfit::cli
