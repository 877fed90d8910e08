#include "specfit/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "specfit/error.hpp"
#include "specfit/numerics.hpp"
#include "specfit/parallel.hpp"

namespace specfit {

namespace {

constexpr double nan = std::numeric_limits<double>::quiet_NaN();

void check_grids(const MixtureSet& x, const SourceLibrary& lib) {
    if (!x.grid().matches(lib.grid())) {
        throw ValidationError("mixtures are on " + x.grid().describe() + " but sources are on " +
                              lib.grid().describe());
    }
}

// Columns [trim, p - trim) of the mixtures, sources and derivatives.
struct Problem {
    Matrix x;
    Matrix s;
    Matrix d;
    Vector nu;
};

Problem trimmed(const MixtureSet& x, const SourceLibrary& lib, std::size_t trim) {
    check_grids(x, lib);
    const auto p = static_cast<Eigen::Index>(lib.grid().count);
    const auto t = static_cast<Eigen::Index>(trim);
    if (p - 2 * t < 3) {
        throw ValidationError("trim of " + std::to_string(trim) + " leaves fewer than 3 of " +
                              std::to_string(p) + " samples");
    }
    const Eigen::Index w = p - 2 * t;
    return Problem{x.observations().middleCols(t, w), lib.sources().middleCols(t, w),
                   lib.derivatives().middleCols(t, w), lib.grid().abscissae().segment(t, w)};
}

Matrix ols_rows(const Matrix& x, const Matrix& s, const std::vector<std::string>& names) {
    try {
        return LeastSquares(s).solve_rows(x);
    } catch (const RankDeficient& e) {
        const std::size_t j = e.basis_index();
        const std::string name = j < names.size() ? names[j] : std::to_string(j);
        throw RankDeficient(j, "source library is rank deficient at source '" + name + "': " + e.what());
    }
}

double relative_change(const Matrix& next, const Matrix& prev) {
    const double scale = std::max(prev.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
    return (next - prev).cwiseAbs().maxCoeff() / scale;
}

Matrix ratio_guarded(const Matrix& num, const Matrix& den) {
    Matrix out(num.rows(), num.cols());
    for (Eigen::Index i = 0; i < num.rows(); ++i) {
        for (Eigen::Index j = 0; j < num.cols(); ++j) {
            out(i, j) = std::abs(den(i, j)) > weight_guard ? num(i, j) / den(i, j) : nan;
        }
    }
    return out;
}

// Augmented fit shared by the shift and scale variants: basis rows are
// grouped per source as [s_j, extra_1(s_j), extra_2(s_j), ...].
FitResult augmented_fit(const Problem& prob, const std::vector<Matrix>& extras,
                        const std::vector<std::string>& names, const std::vector<std::string>& suffixes,
                        const std::string& method) {
    const auto n = prob.s.rows();
    const auto group = static_cast<Eigen::Index>(extras.size() + 1);
    Matrix basis(n * group, prob.s.cols());
    std::vector<std::string> labels;
    for (Eigen::Index j = 0; j < n; ++j) {
        basis.row(j * group) = prob.s.row(j);
        labels.push_back(names[static_cast<std::size_t>(j)]);
        for (std::size_t e = 0; e < extras.size(); ++e) {
            basis.row(j * group + 1 + static_cast<Eigen::Index>(e)) = extras[e].row(j);
            labels.push_back(names[static_cast<std::size_t>(j)] + suffixes[e]);
        }
    }

    Matrix coef;
    try {
        coef = LeastSquares(basis).solve_rows(prob.x);
    } catch (const RankDeficient& e) {
        const auto bad = static_cast<Eigen::Index>(e.basis_index());
        // report the element it is most collinear with
        Eigen::Index partner = bad == 0 ? 1 : 0;
        double best = -1.0;
        const double nb = basis.row(bad).norm();
        for (Eigen::Index k = 0; k < basis.rows(); ++k) {
            if (k == bad) continue;
            const double denom = nb * basis.row(k).norm();
            const double c = denom > 0.0 ? std::abs(basis.row(bad).dot(basis.row(k))) / denom : 1.0;
            if (c > best) {
                best = c;
                partner = k;
            }
        }
        std::ostringstream os;
        os << method << ": augmented basis element '" << labels[static_cast<std::size_t>(bad)]
           << "' is collinear with '" << labels[static_cast<std::size_t>(partner)]
           << "' (|cos| = " << best << ")";
        throw RankDeficient(e.basis_index(), os.str());
    }

    FitResult r;
    r.method = method;
    r.a_hat.resize(prob.x.rows(), n);
    Matrix dw(prob.x.rows(), n);
    for (Eigen::Index j = 0; j < n; ++j) {
        r.a_hat.col(j) = coef.col(j * group);
        dw.col(j) = coef.col(j * group + 1);
    }
    r.deriv_weights = std::move(dw);
    return r;
}

}  // namespace

void EstimatorConfig::validate() const {
    if (!(tol > 0.0)) throw ValidationError("convergence tolerance must be positive");
    if (max_iterations < 1) throw ValidationError("max_iterations must be at least 1");
    if (taylor_order != 1 && taylor_order != 2) throw ValidationError("taylor order must be 1 or 2");
    if (!(ci_z > 0.0)) throw ValidationError("CI quantile must be positive");
}

FitResult ols_fit(const MixtureSet& x, const SourceLibrary& lib) {
    check_grids(x, lib);
    FitResult r;
    r.method = "ols";
    r.a_hat = ols_rows(x.observations(), lib.sources(), lib.names());
    return r;
}

FitResult gls_fit(const MixtureSet& x, const SourceLibrary& lib, const Matrix& q) {
    check_grids(x, lib);
    const auto p = static_cast<Eigen::Index>(lib.grid().count);
    if (q.rows() != p || q.cols() != p) {
        throw ValidationError("GLS covariance must be " + std::to_string(p) + " x " + std::to_string(p));
    }
    const SpdFactorization chol(q);
    const Matrix s_white = chol.whiten(lib.sources().transpose()).transpose();
    const Matrix x_white = chol.whiten(x.observations().transpose()).transpose();
    FitResult r;
    r.method = "gls";
    r.a_hat = ols_rows(x_white, s_white, lib.names());
    return r;
}

FitResult feasible_gls_fit(const MixtureSet& x, const SourceLibrary& lib) {
    const FitResult first = ols_fit(x, lib);
    const Matrix resid = x.observations() - first.a_hat * lib.sources();
    Vector w = resid.colwise().squaredNorm().transpose() / static_cast<double>(resid.rows());
    const double mean = w.mean();
    if (mean > 0.0) {
        w = w.cwiseMax(1e-12 * mean);
    } else {
        w.setOnes();
    }
    FitResult r = gls_fit(x, lib, Matrix(w.asDiagonal()));
    r.method = "gls";
    return r;
}

FitResult agls_fit(const MixtureSet& x, const SourceLibrary& lib, const EstimatorConfig& cfg) {
    cfg.validate();
    const Problem prob = trimmed(x, lib, cfg.trim);
    std::vector<Matrix> extras{prob.d};
    std::vector<std::string> suffixes{"'"};
    if (cfg.taylor_order == 2) {
        Matrix second(lib.size(), lib.grid().count);
        for (Eigen::Index j = 0; j < second.rows(); ++j) {
            second.row(j) = derivative(Vector(lib.derivatives().row(j).transpose()), lib.grid().step).transpose();
        }
        extras.push_back(second.middleCols(static_cast<Eigen::Index>(cfg.trim), prob.s.cols()));
        suffixes.push_back("''");
    }
    FitResult r = augmented_fit(prob, extras, lib.names(), suffixes, "agls");
    r.xi_hat = ratio_guarded(*r.deriv_weights, r.a_hat);
    return r;
}

FitResult agls_scale_fit(const MixtureSet& x, const SourceLibrary& lib, const EstimatorConfig& cfg) {
    cfg.validate();
    const Problem prob = trimmed(x, lib, cfg.trim);
    // d/d(delta) s(nu + delta nu) = nu s'(nu)
    const Matrix weighted = prob.d * prob.nu.asDiagonal();
    FitResult r = augmented_fit(prob, {weighted}, lib.names(), {"*nu'"}, "agls-scale");

    const Matrix delta = ratio_guarded(*r.deriv_weights, r.a_hat);
    Vector scale(delta.cols());
    for (Eigen::Index j = 0; j < delta.cols(); ++j) {
        std::vector<double> v;
        for (Eigen::Index i = 0; i < delta.rows(); ++i) {
            if (!std::isnan(delta(i, j))) v.push_back(1.0 + delta(i, j));
        }
        if (v.empty()) {
            scale[j] = nan;
            continue;
        }
        std::sort(v.begin(), v.end());
        const std::size_t h = v.size() / 2;
        scale[j] = v.size() % 2 == 1 ? v[h] : 0.5 * (v[h - 1] + v[h]);
    }
    r.scale_hat = std::move(scale);
    return r;
}

ShiftEstimate estimate_shifts(const Matrix& x, const Matrix& a, const Matrix& s, const Matrix& derivs) {
    if (a.rows() != x.rows() || a.cols() != s.rows() || s.cols() != x.cols() ||
        derivs.rows() != s.rows() || derivs.cols() != s.cols()) {
        throw ValidationError("shift estimation inputs have inconsistent shapes");
    }
    const Matrix resid = x - a * s;
    ShiftEstimate out{Matrix::Zero(x.rows(), s.rows()), {}};
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        std::vector<Eigen::Index> active;
        for (Eigen::Index k = 0; k < s.rows(); ++k) {
            if (std::abs(a(i, k)) > weight_guard) active.push_back(k);
        }
        if (active.empty()) continue;
        Matrix gamma(static_cast<Eigen::Index>(active.size()), s.cols());
        for (std::size_t c = 0; c < active.size(); ++c) {
            gamma.row(static_cast<Eigen::Index>(c)) = a(i, active[c]) * derivs.row(active[c]);
        }
        try {
            const Vector xi = LeastSquares(gamma).solve(resid.row(i).transpose());
            for (std::size_t c = 0; c < active.size(); ++c) {
                out.xi(i, active[c]) = xi[static_cast<Eigen::Index>(c)];
            }
        } catch (const RankDeficient&) {
            out.flagged_rows.push_back(static_cast<std::size_t>(i));
        }
    }
    return out;
}

ShiftEstimate estimate_shifts(const MixtureSet& x, const Matrix& a, const SourceLibrary& lib) {
    check_grids(x, lib);
    return estimate_shifts(x.observations(), a, lib.sources(), lib.derivatives());
}

double ar1_regress(const Vector& xi) {
    if (xi.size() < 3) throw ValidationError("AR(1) regression needs at least 3 shifts");
    const Eigen::Index m = xi.size();
    const double num = xi.tail(m - 1).dot(xi.head(m - 1));
    const double den = xi.head(m - 1).squaredNorm();
    if (!(den > 1e-12)) return 0.0;
    return std::clamp(num / den, -0.99, 0.99);
}

MleIterate agmle_iterate(const Matrix& x, const Matrix& s, const Matrix& derivs, const Matrix& a,
                         bool ar1, const EstimatorConfig& cfg) {
    MleIterate it;
    it.shifts = estimate_shifts(x, a, s, derivs);
    const Matrix& xi = it.shifts.xi;
    const auto m = static_cast<double>(x.rows());
    it.sigma = (xi.colwise().squaredNorm() / m).cwiseSqrt().transpose();
    const Matrix resid = x - a * s - xi.cwiseProduct(a) * derivs;
    it.tau = std::sqrt(resid.squaredNorm() / (m * static_cast<double>(x.cols())));

    if (ar1) {
        if (cfg.rho_override) {
            if (cfg.rho_override->size() != s.rows()) throw ValidationError("rho override needs one value per source");
            it.rho = *cfg.rho_override;
        } else {
            Vector rho(s.rows());
            for (Eigen::Index k = 0; k < s.rows(); ++k) rho[k] = ar1_regress(xi.col(k));
            it.rho = std::move(rho);
        }
    }
    const CovarianceModel cov = ar1 ? CovarianceModel::ar1(a, derivs, it.sigma, it.tau, *it.rho)
                                    : CovarianceModel::hetero(a, derivs, it.sigma, it.tau);
    auto sol = cov.gls(x, s, cfg.threads);
    it.a_next = std::move(sol.a);
    it.variance = std::move(sol.variance);
    return it;
}

double loglik(const Matrix& a, const Vector& sigma, double tau, const std::optional<Vector>& rho,
              const Matrix& x, const Matrix& s, const Matrix& derivs) {
    const CovarianceModel cov = rho ? CovarianceModel::ar1(a, derivs, sigma, tau, *rho)
                                    : CovarianceModel::hetero(a, derivs, sigma, tau);
    const Matrix resid = x - a * s;
    const auto mp = static_cast<double>(x.size());
    return -0.5 * cov.log_det() - 0.5 * cov.quad_form(resid) - 0.5 * mp * std::log(2.0 * std::numbers::pi);
}

double loglik(const Matrix& a, const Vector& sigma, double tau, const std::optional<Vector>& rho,
              const MixtureSet& x, const SourceLibrary& lib) {
    check_grids(x, lib);
    if (a.rows() != x.observations().rows() || static_cast<std::size_t>(a.cols()) != lib.size()) {
        throw ValidationError("mixing matrix shape does not match mixtures and sources");
    }
    return loglik(a, sigma, tau, rho, x.observations(), lib.sources(), lib.derivatives());
}

namespace {

FitResult agmle(const MixtureSet& x, const SourceLibrary& lib, const EstimatorConfig& cfg, bool ar1) {
    cfg.validate();
    const Problem prob = trimmed(x, lib, cfg.trim);
    Matrix a = ols_rows(prob.x, prob.s, lib.names());

    struct Candidate {
        Matrix a;
        MleIterate step;
        double loglik;
    };
    std::optional<Candidate> best;
    std::optional<MleIterate> last;
    bool converged = false;
    std::size_t iterations = 0;
    while (iterations < cfg.max_iterations) {
        ++iterations;
        MleIterate step = agmle_iterate(prob.x, prob.s, prob.d, a, ar1, cfg);
        const double change = relative_change(step.a_next, a);
        a = step.a_next;
        if (change < cfg.tol) {
            converged = true;
            last = std::move(step);
            break;
        }
        const double ll = loglik(a, step.sigma, step.tau, step.rho, prob.x, prob.s, prob.d);
        if (!best || ll > best->loglik) best = Candidate{a, step, ll};
        last = std::move(step);
    }
    if (!converged && best) {
        a = best->a;
        last = best->step;
    }

    FitResult r;
    r.method = ar1 ? "agmle-ar1" : "agmle-hetero";
    r.a_hat = a;
    r.xi_hat = last->shifts.xi;
    r.flagged_rows = last->shifts.flagged_rows;
    r.sigma_hat = last->sigma;
    r.tau_hat = last->tau;
    r.rho_hat = last->rho;
    r.ci_half_width = (cfg.ci_z * last->variance.cwiseMax(0.0).cwiseSqrt()).eval();
    r.iterations = iterations;
    r.converged = converged;
    r.final_loglik = loglik(a, last->sigma, last->tau, last->rho, prob.x, prob.s, prob.d);
    return r;
}

}  // namespace

FitResult agmle_hetero(const MixtureSet& x, const SourceLibrary& lib, const EstimatorConfig& cfg) {
    return agmle(x, lib, cfg, false);
}

FitResult agmle_ar1(const MixtureSet& x, const SourceLibrary& lib, const EstimatorConfig& cfg) {
    return agmle(x, lib, cfg, true);
}

}  // namespace specfit
