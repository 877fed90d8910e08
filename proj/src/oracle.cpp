#include "specfit/oracle.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "specfit/error.hpp"
#include "specfit/numerics.hpp"
#include "specfit/parallel.hpp"

namespace specfit {

namespace {

std::size_t candidate_count(double half_range, double step) {
    return 2 * static_cast<std::size_t>(std::floor(half_range / step + 1e-9)) + 1;
}

// Orders candidate tuples for tie-breaking: smaller |xi| first, lexicographic,
// then negative before positive.
bool preferred(const std::vector<double>& a, const std::vector<double>& b) {
    for (std::size_t k = 0; k < a.size(); ++k) {
        if (std::abs(a[k]) != std::abs(b[k])) return std::abs(a[k]) < std::abs(b[k]);
    }
    for (std::size_t k = 0; k < a.size(); ++k) {
        if (a[k] != b[k]) return a[k] < b[k];
    }
    return false;
}

}  // namespace

void OracleConfig::validate(std::size_t n_sources) const {
    if (!(xi_step > 0.0) || !std::isfinite(xi_step)) throw ValidationError("oracle shift step must be positive");
    if (!(xi_max >= xi_step) || !std::isfinite(xi_max)) throw ValidationError("oracle shift step exceeds xi_max");
    if (n_sources > max_sources) {
        throw ValidationError("oracle supports at most " + std::to_string(max_sources) + " sources, got " +
                              std::to_string(n_sources));
    }
    const bool any_scale = scale_lo || scale_hi || scale_step;
    const bool all_scale = scale_lo && scale_hi && scale_step;
    if (any_scale && !all_scale) throw ValidationError("oracle scale search needs lo, hi and step");
    if (all_scale) {
        check_scale(*scale_lo);
        check_scale(*scale_hi);
        if (!(*scale_step > 0.0) || *scale_lo > *scale_hi) throw ValidationError("bad oracle scale range");
    }
    double per_source = static_cast<double>(candidate_count(xi_max, xi_step));
    if (all_scale) per_source *= static_cast<double>(scale_candidates().size());
    const double combos = static_cast<double>(n_sources) * std::pow(per_source, static_cast<double>(n_sources));
    if (combos > max_combinations) {
        std::ostringstream os;
        os << "oracle grid has " << combos << " combinations per row (limit " << max_combinations << ")";
        throw ValidationError(os.str());
    }
}

std::vector<double> OracleConfig::shift_candidates() const {
    const auto half = static_cast<long>(std::floor(xi_max / xi_step + 1e-9));
    std::vector<double> out;
    for (long k = -half; k <= half; ++k) out.push_back(static_cast<double>(k) * xi_step);
    return out;
}

std::vector<double> OracleConfig::scale_candidates() const {
    if (!scale_lo) return {1.0};
    std::vector<double> out;
    const auto count = static_cast<long>(std::floor((*scale_hi - *scale_lo) / *scale_step + 1e-9));
    for (long k = 0; k <= count; ++k) out.push_back(*scale_lo + static_cast<double>(k) * *scale_step);
    return out;
}

FitResult oracle_fit(const MixtureSet& x, const SourceLibrary& lib, const OracleConfig& cfg) {
    if (!x.grid().matches(lib.grid())) {
        throw ValidationError("mixtures are on " + x.grid().describe() + " but sources are on " +
                              lib.grid().describe());
    }
    const std::size_t n = lib.size();
    cfg.validate(n);
    const Grid& grid = lib.grid();
    const auto shifts = cfg.shift_candidates();
    const auto scales = cfg.scale_candidates();
    for (double xi : shifts) check_shift(grid, xi);

    // Resampled copies of every source at every (scale, shift) candidate.
    struct Variant {
        double shift;
        double scale;
    };
    std::vector<Variant> variants;
    for (double v : scales) {
        for (double xi : shifts) variants.push_back({xi, v});
    }
    const auto nv = variants.size();
    std::vector<std::vector<Vector>> resampled(n, std::vector<Vector>(nv));
    for (std::size_t j = 0; j < n; ++j) {
        const Vector src = lib.sources().row(static_cast<Eigen::Index>(j)).transpose();
        for (std::size_t c = 0; c < nv; ++c) {
            resampled[j][c] = resample_affine(grid, src, variants[c].scale, variants[c].shift);
        }
    }

    std::size_t combos = 1;
    for (std::size_t j = 0; j < n; ++j) combos *= nv;

    const auto m = static_cast<Eigen::Index>(x.rows());
    const auto ni = static_cast<Eigen::Index>(n);
    const auto p = static_cast<Eigen::Index>(grid.count);
    FitResult r;
    r.method = "oracle";
    r.a_hat = Matrix::Zero(m, ni);
    Matrix xi_hat = Matrix::Zero(m, ni);
    Matrix scale_rows = Matrix::Ones(m, ni);
    Vector objective = Vector::Constant(m, std::numeric_limits<double>::infinity());

    parallel_for(static_cast<std::size_t>(m), cfg.threads, [&](std::size_t row) {
        const auto i = static_cast<Eigen::Index>(row);
        const Vector y = x.observations().row(i).transpose();
        const double tie = 1e-12 * std::max(y.squaredNorm(), std::numeric_limits<double>::min());
        Matrix basis(ni, p);
        std::vector<std::size_t> idx(n, 0);
        std::vector<double> best_key;
        std::vector<double> key(n);
        double best_obj = std::numeric_limits<double>::infinity();
        Vector best_a;
        std::vector<std::size_t> best_idx;
        for (std::size_t combo = 0; combo < combos; ++combo) {
            std::size_t rem = combo;
            for (std::size_t j = 0; j < n; ++j) {
                idx[j] = rem % nv;
                rem /= nv;
                basis.row(static_cast<Eigen::Index>(j)) = resampled[j][idx[j]].transpose();
                key[j] = variants[idx[j]].shift;
            }
            Vector a;
            try {
                a = LeastSquares(basis).solve(y);
            } catch (const RankDeficient&) {
                continue;
            }
            const double obj = (y - basis.transpose() * a).squaredNorm();
            const bool better = obj < best_obj - tie;
            const bool tied = !better && std::abs(obj - best_obj) <= tie;
            if (better || (tied && preferred(key, best_key))) {
                best_obj = obj;
                best_key = key;
                best_a = a;
                best_idx = idx;
            }
        }
        if (best_idx.empty()) {
            throw RankDeficient(0, "oracle: every candidate basis for row " + std::to_string(row) +
                                       " is rank deficient");
        }
        objective[i] = best_obj;
        r.a_hat.row(i) = best_a.transpose();
        for (std::size_t j = 0; j < n; ++j) {
            xi_hat(i, static_cast<Eigen::Index>(j)) = variants[best_idx[j]].shift;
            scale_rows(i, static_cast<Eigen::Index>(j)) = variants[best_idx[j]].scale;
        }
    });

    r.xi_hat = std::move(xi_hat);
    r.row_objective = std::move(objective);
    if (cfg.scale_lo) {
        // Report the per-source median of the row-wise best scales.
        Vector scale(ni);
        for (Eigen::Index j = 0; j < ni; ++j) {
            std::vector<double> v(scale_rows.col(j).data(), scale_rows.col(j).data() + m);
            std::sort(v.begin(), v.end());
            const auto h = v.size() / 2;
            scale[j] = v.size() % 2 == 1 ? v[h] : 0.5 * (v[h - 1] + v[h]);
        }
        r.scale_hat = std::move(scale);
    }
    return r;
}

}  // namespace specfit
