#include "specfit/simulator.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "specfit/error.hpp"

namespace specfit {

double PeakSpec::evaluate(double nu) const {
    const double d = nu - center;
    if (shape == PeakShape::gaussian) return height * std::exp(-d * d / (2.0 * width * width));
    return height * width * width / (d * d + width * width);
}

double Rng::uniform() {
    // 53 random bits, shifted away from zero so log() is always defined
    return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
}

double Rng::normal() {
    if (spare_) {
        const double z = *spare_;
        spare_.reset();
        return z;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double phi = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(phi);
    return r * std::cos(phi);
}

void SimConfig::validate() const {
    auto fail = [](const std::string& msg) { throw ValidationError("sim config: " + msg); };
    const std::size_t n = n_sources();
    if (n == 0) fail("no sources");
    if (m_observations == 0) fail("m_observations must be positive");
    Grid(grid.start, grid.step, grid.count);  // re-checks grid invariants
    const double lo = grid.start;
    const double hi = grid.at(grid.count - 1);
    for (std::size_t j = 0; j < n; ++j) {
        if (peaks[j].empty()) fail("source " + std::to_string(j) + " has no peaks");
        for (const auto& pk : peaks[j]) {
            if (!(pk.center >= lo && pk.center <= hi)) fail("peak center outside grid span");
            if (!(pk.width >= 3.0 * grid.step)) fail("peak width below 3 grid steps");
            if (!(pk.height > 0.0)) fail("peak height must be positive");
        }
    }
    if (weights.size() != n) fail("need one weight range per source");
    for (const auto& w : weights) {
        if (!std::isfinite(w.lo) || !std::isfinite(w.hi) || w.lo > w.hi) fail("bad weight range");
    }
    if (shift_model != ShiftModel::none) {
        if (sigma.size() != n) fail("need one sigma per source");
        for (double s : sigma) {
            if (!(s >= 0.0) || !std::isfinite(s)) fail("sigma must be finite and >= 0");
        }
    }
    if (shift_model == ShiftModel::ar1) {
        if (rho.size() != n) fail("need one rho per source");
        for (double r : rho) {
            if (!(std::abs(r) < 1.0)) fail("rho must satisfy |rho| < 1");
        }
    }
    if (scale_enabled) {
        if (!(scale_lo > 0.5 && scale_hi < 2.0 && scale_lo <= scale_hi)) {
            fail("scale range must lie inside (0.5, 2.0)");
        }
    }
    if (!(tau >= 0.0) || !std::isfinite(tau)) fail("tau must be finite and >= 0");
}

SourceLibrary gen_sources(const SimConfig& cfg) {
    cfg.validate();
    const std::size_t n = cfg.n_sources();
    Matrix s = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cfg.grid.count));
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t c = 0; c < cfg.grid.count; ++c) {
            const double nu = cfg.grid.at(c);
            double v = 0.0;
            for (const auto& pk : cfg.peaks[j]) v += pk.evaluate(nu);
            s(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(c)) = v;
        }
    }
    return SourceLibrary(cfg.grid, std::move(s));
}

Simulation gen_mixtures(const SourceLibrary& lib, const SimConfig& cfg) {
    cfg.validate();
    if (!lib.grid().matches(cfg.grid)) {
        throw ValidationError("library " + lib.grid().describe() + " differs from config " +
                              cfg.grid.describe());
    }
    const auto n = static_cast<Eigen::Index>(cfg.n_sources());
    const auto m = static_cast<Eigen::Index>(cfg.m_observations);
    const auto p = static_cast<Eigen::Index>(cfg.grid.count);
    if (static_cast<Eigen::Index>(lib.size()) != n) {
        throw ValidationError("library has " + std::to_string(lib.size()) + " sources, config has " +
                              std::to_string(n));
    }

    Rng rng(cfg.seed);
    GroundTruth truth;
    truth.seed = cfg.seed;
    truth.a.resize(m, n);
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const auto& w = cfg.weights[static_cast<std::size_t>(j)];
            truth.a(i, j) = w.lo == w.hi ? w.lo : rng.uniform(w.lo, w.hi);
        }
    }

    truth.scale = Vector::Ones(n);
    if (cfg.scale_enabled) {
        for (Eigen::Index j = 0; j < n; ++j) truth.scale[j] = rng.uniform(cfg.scale_lo, cfg.scale_hi);
    }

    truth.xi = Matrix::Zero(m, n);
    const double limit = cfg.grid.span() / 4.0;
    if (cfg.shift_model != ShiftModel::none) {
        for (Eigen::Index k = 0; k < n; ++k) {
            const double sigma = cfg.sigma[static_cast<std::size_t>(k)];
            const double rho =
                cfg.shift_model == ShiftModel::ar1 ? cfg.rho[static_cast<std::size_t>(k)] : 0.0;
            double prev = 0.0;  // xi_{0,k}
            for (Eigen::Index i = 0; i < m; ++i) {
                double xi = 0.0;
                int attempts = 0;
                do {
                    if (attempts == max_shift_redraws) {
                        std::ostringstream os;
                        os << "shift draw for source " << k << " exceeded |xi| < " << limit << " "
                           << max_shift_redraws << " times; sigma " << sigma << " is too large for "
                           << cfg.grid.describe();
                        throw ValidationError(os.str());
                    }
                    if (attempts > 0) ++truth.shift_redraws;
                    ++attempts;
                    xi = rho * prev + sigma * rng.normal();
                } while (!(std::abs(xi) < limit));
                truth.xi(i, k) = xi;
                prev = xi;
            }
        }
    }

    Matrix x = Matrix::Zero(m, p);
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const Vector row = lib.sources().row(j).transpose();
            const bool distorted = truth.xi(i, j) != 0.0 || truth.scale[j] != 1.0;
            if (distorted) {
                x.row(i) += truth.a(i, j) *
                            resample_affine(cfg.grid, row, truth.scale[j], truth.xi(i, j)).transpose();
            } else {
                x.row(i) += truth.a(i, j) * row.transpose();
            }
        }
    }
    if (cfg.tau > 0.0) {
        for (Eigen::Index i = 0; i < m; ++i) {
            for (Eigen::Index c = 0; c < p; ++c) x(i, c) += cfg.tau * rng.normal();
        }
    }
    return Simulation{MixtureSet(cfg.grid, std::move(x)), std::move(truth)};
}

}  // namespace specfit
