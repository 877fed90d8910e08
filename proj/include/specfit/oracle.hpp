#pragma once

#include <cstddef>
#include <optional>

#include "specfit/estimators.hpp"
#include "specfit/grid.hpp"

namespace specfit {

// Exhaustive search over per-row shift (and optionally scale) tuples with an
// inner least-squares solve for the weights.
struct OracleConfig {
    double xi_max = 3.0;
    double xi_step = 0.25;
    // Scale candidates lo, lo + step, ..., hi for every source when set.
    std::optional<double> scale_lo;
    std::optional<double> scale_hi;
    std::optional<double> scale_step;
    std::size_t threads = 0;

    // Combinations per row allowed by the guard n * (candidates)^n <= 1e6.
    static constexpr double max_combinations = 1e6;
    static constexpr std::size_t max_sources = 3;

    void validate(std::size_t n_sources) const;
    std::vector<double> shift_candidates() const;
    std::vector<double> scale_candidates() const;
};

FitResult oracle_fit(const MixtureSet& x, const SourceLibrary& lib, const OracleConfig& cfg);

}  // namespace specfit
