#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "specfit/grid.hpp"

namespace specfit {

enum class PeakShape { gaussian, lorentzian };

struct PeakSpec {
    double center = 0.0;
    double width = 1.0;
    double height = 1.0;
    PeakShape shape = PeakShape::gaussian;

    double evaluate(double nu) const;
};

enum class ShiftModel { none, iid, ar1 };

struct WeightRange {
    double lo = 1.0;
    double hi = 1.0;
};

struct SimConfig {
    std::string name = "custom";
    std::size_t m_observations = 0;
    Grid grid;
    // One peak list per source; n_sources == peaks.size().
    std::vector<std::vector<PeakSpec>> peaks;
    // One range per source.
    std::vector<WeightRange> weights;
    ShiftModel shift_model = ShiftModel::none;
    std::vector<double> sigma;  // per source
    std::vector<double> rho;    // per source, ar1 only
    bool scale_enabled = false;
    double scale_lo = 1.0;
    double scale_hi = 1.0;
    double tau = 0.0;
    std::uint64_t seed = 1;

    std::size_t n_sources() const { return peaks.size(); }
    // Throws ValidationError naming the offending field.
    void validate() const;
};

struct GroundTruth {
    Matrix a;            // m x n mixing weights
    Matrix xi;           // m x n realized shifts
    Vector scale;        // n realized scales (ones when disabled)
    std::uint64_t seed = 0;
    std::size_t shift_redraws = 0;
};

// mt19937_64 with Box-Muller normals.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Uniform on (0, 1].
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double normal();

private:
    std::mt19937_64 engine_;
    std::optional<double> spare_;
};

SourceLibrary gen_sources(const SimConfig& cfg);

struct Simulation {
    MixtureSet mixtures;
    GroundTruth truth;
};

Simulation gen_mixtures(const SourceLibrary& lib, const SimConfig& cfg);

inline constexpr int max_shift_redraws = 100;

}  // namespace specfit
