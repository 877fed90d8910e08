#include "specfit/grid.hpp"

#include <cmath>
#include <sstream>

#include "specfit/error.hpp"

namespace specfit {

namespace {

bool all_finite(const Eigen::Ref<const Matrix>& m) {
    return m.allFinite();
}

bool close_rel(double a, double b, double rel) {
    return std::abs(a - b) <= rel * std::max({std::abs(a), std::abs(b), 1e-300});
}

const Grid& common_grid(const std::vector<Spectrum>& sources) {
    if (sources.empty()) throw ValidationError("source library is empty");
    const Grid& grid = sources.front().grid();
    for (std::size_t j = 1; j < sources.size(); ++j) {
        if (!sources[j].grid().matches(grid)) {
            throw ValidationError("source " + std::to_string(j) + " is on " +
                                  sources[j].grid().describe() + ", expected " + grid.describe());
        }
    }
    return grid;
}

Matrix stack_rows(const std::vector<Spectrum>& sources) {
    if (sources.empty()) throw ValidationError("source library is empty");
    Matrix m(static_cast<Eigen::Index>(sources.size()), sources.front().values().size());
    for (std::size_t j = 0; j < sources.size(); ++j) {
        m.row(static_cast<Eigen::Index>(j)) = sources[j].values().transpose();
    }
    return m;
}

}  // namespace

Grid::Grid(double start_, double step_, std::size_t count_)
    : start(start_), step(step_), count(count_) {
    if (!std::isfinite(start) || !std::isfinite(step) || !(step > 0.0)) {
        throw ValidationError("grid step must be finite and positive");
    }
    if (count < 3) {
        throw ValidationError("grid needs at least 3 points, got " + std::to_string(count));
    }
}

Vector Grid::abscissae() const {
    Vector nu(static_cast<Eigen::Index>(count));
    for (std::size_t j = 0; j < count; ++j) nu[static_cast<Eigen::Index>(j)] = at(j);
    return nu;
}

bool Grid::matches(const Grid& other) const {
    if (count != other.count) return false;
    if (!close_rel(step, other.step, 1e-9)) return false;
    // start may be 0; compare in units of step
    return std::abs(start - other.start) <= 1e-9 * std::max(std::abs(start), step);
}

std::string Grid::describe() const {
    std::ostringstream os;
    os.precision(12);
    os << "grid(start=" << start << ", step=" << step << ", count=" << count << ")";
    return os.str();
}

Spectrum::Spectrum(Grid grid, Vector values) : grid_(grid), values_(std::move(values)) {
    if (static_cast<std::size_t>(values_.size()) != grid_.count) {
        throw ValidationError("spectrum has " + std::to_string(values_.size()) + " values for " +
                              grid_.describe());
    }
    if (!all_finite(values_)) throw ValidationError("spectrum contains non-finite values");
}

SourceLibrary::SourceLibrary(const std::vector<Spectrum>& sources, std::vector<std::string> names)
    : SourceLibrary(common_grid(sources), stack_rows(sources), std::move(names)) {}

SourceLibrary::SourceLibrary(Grid grid, Matrix sources, std::vector<std::string> names)
    : grid_(grid), sources_(std::move(sources)), names_(std::move(names)) {
    if (sources_.rows() == 0) throw ValidationError("source library is empty");
    if (static_cast<std::size_t>(sources_.cols()) != grid_.count) {
        throw ValidationError("source matrix has " + std::to_string(sources_.cols()) +
                              " columns for " + grid_.describe());
    }
    if (!all_finite(sources_)) throw ValidationError("source spectra contain non-finite values");
    if (names_.empty()) {
        for (Eigen::Index j = 0; j < sources_.rows(); ++j) names_.push_back("s" + std::to_string(j + 1));
    }
    if (names_.size() != static_cast<std::size_t>(sources_.rows())) {
        throw ValidationError("source name count does not match source count");
    }
    derivatives_.resize(sources_.rows(), sources_.cols());
    for (Eigen::Index j = 0; j < sources_.rows(); ++j) {
        derivatives_.row(j) = specfit::derivative(Vector(sources_.row(j).transpose()), grid_.step).transpose();
    }
}

Spectrum SourceLibrary::source(std::size_t j) const {
    return Spectrum(grid_, sources_.row(static_cast<Eigen::Index>(j)).transpose());
}

Spectrum SourceLibrary::derivative(std::size_t j) const {
    return Spectrum(grid_, derivatives_.row(static_cast<Eigen::Index>(j)).transpose());
}

MixtureSet::MixtureSet(Grid grid, Matrix observations) : grid_(grid), x_(std::move(observations)) {
    if (static_cast<std::size_t>(x_.cols()) != grid_.count) {
        throw ValidationError("mixture matrix has " + std::to_string(x_.cols()) + " columns for " +
                              grid_.describe());
    }
    if (x_.rows() == 0) throw ValidationError("mixture set is empty");
    if (!all_finite(x_)) throw ValidationError("mixtures contain non-finite values");
}

MixtureSet MixtureSet::slice(std::size_t first, std::size_t count) const {
    if (first + count > rows() || count == 0) throw ValidationError("row slice out of range");
    return MixtureSet(grid_, x_.middleRows(static_cast<Eigen::Index>(first), static_cast<Eigen::Index>(count)));
}

Vector derivative(const Vector& v, double step) {
    const Eigen::Index p = v.size();
    Vector d(p);
    d[0] = (v[1] - v[0]) / step;
    for (Eigen::Index j = 1; j + 1 < p; ++j) d[j] = (v[j + 1] - v[j - 1]) / (2.0 * step);
    d[p - 1] = (v[p - 1] - v[p - 2]) / step;
    return d;
}

Spectrum derivative(const Spectrum& s) {
    return Spectrum(s.grid(), derivative(s.values(), s.grid().step));
}

Vector resample_affine(const Grid& grid, const Vector& values, double v, double xi) {
    const auto p = static_cast<Eigen::Index>(grid.count);
    const double offset = (grid.start * (v - 1.0) + xi) / grid.step;
    const auto last = static_cast<double>(p - 1);
    Vector out(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        // fractional index of v * nu_j + xi; exact j when v == 1 and xi == 0
        const double t = static_cast<double>(j) * v + offset;
        if (t <= 0.0) {
            out[j] = values[0];
        } else if (t >= last) {
            out[j] = values[p - 1];
        } else {
            const double base = std::floor(t);
            const auto i0 = static_cast<Eigen::Index>(base);
            const double f = t - base;
            out[j] = f == 0.0 ? values[i0] : (1.0 - f) * values[i0] + f * values[i0 + 1];
        }
    }
    return out;
}

void check_shift(const Grid& grid, double xi) {
    if (!std::isfinite(xi) || !(std::abs(xi) < grid.span() / 4.0)) {
        std::ostringstream os;
        os << "shift " << xi << " violates |xi| < span/4 = " << grid.span() / 4.0;
        throw ValidationError(os.str());
    }
}

void check_scale(double v) {
    if (!std::isfinite(v) || !(v > 0.5 && v < 2.0)) {
        std::ostringstream os;
        os << "scale " << v << " outside (0.5, 2.0)";
        throw ValidationError(os.str());
    }
}

Spectrum shift_resample(const Spectrum& s, double xi) {
    check_shift(s.grid(), xi);
    return Spectrum(s.grid(), resample_affine(s.grid(), s.values(), 1.0, xi));
}

Spectrum scale_resample(const Spectrum& s, double v) {
    check_scale(v);
    return Spectrum(s.grid(), resample_affine(s.grid(), s.values(), v, 0.0));
}

}  // namespace specfit
