#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace specfit {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Uniform 1-D abscissa: nu_j = start + j * step, j = 0..count-1.
struct Grid {
    double start = 0.0;
    double step = 1.0;
    std::size_t count = 0;

    Grid() = default;
    Grid(double start, double step, std::size_t count);

    double at(std::size_t j) const { return start + static_cast<double>(j) * step; }
    double span() const { return step * static_cast<double>(count - 1); }
    Vector abscissae() const;

    // Same grid up to 1e-9 relative on start and step.
    bool matches(const Grid& other) const;
    std::string describe() const;
};

class Spectrum {
public:
    Spectrum(Grid grid, Vector values);

    const Grid& grid() const { return grid_; }
    const Vector& values() const { return values_; }
    std::size_t size() const { return grid_.count; }
    double operator[](std::size_t j) const { return values_[static_cast<Eigen::Index>(j)]; }

private:
    Grid grid_;
    Vector values_;
};

// Reference spectra sharing one grid, with their first derivatives cached.
class SourceLibrary {
public:
    SourceLibrary(const std::vector<Spectrum>& sources, std::vector<std::string> names = {});
    SourceLibrary(Grid grid, Matrix sources, std::vector<std::string> names = {});

    const Grid& grid() const { return grid_; }
    std::size_t size() const { return static_cast<std::size_t>(sources_.rows()); }

    // n x p, one source per row.
    const Matrix& sources() const { return sources_; }
    const Matrix& derivatives() const { return derivatives_; }
    const std::vector<std::string>& names() const { return names_; }

    Spectrum source(std::size_t j) const;
    Spectrum derivative(std::size_t j) const;

private:
    Grid grid_;
    Matrix sources_;
    Matrix derivatives_;
    std::vector<std::string> names_;
};

// m observations on one grid, one per row.
class MixtureSet {
public:
    MixtureSet(Grid grid, Matrix observations);

    const Grid& grid() const { return grid_; }
    const Matrix& observations() const { return x_; }
    std::size_t rows() const { return static_cast<std::size_t>(x_.rows()); }

    MixtureSet slice(std::size_t first, std::size_t count) const;

private:
    Grid grid_;
    Matrix x_;
};

// Central differences inside, one-sided first-order differences at the ends.
Spectrum derivative(const Spectrum& s);
Vector derivative(const Vector& values, double step);

// s(nu + xi) by linear interpolation with edge-hold; |xi| < span / 4.
Spectrum shift_resample(const Spectrum& s, double xi);

// s(v * nu) by linear interpolation with edge-hold; v in (0.5, 2).
Spectrum scale_resample(const Spectrum& s, double v);

// s(v * nu + xi) without precondition checks; the common kernel of both
// resamplers and of the simulator's forward model.
Vector resample_affine(const Grid& grid, const Vector& values, double v, double xi);

void check_shift(const Grid& grid, double xi);
void check_scale(double v);

}  // namespace specfit
