#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include <unistd.h>

#include "specfit/grid.hpp"

namespace testing {

using specfit::Grid;
using specfit::Matrix;
using specfit::Vector;

// Test-side generator, deliberately independent of specfit::Rng.
class Draw {
public:
    explicit Draw(std::uint64_t seed) : gen_(seed) {}
    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen_); }
    double normal(double sd = 1.0) { return std::normal_distribution<double>(0.0, sd)(gen_); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen_); }
    Matrix matrix(Eigen::Index rows, Eigen::Index cols, double lo = -1.0, double hi = 1.0) {
        Matrix m(rows, cols);
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = uniform(lo, hi);
        return m;
    }
    Vector vector(Eigen::Index size, double lo = -1.0, double hi = 1.0) { return matrix(size, 1, lo, hi); }
    Matrix spd(Eigen::Index q) {
        const Matrix m = matrix(q, q);
        return m * m.transpose() + Matrix::Identity(q, q);
    }

private:
    std::mt19937_64 gen_;
};

inline double gaussian(double nu, double c, double w, double h = 1.0) {
    return h * std::exp(-(nu - c) * (nu - c) / (2.0 * w * w));
}

// n x p matrix of smooth single-peak sources on `grid`.
inline Matrix peak_sources(const Grid& grid, const std::vector<double>& centers, const std::vector<double>& widths) {
    Matrix s(static_cast<Eigen::Index>(centers.size()), static_cast<Eigen::Index>(grid.count));
    for (std::size_t k = 0; k < centers.size(); ++k)
        for (std::size_t j = 0; j < grid.count; ++j)
            s(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = gaussian(grid.at(j), centers[k], widths[k]);
    return s;
}

// Independent central/one-sided difference, written without the library.
inline Vector finite_difference(const Vector& v, double h) {
    const Eigen::Index p = v.size();
    Vector d(p);
    d[0] = (v[1] - v[0]) / h;
    d[p - 1] = (v[p - 1] - v[p - 2]) / h;
    for (Eigen::Index j = 1; j + 1 < p; ++j) d[j] = (v[j + 1] - v[j - 1]) / (2.0 * h);
    return d;
}

// Explicit normal-equation solution X S^T (S S^T)^{-1}.
inline Matrix normal_equations(const Matrix& x, const Matrix& s) {
    return x * s.transpose() * (s * s.transpose()).inverse();
}

inline double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace testing

namespace testing {

// Entry-by-entry covariance of vec(X), row-major: index i * p + j.
// Cov = sum_k a_ik a_i'k d_kj d_kj' sigma_k^2 c_k rho_k^|i-i'| + tau^2 [same entry],
// c_k = 1 / (1 - rho_k^2), or the independent case when rho is empty.
inline Matrix covariance_oracle(const Matrix& a, const Matrix& d, const Vector& sigma, double tau,
                                const Vector& rho = Vector()) {
    const Eigen::Index m = a.rows(), n = a.cols(), p = d.cols();
    Matrix v = Matrix::Zero(m * p, m * p);
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index i2 = 0; i2 < m; ++i2)
            for (Eigen::Index j = 0; j < p; ++j)
                for (Eigen::Index j2 = 0; j2 < p; ++j2) {
                    double c = 0.0;
                    for (Eigen::Index k = 0; k < n; ++k) {
                        double coupling;
                        if (rho.size() == 0) {
                            coupling = i == i2 ? 1.0 : 0.0;
                        } else {
                            coupling = std::pow(rho[k], static_cast<double>(std::abs(i - i2))) / (1.0 - rho[k] * rho[k]);
                        }
                        c += a(i, k) * a(i2, k) * d(k, j) * d(k, j2) * sigma[k] * sigma[k] * coupling;
                    }
                    if (i == i2 && j == j2) c += tau * tau;
                    v(i * p + j, i2 * p + j2) = c;
                }
    return v;
}

inline Vector vec_rows(const Matrix& m) {
    Vector v(m.size());
    for (Eigen::Index i = 0; i < m.rows(); ++i) v.segment(i * m.cols(), m.cols()) = m.row(i).transpose();
    return v;
}

// Multivariate normal log density of r under covariance v, via an explicit
// inverse and determinant.
inline double mvn_log_density(const Vector& r, const Matrix& v) {
    const double q = static_cast<double>(r.size());
    return -0.5 * std::log(v.determinant()) - 0.5 * r.dot(v.inverse() * r) - 0.5 * q * std::log(2.0 * M_PI);
}

}  // namespace testing

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace testing {

// Fresh directory under the system temp path, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("specfit-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

}  // namespace testing
