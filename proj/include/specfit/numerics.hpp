#pragma once

#include <cstddef>

#include <Eigen/Dense>

#include "specfit/grid.hpp"

namespace specfit {

// Least squares against a fixed basis, factored once by column-pivoted QR.
// The basis is k x p with one basis vector per row; solve() returns the
// coefficients c minimizing ||y - c^T B||_2.
class LeastSquares {
public:
    static constexpr double pivot_tolerance = 1e-10;

    explicit LeastSquares(const Matrix& basis);

    std::size_t size() const { return k_; }
    Vector solve(const Vector& y) const;
    // Solves every row of y (m x p) and returns the m x k coefficients.
    Matrix solve_rows(const Matrix& y) const;

private:
    std::size_t k_;
    std::size_t p_;
    Eigen::ColPivHouseholderQR<Matrix> qr_;
};

Vector lstsq(const Matrix& basis, const Vector& y);

// Cholesky factor of a symmetric positive definite matrix.
class SpdFactorization {
public:
    explicit SpdFactorization(const Matrix& v);

    std::size_t size() const { return static_cast<std::size_t>(llt_.rows()); }
    Matrix solve(const Matrix& r) const { return llt_.solve(r); }
    // L^{-1} r, so that (L^{-1} r)^T (L^{-1} r) = r^T V^{-1} r.
    Matrix whiten(const Matrix& r) const;
    double log_det() const;
    Matrix factor() const { return llt_.matrixL(); }
    // Ridge that was added to the diagonal to make the factorization succeed.
    double ridge() const { return ridge_; }

private:
    friend SpdFactorization factor_spd_regularized(const Matrix& v);
    SpdFactorization(const Matrix& v, double ridge);

    Eigen::LLT<Matrix> llt_;
    double ridge_ = 0.0;
};

Matrix spd_solve(const Matrix& v, const Matrix& r);
double log_det_spd(const Matrix& v);

// Ridge schedule for near-singular covariances: eps = 1e-10 * trace(V) / q,
// escalated by x100 at most twice more. A zero trace uses eps = 1e-10.
double ridge_base(double trace, std::size_t q);
inline constexpr double ridge_escalation = 100.0;
inline constexpr int ridge_attempts = 3;

SpdFactorization factor_spd_regularized(const Matrix& v);

void check_symmetric(const Matrix& v);

// Factor of K = lambda I_r + G for V = lambda I_q + U U^T with G = U^T U.
// Callers supply U^T y products, which lets structured U stay implicit.
class WoodburyFactor {
public:
    WoodburyFactor(double lambda, const Matrix& gram, std::size_t q);

    double lambda() const { return lambda_; }
    double ridge() const { return ridge_; }
    std::size_t dimension() const { return q_; }
    std::size_t rank() const { return static_cast<std::size_t>(k_.rows()); }

    // K^{-1} z
    Matrix inner_solve(const Matrix& z) const { return k_.solve(z); }
    // y^T V^{-1} y given y^T y and U^T y.
    double quad_form(double yty, const Vector& uty) const;
    double log_det() const;

private:
    double lambda_;
    double ridge_ = 0.0;
    std::size_t q_;
    Eigen::LLT<Matrix> k_;
};

// V = lambda I + U U^T with an explicit q x r factor U.
class LowRankSpd {
public:
    LowRankSpd(double lambda, Matrix u);

    std::size_t size() const { return static_cast<std::size_t>(u_.rows()); }
    const Matrix& u() const { return u_; }
    double lambda() const { return core_.lambda(); }
    double ridge() const { return core_.ridge(); }

    Matrix solve(const Matrix& r) const;
    double quad_form(const Vector& r) const;
    double log_det() const { return core_.log_det(); }
    // Assembled V, including any ridge.
    Matrix dense() const;

private:
    Matrix u_;
    WoodburyFactor core_;
};

}  // namespace specfit
