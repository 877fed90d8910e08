#pragma once

#include <cstddef>
#include <vector>

#include "specfit/grid.hpp"
#include "specfit/numerics.hpp"

namespace specfit {

enum class CovarianceKind { block_diagonal, full };

// Largest m * p for which an AR(1) covariance is accepted.
inline constexpr std::size_t max_joint_dimension = 20000;

// Covariance of vec(X) (row-major stacking) under shift randomness plus
// white noise:
//
//   V = tau^2 I + sum_k M_k (x) d_k d_k^T
//
// where d_k is the derivative of source k and M_k (m x m) couples the rows.
// Independent shifts give diagonal M_k = sigma_k^2 diag(a_k)^2 and therefore
// block-diagonal V; AR(1) shifts give M_k = sigma_k^2 / (1 - rho_k^2)
// diag(a_k) R_k diag(a_k) with R_k(i, j) = rho_k^|i-j|.
//
// V is never formed. Each case keeps U with V = lambda I + U U^T implicitly
// and factors the small capacitance matrix instead (per row for the
// block-diagonal case, once over all rows for AR(1)).
class CovarianceModel {
public:
    static CovarianceModel hetero(const Matrix& a, const Matrix& derivs, const Vector& sigma,
                                  double tau);
    static CovarianceModel ar1(const Matrix& a, const Matrix& derivs, const Vector& sigma,
                               double tau, const Vector& rho);

    CovarianceKind kind() const { return kind_; }
    std::size_t rows() const { return m_; }
    std::size_t points() const { return p_; }
    std::size_t dimension() const { return m_ * p_; }

    const Vector& sigma() const { return sigma_; }
    double tau() const { return tau_; }
    const Vector& rho() const { return rho_; }
    // Ridge added to tau^2 by the regularization schedule (max over blocks).
    double ridge() const;

    // V_ij, the p x p block coupling rows i and j, including any ridge.
    Matrix dense_block(std::size_t i, std::size_t j) const;
    // Full mp x mp matrix; guarded by max_joint_dimension.
    Matrix dense() const;

    double log_det() const;
    // vec(r)^T V^{-1} vec(r) for an m x p residual.
    double quad_form(const Matrix& residual) const;

    struct Gls {
        Matrix a;         // m x n
        Matrix variance;  // m x n, diagonal of Var(A_hat) per entry
    };
    // argmin_A of vec(X - A S)^T V^{-1} vec(X - A S).
    // Rows of the block-diagonal case may run on `threads` workers.
    Gls gls(const Matrix& x, const Matrix& s, std::size_t threads = 0) const;

    // Row-block factor (block-diagonal case only).
    const LowRankSpd& block(std::size_t i) const { return blocks_.at(i); }

private:
    CovarianceModel() = default;

    Matrix coupling(std::size_t k) const;  // M_k

    CovarianceKind kind_ = CovarianceKind::block_diagonal;
    std::size_t m_ = 0;
    std::size_t p_ = 0;
    std::size_t n_ = 0;
    Matrix a_;
    Matrix derivs_;  // n x p
    Vector sigma_;
    Vector rho_;
    double tau_ = 0.0;

    std::vector<LowRankSpd> blocks_;

    // AR(1): U = [I (x) d_k] G, G = blockdiag(G_k), M_k = G_k G_k^T.
    std::vector<Matrix> g_;
    std::vector<WoodburyFactor> joint_;  // zero or one element
};

CovarianceModel build_cov_hetero(const Matrix& a, const SourceLibrary& lib, const Vector& sigma,
                                 double tau);
CovarianceModel build_cov_ar1(const Matrix& a, const SourceLibrary& lib, const Vector& sigma,
                              double tau, const Vector& rho);

}  // namespace specfit
