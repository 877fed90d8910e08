#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "specfit/covariance.hpp"
#include "specfit/grid.hpp"

namespace specfit {

struct EstimatorConfig {
    std::size_t max_iterations = 100;
    // Relative max-norm change of A_hat between iterations.
    double tol = 1e-6;
    int taylor_order = 1;
    // Samples dropped at each end before fitting.
    std::size_t trim = 2;
    // Two-sided 95% normal quantile.
    double ci_z = 1.959964;
    // Worker threads for per-row work; 0 runs inline.
    std::size_t threads = 0;
    // Pins rho_hat instead of regressing it (AR(1) estimator only).
    std::optional<Vector> rho_override;

    void validate() const;
};

// Entries of Xi_hat and scale_hat that could not be estimated are NaN.
struct FitResult {
    std::string method;
    Matrix a_hat;
    std::optional<Matrix> deriv_weights;
    std::optional<Matrix> xi_hat;
    std::optional<Vector> sigma_hat;
    std::optional<double> tau_hat;
    std::optional<Vector> rho_hat;
    std::optional<Vector> scale_hat;
    std::optional<Matrix> ci_half_width;
    std::size_t iterations = 1;
    bool converged = true;
    std::optional<double> final_loglik;
    // Rows whose shift system was rank deficient.
    std::vector<std::size_t> flagged_rows;
    // Oracle only: best objective ||x_i - sum a_ij s_j(nu + xi_ij)||^2 per row.
    std::optional<Vector> row_objective;
};

FitResult ols_fit(const MixtureSet& x, const SourceLibrary& lib);
FitResult gls_fit(const MixtureSet& x, const SourceLibrary& lib, const Matrix& q);
// Two-step GLS: Q = diag of per-sample mean squared OLS residuals across rows,
// floored at 1e-12 of their mean (identity when the residual vanishes).
FitResult feasible_gls_fit(const MixtureSet& x, const SourceLibrary& lib);
FitResult agls_fit(const MixtureSet& x, const SourceLibrary& lib, const EstimatorConfig& cfg = {});
FitResult agls_scale_fit(const MixtureSet& x, const SourceLibrary& lib,
                         const EstimatorConfig& cfg = {});

struct ShiftEstimate {
    Matrix xi;                               // m x n
    std::vector<std::size_t> flagged_rows;   // rank-deficient rows, left at zero
};

// Per row, least squares of the residual x_i - a_i S against the rows
// a_ik s'_k. Sources with |a_ik| <= 1e-8 keep a zero shift.
ShiftEstimate estimate_shifts(const MixtureSet& x, const Matrix& a, const SourceLibrary& lib);
ShiftEstimate estimate_shifts(const Matrix& x, const Matrix& a, const Matrix& s,
                              const Matrix& derivs);

// Lag-1 regression slope of a shift sequence, clamped to [-0.99, 0.99].
double ar1_regress(const Vector& xi);

// One pass of the iterative maximum-likelihood loop on already-trimmed data:
// shifts, variance parameters, covariance, then the GLS update of A.
struct MleIterate {
    Matrix a_next;
    ShiftEstimate shifts;
    Vector sigma;
    double tau = 0.0;
    std::optional<Vector> rho;  // set for the AR(1) model
    Matrix variance;            // m x n, Var of each A_hat entry
};

MleIterate agmle_iterate(const Matrix& x, const Matrix& s, const Matrix& derivs, const Matrix& a,
                         bool ar1, const EstimatorConfig& cfg);

FitResult agmle_hetero(const MixtureSet& x, const SourceLibrary& lib, const EstimatorConfig& cfg = {});
FitResult agmle_ar1(const MixtureSet& x, const SourceLibrary& lib, const EstimatorConfig& cfg = {});

// Gaussian log-likelihood of vec(X) with mean vec(A S) and the shift
// covariance; block-diagonal when rho is empty, AR(1) otherwise.
double loglik(const Matrix& a, const Vector& sigma, double tau, const std::optional<Vector>& rho,
              const MixtureSet& x, const SourceLibrary& lib);
double loglik(const Matrix& a, const Vector& sigma, double tau, const std::optional<Vector>& rho,
              const Matrix& x, const Matrix& s, const Matrix& derivs);

// Guard below which a weight is treated as zero when dividing by it.
inline constexpr double weight_guard = 1e-8;

}  // namespace specfit
