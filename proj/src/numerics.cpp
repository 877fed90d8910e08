#include "specfit/numerics.hpp"

#include <cmath>
#include <sstream>

#include "specfit/error.hpp"

namespace specfit {

LeastSquares::LeastSquares(const Matrix& basis)
    : k_(static_cast<std::size_t>(basis.rows())), p_(static_cast<std::size_t>(basis.cols())) {
    if (k_ == 0) throw ValidationError("least squares basis is empty");
    if (!basis.allFinite()) throw ValidationError("least squares basis has non-finite entries");
    if (k_ > p_) {
        throw RankDeficient(p_, "basis has " + std::to_string(k_) + " rows but only " +
                                    std::to_string(p_) + " samples");
    }
    qr_.compute(basis.transpose());
    const auto diag = qr_.matrixR().diagonal().cwiseAbs();
    const double top = diag[0];
    for (Eigen::Index i = 0; i < diag.size(); ++i) {
        if (!(diag[i] > pivot_tolerance * top)) {
            const auto offending = static_cast<std::size_t>(qr_.colsPermutation().indices()[i]);
            std::ostringstream os;
            os << "basis row " << offending << " is linearly dependent on the others (pivot "
               << diag[i] << " vs max " << top << ")";
            throw RankDeficient(offending, os.str());
        }
    }
}

Vector LeastSquares::solve(const Vector& y) const {
    if (static_cast<std::size_t>(y.size()) != p_) {
        throw ValidationError("observation length " + std::to_string(y.size()) +
                              " does not match basis length " + std::to_string(p_));
    }
    return qr_.solve(y);
}

Matrix LeastSquares::solve_rows(const Matrix& y) const {
    if (static_cast<std::size_t>(y.cols()) != p_) {
        throw ValidationError("observation length " + std::to_string(y.cols()) +
                              " does not match basis length " + std::to_string(p_));
    }
    return qr_.solve(y.transpose()).transpose();
}

Vector lstsq(const Matrix& basis, const Vector& y) {
    return LeastSquares(basis).solve(y);
}

void check_symmetric(const Matrix& v) {
    if (v.rows() != v.cols()) throw ValidationError("covariance matrix is not square");
    if (!v.allFinite()) throw ValidationError("covariance matrix has non-finite entries");
    const double scale = v.cwiseAbs().maxCoeff();
    const double asym = (v - v.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-9 * scale) {
        std::ostringstream os;
        os << "covariance matrix is not symmetric (max asymmetry " << asym << ")";
        throw ValidationError(os.str());
    }
}

SpdFactorization::SpdFactorization(const Matrix& v) : SpdFactorization(v, 0.0) {}

SpdFactorization::SpdFactorization(const Matrix& v, double ridge) : ridge_(ridge) {
    check_symmetric(v);
    if (ridge == 0.0) {
        llt_.compute(v);
    } else {
        Matrix w = v;
        w.diagonal().array() += ridge;
        llt_.compute(w);
    }
    if (llt_.info() != Eigen::Success) {
        throw NotPositiveDefinite("matrix of size " + std::to_string(v.rows()) +
                                  " is not positive definite");
    }
}

Matrix SpdFactorization::whiten(const Matrix& r) const {
    return llt_.matrixL().solve(r);
}

double SpdFactorization::log_det() const {
    return 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
}

Matrix spd_solve(const Matrix& v, const Matrix& r) {
    if (r.rows() != v.rows()) throw ValidationError("right-hand side rows do not match matrix size");
    return SpdFactorization(v).solve(r);
}

double log_det_spd(const Matrix& v) {
    return SpdFactorization(v).log_det();
}

double ridge_base(double trace, std::size_t q) {
    const double mean = q == 0 ? 0.0 : trace / static_cast<double>(q);
    return mean > 0.0 ? 1e-10 * mean : 1e-10;
}

SpdFactorization factor_spd_regularized(const Matrix& v) {
    try {
        return SpdFactorization(v, 0.0);
    } catch (const NotPositiveDefinite&) {
    }
    double eps = ridge_base(v.trace(), static_cast<std::size_t>(v.rows()));
    for (int attempt = 0; attempt < ridge_attempts; ++attempt, eps *= ridge_escalation) {
        try {
            return SpdFactorization(v, eps);
        } catch (const NotPositiveDefinite&) {
        }
    }
    throw NotPositiveDefinite("covariance of size " + std::to_string(v.rows()) +
                              " stays indefinite after ridge regularization");
}

WoodburyFactor::WoodburyFactor(double lambda, const Matrix& gram, std::size_t q)
    : lambda_(lambda), q_(q) {
    if (!std::isfinite(lambda) || lambda < 0.0) {
        throw ValidationError("diagonal part of a covariance must be finite and non-negative");
    }
    const auto r = gram.rows();
    const double trace = static_cast<double>(q) * lambda + gram.trace();
    const double eps = ridge_base(trace, q);
    // lambda below eps is handled like a failed factorization.
    double ridge = 0.0;
    for (int attempt = 0; attempt <= ridge_attempts; ++attempt) {
        if (attempt > 0) ridge = attempt == 1 ? eps : ridge * ridge_escalation;
        const double l = lambda + ridge;
        if (static_cast<std::size_t>(r) < q && l < eps) continue;
        Matrix k = gram;
        k.diagonal().array() += l;
        k_.compute(k);
        if (k_.info() == Eigen::Success) {
            lambda_ = l;
            ridge_ = ridge;
            return;
        }
    }
    throw NotPositiveDefinite("low-rank covariance of size " + std::to_string(q) +
                              " stays singular after ridge regularization");
}

double WoodburyFactor::quad_form(double yty, const Vector& uty) const {
    return (yty - uty.dot(k_.solve(uty))) / lambda_;
}

double WoodburyFactor::log_det() const {
    const auto r = static_cast<double>(k_.rows());
    return (static_cast<double>(q_) - r) * std::log(lambda_) +
           2.0 * k_.matrixLLT().diagonal().array().log().sum();
}

LowRankSpd::LowRankSpd(double lambda, Matrix u)
    : u_(std::move(u)), core_(lambda, u_.transpose() * u_, static_cast<std::size_t>(u_.rows())) {}

Matrix LowRankSpd::solve(const Matrix& r) const {
    if (r.rows() != u_.rows()) throw ValidationError("right-hand side rows do not match matrix size");
    return (r - u_ * core_.inner_solve(u_.transpose() * r)) / core_.lambda();
}

double LowRankSpd::quad_form(const Vector& r) const {
    return core_.quad_form(r.squaredNorm(), u_.transpose() * r);
}

Matrix LowRankSpd::dense() const {
    Matrix v = u_ * u_.transpose();
    v.diagonal().array() += core_.lambda();
    return v;
}

}  // namespace specfit
