#include "specfit/covariance.hpp"

#include <cmath>

#include "specfit/error.hpp"
#include "specfit/parallel.hpp"

namespace specfit {

namespace {

void check_params(const Matrix& a, const Matrix& derivs, const Vector& sigma, double tau) {
    if (a.cols() != derivs.rows() || sigma.size() != a.cols()) {
        throw ValidationError("covariance parameters have inconsistent source counts");
    }
    if (a.rows() == 0 || derivs.cols() == 0) throw ValidationError("empty covariance model");
    if (!a.allFinite() || !derivs.allFinite()) throw ValidationError("non-finite covariance input");
    for (Eigen::Index k = 0; k < sigma.size(); ++k) {
        if (!(sigma[k] >= 0.0) || !std::isfinite(sigma[k])) {
            throw ValidationError("sigma must be finite and non-negative");
        }
    }
    if (!(tau >= 0.0) || !std::isfinite(tau)) throw ValidationError("tau must be finite and non-negative");
}

}  // namespace

CovarianceModel CovarianceModel::hetero(const Matrix& a, const Matrix& derivs, const Vector& sigma,
                                        double tau) {
    check_params(a, derivs, sigma, tau);
    CovarianceModel cov;
    cov.kind_ = CovarianceKind::block_diagonal;
    cov.m_ = static_cast<std::size_t>(a.rows());
    cov.p_ = static_cast<std::size_t>(derivs.cols());
    cov.n_ = static_cast<std::size_t>(a.cols());
    cov.a_ = a;
    cov.derivs_ = derivs;
    cov.sigma_ = sigma;
    cov.rho_ = Vector::Zero(sigma.size());
    cov.tau_ = tau;
    cov.blocks_.reserve(cov.m_);
    const Matrix dt = derivs.transpose();
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        // column k of U_i is sigma_k a_ik s'_k
        Matrix u = dt * (sigma.array() * a.row(i).transpose().array()).matrix().asDiagonal();
        cov.blocks_.emplace_back(tau * tau, std::move(u));
    }
    return cov;
}

CovarianceModel CovarianceModel::ar1(const Matrix& a, const Matrix& derivs, const Vector& sigma,
                                     double tau, const Vector& rho) {
    check_params(a, derivs, sigma, tau);
    if (rho.size() != sigma.size()) throw ValidationError("need one rho per source");
    for (Eigen::Index k = 0; k < rho.size(); ++k) {
        if (!(std::abs(rho[k]) < 1.0)) throw ValidationError("rho must satisfy |rho| < 1");
    }
    const auto m = static_cast<std::size_t>(a.rows());
    const auto p = static_cast<std::size_t>(derivs.cols());
    if (m * p > max_joint_dimension) {
        throw ValidationError("joint covariance dimension " + std::to_string(m * p) +
                              " exceeds the limit of " + std::to_string(max_joint_dimension));
    }
    CovarianceModel cov;
    cov.kind_ = CovarianceKind::full;
    cov.m_ = m;
    cov.p_ = p;
    cov.n_ = static_cast<std::size_t>(a.cols());
    cov.a_ = a;
    cov.derivs_ = derivs;
    cov.sigma_ = sigma;
    cov.rho_ = rho;
    cov.tau_ = tau;

    const auto mi = static_cast<Eigen::Index>(m);
    const auto ni = static_cast<Eigen::Index>(cov.n_);
    for (Eigen::Index k = 0; k < ni; ++k) {
        const double r = rho[k];
        const double c = sigma[k] * sigma[k] / (1.0 - r * r);
        Matrix g;
        if (r == 0.0) {
            g = Matrix::Identity(mi, mi);
        } else {
            Matrix corr(mi, mi);
            for (Eigen::Index i = 0; i < mi; ++i) {
                for (Eigen::Index j = 0; j < mi; ++j) {
                    corr(i, j) = std::pow(r, static_cast<double>(std::abs(i - j)));
                }
            }
            Eigen::LLT<Matrix> llt(corr);
            if (llt.info() != Eigen::Success) {
                throw NotPositiveDefinite("AR(1) correlation matrix is not positive definite");
            }
            g = llt.matrixL();
        }
        g = (std::sqrt(c) * a.col(k)).asDiagonal() * g;
        cov.g_.push_back(std::move(g));
    }

    const Matrix dd = derivs * derivs.transpose();
    Matrix gram(mi * ni, mi * ni);
    for (Eigen::Index k = 0; k < ni; ++k) {
        for (Eigen::Index l = 0; l < ni; ++l) {
            gram.block(k * mi, l * mi, mi, mi) =
                dd(k, l) * cov.g_[static_cast<std::size_t>(k)].transpose() * cov.g_[static_cast<std::size_t>(l)];
        }
    }
    cov.joint_.emplace_back(tau * tau, gram, m * p);
    return cov;
}

double CovarianceModel::ridge() const {
    if (kind_ == CovarianceKind::full) return joint_.front().ridge();
    double r = 0.0;
    for (const auto& b : blocks_) r = std::max(r, b.ridge());
    return r;
}

Matrix CovarianceModel::coupling(std::size_t k) const {
    const auto& g = g_.at(k);
    return g * g.transpose();
}

Matrix CovarianceModel::dense_block(std::size_t i, std::size_t j) const {
    if (i >= m_ || j >= m_) throw ValidationError("covariance block index out of range");
    const auto pi = static_cast<Eigen::Index>(p_);
    if (kind_ == CovarianceKind::block_diagonal) {
        if (i != j) return Matrix::Zero(pi, pi);
        return blocks_[i].dense();
    }
    Matrix v = Matrix::Zero(pi, pi);
    for (std::size_t k = 0; k < n_; ++k) {
        const auto& g = g_[k];
        const double coupling_ij = g.row(static_cast<Eigen::Index>(i)).dot(g.row(static_cast<Eigen::Index>(j)));
        const auto d = derivs_.row(static_cast<Eigen::Index>(k));
        v.noalias() += coupling_ij * d.transpose() * d;
    }
    if (i == j) v.diagonal().array() += joint_.front().lambda();
    return v;
}

Matrix CovarianceModel::dense() const {
    if (dimension() > max_joint_dimension) {
        throw ValidationError("refusing to assemble a dense covariance of dimension " +
                              std::to_string(dimension()));
    }
    const auto pi = static_cast<Eigen::Index>(p_);
    const auto q = static_cast<Eigen::Index>(dimension());
    Matrix v = Matrix::Zero(q, q);
    for (std::size_t i = 0; i < m_; ++i) {
        for (std::size_t j = 0; j < m_; ++j) {
            if (kind_ == CovarianceKind::block_diagonal && i != j) continue;
            v.block(static_cast<Eigen::Index>(i) * pi, static_cast<Eigen::Index>(j) * pi, pi, pi) =
                dense_block(i, j);
        }
    }
    return v;
}

double CovarianceModel::log_det() const {
    if (kind_ == CovarianceKind::full) return joint_.front().log_det();
    double sum = 0.0;
    for (const auto& b : blocks_) sum += b.log_det();
    return sum;
}

double CovarianceModel::quad_form(const Matrix& residual) const {
    if (static_cast<std::size_t>(residual.rows()) != m_ || static_cast<std::size_t>(residual.cols()) != p_) {
        throw ValidationError("residual shape does not match covariance model");
    }
    if (kind_ == CovarianceKind::block_diagonal) {
        double sum = 0.0;
        for (std::size_t i = 0; i < m_; ++i) {
            sum += blocks_[i].quad_form(residual.row(static_cast<Eigen::Index>(i)).transpose());
        }
        return sum;
    }
    const auto mi = static_cast<Eigen::Index>(m_);
    Vector uty(mi * static_cast<Eigen::Index>(n_));
    for (std::size_t k = 0; k < n_; ++k) {
        const Vector yd = residual * derivs_.row(static_cast<Eigen::Index>(k)).transpose();
        uty.segment(static_cast<Eigen::Index>(k) * mi, mi) = g_[k].transpose() * yd;
    }
    return joint_.front().quad_form(residual.squaredNorm(), uty);
}

CovarianceModel::Gls CovarianceModel::gls(const Matrix& x, const Matrix& s, std::size_t threads) const {
    if (static_cast<std::size_t>(x.rows()) != m_ || static_cast<std::size_t>(x.cols()) != p_ ||
        static_cast<std::size_t>(s.rows()) != n_ || static_cast<std::size_t>(s.cols()) != p_) {
        throw ValidationError("GLS inputs do not match covariance model");
    }
    const auto mi = static_cast<Eigen::Index>(m_);
    const auto ni = static_cast<Eigen::Index>(n_);
    Gls out{Matrix(mi, ni), Matrix(mi, ni)};

    if (kind_ == CovarianceKind::block_diagonal) {
        const Matrix st = s.transpose();
        parallel_for(m_, threads, [&](std::size_t row) {
            const auto i = static_cast<Eigen::Index>(row);
            const Matrix vinv_st = blocks_[row].solve(st);  // p x n
            const Matrix f = s * vinv_st;                                          // S V^-1 S^T
            Eigen::LLT<Matrix> llt(f);
            if (llt.info() != Eigen::Success) {
                throw NotPositiveDefinite("S V_i^-1 S^T is singular for row " + std::to_string(i));
            }
            out.a.row(i) = llt.solve(vinv_st.transpose() * x.row(i).transpose()).transpose();
            out.variance.row(i) = llt.solve(Matrix::Identity(ni, ni)).diagonal().transpose();
        });
        return out;
    }

    // Joint system over vec(A) (row-major, index i*n + l) with Z = I_m (x) S^T.
    const auto& core = joint_.front();
    const Matrix ss = s * s.transpose();
    const Matrix ds = derivs_ * s.transpose();  // (k, l) = d_k . s_l
    const Eigen::Index q = mi * ni;

    Matrix utz = Matrix::Zero(q, q);  // rows (k, c), cols (i, l)
    for (Eigen::Index k = 0; k < ni; ++k) {
        const auto& g = g_[static_cast<std::size_t>(k)];
        for (Eigen::Index c = 0; c < mi; ++c) {
            for (Eigen::Index i = 0; i < mi; ++i) {
                const double gic = g(i, c);
                if (gic == 0.0) continue;
                for (Eigen::Index l = 0; l < ni; ++l) utz(k * mi + c, i * ni + l) = gic * ds(k, l);
            }
        }
    }
    Vector uty(q);
    for (Eigen::Index k = 0; k < ni; ++k) {
        const Vector xd = x * derivs_.row(k).transpose();
        uty.segment(k * mi, mi) = g_[static_cast<std::size_t>(k)].transpose() * xd;
    }
    Matrix f = -utz.transpose() * core.inner_solve(utz);
    for (Eigen::Index i = 0; i < mi; ++i) f.block(i * ni, i * ni, ni, ni) += ss;
    const Matrix xs = x * s.transpose();
    Vector rhs(q);
    for (Eigen::Index i = 0; i < mi; ++i) rhs.segment(i * ni, ni) = xs.row(i).transpose();
    rhs -= utz.transpose() * core.inner_solve(uty);

    Eigen::LLT<Matrix> llt(f);
    if (llt.info() != Eigen::Success) {
        throw NotPositiveDefinite("joint GLS normal matrix is singular");
    }
    const Vector vec_a = llt.solve(rhs);
    // Var(vec A) = (Z^T V^-1 Z)^-1 = lambda F^-1
    const Vector var = core.lambda() * llt.solve(Matrix::Identity(q, q)).diagonal();
    for (Eigen::Index i = 0; i < mi; ++i) {
        out.a.row(i) = vec_a.segment(i * ni, ni).transpose();
        out.variance.row(i) = var.segment(i * ni, ni).transpose();
    }
    return out;
}

namespace {

void require_nonzero(const Vector& sigma, double tau) {
    if (tau == 0.0 && (sigma.size() == 0 || sigma.cwiseAbs().maxCoeff() == 0.0)) {
        throw ValidationError("covariance needs a nonzero sigma or tau");
    }
}

Matrix checked_weights(const Matrix& a, const SourceLibrary& lib) {
    if (static_cast<std::size_t>(a.cols()) != lib.size()) {
        throw ValidationError("mixing matrix has " + std::to_string(a.cols()) + " columns for " +
                              std::to_string(lib.size()) + " sources");
    }
    return a;
}

}  // namespace

CovarianceModel build_cov_hetero(const Matrix& a, const SourceLibrary& lib, const Vector& sigma,
                                 double tau) {
    require_nonzero(sigma, tau);
    return CovarianceModel::hetero(checked_weights(a, lib), lib.derivatives(), sigma, tau);
}

CovarianceModel build_cov_ar1(const Matrix& a, const SourceLibrary& lib, const Vector& sigma,
                              double tau, const Vector& rho) {
    require_nonzero(sigma, tau);
    return CovarianceModel::ar1(checked_weights(a, lib), lib.derivatives(), sigma, tau, rho);
}

}  // namespace specfit
