#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "specfit/error.hpp"
#include "specfit/numerics.hpp"
#include "support.hpp"

using namespace specfit;
using testing::Draw;

TEST_CASE("lstsq examples") {
    Draw draw(11);
    const Matrix s = draw.matrix(1, 30);
    const Vector c = lstsq(s, 2.0 * s.row(0).transpose());
    CHECK(c[0] == doctest::Approx(2.0).epsilon(1e-14));

    Matrix b = Matrix::Zero(2, 4);
    b(0, 0) = 1;
    b(1, 1) = 1;
    Vector y(4);
    y << 0, 0, 3, -2;
    CHECK(lstsq(b, y).cwiseAbs().maxCoeff() == 0.0);

    const Matrix basis = draw.matrix(3, 50);
    const Vector truth = draw.vector(3);
    Vector obs = basis.transpose() * truth;
    for (Eigen::Index j = 0; j < 50; ++j) obs[j] += draw.normal(0.01);
    const Vector oracle = testing::normal_equations(obs.transpose(), basis).transpose();
    const Vector got = lstsq(basis, obs);
    CHECK((got - oracle).norm() <= 1e-8 * oracle.norm());
}

TEST_CASE("lstsq names a rank-deficient basis row") {
    Draw draw(12);
    Matrix b = draw.matrix(3, 20);
    b.row(2) = 2.0 * b.row(0) - b.row(1);
    try {
        lstsq(b, draw.vector(20));
        FAIL("expected RankDeficient");
    } catch (const RankDeficient& e) {
        CHECK(e.basis_index() < 3);
    }
    CHECK_THROWS_AS(lstsq(Matrix::Zero(2, 10), Vector::Ones(10)), RankDeficient);
    CHECK_THROWS_AS(lstsq(draw.matrix(2, 10), Vector::Ones(9)), ValidationError);
}

TEST_CASE("solve_rows matches row-wise solves") {
    Draw draw(13);
    const Matrix b = draw.matrix(2, 15);
    const Matrix y = draw.matrix(4, 15);
    const LeastSquares ls(b);
    const Matrix all = ls.solve_rows(y);
    for (Eigen::Index i = 0; i < 4; ++i) CHECK(testing::max_abs(all.row(i).transpose() - ls.solve(y.row(i).transpose())) < 1e-14);
}

TEST_CASE("spd_solve examples") {
    Draw draw(14);
    const Matrix r = draw.matrix(5, 3);
    CHECK(testing::max_abs(spd_solve(Matrix::Identity(5, 5), r) - r) == 0.0);

    Vector d(5);
    d << 1, 2, 4, 0.5, 8;
    const Matrix got = spd_solve(Matrix(d.asDiagonal()), r);
    for (Eigen::Index i = 0; i < 5; ++i) CHECK(testing::max_abs(got.row(i) - r.row(i) / d[i]) < 1e-15);

    const Matrix v = draw.spd(20);
    const Matrix rhs = draw.matrix(20, 4);
    CHECK(testing::max_abs(v * spd_solve(v, rhs) - rhs) <= 1e-8);
}

TEST_CASE("spd_solve rejects asymmetric and indefinite input") {
    Matrix v = Matrix::Identity(3, 3);
    v(0, 1) = 0.5;
    CHECK_THROWS_AS(spd_solve(v, Matrix::Ones(3, 1)), ValidationError);
    Matrix indefinite = Matrix::Identity(3, 3);
    indefinite(2, 2) = -1.0;
    CHECK_THROWS_AS(spd_solve(indefinite, Matrix::Ones(3, 1)), NotPositiveDefinite);
}

TEST_CASE("log_det_spd examples") {
    CHECK(log_det_spd(Matrix::Identity(4, 4)) == 0.0);
    CHECK(log_det_spd(2.0 * Matrix::Identity(2, 2)) == doctest::Approx(2.0 * std::log(2.0)));
    Draw draw(15);
    const Matrix v = draw.spd(10);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(v);
    double oracle = 0.0;
    for (Eigen::Index k = 0; k < 10; ++k) oracle += std::log(eig.eigenvalues()[k]);
    CHECK(std::abs(log_det_spd(v) - oracle) <= 1e-8 * std::abs(oracle));
}

TEST_CASE("factorization reconstructs V") {
    Draw draw(16);
    const Matrix v = draw.spd(12);
    const SpdFactorization f(v);
    const Matrix l = f.factor();
    CHECK(testing::max_abs(l * l.transpose() - v) <= 1e-8 * testing::max_abs(v));
    const Vector r = draw.vector(12);
    const Matrix w = f.whiten(r);
    CHECK(w.squaredNorm() == doctest::Approx(r.dot(v.ldlt().solve(r))).epsilon(1e-12));
}

TEST_CASE("ridge schedule regularizes a singular covariance") {
    CHECK(ridge_base(12.0, 4) == doctest::Approx(3e-10));
    CHECK(ridge_base(0.0, 4) == 1e-10);
    Draw draw(17);
    const Vector u = draw.vector(6);
    const Matrix singular = u * u.transpose();
    const SpdFactorization f = factor_spd_regularized(singular);
    CHECK(f.ridge() > 0.0);
    CHECK(f.ridge() <= ridge_base(singular.trace(), 6) * 1e4 * (1 + 1e-12));
    CHECK(factor_spd_regularized(Matrix::Identity(3, 3)).ridge() == 0.0);
    Matrix negative = -Matrix::Identity(3, 3);
    CHECK_THROWS_AS(factor_spd_regularized(negative), NotPositiveDefinite);
}

TEST_CASE("low-rank SPD agrees with its dense form") {
    Draw draw(18);
    const Matrix u = draw.matrix(15, 3);
    const LowRankSpd v(0.3, u);
    const Matrix dense = 0.3 * Matrix::Identity(15, 15) + u * u.transpose();
    CHECK(testing::max_abs(v.dense() - dense) < 1e-14);
    const Matrix r = draw.matrix(15, 2);
    CHECK(testing::max_abs(v.solve(r) - dense.ldlt().solve(r)) < 1e-10);
    const Vector y = draw.vector(15);
    CHECK(v.quad_form(y) == doctest::Approx(y.dot(dense.ldlt().solve(y))).epsilon(1e-12));
    CHECK(v.log_det() == doctest::Approx(log_det_spd(dense)).epsilon(1e-12));
}

TEST_CASE("low-rank SPD with zero lambda and more columns than rows") {
    Draw draw(19);
    const Matrix u = draw.matrix(4, 6);
    const LowRankSpd v(0.0, u);
    const Matrix dense = u * u.transpose();
    CHECK(v.ridge() > 0.0);
    CHECK(v.log_det() == doctest::Approx(log_det_spd(dense)).epsilon(1e-6));
    const LowRankSpd thin(0.0, draw.matrix(5, 2));
    CHECK(thin.ridge() > 0.0);
}
