#include "fixtures.hpp"
#include "oracles.hpp"

#include "ipscale/model.hpp"

#include <doctest.h>

#include <cmath>

using namespace ipscale;

namespace {

Vector random_vector(SplitMix64& rng, Index n, double scale)
{
    Vector v(n);
    for (Index i = 0; i < n; ++i) v[i] = scale * (2 * rng.uniform() - 1);
    return v;
}

double rel_err(const Vector& a, const Vector& b)
{
    return (a - b).lpNorm<Eigen::Infinity>() / std::max(1.0, b.lpNorm<Eigen::Infinity>());
}

} // namespace

TEST_CASE("likelihood at simple points")
{
    Matrix x = Matrix::Ones(4, 1);
    Vector n(4);
    n << 3, 1, 4, 1;
    auto c = fixture::make_case(x, n);
    CHECK(neg_log_likelihood(c.inst, Vector::Zero(1)) == doctest::Approx(4.0).epsilon(1e-15));

    auto one = fixture::make_case(Matrix::Ones(1, 1), Vector::Constant(1, 2.0));
    const double l = neg_log_likelihood(one.inst, Vector::Constant(1, std::log(2.0)));
    CHECK(std::abs(l - (2 - 2 * std::log(2.0))) < 1e-15);
}

TEST_CASE("saturated fit is a lower bound")
{
    auto c = fixture::make_case(Matrix::Identity(5, 5), (Vector(5) << 1, 2, 3, 4, 5).finished());
    const Vector bsat = c.n.array().log().matrix();
    const double lmin = neg_log_likelihood(c.inst, bsat);
    CHECK(std::abs(lmin - (c.n.sum() - c.n.dot(bsat))) < 1e-12);
    SplitMix64 rng(3, 0);
    for (int k = 0; k < 100; ++k) CHECK(neg_log_likelihood(c.inst, random_vector(rng, 5, 3)) >= lmin);
    CHECK(gradient(c.inst, make_coefficients(c.inst, bsat)).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("overflow gives an infinite sentinel")
{
    auto c = fixture::make_case(Matrix::Ones(2, 1), Vector::Ones(2));
    CHECK(std::isinf(neg_log_likelihood(c.inst, Vector::Constant(1, 800.0))));
}

TEST_CASE("gradient matches central differences")
{
    auto c = fixture::random_nonneg(21, 40, 6);
    SplitMix64 rng(4, 0);
    for (int k = 0; k < 50; ++k) {
        const Vector b = random_vector(rng, c.x.cols(), 0.5);
        const Vector fd =
            oracle::central_difference([&](const Vector& v) { return oracle::poisson_nll(c.x, c.n, c.q, v); }, b);
        CHECK(rel_err(gradient(c.inst, make_coefficients(c.inst, b)), fd) <= 1e-6);
    }
    const Coefficients z = make_coefficients(c.inst, Vector::Zero(c.x.cols()));
    CHECK(std::abs(gradient(c.inst, z)[0] - (z.mu.sum() - c.n.sum())) < 1e-12);
}

TEST_CASE("reparametrized objective and gradient")
{
    auto c = fixture::random_general(22, 30, 4);
    const Matrix xs = c.x.rightCols(4);
    const double total = c.n.sum();
    CHECK(std::abs(reparam_objective(c.inst, Vector::Zero(4)) - total * std::log(30.0)) < 1e-10);

    const Vector g0 = reparam_gradient(c.inst, Vector::Zero(4));
    const Vector expect = -xs.transpose() * c.n + (total / 30.0) * xs.transpose() * Vector::Ones(30);
    CHECK((g0 - expect).lpNorm<Eigen::Infinity>() < 1e-10);

    SplitMix64 rng(6, 0);
    for (int k = 0; k < 20; ++k) {
        const Vector b = random_vector(rng, 4, 1.0);
        const double lval = reparam_objective(c.inst, b);
        const double b0 = optimal_intercept(c.inst, b);
        Vector full(5);
        full << b0, b;
        const double lfull = oracle::poisson_nll(c.x, c.n, c.q, full);
        CHECK(std::abs(lfull - (lval + reparam_offset(c.inst))) <= 1e-9 * std::abs(lval));
        const Coefficients cf = make_coefficients(c.inst, full);
        CHECK(std::abs(cf.mu.sum() - total) <= 1e-12 * total);
        CHECK(std::abs(gradient(c.inst, cf)[0]) <= 1e-10 * total);
        // no other intercept does better
        CHECK(oracle::poisson_nll(c.x, c.n, c.q, full + Vector::Unit(5, 0) * 1e-3) >= lfull);

        const Vector fd =
            oracle::central_difference([&](const Vector& v) { return reparam_objective(c.inst, v); }, b);
        CHECK(rel_err(reparam_gradient(c.inst, b), fd) <= 1e-6);
    }
}

TEST_CASE("reparametrized gradient ignores the scale of q")
{
    auto a = fixture::random_nonneg(23, 20, 3);
    auto b = fixture::make_case(a.x, a.n, a.q * 10);
    const Vector s = (Vector(3) << 0.3, -0.2, 0.1).finished();
    CHECK((reparam_gradient(a.inst, s) - reparam_gradient(b.inst, s)).lpNorm<Eigen::Infinity>() < 1e-10);
}

TEST_CASE("optimal intercept closed form")
{
    Matrix x(10, 2);
    x.col(0).setOnes();
    x.col(1).setZero();
    x(0, 1) = 1;
    auto c = fixture::make_case(x, Vector::Constant(10, 10.0));
    CHECK(std::abs(optimal_intercept(c.inst, Vector::Zero(1)) - std::log(10.0)) < 1e-14);
    CHECK_THROWS_AS(require_intercept(fixture::make_case(Matrix::Identity(2, 2), Vector::Ones(2)).inst), ContractError);
}

TEST_CASE("slope state stays on the simplex")
{
    auto c = fixture::random_general(24, 25, 3);
    SlopeState st = make_slope_state(c.inst, (Vector(3) << 200, -100, 50).finished());
    CHECK(std::abs(st.weights.sum() - 1) <= 1e-13);
    CHECK(std::isfinite(st.objective(c.inst)));
    scale_slope_state(st, Vector::Constant(25, 300.0));
    CHECK(std::abs(st.weights.sum() - 1) <= 1e-13);
    CHECK(std::abs(st.fitted_mean(c.inst).sum() - c.n.sum()) < 1e-9);
}

TEST_CASE("goodness of fit statistics")
{
    const Vector n = (Vector(2) << 2, 0).finished();
    const Vector mu = Vector::Ones(2);
    CHECK(std::abs(g_squared(n, mu) - 4 * std::log(2.0)) < 1e-14);
    CHECK(std::abs(pearson_x2(n, mu) - 2.0) < 1e-14);
    CHECK(g_squared(mu, mu) == 0);
    CHECK(pearson_x2(mu, mu) == 0);
    CHECK(std::isinf(g_squared(Vector::Ones(1), Vector::Zero(1))));

    SplitMix64 rng(8, 0);
    for (int k = 0; k < 100; ++k) {
        Vector a(6), b(6);
        for (Index i = 0; i < 6; ++i) {
            a[i] = static_cast<double>(rng.below(10));
            b[i] = 0.1 + rng.uniform();
        }
        if (a.sum() == 0) a[0] = 1;
        b *= a.sum() / b.sum();
        CHECK(g_squared(a, b) >= -1e-12);
    }
}

TEST_CASE("likelihood is convex along segments")
{
    auto c = fixture::random_general(25, 20, 3);
    SplitMix64 rng(10, 0);
    for (int k = 0; k < 100; ++k) {
        const Vector b1 = random_vector(rng, 4, 1), b2 = random_vector(rng, 4, 1);
        const double t = rng.uniform();
        CHECK(neg_log_likelihood(c.inst, Vector(t * b1 + (1 - t) * b2)) <=
              t * neg_log_likelihood(c.inst, b1) + (1 - t) * neg_log_likelihood(c.inst, b2) + 1e-9);
    }
}

TEST_CASE("curvature bounds")
{
    Matrix x(2, 2);
    x << 1, 1, 1, -1;
    auto c = fixture::make_case(x, Vector::Ones(2));
    const Matrix w = bohning_bound(c.inst);
    REQUIRE(w.rows() == 1);
    CHECK(std::abs(w(0, 0) - 2) < 1e-14);

    Matrix y(3, 3);
    y << 1, 1, 0, 1, 0, 1, 1, 0, 0;
    Vector n(3);
    n << 2, 2, 2;
    auto d = fixture::make_case(y, n);
    // Xs has orthonormal columns of norm one
    CHECK(std::abs(spectral_bound(d.inst) - 3) < 1e-12);

    auto e = fixture::random_nonneg(26, 30, 4);
    const Matrix wb = bohning_bound(e.inst);
    SplitMix64 rng(12, 0);
    for (int k = 0; k < 200; ++k) {
        Vector mu(30);
        for (Index i = 0; i < 30; ++i) mu[i] = rng.uniform();
        mu /= mu.sum();
        const Matrix h = reparam_hessian(e.inst, mu);
        for (int r = 0; r < 20; ++r) {
            const Vector v = random_vector(rng, 4, 1);
            CHECK(v.dot((wb - h) * v) >= -1e-9 * v.squaredNorm());
        }
    }
    CHECK(sampled_bound_gap(e.inst, wb, 50, 10, 1) >= -1e-9);
}

TEST_CASE("Bohning bound falls back when it is not a majorizer")
{
    // <1,n> = 1 < N: W = 0 here while the Hessian is not
    Matrix x(6, 2);
    x << 1, 1, 1, 0, 1, 0, 1, 0, 1, 0, 1, 0;
    Vector n = Vector::Zero(6);
    n[0] = 0.5;
    n[1] = 0.5;
    auto c = fixture::make_case(x, n);
    const Matrix w = bohning_bound(c.inst);
    const CurvatureBound b = make_curvature_bound(c.inst, CurvatureChoice::Bohning);
    CHECK(sampled_bound_gap(c.inst, w, 200, 20, 0) < -1e-9);
    CHECK(b.fell_back);
    CHECK(b.used == CurvatureChoice::Spectral);
    const CurvatureBound s = make_curvature_bound(c.inst, CurvatureChoice::Spectral);
    CHECK(s.used == CurvatureChoice::Spectral);
}

TEST_CASE("zero offsets are dropped and re-expanded")
{
    Matrix x(3, 2);
    x << 1, 1, 1, 0, 1, 1;
    const Vector q = (Vector(3) << 1, 0, 2).finished();
    const ProblemInstance inst = ProblemInstance::from_counts(DesignMatrix::from_dense(x),
                                                              (Vector(3) << 1, 0, 3).finished(), q);
    CHECK(inst.rows() == 2);
    CHECK(inst.original_rows() == 3);
    const Vector full = inst.expand((Vector(2) << 5, 6).finished());
    CHECK(full == (Vector(3) << 5, 0, 6).finished());
}

TEST_CASE("sufficient statistics only")
{
    Matrix x(2, 2);
    x << 1, 1, 1, 0;
    const ProblemInstance inst =
        ProblemInstance::from_sufficient_stats(DesignMatrix::from_dense(x), (Vector(2) << 5, 2).finished());
    CHECK(inst.total() == 5);
    CHECK_FALSE(inst.has_counts());
    CHECK_THROWS_AS(inst.counts(), ContractError);
}
