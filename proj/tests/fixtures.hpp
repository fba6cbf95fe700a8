#pragma once

#include "ipscale/design.hpp"
#include "ipscale/model.hpp"
#include "ipscale/rng.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <filesystem>
#include <string>

#include <unistd.h>

namespace fixture {

using namespace ipscale;

/// Dense design, counts and offset alongside the instance built from them.
struct Case {
    Matrix x;
    Vector n;
    Vector q;
    ProblemInstance inst;
};

inline Case make_case(Matrix x, Vector n, Vector q = {})
{
    if (q.size() == 0) q = Vector::Ones(x.rows());
    ProblemInstance inst = ProblemInstance::from_counts(DesignMatrix::from_dense(x), n, q);
    return Case{std::move(x), std::move(n), std::move(q), std::move(inst)};
}

/// Intercept plus d Bernoulli(density) columns (none empty, none full); counts 1 + U{0..14}.
inline Case random_binary(std::uint64_t seed, Index rows, Index d, double density = 0.3)
{
    SplitMix64 rng(seed, 11);
    Matrix x(rows, d + 1);
    x.col(0).setOnes();
    for (Index j = 1; j <= d; ++j) {
        for (;;) {
            for (Index i = 0; i < rows; ++i) x(i, j) = rng.uniform() < density ? 1.0 : 0.0;
            const double s = x.col(j).sum();
            if (s > 0 && s < static_cast<double>(rows)) break;
        }
    }
    Vector n(rows);
    for (Index i = 0; i < rows; ++i) n[i] = 1.0 + static_cast<double>(rng.below(15));
    return make_case(std::move(x), std::move(n));
}

/// Intercept plus d U(0,1) columns; counts 1 + U{0..9}; q uniform in [0.5, 2].
inline Case random_nonneg(std::uint64_t seed, Index rows, Index d)
{
    SplitMix64 rng(seed, 12);
    Matrix x(rows, d + 1);
    x.col(0).setOnes();
    for (Index i = 0; i < rows; ++i)
        for (Index j = 1; j <= d; ++j) x(i, j) = rng.uniform();
    Vector n(rows), q(rows);
    for (Index i = 0; i < rows; ++i) {
        n[i] = 1.0 + static_cast<double>(rng.below(10));
        q[i] = 0.5 + 1.5 * rng.uniform();
    }
    return make_case(std::move(x), std::move(n), std::move(q));
}

/// Intercept plus d U(-1,1) columns; counts 1 + U{0..9}.
inline Case random_general(std::uint64_t seed, Index rows, Index d)
{
    SplitMix64 rng(seed, 13);
    Matrix x(rows, d + 1);
    x.col(0).setOnes();
    for (Index i = 0; i < rows; ++i)
        for (Index j = 1; j <= d; ++j) x(i, j) = 2 * rng.uniform() - 1;
    Vector n(rows);
    for (Index i = 0; i < rows; ++i) n[i] = 1.0 + static_cast<double>(rng.below(10));
    return make_case(std::move(x), std::move(n));
}

/// 2 x 2 main-effects table with counts [10, 20, 50, 20].
inline Case two_by_two()
{
    TableSchema s;
    s.factors = {{"a", 2}, {"b", 2}};
    s.order = 1;
    Vector n(4);
    n << 10, 20, 50, 20;
    return make_case(build_table_design(s).to_dense(), n);
}

/// Random 3 x 3 x 3 table under the all-two-way model.
inline Case three_way(std::uint64_t seed)
{
    TableSchema s;
    s.factors = {{"a", 3}, {"b", 3}, {"c", 3}};
    s.order = 2;
    SplitMix64 rng(seed, 14);
    Vector n(27);
    for (Index i = 0; i < 27; ++i) n[i] = 1.0 + static_cast<double>(rng.below(30));
    return make_case(build_table_design(s).to_dense(), n);
}

/// Fresh empty directory under the system temp path.
inline std::filesystem::path temp_dir(const std::string& tag)
{
    static int counter = 0;
    auto p = std::filesystem::temp_directory_path() /
             ("ipscale_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

} // namespace fixture
