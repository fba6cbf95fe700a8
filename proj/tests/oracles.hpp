#pragma once

// Reference computations used by the tests. Nothing here calls into the
// library's solvers or model code; inputs are plain dense matrices.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace oracle {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// l(beta) = -<n, X beta> + <q, exp(X beta)>
inline double poisson_nll(const Mat& x, const Vec& n, const Vec& q, const Vec& beta)
{
    const Vec eta = x * beta;
    return -n.dot(eta) + (q.array() * eta.array().exp()).sum();
}

/// Damped Newton on the Poisson likelihood, run until the gradient is at round-off.
inline Vec newton_mle(const Mat& x, const Vec& n, const Vec& q, int max_iter = 200)
{
    Vec beta = Vec::Zero(x.cols());
    for (int it = 0; it < max_iter; ++it) {
        const Vec mu = (q.array() * (x * beta).array().exp()).matrix();
        const Vec g = x.transpose() * (mu - n);
        if (g.lpNorm<Eigen::Infinity>() <= 1e-13 * (1 + n.sum())) break;
        const Mat h = x.transpose() * mu.asDiagonal() * x;
        const Vec step = h.ldlt().solve(-g);
        double t = 1;
        const double f0 = poisson_nll(x, n, q, beta);
        while (t > 1e-12 && !(poisson_nll(x, n, q, beta + t * step) <= f0 + 1e-4 * t * g.dot(step))) t *= 0.5;
        if (t <= 1e-12) break;
        beta += t * step;
    }
    return beta;
}

/// Root of an increasing function on [lo, hi] by plain bisection.
inline double bisect(const std::function<double(double)>& f, double lo, double hi, int iters = 200)
{
    if (f(lo) > 0 || f(hi) < 0) throw std::runtime_error("bisect: no sign change");
    for (int i = 0; i < iters; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (f(mid) > 0)
            hi = mid;
        else
            lo = mid;
    }
    return 0.5 * (lo + hi);
}

/**
 * Normalized IIS iteration written out directly: nbar = n / <1,n>, mubar on the
 * simplex, one scalar equation per slope coordinate, then the renormalized
 * mean update. `xs` is the design without its intercept column.
 * Returns the slope after each of `iters` iterations.
 */
inline std::vector<Vec> literal_iis(const Mat& xs, const Vec& n, const Vec& q, Vec slope, int iters,
                                    std::vector<double>* mass_after = nullptr)
{
    const Vec nbar = n / n.sum();
    const Vec rowsum = xs.rowwise().sum();
    Vec mubar = (q.array() * (xs * slope).array().exp()).matrix();
    mubar /= mubar.sum();
    std::vector<Vec> out;
    for (int t = 0; t < iters; ++t) {
        Vec delta(xs.cols());
        for (Eigen::Index j = 0; j < xs.cols(); ++j) {
            const double lhs = nbar.dot(xs.col(j));
            auto f = [&](double d) {
                double v = 0;
                for (Eigen::Index i = 0; i < xs.rows(); ++i) v += xs(i, j) * mubar[i] * std::exp(rowsum[i] * d);
                return std::log(v) - std::log(lhs);
            };
            double lo = -1, hi = 1;
            while (f(lo) > 0) lo *= 2;
            while (f(hi) < 0) hi *= 2;
            delta[j] = bisect(f, lo, hi);
        }
        slope += delta;
        const Vec e = (xs * delta).array().exp().matrix();
        mubar = (mubar.array() * e.array()).matrix() / mubar.dot(e);
        if (mass_after) mass_after->push_back(mubar.sum());
        out.push_back(slope);
    }
    return out;
}

/// Central differences with step h_j = 1e-6 (1 + |x_j|).
inline Vec central_difference(const std::function<double(const Vec&)>& f, const Vec& x)
{
    Vec g(x.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        const double h = 1e-6 * (1 + std::abs(x[j]));
        Vec a = x, b = x;
        a[j] += h;
        b[j] -= h;
        g[j] = (f(a) - f(b)) / (2 * h);
    }
    return g;
}

/// Independence fit of a two-way table: r_i c_j / total.
inline Mat independence_table(const Mat& counts)
{
    const Vec r = counts.rowwise().sum();
    const Vec c = counts.colwise().sum().transpose();
    return r * c.transpose() / counts.sum();
}

struct LineFit {
    double slope = 0;
    double intercept = 0;
    double r2 = 0;
};

/// Least-squares line through (x, y) with its coefficient of determination.
inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y)
{
    const double m = static_cast<double>(x.size());
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
    }
    const double mx = sx / m, my = sy / m;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r2 = syy > 0 ? sxy * sxy / (sxx * syy) : 1.0;
    return f;
}

/// Closed-form column count of a reference-coded table model, by enumerating factor subsets.
inline long table_columns(const std::vector<int>& levels, int order)
{
    const int r = static_cast<int>(levels.size());
    long total = 0;
    for (unsigned mask = 0; mask < (1u << r); ++mask) {
        int size = 0;
        long prod = 1;
        for (int k = 0; k < r; ++k)
            if (mask & (1u << k)) {
                ++size;
                prod *= levels[static_cast<std::size_t>(k)] - 1;
            }
        if (size <= order) total += prod;
    }
    return total;
}

} // namespace oracle
