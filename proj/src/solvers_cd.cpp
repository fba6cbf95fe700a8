#include "solver_common.hpp"

#include <cmath>
#include <numeric>

namespace ipscale {

using detail::Tracker;

Scalar ips_coordinate_update(Scalar beta_j, Scalar b, Scalar a, Scalar clamp, bool& clamped)
{
    if (!(b > 0)) {
        clamped = true;
        return -clamp;
    }
    if (!(a > 0)) {
        clamped = true;
        return clamp;
    }
    return detail::clamp_coordinate(beta_j + std::log(b / a), clamp, clamped);
}

Scalar l1_threshold_update(Scalar beta_j, Scalar b, Scalar a, Scalar lambda, Scalar clamp, bool& clamped)
{
    if (!(a > 0)) {
        // Column carries no fitted mass; only the data side can move it.
        if (b > lambda) {
            clamped = true;
            return clamp;
        }
        return 0;
    }
    const Scalar delta = b - a * std::exp(-beta_j);
    if (std::abs(delta) <= lambda) return 0;
    const Scalar num = b - lambda * (delta > 0 ? 1.0 : -1.0);
    if (!(num > 0)) {
        clamped = true;
        return -clamp;
    }
    return detail::clamp_coordinate(beta_j + std::log(num / a), clamp, clamped);
}

namespace {

/// mu_i *= exp(d) on the support of column j.
void scale_column(const DesignMatrix& x, Index j, Scalar d, Vector& mu)
{
    if (d == 0) return;
    if (x.is_sparse()) {
        const Scalar f = std::exp(d);
        for (Index i : x.column_support(j)) mu[i] *= f;
    } else {
        x.for_each_in_column(j, [&](Index i, Scalar v) { mu[i] *= std::exp(d * v); });
    }
}

double column_work(const DesignMatrix& x)
{
    // each coordinate reads its column twice (inner product, rescale)
    return 2.0 * static_cast<double>(x.nonzeros());
}

FitResult cd_loop(const ProblemInstance& inst, const SolverConfig& cfg, const SweepOrder& order, Scalar lambda,
                  Variant variant)
{
    detail::require_binary(inst, to_string(variant).c_str());
    if (lambda > 0) require_intercept(inst);
    const DesignMatrix& x = inst.design();
    const Vector& s = inst.suff_stats();
    const Index p = inst.cols();
    const bool penalized = variant == Variant::L1_IPS;

    Tracker tr(inst, cfg);
    Coefficients c = make_coefficients(inst, detail::initial_beta(inst, cfg));

    auto objective = [&] {
        Scalar v = neg_log_likelihood(inst, c);
        if (penalized && lambda > 0) v += lambda * c.beta.tail(p - 1).lpNorm<1>();
        return v;
    };
    auto grad_measure = [&] {
        return penalized ? l1_kkt_residual(inst, c, lambda) : detail::inf_norm(gradient(inst, c));
    };

    bool stop = tr.start(objective(), grad_measure(), c.beta);
    Index t = 0;
    while (!stop) {
        ++t;
        resync(inst, c);
        bool clamped = false;
        for (Index j : order(p)) {
            const Scalar a = x.dot_column(j, c.mu);
            const Scalar old = c.beta[j];
            const Scalar nb = (penalized && j > 0) ? l1_threshold_update(old, s[j], a, lambda, cfg.clamp, clamped)
                                                   : ips_coordinate_update(old, s[j], a, cfg.clamp, clamped);
            c.beta[j] = nb;
            scale_column(x, j, nb - old, c.mu);
        }
        if (clamped) tr.warn(warning::kDivergentCoordinate);
        tr.add_work(column_work(x));
        if (tr.due(t)) stop = tr.record(t, objective(), grad_measure(), c.beta);
    }
    return tr.finish(variant, c.beta, c.mu, t);
}

std::vector<Index> identity_order(Index p)
{
    std::vector<Index> v(p);
    std::iota(v.begin(), v.end(), Index(0));
    return v;
}

} // namespace

FitResult ips_fit_ordered(const ProblemInstance& inst, const SolverConfig& cfg, const SweepOrder& order)
{
    return cd_loop(inst, cfg, order, 0, Variant::IPS);
}

FitResult ips_fit(const ProblemInstance& inst, const SolverConfig& cfg)
{
    return cd_loop(inst, cfg, identity_order, 0, Variant::IPS);
}

FitResult a_ips_fit(const ProblemInstance& inst, const SolverConfig& cfg)
{
    SplitMix64 rng(cfg.seed, 0xA1);
    auto order = [&rng](Index p) { return random_permutation(p, rng); };
    return cd_loop(inst, cfg, order, 0, Variant::A_IPS);
}

FitResult l1_ips_fit(const ProblemInstance& inst, const SolverConfig& cfg)
{
    require_intercept(inst);
    return cd_loop(inst, cfg, identity_order, cfg.lambda, Variant::L1_IPS);
}

Scalar l1_kkt_residual(const ProblemInstance& inst, const Coefficients& c, Scalar lambda)
{
    const Vector g = gradient(inst, c);
    Scalar worst = g.size() ? std::abs(g[0]) : 0.0;
    for (Index j = 1; j < g.size(); ++j) {
        const Scalar b = c.beta[j];
        Scalar r;
        if (b != 0)
            r = std::abs(g[j] + lambda * (b > 0 ? 1.0 : -1.0));
        else
            r = std::max(std::abs(g[j]) - lambda, Scalar(0));
        worst = std::max(worst, r);
    }
    return worst;
}

FitResult x2_ips_fit(const ProblemInstance& inst, const SolverConfig& cfg)
{
    detail::require_binary(inst, "x2-ips");
    const DesignMatrix& x = inst.design();
    const Vector& n = inst.counts();
    const Index p = inst.cols();

    Tracker tr(inst, cfg);
    Coefficients c = make_coefficients(inst, detail::initial_beta(inst, cfg));
    auto grad_inf = [&] {
        const Vector r = c.mu - n.cwiseProduct(n).cwiseQuotient(c.mu);
        return detail::inf_norm(x.transpose_times(r));
    };

    bool stop = tr.start(pearson_x2(inst, c), grad_inf(), c.beta);
    Index t = 0;
    while (!stop) {
        ++t;
        resync(inst, c);
        bool clamped = false;
        for (Index j = 0; j < p; ++j) {
            Scalar num = 0, den = 0;
            for (Index i : x.column_support(j)) {
                num += n[i] * n[i] / c.mu[i];
                den += c.mu[i];
            }
            const Scalar old = c.beta[j];
            Scalar nb;
            if (!(num > 0)) {
                clamped = true;
                nb = -cfg.clamp;
            } else {
                nb = detail::clamp_coordinate(old + 0.5 * std::log(num / den), cfg.clamp, clamped);
            }
            c.beta[j] = nb;
            scale_column(x, j, nb - old, c.mu);
        }
        if (clamped) tr.warn(warning::kDivergentCoordinate);
        tr.add_work(column_work(x));
        if (tr.due(t)) stop = tr.record(t, pearson_x2(inst, c), grad_inf(), c.beta);
    }
    return tr.finish(Variant::X2_IPS, c.beta, c.mu, t);
}

} // namespace ipscale
