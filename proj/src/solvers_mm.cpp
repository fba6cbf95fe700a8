#include "solver_common.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <limits>
#include <thread>

namespace ipscale {

using detail::Tracker;

namespace {

constexpr Scalar kInf = std::numeric_limits<Scalar>::infinity();

/// beta += delta (clamped), then mu <- mu o exp(X delta_applied).
bool apply_synchronized(const ProblemInstance& inst, Coefficients& c, const Vector& delta, Scalar clamp)
{
    bool clamped = false;
    Vector applied(delta.size());
    for (Index j = 0; j < delta.size(); ++j) {
        const Scalar nb = detail::clamp_coordinate(c.beta[j] + delta[j], clamp, clamped);
        applied[j] = nb - c.beta[j];
        c.beta[j] = nb;
    }
    c.mu.array() *= inst.design().times(applied).array().exp();
    return clamped;
}

/// Step (1/c0) log(s_j / <x_j, mu>) for every coordinate.
StepReport scaled_ips_step(const ProblemInstance& inst, Coefficients& c, Scalar c0, Scalar clamp)
{
    const Vector r = inst.design().transpose_times(c.mu);
    const Vector& s = inst.suff_stats();
    Vector delta(r.size());
    for (Index j = 0; j < r.size(); ++j) {
        if (!(s[j] > 0))
            delta[j] = -kInf;
        else if (!(r[j] > 0))
            delta[j] = kInf;
        else
            delta[j] = std::log(s[j] / r[j]) / c0;
    }
    StepReport rep;
    rep.clamped = apply_synchronized(inst, c, delta, clamp);
    return rep;
}

} // namespace

StepReport mm_binary_step(const ProblemInstance& inst, Coefficients& c, Scalar clamp)
{
    detail::require_binary(inst, "mm-binary");
    return scaled_ips_step(inst, c, static_cast<Scalar>(inst.cols()), clamp);
}

StepReport gis_step(const ProblemInstance& inst, Coefficients& c, Scalar clamp)
{
    detail::require_non_negative(inst, "gis");
    return scaled_ips_step(inst, c, inst.design().row_sum_max(), clamp);
}

Scalar general_mm_delta(Scalar a, Scalar b, Scalar c_neg, Scalar r, Scalar clamp, bool& clamped)
{
    if (a > 0) {
        const Scalar disc = std::sqrt(b * b + 4 * a * c_neg);
        Scalar u;
        if (b >= 0)
            u = (b + disc) / (2 * a);
        else
            u = 2 * c_neg / (disc - b);
        if (!(u > 0)) {
            clamped = true;
            return -2 * clamp;
        }
        const Scalar d = std::log(u) / r;
        if (!std::isfinite(d)) {
            clamped = true;
            return d > 0 ? 2 * clamp : -2 * clamp;
        }
        return d;
    }
    // no positive part: the surrogate is monotone unless b < 0 < c_neg
    if (b < 0 && c_neg > 0) return std::log(c_neg / -b) / r;
    if (b == 0 && c_neg == 0) return 0;
    clamped = true;
    return b < 0 ? -2 * clamp : 2 * clamp;
}

StepReport mm_general_step(const ProblemInstance& inst, Coefficients& c, Scalar clamp)
{
    const DesignMatrix& x = inst.design();
    const Vector& s = inst.suff_stats();
    const Scalar r = x.row_sum_max();
    Vector delta(x.cols());
    StepReport rep;
    for (Index j = 0; j < x.cols(); ++j) {
        const Scalar a = x.dot_column_positive(j, c.mu);
        const Scalar cn = x.dot_column_negative(j, c.mu);
        delta[j] = general_mm_delta(a, s[j], cn, r, clamp, rep.clamped);
    }
    rep.clamped = apply_synchronized(inst, c, delta, clamp) || rep.clamped;
    return rep;
}

namespace {

struct BlockOutcome {
    Vector delta;
    bool clamped = false;
    bool failed = false;
};

/**
 * Minimizes h(d) = -s_G^T d + sum_i (mu_i / r_i) exp(r_i (X_G d)_i),
 * r_i = x_{i+} / x_{i+,G}, by Newton with Armijo backtracking.
 * Coordinates with s_j <= 0 have no finite minimizer and are sent to the clamp.
 */
BlockOutcome solve_parallel_block(const ProblemInstance& inst, const Coefficients& c, const std::vector<Index>& block,
                                  const SolverConfig& cfg)
{
    const DesignMatrix& x = inst.design();
    const Vector& s = inst.suff_stats();
    BlockOutcome out;
    out.delta = Vector::Zero(static_cast<Index>(block.size()));

    std::vector<Index> free_cols, free_pos;
    for (std::size_t k = 0; k < block.size(); ++k) {
        const Index j = block[k];
        if (s[j] > 0) {
            free_cols.push_back(j);
            free_pos.push_back(static_cast<Index>(k));
        } else {
            out.delta[static_cast<Index>(k)] = -2 * cfg.clamp;
            out.clamped = true;
        }
    }
    if (free_cols.empty()) return out;
    const Index g = static_cast<Index>(free_cols.size());

    const Vector part = x.block_row_sums(free_cols);
    const Vector& total = x.row_sums();
    // rows outside the block support contribute a constant
    Vector rate = Vector::Zero(x.rows());
    Vector weight = Vector::Zero(x.rows());
    for (Index i = 0; i < x.rows(); ++i) {
        if (part[i] > 0) {
            rate[i] = total[i] / part[i];
            weight[i] = c.mu[i] / rate[i];
        }
    }
    Vector sg(g);
    for (Index k = 0; k < g; ++k) sg[k] = s[free_cols[static_cast<std::size_t>(k)]];
    const Scalar gscale = std::max<Scalar>(1, detail::inf_norm(sg));

    auto value = [&](const Vector& eta_g) {
        // eta_g = X_G d; returns the non-constant part of h
        Scalar v = 0;
        for (Index i = 0; i < x.rows(); ++i)
            if (part[i] > 0) v += weight[i] * std::exp(rate[i] * eta_g[i]);
        return v;
    };

    auto newton = [&](Vector d, bool& converged) {
        Vector eta = x.block_times(free_cols, d);
        Scalar h = -sg.dot(d) + value(eta);
        converged = false;
        for (int it = 0; it < cfg.inner_max_iters; ++it) {
            Vector e(x.rows());
            for (Index i = 0; i < x.rows(); ++i) e[i] = part[i] > 0 ? c.mu[i] * std::exp(rate[i] * eta[i]) : 0.0;
            const Vector grad = x.block_transpose_times(free_cols, e) - sg;
            if (detail::inf_norm(grad) <= cfg.inner_tol * gscale) {
                converged = true;
                break;
            }
            Vector hw = e.cwiseProduct(rate);
            Matrix hess = x.block_gram(free_cols, hw);
            Eigen::LLT<Matrix> llt(hess);
            Scalar damp = 0;
            const Scalar tr = std::max<Scalar>(hess.trace() / g, 1e-300);
            while (llt.info() != Eigen::Success) {
                damp = damp == 0 ? 1e-8 * tr : damp * 10;
                llt.compute(hess + damp * Matrix::Identity(g, g));
            }
            const Vector step = llt.solve(-grad);
            const Vector deta = x.block_times(free_cols, step);
            const Scalar slope = grad.dot(step);
            Scalar t = 1;
            bool accepted = false;
            for (int ls = 0; ls < 50; ++ls) {
                const Vector cand = d + t * step;
                const Vector ceta = eta + t * deta;
                const Scalar hc = -sg.dot(cand) + value(ceta);
                if (std::isfinite(hc) && hc <= h + 1e-4 * t * slope) {
                    d = cand;
                    eta = ceta;
                    h = hc;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if (!accepted) break;
            // runaway coordinates: stop once past the clamp
            if (detail::inf_norm(d) > 4 * cfg.clamp) break;
        }
        return d;
    };

    bool ok = false;
    Vector d = newton(Vector::Zero(g), ok);
    if (!ok) {
        Vector retry = newton(0.5 * d, ok);
        if (ok) d = retry;
        else out.failed = true;
    }
    for (Index k = 0; k < g; ++k) out.delta[free_pos[static_cast<std::size_t>(k)]] = d[k];
    return out;
}

} // namespace

StepReport mm_parallel_step(const ProblemInstance& inst, Coefficients& c, const std::vector<std::vector<Index>>& blocks,
                            const SolverConfig& cfg)
{
    detail::require_non_negative(inst, "mm-parallel");
    std::vector<BlockOutcome> results(blocks.size());
    const int jobs = std::max(1, cfg.jobs);
    if (jobs == 1 || blocks.size() < 2) {
        for (std::size_t b = 0; b < blocks.size(); ++b) results[b] = solve_parallel_block(inst, c, blocks[b], cfg);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < jobs; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t b = static_cast<std::size_t>(w); b < blocks.size(); b += static_cast<std::size_t>(jobs))
                    results[b] = solve_parallel_block(inst, c, blocks[b], cfg);
            });
        }
        for (auto& t : pool) t.join();
    }
    Vector delta = Vector::Zero(inst.cols());
    StepReport rep;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        for (std::size_t k = 0; k < blocks[b].size(); ++k) delta[blocks[b][k]] = results[b].delta[static_cast<Index>(k)];
        rep.clamped = rep.clamped || results[b].clamped;
        rep.subsolver_failed = rep.subsolver_failed || results[b].failed;
    }
    rep.clamped = apply_synchronized(inst, c, delta, cfg.clamp) || rep.clamped;
    return rep;
}

namespace {

template <class Step>
FitResult mm_loop(const ProblemInstance& inst, const SolverConfig& cfg, Variant v, double work_per_step, Step step)
{
    Tracker tr(inst, cfg);
    Coefficients c = make_coefficients(inst, detail::initial_beta(inst, cfg));
    bool stop = tr.start(neg_log_likelihood(inst, c), detail::inf_norm(gradient(inst, c)), c.beta);
    Index t = 0;
    while (!stop) {
        ++t;
        const StepReport rep = step(c);
        if (rep.clamped) tr.warn(warning::kDivergentCoordinate);
        if (rep.subsolver_failed) tr.warn(warning::kSubsolver);
        tr.add_work(work_per_step);
        if (tr.due(t)) stop = tr.record(t, neg_log_likelihood(inst, c), detail::inf_norm(gradient(inst, c)), c.beta);
    }
    return tr.finish(v, c.beta, c.mu, t);
}

double design_size(const ProblemInstance& inst)
{
    return inst.design().is_sparse() ? static_cast<double>(inst.design().nonzeros())
                                     : static_cast<double>(inst.rows()) * static_cast<double>(inst.cols());
}

} // namespace

FitResult mm_binary_fit(const ProblemInstance& inst, const SolverConfig& cfg)
{
    detail::require_binary(inst, "mm-binary");
    return mm_loop(inst, cfg, Variant::MM_BINARY, 2 * design_size(inst),
                   [&](Coefficients& c) { return mm_binary_step(inst, c, cfg.clamp); });
}

FitResult gis_fit(const ProblemInstance& inst, const SolverConfig& cfg)
{
    detail::require_non_negative(inst, "gis");
    return mm_loop(inst, cfg, Variant::GIS, 2 * design_size(inst),
                   [&](Coefficients& c) { return gis_step(inst, c, cfg.clamp); });
}

FitResult mm_general_fit(const ProblemInstance& inst, const SolverConfig& cfg)
{
    return mm_loop(inst, cfg, Variant::MM_GENERAL, 3 * design_size(inst),
                   [&](Coefficients& c) { return mm_general_step(inst, c, cfg.clamp); });
}

FitResult mm_parallel_fit(const ProblemInstance& inst, const SolverConfig& cfg)
{
    detail::require_non_negative(inst, "mm-parallel");
    // fixed contiguous blocks over all p coordinates
    std::vector<std::vector<Index>> blocks;
    const std::vector<Index> sizes = resolve_block_sizes(inst.cols(), cfg);
    Index next = 0;
    for (Index sz : sizes) {
        std::vector<Index> b;
        for (Index k = 0; k < sz; ++k) b.push_back(next++);
        blocks.push_back(std::move(b));
    }
    return mm_loop(inst, cfg, Variant::MM_PARALLEL, 4 * design_size(inst),
                   [&](Coefficients& c) { return mm_parallel_step(inst, c, blocks, cfg); });
}

} // namespace ipscale
