#include "solver_common.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>

namespace ipscale {

using detail::Tracker;

namespace {

constexpr Scalar kInf = std::numeric_limits<Scalar>::infinity();

/// log sum exp(log_terms + rates * delta) and its derivative in delta.
std::pair<Scalar, Scalar> lse_rate(const Vector& log_terms, const Vector& rates, Scalar delta)
{
    Scalar m = -kInf;
    for (Index i = 0; i < log_terms.size(); ++i) m = std::max(m, log_terms[i] + rates[i] * delta);
    Scalar sum = 0, dsum = 0;
    for (Index i = 0; i < log_terms.size(); ++i) {
        const Scalar e = std::exp(log_terms[i] + rates[i] * delta - m);
        sum += e;
        dsum += e * rates[i];
    }
    return {m + std::log(sum), dsum / sum};
}

/// Reparametrized trace record: objective l at [b0*, b] and ||grad l||_inf there.
struct ReparamView {
    Scalar objective;
    Scalar grad_inf;
    Vector beta;
};

ReparamView view(const ProblemInstance& inst, const SlopeState& st, Scalar ridge)
{
    ReparamView v;
    v.objective = st.objective(inst) + reparam_offset(inst);
    Vector g = inst.total() * inst.design().transpose_times(st.weights) - inst.suff_stats();
    if (ridge > 0) {
        v.objective += 0.5 * ridge * st.slope.squaredNorm();
        g.tail(st.slope.size()) += ridge * st.slope;
    }
    v.grad_inf = detail::inf_norm(g);
    v.beta = st.full_beta(inst);
    return v;
}

/// Iteration-0 record at the caller's full starting vector.
bool start_full(Tracker& tr, const ProblemInstance& inst, const Vector& beta0, Scalar ridge)
{
    const Coefficients c = make_coefficients(inst, beta0);
    Scalar obj = neg_log_likelihood(inst, c);
    Vector g = gradient(inst, c);
    if (ridge > 0) {
        obj += 0.5 * ridge * beta0.tail(beta0.size() - 1).squaredNorm();
        g.tail(g.size() - 1) += ridge * beta0.tail(beta0.size() - 1);
    }
    return tr.start(obj, detail::inf_norm(g), beta0);
}

double design_size(const ProblemInstance& inst)
{
    return inst.design().is_sparse() ? static_cast<double>(inst.design().nonzeros())
                                     : static_cast<double>(inst.rows()) * static_cast<double>(inst.cols());
}

} // namespace

// --- IIS ---------------------------------------------------------------------------

Scalar iis_solve_coordinate(const Vector& log_terms, const Vector& rates, Scalar log_rhs, Scalar clamp, bool& clamped)
{
    if (!std::isfinite(log_rhs)) {
        clamped = true;
        return log_rhs > 0 ? kInf : -kInf;
    }
    auto g = [&](Scalar d) {
        auto [v, dv] = lse_rate(log_terms, rates, d);
        return std::pair<Scalar, Scalar>{v - log_rhs, dv};
    };
    // bracket the root; g is increasing
    Scalar lo = -1, hi = 1;
    const Scalar limit = 2 * clamp;
    while (g(hi).first < 0) {
        lo = hi;
        hi *= 2;
        if (hi > limit) {
            clamped = true;
            return kInf;
        }
    }
    while (g(lo).first > 0) {
        hi = lo;
        lo *= 2;
        if (lo < -limit) {
            clamped = true;
            return -kInf;
        }
    }
    Scalar d = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        const auto [v, dv] = g(d);
        if (std::abs(v) <= 1e-13) return d;
        if (v > 0)
            hi = d;
        else
            lo = d;
        Scalar next = dv > 0 ? d - v / dv : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (next == d || hi - lo <= 4 * std::numeric_limits<Scalar>::epsilon() * std::max<Scalar>(1, std::abs(d)))
            return next;
        d = next;
    }
    return d;
}

StepReport iis_step(const ProblemInstance& inst, SlopeState& state, Scalar clamp)
{
    const DesignMatrix& x = inst.design();
    const Index d = state.slope.size();
    const Vector rates = (x.row_sums().array() - 1.0).matrix();
    const Scalar log_total = std::log(inst.total());
    const Vector& s = inst.suff_stats();
    StepReport rep;
    Vector delta(d);
    std::vector<Scalar> lt, rt;
    for (Index k = 0; k < d; ++k) {
        const Index j = k + 1;
        lt.clear();
        rt.clear();
        x.for_each_in_column(j, [&](Index i, Scalar v) {
            if (state.weights[i] > 0) {
                lt.push_back(std::log(v * state.weights[i]));
                rt.push_back(rates[i]);
            }
        });
        const Scalar log_rhs = s[j] > 0 ? std::log(s[j]) - log_total : -kInf;
        Scalar step;
        if (lt.empty()) {
            rep.clamped = true;
            step = s[j] > 0 ? kInf : 0;
        } else {
            const Vector lv = Eigen::Map<const Vector>(lt.data(), static_cast<Index>(lt.size()));
            const Vector rv = Eigen::Map<const Vector>(rt.data(), static_cast<Index>(rt.size()));
            step = iis_solve_coordinate(lv, rv, log_rhs, clamp, rep.clamped);
        }
        const Scalar nb = detail::clamp_coordinate(state.slope[k] + step, clamp, rep.clamped);
        delta[k] = nb - state.slope[k];
    }
    state.slope += delta;
    scale_slope_state(state, slope_times(x, delta));
    return rep;
}

FitResult iis_fit(const ProblemInstance& inst, const SolverConfig& cfg)
{
    detail::require_non_negative_slopes(inst, "iis");
    Tracker tr(inst, cfg);
    const Vector beta0 = detail::initial_beta(inst, cfg);
    SlopeState st = make_slope_state(inst, beta0.tail(beta0.size() - 1));
    bool stop = start_full(tr, inst, beta0, 0);
    Index t = 0;
    while (!stop) {
        ++t;
        if (iis_step(inst, st, cfg.clamp).clamped) tr.warn(warning::kDivergentCoordinate);
        tr.add_work(3 * design_size(inst));
        if (tr.due(t)) {
            const ReparamView v = view(inst, st, 0);
            stop = tr.record(t, v.objective, v.grad_inf, v.beta);
        }
    }
    return tr.finish(Variant::IIS, st.full_beta(inst), st.fitted_mean(inst), t);
}

// --- Q-IPS -------------------------------------------------------------------------

Scalar next_theta(Scalar theta)
{
    const Scalar t2 = theta * theta;
    return 0.5 * (std::sqrt(t2 * t2 + 4 * t2) - t2);
}

FitResult qips_fit(const ProblemInstance& inst, const SolverConfig& cfg)
{
    require_intercept(inst);
    const Scalar ridge = cfg.variant == Variant::RIDGE_Q_IPS ? cfg.lambda : 0.0;
    const Variant v = cfg.variant == Variant::RIDGE_Q_IPS ? Variant::RIDGE_Q_IPS : Variant::Q_IPS;
    Tracker tr(inst, cfg);
    const CurvatureBound bound = make_curvature_bound(inst, cfg.w_choice, ridge, cfg.seed);
    if (bound.fell_back) tr.warn(warning::kBohningFallback);
    if (bound.ridge_repaired) tr.warn(warning::kRidgeRepair);

    const Vector beta0 = detail::initial_beta(inst, cfg);
    SlopeState st = make_slope_state(inst, beta0.tail(beta0.size() - 1));
    Vector eta = st.slope;
    Scalar theta = 1;
    bool stop = start_full(tr, inst, beta0, ridge);
    Scalar prev_obj = view(inst, st, ridge).objective;
    int increases = 0;
    const double work = 3 * design_size(inst) + static_cast<double>(st.slope.size()) * st.slope.size();
    Index t = 0;
    while (!stop) {
        ++t;
        const Vector alpha = (1 - theta) * st.slope + theta * eta;
        const SlopeState sa = make_slope_state(inst, alpha);
        Vector grad = sa.gradient(inst);
        if (ridge > 0) grad += ridge * alpha;
        eta -= bound.solve(grad) / theta;
        const Vector next = (1 - theta) * st.slope + theta * eta;
        const Vector step = next - st.slope;
        scale_slope_state(st, slope_times(inst.design(), step));
        st.slope = next;
        theta = next_theta(theta);
        tr.add_work(work);

        const ReparamView rv = view(inst, st, ridge);
        if (rv.objective > prev_obj + 1e-6 * std::abs(prev_obj))
            ++increases;
        else
            increases = 0;
        prev_obj = rv.objective;
        if (increases >= 5) {
            theta = 1;
            eta = st.slope;
            increases = 0;
            tr.warn(warning::kMomentumRestart);
        }
        if (tr.due(t)) stop = tr.record(t, rv.objective, rv.grad_inf, rv.beta);
    }
    return tr.finish(v, st.full_beta(inst), st.fitted_mean(inst), t);
}

// --- B-IPS -------------------------------------------------------------------------

std::vector<std::vector<Index>> random_blocks(Index d, const std::vector<Index>& sizes, SplitMix64& rng)
{
    Index total = 0;
    for (Index s : sizes) {
        if (s <= 0) throw ContractError("block sizes must be positive");
        total += s;
    }
    if (total != d) throw ContractError("block sizes must sum to the number of coordinates");
    const std::vector<long> perm = random_permutation(d, rng);
    std::vector<std::vector<Index>> blocks;
    std::size_t at = 0;
    for (Index s : sizes) {
        blocks.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(at),
                            perm.begin() + static_cast<std::ptrdiff_t>(at + static_cast<std::size_t>(s)));
        at += static_cast<std::size_t>(s);
    }
    return blocks;
}

std::vector<Index> resolve_block_sizes(Index d, const SolverConfig& cfg)
{
    if (!cfg.block_sizes.empty()) {
        Index total = 0;
        for (Index s : cfg.block_sizes) {
            if (s <= 0) throw ContractError("block sizes must be positive");
            total += s;
        }
        if (total != d)
            throw ContractError("block sizes sum to " + std::to_string(total) + " but there are " + std::to_string(d) +
                                " coordinates");
        return cfg.block_sizes;
    }
    if (cfg.default_block_size <= 0) throw ContractError("block size must be positive");
    std::vector<Index> sizes;
    for (Index left = d; left > 0; left -= std::min(left, cfg.default_block_size))
        sizes.push_back(std::min(left, cfg.default_block_size));
    return sizes;
}

StepReport bips_block_update(const ProblemInstance& inst, SlopeState& state, std::span<const Index> block,
                             const SolverConfig& cfg, double* work)
{
    const DesignMatrix& x = inst.design();
    const Scalar total = inst.total();
    const Index g = static_cast<Index>(block.size());
    std::vector<Index> cols(block.begin(), block.end());
    for (Index& j : cols) ++j; // slope index -> design column
    Vector sk(g);
    for (Index k = 0; k < g; ++k) sk[k] = inst.suff_stats()[cols[static_cast<std::size_t>(k)]];
    const Scalar gscale = std::max<Scalar>(1, detail::inf_norm(sk));
    const double n = static_cast<double>(x.rows());
    const double col_cost = x.is_sparse() ? static_cast<double>(x.nonzeros()) * g / x.cols() : n * g;
    const int steps = cfg.block_newton_steps > 0 ? std::min(cfg.block_newton_steps, cfg.inner_max_iters)
                                                 : cfg.inner_max_iters;
    double used = 0;
    StepReport rep;
    Vector lw = state.weights.array().log().matrix();

    for (int it = 0; it < steps; ++it) {
        const Vector m = x.block_transpose_times(cols, state.weights);
        const Vector grad = total * m - sk;
        used += col_cost;
        if (detail::inf_norm(grad) <= cfg.inner_tol * gscale) break;
        Matrix hess = x.block_gram(cols, state.weights);
        hess.noalias() -= m * m.transpose();
        hess *= total;
        used += col_cost * col_cost / n + static_cast<double>(g) * g * g / 3.0;
        Eigen::LLT<Matrix> llt(hess);
        Scalar damp = 0;
        const Scalar tr = std::max<Scalar>(std::abs(hess.trace()) / g, 1e-300);
        while (llt.info() != Eigen::Success && damp <= 1e12 * tr) {
            damp = damp == 0 ? 1e-8 * tr : damp * 10;
            llt.compute(hess + damp * Matrix::Identity(g, g));
        }
        if (llt.info() != Eigen::Success) {
            rep.subsolver_failed = true;
            break;
        }
        const Vector step = llt.solve(-grad);
        const Vector u = x.block_times(cols, step);
        const Scalar slope = grad.dot(step);
        used += col_cost + 2 * n;
        if (!(slope < 0)) break;
        // L(b + t step) - L(b) = -t s_k^T step + T log <w, exp(t u)>
        Scalar t = 1;
        bool accepted = false;
        Vector z;
        Scalar lse = 0;
        for (int ls = 0; ls <= 30; ++ls) {
            z = lw + t * u;
            const Scalar mx = z.maxCoeff();
            lse = mx + std::log((z.array() - mx).exp().sum());
            used += n;
            const Scalar lin = t * sk.dot(step);
            const Scalar change = -lin + total * lse;
            // near the optimum the change is evaluated at round-off level
            const Scalar noise =
                16 * std::numeric_limits<Scalar>::epsilon() * (std::abs(lin) + total * (std::abs(mx) + std::abs(lse)));
            if (std::isfinite(change) && change <= 1e-4 * t * slope + noise) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) {
            rep.subsolver_failed = true;
            break;
        }
        for (Index k = 0; k < g; ++k) state.slope[block[static_cast<std::size_t>(k)]] += t * step[k];
        lw = z.array() - lse;
        state.weights = lw.array().exp().matrix();
        state.log_mass += lse;
    }
    if (work) *work += used;
    return rep;
}

FitResult bips_fit(const ProblemInstance& inst, const SolverConfig& cfg)
{
    require_intercept(inst);
    Tracker tr(inst, cfg);
    const Vector beta0 = detail::initial_beta(inst, cfg);
    SlopeState st = make_slope_state(inst, beta0.tail(beta0.size() - 1));
    const Index d = st.slope.size();
    const std::vector<Index> sizes = resolve_block_sizes(d, cfg);
    SplitMix64 rng(cfg.seed, 0xB1);
    bool stop = start_full(tr, inst, beta0, 0);
    Index t = 0;
    while (!stop) {
        ++t;
        st = make_slope_state(inst, st.slope);
        double work = design_size(inst);
        bool failed = false;
        for (const auto& block : random_blocks(d, sizes, rng))
            failed = bips_block_update(inst, st, block, cfg, &work).subsolver_failed || failed;
        if (failed) tr.warn(warning::kSubsolver);
        tr.add_work(work);
        if (tr.due(t)) {
            const ReparamView v = view(inst, st, 0);
            stop = tr.record(t, v.objective, v.grad_inf, v.beta);
        }
    }
    return tr.finish(Variant::B_IPS, st.full_beta(inst), st.fitted_mean(inst), t);
}

// --- Newton ------------------------------------------------------------------------

FitResult newton_fit(const ProblemInstance& inst, const SolverConfig& cfg)
{
    const Index p = inst.cols();
    if (p > 5000) throw ContractError("newton builds a dense p x p Hessian; p = " + std::to_string(p) + " exceeds 5000");
    const DesignMatrix& x = inst.design();
    std::vector<Index> all(static_cast<std::size_t>(p));
    for (Index j = 0; j < p; ++j) all[static_cast<std::size_t>(j)] = j;

    Tracker tr(inst, cfg);
    Vector beta = detail::initial_beta(inst, cfg);
    Vector eta = inst.log_offset() + x.times(beta);
    Vector mu = eta.array().exp().matrix();
    const Vector& s = inst.suff_stats();
    auto objective = [&](const Vector& b, const Vector& m) {
        const Scalar mass = m.sum();
        return std::isfinite(mass) ? -s.dot(b) + mass : kInf;
    };
    Scalar obj = objective(beta, mu);
    Vector grad = x.transpose_times(mu) - s;
    bool stop = tr.start(obj, detail::inf_norm(grad), beta);
    const double work = design_size(inst) * (p + 2);
    Index t = 0;
    while (!stop) {
        ++t;
        Matrix hess = x.block_gram(all, mu);
        Eigen::LLT<Matrix> llt(hess);
        Scalar damp = 0;
        const Scalar trace = std::max<Scalar>(hess.trace() / p, 1e-300);
        while (llt.info() != Eigen::Success && damp <= 1e12 * trace) {
            damp = damp == 0 ? 1e-8 * trace : damp * 10;
            llt.compute(hess + damp * Matrix::Identity(p, p));
            tr.warn(warning::kDamping);
        }
        if (llt.info() != Eigen::Success) {
            tr.warn(warning::kSubsolver);
            tr.record(t, obj, detail::inf_norm(grad), beta);
            break;
        }
        const Vector step = llt.solve(-grad);
        const Vector deta = x.times(step);
        const Scalar slope = grad.dot(step);
        Scalar a = 1;
        bool accepted = false;
        for (int ls = 0; ls <= 50 && slope < 0; ++ls) {
            const Vector ce = eta + a * deta;
            const Vector cm = ce.array().exp().matrix();
            const Vector cb = beta + a * step;
            const Scalar co = objective(cb, cm);
            // objective differences below round-off of its terms count as no increase
            const Scalar noise = 16 * std::numeric_limits<Scalar>::epsilon() * (std::abs(s.dot(cb)) + cm.sum());
            if (std::isfinite(co) && co <= obj + 1e-4 * a * slope + noise) {
                beta = cb;
                eta = ce;
                mu = cm;
                obj = co;
                accepted = true;
                break;
            }
            a *= 0.5;
        }
        tr.add_work(work);
        grad = x.transpose_times(mu) - s;
        if (!accepted) {
            // no further decrease available at machine precision
            tr.record(t, obj, detail::inf_norm(grad), beta);
            break;
        }
        if (tr.due(t)) stop = tr.record(t, obj, detail::inf_norm(grad), beta);
    }
    return tr.finish(Variant::NEWTON, beta, mu, t);
}

} // namespace ipscale
