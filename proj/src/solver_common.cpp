#include "solver_common.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ipscale {

namespace {

struct VariantName {
    Variant v;
    const char* name;
};

constexpr VariantName kNames[] = {
    {Variant::IPS, "ips"},
    {Variant::A_IPS, "a-ips"},
    {Variant::X2_IPS, "x2-ips"},
    {Variant::MM_BINARY, "mm-binary"},
    {Variant::GIS, "gis"},
    {Variant::MM_GENERAL, "mm-general"},
    {Variant::MM_PARALLEL, "mm-parallel"},
    {Variant::IIS, "iis"},
    {Variant::Q_IPS, "q-ips"},
    {Variant::B_IPS, "b-ips"},
    {Variant::NEWTON, "newton"},
    {Variant::L1_IPS, "l1-ips"},
    {Variant::RIDGE_Q_IPS, "ridge-q-ips"},
};

} // namespace

std::string to_string(Variant v)
{
    for (const auto& n : kNames)
        if (n.v == v) return n.name;
    return "?";
}

Variant parse_variant(const std::string& name)
{
    std::string key = name;
    std::transform(key.begin(), key.end(), key.begin(), [](unsigned char ch) {
        return ch == '_' ? '-' : static_cast<char>(std::tolower(ch));
    });
    for (const auto& n : kNames)
        if (key == n.name) return n.v;
    std::string valid;
    for (const auto& n : kNames) valid += (valid.empty() ? "" : ", ") + std::string(n.name);
    throw InputError("unknown solver '" + name + "'; valid: " + valid);
}

const std::vector<Variant>& all_variants()
{
    static const std::vector<Variant> all = [] {
        std::vector<Variant> v;
        for (const auto& n : kNames) v.push_back(n.v);
        return v;
    }();
    return all;
}

std::string to_string(Termination t)
{
    switch (t) {
    case Termination::TolReached: return "TOL_REACHED";
    case Termination::TimeLimit: return "TIME_LIMIT";
    case Termination::IterLimit: return "ITER_LIMIT";
    case Termination::Diverged: return "DIVERGED";
    }
    return "?";
}

bool FitResult::has_warning(const std::string& w) const
{
    return std::find(warnings.begin(), warnings.end(), w) != warnings.end();
}

bool check_stop(ConvergenceTrace& trace, const SolverConfig& cfg)
{
    if (trace.records.empty()) return false;
    const auto& r = trace.records.back();
    if (!std::isfinite(r.objective) || !std::isfinite(r.rel_grad)) {
        trace.termination = Termination::Diverged;
        return true;
    }
    if (r.rel_grad <= cfg.eps_tol) {
        trace.termination = Termination::TolReached;
        return true;
    }
    if (r.wall_seconds >= cfg.t_max_secs) {
        trace.termination = Termination::TimeLimit;
        return true;
    }
    if (r.iter >= cfg.max_iters) {
        trace.termination = Termination::IterLimit;
        return true;
    }
    return false;
}

FitResult fit(const ProblemInstance& inst, const SolverConfig& cfg)
{
    switch (cfg.variant) {
    case Variant::IPS: return ips_fit(inst, cfg);
    case Variant::A_IPS: return a_ips_fit(inst, cfg);
    case Variant::X2_IPS: return x2_ips_fit(inst, cfg);
    case Variant::MM_BINARY: return mm_binary_fit(inst, cfg);
    case Variant::GIS: return gis_fit(inst, cfg);
    case Variant::MM_GENERAL: return mm_general_fit(inst, cfg);
    case Variant::MM_PARALLEL: return mm_parallel_fit(inst, cfg);
    case Variant::IIS: return iis_fit(inst, cfg);
    case Variant::Q_IPS:
    case Variant::RIDGE_Q_IPS: return qips_fit(inst, cfg);
    case Variant::B_IPS: return bips_fit(inst, cfg);
    case Variant::NEWTON: return newton_fit(inst, cfg);
    case Variant::L1_IPS: return l1_ips_fit(inst, cfg);
    }
    throw ContractError("unknown solver variant");
}

namespace detail {

Tracker::Tracker(const ProblemInstance& inst, const SolverConfig& cfg)
    : inst_(inst), cfg_(cfg), t0_(std::chrono::steady_clock::now())
{
    if (!(cfg.eps_tol > 0)) throw ContractError("eps_tol must be positive");
    if (cfg.lambda < 0) throw ContractError("lambda must be non-negative");
    every_ = cfg.record_every > 0 ? cfg.record_every : (inst.cols() <= 1000 ? 1 : 5);
    floor_ = 16 * std::numeric_limits<Scalar>::epsilon() * std::max<Scalar>(1, detail::inf_norm(inst.suff_stats()));
}

double Tracker::elapsed() const
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
}

bool Tracker::due(Index t) const { return t % every_ == 0 || t >= cfg_.max_iters; }

bool Tracker::start(Scalar objective, Scalar grad_inf, const Vector& beta)
{
    // a starting gradient at round-off level counts as stationary
    trace_.grad0_norm = grad_inf <= floor_ ? 0.0 : grad_inf;
    return record(0, objective, grad_inf, beta);
}

bool Tracker::record(Index t, Scalar objective, Scalar grad_inf, const Vector& beta)
{
    TraceRecord r;
    r.iter = t;
    r.wall_seconds = elapsed();
    if (!trace_.records.empty() && r.wall_seconds <= trace_.records.back().wall_seconds)
        r.wall_seconds = std::nextafter(trace_.records.back().wall_seconds, 1e300);
    r.work = work_;
    if (!trace_.records.empty() && r.work <= trace_.records.back().work)
        r.work = std::nextafter(trace_.records.back().work, 1e300);
    r.objective = objective;
    r.rel_grad = trace_.grad0_norm > 0 ? grad_inf / trace_.grad0_norm : 0.0;
    if (const auto& bt = inst_.beta_true()) {
        const Scalar denom = bt->squaredNorm();
        const Scalar err = (beta - *bt).squaredNorm();
        r.est_error = denom > 0 ? err / denom : err;
    }
    trace_.records.push_back(r);
    if (check_stop(trace_, cfg_)) return true;
    // warm starts can put eps * g0 below what the gradient can resolve
    if (grad_inf <= floor_) {
        trace_.termination = Termination::TolReached;
        return true;
    }
    return false;
}

void Tracker::warn(const char* tag)
{
    if (std::find(warnings_.begin(), warnings_.end(), tag) == warnings_.end()) warnings_.emplace_back(tag);
}

FitResult Tracker::finish(Variant v, Vector beta, Vector mu, Index iterations)
{
    FitResult out;
    out.variant = v;
    out.beta = std::move(beta);
    out.mu = std::move(mu);
    out.trace = std::move(trace_);
    out.iterations = iterations;
    out.wall_seconds = elapsed();
    out.warnings = std::move(warnings_);
    return out;
}

Vector initial_beta(const ProblemInstance& inst, const SolverConfig& cfg)
{
    if (!cfg.beta_init) return Vector::Zero(inst.cols());
    if (cfg.beta_init->size() != inst.cols()) throw ContractError("beta_init length does not match design columns");
    return *cfg.beta_init;
}

Scalar clamp_coordinate(Scalar target, Scalar clamp, bool& clamped)
{
    if (std::isnan(target)) {
        clamped = true;
        return -clamp;
    }
    if (target > clamp) {
        clamped = true;
        return clamp;
    }
    if (target < -clamp) {
        clamped = true;
        return -clamp;
    }
    return target;
}

void require_binary(const ProblemInstance& inst, const char* solver)
{
    if (inst.design().kind() != DesignKind::Binary)
        throw ContractError(std::string(solver) + " needs a binary design; use mm-general for other designs");
}

void require_non_negative(const ProblemInstance& inst, const char* solver)
{
    if (inst.design().kind() == DesignKind::General)
        throw ContractError(std::string(solver) + " needs a non-negative design; use mm-general for signed designs");
}

void require_non_negative_slopes(const ProblemInstance& inst, const char* solver)
{
    require_intercept(inst);
    require_non_negative(inst, solver);
}

} // namespace detail
} // namespace ipscale
