#include "ipscale/harness.hpp"

#include "ipscale/csv.hpp"

#include <boost/random/normal_distribution.hpp>
#include <boost/random/poisson_distribution.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>
#include <thread>

namespace ipscale {

namespace {

struct ScenarioName {
    Scenario s;
    const char* name;
};

constexpr ScenarioName kScenarios[] = {
    {Scenario::TableModerate, "table-moderate"}, {Scenario::TableLarge, "table-large"},
    {Scenario::NonnegSmall, "nonneg-small"},     {Scenario::NonnegLarge, "nonneg-large"},
    {Scenario::General, "general"},              {Scenario::L1Path, "l1-path"},
};

// generator purposes within a replication
constexpr std::uint64_t kDesignStream = 1;
constexpr std::uint64_t kCoefStream = 2;
constexpr std::uint64_t kCountStream = 3;
constexpr std::uint64_t kSolverStream = 4;

bool is_table(Scenario s)
{
    return s == Scenario::TableModerate || s == Scenario::TableLarge || s == Scenario::L1Path;
}

} // namespace

std::string to_string(Scenario s)
{
    for (const auto& n : kScenarios)
        if (n.s == s) return n.name;
    return "?";
}

Scenario parse_scenario(const std::string& name)
{
    std::string key = name;
    std::transform(key.begin(), key.end(), key.begin(), [](unsigned char ch) {
        return ch == '_' ? '-' : static_cast<char>(std::tolower(ch));
    });
    for (const auto& n : kScenarios)
        if (key == n.name) return n.s;
    std::string valid;
    for (const auto& n : kScenarios) valid += (valid.empty() ? "" : ", ") + std::string(n.name);
    throw InputError("unknown scenario '" + name + "'; valid: " + valid);
}

const std::vector<Scenario>& all_scenarios()
{
    static const std::vector<Scenario> all = [] {
        std::vector<Scenario> v;
        for (const auto& n : kScenarios) v.push_back(n.s);
        return v;
    }();
    return all;
}

void ExperimentSpec::validate() const
{
    if (replications < 1) throw InputError("replications must be at least 1");
    if (roster.empty() && scenario != Scenario::L1Path) throw InputError("solver roster is empty");
    if (!(scale_factor > 0 && scale_factor <= 1)) throw InputError("scale_factor must lie in (0, 1]");
    if (setting != 1 && setting != 2) throw InputError("setting must be 1 or 2");
    if (grid_points < 2) throw InputError("grid_points must be at least 2");
    if (n_rows < 0 || n_cols < 0) throw InputError("n_rows and n_cols must be non-negative");
    if (jobs < 1) throw InputError("jobs must be at least 1");
}

SplitMix64 replication_rng(std::uint64_t seed, int replication, std::uint64_t purpose)
{
    return SplitMix64(seed, (static_cast<std::uint64_t>(replication) << 8) | purpose);
}

ExperimentSpec parse_experiment_json(const std::string& text)
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError(std::string("experiment spec: ") + e.what());
    }
    static const char* known[] = {"scenario", "replications", "scale_factor", "roster",     "seed",
                                  "setting",  "n_rows",       "n_cols",       "eps_tol",    "t_max_secs",
                                  "max_iters", "block_size",  "jobs",         "clock",      "grid_points"};
    for (const auto& [key, _] : j.items())
        if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return key == k; }) == std::end(known))
            throw InputError("experiment spec: unknown field '" + key + "'");
    ExperimentSpec s;
    try {
        s.scenario = parse_scenario(j.at("scenario").get<std::string>());
        s.replications = j.value("replications", s.replications);
        s.scale_factor = j.value("scale_factor", s.scale_factor);
        for (const auto& r : j.value("roster", nlohmann::json::array())) s.roster.push_back(parse_variant(r.get<std::string>()));
        s.seed = j.value("seed", s.seed);
        s.setting = j.value("setting", s.setting);
        s.n_rows = j.value("n_rows", s.n_rows);
        s.n_cols = j.value("n_cols", s.n_cols);
        s.solver.eps_tol = j.value("eps_tol", s.solver.eps_tol);
        s.solver.t_max_secs = j.value("t_max_secs", s.solver.t_max_secs);
        s.solver.max_iters = j.value("max_iters", s.solver.max_iters);
        s.solver.default_block_size = j.value("block_size", s.solver.default_block_size);
        s.jobs = j.value("jobs", s.jobs);
        s.grid_points = j.value("grid_points", s.grid_points);
        const std::string clock = j.value("clock", std::string("work"));
        if (clock != "work" && clock != "wall") throw InputError("experiment spec: clock must be 'work' or 'wall'");
        s.clock = clock == "wall" ? ClockKind::Wall : ClockKind::Work;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("experiment spec: ") + e.what());
    }
    s.validate();
    return s;
}

std::string experiment_to_json(const ExperimentSpec& s)
{
    nlohmann::json j;
    j["scenario"] = to_string(s.scenario);
    j["replications"] = s.replications;
    j["scale_factor"] = s.scale_factor;
    j["roster"] = nlohmann::json::array();
    for (Variant v : s.roster) j["roster"].push_back(to_string(v));
    j["seed"] = s.seed;
    j["setting"] = s.setting;
    j["n_rows"] = s.n_rows;
    j["n_cols"] = s.n_cols;
    j["eps_tol"] = s.solver.eps_tol;
    j["t_max_secs"] = s.solver.t_max_secs;
    j["max_iters"] = s.solver.max_iters;
    j["block_size"] = s.solver.default_block_size;
    j["jobs"] = s.jobs;
    j["clock"] = s.clock == ClockKind::Wall ? "wall" : "work";
    j["grid_points"] = s.grid_points;
    return j.dump(2);
}

// --- generation pipeline -------------------------------------------------------------

namespace pipeline {

Matrix ar1_rows(Index n, Index d, double rho, SplitMix64& rng)
{
    boost::random::normal_distribution<double> z;
    const double tail = std::sqrt(1 - rho * rho);
    Matrix x(n, d);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < d; ++j) {
            const double zij = z(rng);
            x(i, j) = j == 0 ? zij : rho * x(i, j - 1) + tail * zij;
        }
    }
    return x;
}

void shift_to_nonnegative(Matrix& x) { x.array() -= x.minCoeff(); }

void scale_by_max(Matrix& x, double factor)
{
    const double m = x.cwiseAbs().maxCoeff();
    if (!(m > 0)) throw InputError("cannot scale an all-zero prototype design");
    x /= factor * m;
}

void jitter_rows(Matrix& x, SplitMix64& rng)
{
    boost::random::normal_distribution<double> z;
    for (Index i = 0; i < x.rows(); ++i) x.row(i) *= 1 + std::abs(z(rng));
}

Matrix with_intercept(const Matrix& x)
{
    Matrix out(x.rows(), x.cols() + 1);
    out.col(0).setOnes();
    out.rightCols(x.cols()) = x;
    return out;
}

Vector normal_mixture(Index k, double a, double b, SplitMix64& rng)
{
    boost::random::normal_distribution<double> z;
    Vector v(k);
    for (Index j = 0; j < k; ++j) {
        const bool first = rng.uniform() < 0.5;
        v[j] = (first ? a : b) + z(rng);
    }
    return v;
}

Vector poisson_counts(const DesignMatrix& x, const Vector& beta, SplitMix64& rng)
{
    const Vector eta = x.times(beta);
    Vector n(eta.size());
    for (Index i = 0; i < eta.size(); ++i) {
        const double mu = std::exp(eta[i]);
        if (!std::isfinite(mu) || mu > 1e15)
            throw InputError("generated mean exp(" + csv::format(eta[i]) + ") at row " + std::to_string(i) +
                             " overflows; reduce the coefficient scale");
        boost::random::poisson_distribution<long, double> pois(mu);
        n[i] = static_cast<double>(pois(rng));
    }
    return n;
}

} // namespace pipeline

TableSchema scenario_schema(Scenario s, double scale_factor)
{
    int factors = 4, order = 2;
    if (s == Scenario::TableLarge) {
        factors = 5;
        order = 3;
    } else if (s == Scenario::L1Path) {
        factors = 3;
    } else if (s != Scenario::TableModerate) {
        throw ContractError(to_string(s) + " is not a table scenario");
    }
    const double base = s == Scenario::L1Path ? 6.0 : 10.0;
    const int levels = std::max(2, static_cast<int>(std::lround(base * std::pow(scale_factor, 1.0 / factors))));
    TableSchema schema;
    for (int f = 0; f < factors; ++f) schema.factors.push_back({std::string(1, static_cast<char>('A' + f)), levels});
    schema.order = order;
    return schema;
}

std::pair<Index, Index> scenario_dimensions(const ExperimentSpec& spec)
{
    Index n = 0, p = 0;
    switch (spec.scenario) {
    case Scenario::NonnegSmall: n = 1000, p = 100; break;
    case Scenario::NonnegLarge: n = 20000, p = 2000; break;
    case Scenario::General: n = 50000, p = 1000; break;
    default: throw ContractError(to_string(spec.scenario) + " is not a Gaussian scenario");
    }
    n = std::max<Index>(2, std::llround(static_cast<double>(n) * spec.scale_factor));
    p = std::max<Index>(2, std::llround(static_cast<double>(p) * spec.scale_factor));
    if (spec.n_rows > 0) n = spec.n_rows;
    if (spec.n_cols > 0) p = spec.n_cols;
    if (p < 2) throw InputError("p must be at least 2 (intercept plus one slope)");
    return {n, p};
}

ProblemInstance gen_table_instance(const ExperimentSpec& spec, int replication)
{
    const TableSchema schema = scenario_schema(spec.scenario, spec.scale_factor);
    DesignMatrix x = build_table_design(schema);
    const Index p = x.cols();
    SplitMix64 crng = replication_rng(spec.seed, replication, kCoefStream);
    Vector beta = Vector::Zero(p);
    if (spec.scenario == Scenario::TableLarge) {
        beta[0] = 5;
        const Index k = std::clamp<Index>(std::llround(2000.0 * static_cast<double>(p - 1) / 8145.0), 1, p - 1);
        boost::random::normal_distribution<double> z(1.0, 1.0);
        for (Index j = p - k; j < p; ++j) beta[j] = z(crng);
    } else {
        beta[0] = 2;
        const Index k = std::min<Index>(10, p - 1);
        beta.tail(k) = pipeline::normal_mixture(k, 1, 3, crng);
        const Index extra = spec.scenario == Scenario::L1Path ? 5 : (spec.setting == 2 ? 20 : 0);
        const Index pool = p - 1 - k;
        if (extra > 0 && pool > 0) {
            const auto perm = random_permutation(pool, crng);
            const Index take = std::min(extra, pool);
            const Vector vals = pipeline::normal_mixture(take, 1, 3, crng);
            for (Index e = 0; e < take; ++e) beta[1 + perm[static_cast<std::size_t>(e)]] = vals[e];
        }
    }
    SplitMix64 nrng = replication_rng(spec.seed, replication, kCountStream);
    Vector n = pipeline::poisson_counts(x, beta, nrng);
    return ProblemInstance::from_counts(std::move(x), std::move(n), {}, beta);
}

ProblemInstance gen_gaussian_instance(const ExperimentSpec& spec, int replication)
{
    const auto [n_rows, p] = scenario_dimensions(spec);
    SplitMix64 drng = replication_rng(spec.seed, replication, kDesignStream);
    Matrix proto = pipeline::ar1_rows(n_rows, p - 1, 0.8, drng);
    double beta0 = 10;
    switch (spec.scenario) {
    case Scenario::NonnegSmall:
        pipeline::shift_to_nonnegative(proto);
        pipeline::scale_by_max(proto, 50);
        pipeline::jitter_rows(proto, drng);
        beta0 = 1;
        break;
    case Scenario::NonnegLarge:
        pipeline::shift_to_nonnegative(proto);
        pipeline::scale_by_max(proto, 20);
        pipeline::jitter_rows(proto, drng);
        break;
    case Scenario::General: pipeline::scale_by_max(proto, 100); break;
    default: throw ContractError(to_string(spec.scenario) + " is not a Gaussian scenario");
    }
    DesignMatrix x = DesignMatrix::from_dense(pipeline::with_intercept(proto));
    SplitMix64 crng = replication_rng(spec.seed, replication, kCoefStream);
    Vector beta(p);
    beta[0] = beta0;
    beta.tail(p - 1) = pipeline::normal_mixture(p - 1, 10, -10, crng);
    SplitMix64 nrng = replication_rng(spec.seed, replication, kCountStream);
    Vector n = pipeline::poisson_counts(x, beta, nrng);
    return ProblemInstance::from_counts(std::move(x), std::move(n), {}, beta);
}

ProblemInstance gen_instance(const ExperimentSpec& spec, int replication)
{
    return is_table(spec.scenario) ? gen_table_instance(spec, replication) : gen_gaussian_instance(spec, replication);
}

// --- experiments -------------------------------------------------------------------

std::vector<double> interpolate_hold(const std::vector<double>& t, const std::vector<double>& y,
                                     const std::vector<double>& grid)
{
    if (t.size() != y.size() || t.empty()) throw ContractError("interpolate_hold: bad curve");
    std::vector<double> out(grid.size());
    std::size_t k = 0;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        const double x = grid[g];
        if (x <= t.front()) {
            out[g] = y.front();
            continue;
        }
        if (x >= t.back()) {
            out[g] = y.back();
            continue;
        }
        while (k + 1 < t.size() && t[k + 1] < x) ++k;
        const double w = (x - t[k]) / (t[k + 1] - t[k]);
        out[g] = y[k] + w * (y[k + 1] - y[k]);
    }
    return out;
}

namespace {

RunRecord run_one(const ProblemInstance& inst, const ExperimentSpec& spec, int rep, Variant v)
{
    RunRecord r;
    r.replication = rep;
    r.variant = v;
    try {
        SolverConfig cfg = spec.solver;
        cfg.variant = v;
        cfg.seed = replication_rng(spec.seed, rep, kSolverStream)();
        if (v == Variant::B_IPS || v == Variant::MM_PARALLEL) {
            // block sizes refer to the scenario's own p
            if (!cfg.block_sizes.empty()) {
                Index sum = 0;
                for (Index s : cfg.block_sizes) sum += s;
                const Index need = v == Variant::B_IPS ? inst.cols() - 1 : inst.cols();
                if (sum != need) cfg.block_sizes.clear();
            }
        }
        FitResult f = fit(inst, cfg);
        r.ok = true;
        r.termination = f.trace.termination;
        r.wall_seconds = f.wall_seconds;
        r.iterations = f.iterations;
        r.warnings = f.warnings;
        if (!f.trace.records.empty()) {
            r.work = f.trace.records.back().work;
            r.final_rel_grad = f.trace.records.back().rel_grad;
            r.final_est_err = f.trace.records.back().est_error;
        }
        r.trace = std::move(f.trace);
    } catch (const std::exception& e) {
        r.ok = false;
        r.error = e.what();
    }
    return r;
}

double record_time(const TraceRecord& r, ClockKind clock) { return clock == ClockKind::Wall ? r.wall_seconds : r.work; }

} // namespace

ExperimentReport run_experiment(const ExperimentSpec& spec)
{
    spec.validate();
    if (spec.scenario == Scenario::L1Path) throw InputError("l1-path is run through l1_path, not run_experiment");
    ExperimentReport report;
    report.spec = spec;
    const std::size_t nv = spec.roster.size();
    std::vector<std::vector<RunRecord>> per_rep(static_cast<std::size_t>(spec.replications));

    auto do_rep = [&](int rep) {
        std::vector<RunRecord> out;
        try {
            const ProblemInstance inst = gen_instance(spec, rep);
            for (Variant v : spec.roster) out.push_back(run_one(inst, spec, rep, v));
        } catch (const std::exception& e) {
            for (Variant v : spec.roster) {
                RunRecord r;
                r.replication = rep;
                r.variant = v;
                r.error = std::string("instance generation failed: ") + e.what();
                out.push_back(std::move(r));
            }
        }
        per_rep[static_cast<std::size_t>(rep)] = std::move(out);
    };

    if (spec.jobs <= 1) {
        for (int rep = 0; rep < spec.replications; ++rep) do_rep(rep);
    } else {
        std::mutex m;
        int next = 0;
        std::vector<std::thread> pool;
        for (int w = 0; w < spec.jobs; ++w) {
            pool.emplace_back([&] {
                for (;;) {
                    int rep;
                    {
                        std::lock_guard<std::mutex> lock(m);
                        if (next >= spec.replications) return;
                        rep = next++;
                    }
                    do_rep(rep);
                }
            });
        }
        for (auto& t : pool) t.join();
    }
    for (auto& v : per_rep)
        for (auto& r : v) report.runs.push_back(std::move(r));

    for (std::size_t k = 0; k < nv; ++k) {
        AveragedCurve c;
        c.variant = spec.roster[k];
        double t_end = 0;
        bool has_est = true;
        std::vector<const RunRecord*> ok;
        for (const auto& r : report.runs) {
            if (r.variant != c.variant) continue;
            if (!r.ok || r.trace.records.empty()) {
                ++c.failed;
                continue;
            }
            ok.push_back(&r);
            t_end = std::max(t_end, record_time(r.trace.records.back(), spec.clock));
            for (const auto& rec : r.trace.records) has_est = has_est && rec.est_error.has_value();
        }
        c.used = static_cast<int>(ok.size());
        const int g = spec.grid_points;
        for (int i = 0; i < g; ++i) c.time.push_back(t_end * i / (g - 1));
        c.rel_grad.assign(static_cast<std::size_t>(g), 0.0);
        if (has_est && !ok.empty()) c.est_err.assign(static_cast<std::size_t>(g), 0.0);
        for (const RunRecord* r : ok) {
            std::vector<double> t, rg, ee;
            for (const auto& rec : r->trace.records) {
                t.push_back(record_time(rec, spec.clock));
                rg.push_back(rec.rel_grad);
                if (has_est) ee.push_back(*rec.est_error);
            }
            const auto irg = interpolate_hold(t, rg, c.time);
            for (int i = 0; i < g; ++i) c.rel_grad[static_cast<std::size_t>(i)] += irg[static_cast<std::size_t>(i)] / c.used;
            if (has_est) {
                const auto iee = interpolate_hold(t, ee, c.time);
                for (int i = 0; i < g; ++i)
                    c.est_err[static_cast<std::size_t>(i)] += iee[static_cast<std::size_t>(i)] / c.used;
            }
        }
        if (ok.empty()) c.time.clear(), c.rel_grad.clear(), c.est_err.clear();
        report.curves.push_back(std::move(c));
    }
    return report;
}

namespace {

void ensure_dir(const std::filesystem::path& dir)
{
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw InputError("cannot create output directory " + dir.string() + ": " + ec.message());
}

std::ofstream open_out(const std::filesystem::path& p)
{
    std::ofstream out(p, std::ios::binary);
    if (!out) throw InputError("cannot write " + p.string());
    return out;
}

std::string join(const std::vector<std::string>& v, const char* sep)
{
    std::string s;
    for (const auto& x : v) s += (s.empty() ? "" : sep) + x;
    return s;
}

} // namespace

void write_report(const ExperimentReport& report, const std::filesystem::path& dir)
{
    ensure_dir(dir);
    const char* tcol = report.spec.clock == ClockKind::Wall ? "time_s" : "work";
    for (const auto& c : report.curves) {
        auto out = open_out(dir / (to_string(c.variant) + ".csv"));
        std::vector<std::string> head{tcol, "rel_grad"};
        if (!c.est_err.empty()) head.emplace_back("est_err");
        csv::write_row(out, head);
        for (std::size_t i = 0; i < c.time.size(); ++i) {
            std::vector<std::string> row{csv::format(c.time[i]), csv::format(c.rel_grad[i])};
            if (!c.est_err.empty()) row.push_back(csv::format(c.est_err[i]));
            csv::write_row(out, row);
        }
    }
    const bool wall = report.spec.clock == ClockKind::Wall;
    {
        auto out = open_out(dir / "runs.csv");
        std::vector<std::string> head{"replication", "solver", "status", "termination", "iterations", "work"};
        if (wall) head.emplace_back("wall_seconds");
        head.insert(head.end(), {"final_rel_grad", "final_est_err", "warnings"});
        csv::write_row(out, head);
        for (const auto& r : report.runs) {
            std::vector<std::string> row{std::to_string(r.replication), to_string(r.variant), r.ok ? "ok" : "failed",
                                         r.ok ? to_string(r.termination) : "", std::to_string(r.iterations),
                                         csv::format(r.work)};
            if (wall) row.push_back(csv::format(r.wall_seconds));
            row.push_back(r.ok ? csv::format(r.final_rel_grad) : "");
            row.push_back(r.final_est_err ? csv::format(*r.final_est_err) : "");
            row.push_back(join(r.warnings, ";"));
            csv::write_row(out, row);
        }
    }
    nlohmann::json summary;
    summary["schema"] = 1;
    summary["scenario"] = to_string(report.spec.scenario);
    summary["replications"] = report.spec.replications;
    summary["scale_factor"] = report.spec.scale_factor;
    summary["seed"] = report.spec.seed;
    summary["clock"] = wall ? "wall" : "work";
    summary["solvers"] = nlohmann::json::array();
    for (const auto& c : report.curves) {
        nlohmann::json s;
        s["solver"] = to_string(c.variant);
        s["completed"] = c.used;
        s["failed"] = c.failed;
        std::map<std::string, int> term;
        double wall_sum = 0, work_sum = 0, rg_sum = 0;
        std::vector<std::string> errors;
        for (const auto& r : report.runs) {
            if (r.variant != c.variant) continue;
            if (!r.ok) {
                errors.push_back("replication " + std::to_string(r.replication) + ": " + r.error);
                continue;
            }
            ++term[to_string(r.termination)];
            wall_sum += r.wall_seconds;
            work_sum += r.work;
            rg_sum += r.final_rel_grad;
        }
        s["terminations"] = term;
        if (c.used > 0) {
            s["mean_work"] = work_sum / c.used;
            s["mean_final_rel_grad"] = rg_sum / c.used;
            if (wall) s["mean_wall_seconds"] = wall_sum / c.used;
        }
        s["errors"] = errors;
        summary["solvers"].push_back(s);
    }
    auto out = open_out(dir / "summary.json");
    out << summary.dump(2) << "\n";
}

// --- l1 path -------------------------------------------------------------------------

Scalar l1_lambda_max(const ProblemInstance& inst)
{
    require_intercept(inst);
    const DesignMatrix& x = inst.design();
    const Vector& s = inst.suff_stats();
    const Vector mu = inst.offset() * (s[0] / inst.offset().sum());
    Scalar m = 0;
    for (Index j = 1; j < x.cols(); ++j) m = std::max(m, std::abs(s[j] - x.dot_column(j, mu)));
    return m;
}

Scalar ebic(Scalar neg_loglik, Index k, Index n_rows, Index p, double gamma)
{
    return 2 * neg_loglik + static_cast<Scalar>(k) * std::log(static_cast<Scalar>(n_rows)) +
           2 * gamma * static_cast<Scalar>(k) * std::log(static_cast<Scalar>(p - 1));
}

PathResult l1_path(const ProblemInstance& inst, const PathSpec& spec)
{
    require_intercept(inst);
    if (spec.grid_size < 1) throw InputError("path grid is empty");
    if (!(spec.r_min > 0 && spec.r_min <= 1)) throw InputError("r_min must lie in (0, 1]");
    PathResult out;
    out.lambda_max = l1_lambda_max(inst);
    const Index p = inst.cols();
    Vector beta = Vector::Zero(p);
    beta[0] = std::log(inst.suff_stats()[0] / inst.offset().sum());
    for (int k = 0; k < spec.grid_size; ++k) {
        const double frac = spec.grid_size == 1 ? 0.0 : static_cast<double>(k) / (spec.grid_size - 1);
        SolverConfig cfg = spec.solver;
        cfg.variant = Variant::L1_IPS;
        cfg.lambda = out.lambda_max * std::pow(spec.r_min, frac);
        cfg.beta_init = beta;
        const FitResult f = l1_ips_fit(inst, cfg);
        beta = f.beta;
        PathPoint pt;
        pt.lambda = cfg.lambda;
        pt.beta = f.beta;
        for (Index j = 1; j < p; ++j) pt.support_size += f.beta[j] != 0;
        const Coefficients c = make_coefficients(inst, f.beta);
        pt.neg_loglik = neg_log_likelihood(inst, c);
        pt.deviance = inst.has_counts() ? g_squared(inst, c) : std::numeric_limits<Scalar>::quiet_NaN();
        pt.ebic = ebic(pt.neg_loglik, pt.support_size, inst.rows(), p, spec.gamma);
        pt.kkt_residual = l1_kkt_residual(inst, c, cfg.lambda);
        pt.termination = f.trace.termination;
        pt.iterations = f.iterations;
        out.points.push_back(std::move(pt));
    }
    for (std::size_t k = 1; k < out.points.size(); ++k)
        if (out.points[k].ebic < out.points[out.selected].ebic) out.selected = k;
    return out;
}

// --- export ----------------------------------------------------------------------------

void write_instance(const ProblemInstance& inst, const std::filesystem::path& dir,
                    const std::optional<TableSchema>& schema)
{
    ensure_dir(dir);
    {
        auto out = open_out(dir / "design.csv");
        write_design_triplets(out, inst.design());
    }
    {
        auto out = open_out(dir / "counts.csv");
        const Vector& n = inst.counts();
        std::vector<std::string> head;
        if (schema)
            for (const auto& f : schema->factors) head.push_back(f.name);
        head.emplace_back("count");
        csv::write_row(out, head);
        for (Index r = 0; r < n.size(); ++r) {
            std::vector<std::string> row;
            if (schema)
                for (int lv : schema->cell_levels(inst.kept_rows()[static_cast<std::size_t>(r)]))
                    row.push_back(std::to_string(lv + 1));
            row.push_back(csv::format(n[r]));
            csv::write_row(out, row);
        }
    }
    if (inst.beta_true()) {
        auto out = open_out(dir / "beta_true.csv");
        csv::write_row(out, {"column_label", "estimate"});
        const auto& labels = inst.design().column_labels();
        for (Index j = 0; j < inst.cols(); ++j)
            csv::write_row(out, {labels[static_cast<std::size_t>(j)], csv::format((*inst.beta_true())[j])});
    }
    if (schema) {
        auto out = open_out(dir / "schema.json");
        out << schema_to_json(*schema) << "\n";
    }
}

} // namespace ipscale
