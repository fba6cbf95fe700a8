// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include "fixtures.hpp"
#include "oracles.hpp"

#include "ipscale/harness.hpp"
#include "ipscale/io.hpp"
#include "ipscale/solvers.hpp"
#include "ipscale/surrogates.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

using namespace ipscale;
namespace fs = std::filesystem;

namespace {

// Tolerances, one per check.
constexpr double kDesignSeconds = 5.0;
constexpr double kOracleBeta = 1e-6;
constexpr double kOracleEps = 1e-8;
constexpr double kOracleSeconds = 60.0;
constexpr double kDescent = 1e-9;
constexpr double kIisAgreement = 1e-10;
constexpr double kMajorize = 1e-9;
constexpr double kTouch = 1e-12;
constexpr double kGradRel = 1e-6;
constexpr double kMarginRel = 1e-8;
constexpr double kRake = 1e-10;
constexpr double kThresholdKkt = 1e-10;
constexpr double kPathKkt = 1e-6;
constexpr double kX2Stationary = 1e-8;
constexpr double kRateR2 = 0.95;
constexpr int kSpeedReps = 20;
constexpr int kSpeedWins = 16;
constexpr double kAipsFactor = 2.0;

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double inf_norm(const Vector& v) { return v.lpNorm<Eigen::Infinity>(); }

/// Collects failure messages for one criterion.
struct Check {
    std::vector<std::string> failures;
    void expect(bool ok, const std::string& what)
    {
        if (!ok) failures.push_back(what);
    }
};

std::string fmt(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

SolverConfig config(Variant v, Scalar eps)
{
    SolverConfig c;
    c.variant = v;
    c.eps_tol = eps;
    c.max_iters = 500000;
    c.t_max_secs = 120;
    return c;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_cli(const std::string& args)
{
    const std::string cmd = std::string(IPSCALE_CLI) + " " + args + " > /dev/null 2>&1";
    return std::system(cmd.c_str());
}

Vector perturb(SplitMix64& rng, const Vector& base, double scale)
{
    Vector v = base;
    for (Index j = 0; j < v.size(); ++j) v[j] += scale * (2 * rng.uniform() - 1);
    return v;
}

// ---------------------------------------------------------------------------

std::string design_dimensions(Check& ck)
{
    const auto t0 = std::chrono::steady_clock::now();
    const TableSchema moderate = scenario_schema(Scenario::TableModerate, 1.0);
    const TableSchema large = scenario_schema(Scenario::TableLarge, 1.0);
    const Index p1 = build_table_design(moderate).cols();
    const Index p2 = build_table_design(large).cols();
    const double secs = seconds_since(t0);
    auto levels = [](const TableSchema& s) {
        std::vector<int> l;
        for (const auto& f : s.factors) l.push_back(f.levels);
        return l;
    };
    ck.expect(p1 == 523, "moderate p = " + std::to_string(p1));
    ck.expect(p2 == 8146, "large p = " + std::to_string(p2));
    ck.expect(p1 == oracle::table_columns(levels(moderate), moderate.order), "moderate count disagrees with enumeration");
    ck.expect(p2 == oracle::table_columns(levels(large), large.order), "large count disagrees with enumeration");
    ck.expect(secs < kDesignSeconds, "took " + fmt(secs) + " s");
    return "p = " + std::to_string(p1) + " and " + std::to_string(p2) + " in " + fmt(secs) + " s";
}

std::string oracle_equivalence(Check& ck)
{
    struct Entry {
        Variant v;
        CurvatureChoice w;
        const char* name;
    };
    const std::vector<Entry> roster{
        {Variant::IPS, CurvatureChoice::Bohning, "ips"},
        {Variant::A_IPS, CurvatureChoice::Bohning, "a-ips"},
        {Variant::MM_BINARY, CurvatureChoice::Bohning, "mm-binary"},
        {Variant::GIS, CurvatureChoice::Bohning, "gis"},
        {Variant::MM_GENERAL, CurvatureChoice::Bohning, "mm-general"},
        {Variant::IIS, CurvatureChoice::Bohning, "iis"},
        {Variant::Q_IPS, CurvatureChoice::Bohning, "q-ips/bohning"},
        {Variant::Q_IPS, CurvatureChoice::Spectral, "q-ips/spectral"},
        {Variant::B_IPS, CurvatureChoice::Bohning, "b-ips"},
    };
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0;
    SplitMix64 sizes(77, 0);
    for (int k = 0; k < 10; ++k) {
        const Index rows = 40 + static_cast<Index>(sizes.below(161));
        const Index d = 3 + static_cast<Index>(sizes.below(17));
        auto c = fixture::random_binary(100 + static_cast<std::uint64_t>(k), rows, d);
        const Vector ref = oracle::newton_mle(c.x, c.n, c.q);
        for (const auto& e : roster) {
            SolverConfig cfg = config(e.v, kOracleEps);
            cfg.w_choice = e.w;
            cfg.seed = static_cast<std::uint64_t>(k);
            cfg.default_block_size = 4;
            const FitResult f = fit(c.inst, cfg);
            const double err = inf_norm(f.beta - ref);
            worst = std::max(worst, err);
            ck.expect(err <= kOracleBeta, std::string(e.name) + " instance " + std::to_string(k) + " |dbeta| = " + fmt(err));
            ck.expect(f.trace.termination == Termination::TolReached,
                      std::string(e.name) + " instance " + std::to_string(k) + " " + to_string(f.trace.termination));
        }
    }
    const double secs = seconds_since(t0);
    ck.expect(secs < kOracleSeconds, "took " + fmt(secs) + " s");
    return "10 instances x 9 solvers, max |dbeta| = " + fmt(worst) + ", " + fmt(secs) + " s";
}

std::string descent(Check& ck)
{
    std::vector<std::pair<std::string, fixture::Case>> cases;
    cases.emplace_back("binary", fixture::random_binary(201, 150, 12));
    cases.emplace_back("nonneg", fixture::random_nonneg(202, 150, 8));
    cases.emplace_back("general", fixture::random_general(203, 150, 8));
    cases.emplace_back("table", fixture::three_way(204));
    // Q-IPS and its ridge form are accelerated and not descent methods.
    const std::vector<Variant> monotone{Variant::IPS,      Variant::A_IPS, Variant::X2_IPS,     Variant::MM_BINARY,
                                        Variant::GIS,      Variant::MM_GENERAL, Variant::MM_PARALLEL, Variant::IIS,
                                        Variant::B_IPS,    Variant::NEWTON, Variant::L1_IPS};
    int runs = 0;
    for (const auto& [name, c] : cases) {
        for (Variant v : monotone) {
            SolverConfig cfg = config(v, 1e-8);
            cfg.default_block_size = 3;
            if (v == Variant::L1_IPS) cfg.lambda = 2.0;
            FitResult f;
            try {
                f = fit(c.inst, cfg);
            } catch (const ContractError&) {
                continue; // variant does not apply to this design
            }
            ++runs;
            const auto& r = f.trace.records;
            for (std::size_t k = 1; k < r.size(); ++k) {
                const double tol = kDescent * (1 + std::abs(r[k - 1].objective));
                ck.expect(r[k].objective <= r[k - 1].objective + tol,
                          to_string(v) + " on " + name + " rises at record " + std::to_string(k));
            }
        }
    }

    // G^2 after the intercept step of each IPS sweep
    int sweeps = 0;
    for (const auto& [name, c] : cases) {
        if (c.inst.design().kind() != DesignKind::Binary) continue;
        double prev = INFINITY;
        for (int t = 0; t < 40; ++t) {
            SolverConfig cfg = config(Variant::IPS, 1e-15);
            cfg.max_iters = t;
            Vector mu = t == 0 ? Vector(c.q) : ips_fit(c.inst, cfg).mu;
            mu *= c.n.sum() / mu.sum();
            const double g2 = g_squared(c.n, mu);
            ck.expect(g2 <= prev + kDescent * (1 + std::abs(prev)), "G2 rises on " + name + " at sweep " + std::to_string(t + 1));
            prev = g2;
            ++sweeps;
        }
    }
    return std::to_string(runs) + " solver runs, " + std::to_string(sweeps) + " G2 sweeps";
}

std::string iis_equivalence(Check& ck)
{
    auto c = fixture::random_nonneg(301, 20, 5);
    const Matrix xs = c.x.rightCols(5);
    const std::vector<Vector> literal = oracle::literal_iis(xs, c.n, c.q, Vector::Zero(5), 10);
    SlopeState st = make_slope_state(c.inst, Vector::Zero(5));
    double worst = 0;
    for (int t = 0; t < 10; ++t) {
        iis_step(c.inst, st);
        const double d = inf_norm(st.slope - literal[static_cast<std::size_t>(t)]);
        worst = std::max(worst, d);
        ck.expect(d <= kIisAgreement, "iteration " + std::to_string(t + 1) + " differs by " + fmt(d));
    }
    return "20x6 instance, 10 iterations, max diff " + fmt(worst);
}

std::string majorization(Check& ck)
{
    auto bin = fixture::random_binary(401, 60, 6);
    auto nn = fixture::random_nonneg(402, 60, 6);
    auto gen = fixture::random_general(403, 60, 6);
    const std::vector<std::vector<Index>> blocks{{0, 3}, {1, 6}, {2, 4, 5}};
    const Matrix w = bohning_bound(gen.inst);
    SplitMix64 rng(404, 0);

    using Surrogate = std::function<double(const Coefficients&, const Vector&)>;
    struct Item {
        const char* name;
        const fixture::Case* c;
        Surrogate g;
    };
    const std::vector<Item> items{
        {"g1", &bin, [&](const Coefficients& m, const Vector& b) { return surrogate::g1(bin.inst, m, b); }},
        {"g2", &nn, [&](const Coefficients& m, const Vector& b) { return surrogate::g2(nn.inst, m, b); }},
        {"g3", &gen, [&](const Coefficients& m, const Vector& b) { return surrogate::g3_general(gen.inst, m, b); }},
        {"g4", &nn, [&](const Coefficients& m, const Vector& b) { return surrogate::g4(nn.inst, m, b, blocks); }},
    };
    int violations = 0, points = 0;
    for (const auto& it : items) {
        for (int k = 0; k < 1000; ++k) {
            const Coefficients m = make_coefficients(it.c->inst, perturb(rng, Vector::Zero(7), 0.5));
            const Vector b = perturb(rng, m.beta, std::pow(10.0, -2 + 3 * rng.uniform()));
            const double lm = neg_log_likelihood(it.c->inst, m);
            const double scale = 1 + std::abs(lm);
            const bool touch = std::abs(it.g(m, m.beta) - lm) <= kTouch * scale;
            const bool above = it.g(m, b) >= neg_log_likelihood(it.c->inst, b) - kMajorize * scale;
            violations += !above;
            ck.expect(touch, std::string(it.name) + " misses the likelihood at the anchor");
            ck.expect(above, std::string(it.name) + " below the likelihood at point " + std::to_string(k));
            ++points;
        }
    }
    for (int k = 0; k < 1000; ++k) {
        const Vector s0 = perturb(rng, Vector::Zero(6), 1.0);
        const Vector s = perturb(rng, s0, std::pow(10.0, -2 + 3 * rng.uniform()));
        const double l0 = reparam_objective(gen.inst, s0);
        const double scale = 1 + std::abs(l0);
        const bool touch = std::abs(surrogate::quadratic(gen.inst, s0, s0, w) - l0) <= kTouch * scale;
        const bool above = surrogate::quadratic(gen.inst, s0, s, w) >= reparam_objective(gen.inst, s) - kMajorize * scale;
        violations += !above;
        ck.expect(touch, "quadratic misses the objective at the anchor");
        ck.expect(above, "quadratic below the objective at point " + std::to_string(k));
        ++points;
    }
    return std::to_string(points) + " points, " + std::to_string(violations) + " violations";
}

std::string gradients(Check& ck)
{
    auto c = fixture::random_general(501, 80, 6);
    const Matrix xs = c.x.rightCols(6);
    const double total = c.n.sum();
    auto big_l = [&](const Vector& b) {
        const Vector eta = xs * b;
        const double m = eta.maxCoeff();
        return -c.n.dot(eta) + total * (m + std::log((c.q.array() * (eta.array() - m).exp()).sum()));
    };
    SplitMix64 rng(502, 0);
    double worst = 0;
    for (int k = 0; k < 50; ++k) {
        const Vector beta = perturb(rng, Vector::Zero(7), 1.0);
        const Vector g = gradient(c.inst, make_coefficients(c.inst, beta));
        const Vector fd = oracle::central_difference(
            [&](const Vector& b) { return oracle::poisson_nll(c.x, c.n, c.q, b); }, beta);
        const double e = inf_norm(g - fd) / std::max(1.0, inf_norm(fd));
        worst = std::max(worst, e);
        ck.expect(e <= kGradRel, "l gradient at point " + std::to_string(k) + " rel err " + fmt(e));
    }
    for (int k = 0; k < 50; ++k) {
        const Vector slope = perturb(rng, Vector::Zero(6), 1.0);
        const Vector g = reparam_gradient(c.inst, slope);
        const Vector fd = oracle::central_difference(big_l, slope);
        const double e = inf_norm(g - fd) / std::max(1.0, inf_norm(fd));
        worst = std::max(worst, e);
        ck.expect(e <= kGradRel, "L gradient at point " + std::to_string(k) + " rel err " + fmt(e));
    }
    return "100 points, max rel err " + fmt(worst);
}

std::string margins(Check& ck)
{
    double worst = 0;
    const std::vector<fixture::Case> cases{fixture::three_way(601), fixture::random_binary(602, 120, 10)};
    for (const auto& c : cases) {
        const FitResult f = ips_fit(c.inst, config(Variant::IPS, 1e-11));
        const Vector fitted = c.x.transpose() * f.mu;
        const Vector s = c.x.transpose() * c.n;
        for (Index j = 0; j < s.size(); ++j) {
            const double r = std::abs(fitted[j] - s[j]) / s[j];
            worst = std::max(worst, r);
            ck.expect(r <= kMarginRel, "margin " + std::to_string(j) + " off by " + fmt(r));
        }
    }

    TableSchema schema;
    schema.factors = {{"r", 2}, {"c", 2}};
    schema.order = 1;
    Matrix table(2, 2);
    table << 10, 20, 50, 20;
    const Matrix expect = oracle::independence_table(table);
    Margin rows{{0}, table.rowwise().sum()};
    Margin cols{{1}, table.colwise().sum().transpose()};
    const RakeProblem rp = build_rake_problem(schema, Vector::Ones(4), {rows, cols});
    const FitResult f = ips_fit(rp.instance, config(Variant::IPS, 1e-12));
    const Vector mu = rp.instance.expand(f.mu);
    double rake = 0;
    for (Index i = 0; i < 2; ++i)
        for (Index j = 0; j < 2; ++j) rake = std::max(rake, std::abs(mu[2 * i + j] - expect(i, j)));
    ck.expect(rake <= kRake, "raked table off by " + fmt(rake));
    return "margin rel err " + fmt(worst) + ", raking err " + fmt(rake);
}

std::string l1_correctness(Check& ck)
{
    // Single-coordinate cases with beta_j = 0 and mass a on the column.
    SplitMix64 rng(701, 0);
    int zero = 0, active = 0;
    for (int k = 0; k < 200; ++k) {
        const double a = 0.5 + 10 * rng.uniform();
        const double b = 0.5 + 10 * rng.uniform();
        const double lambda = 5 * rng.uniform();
        bool clamped = false;
        const double beta = l1_threshold_update(0, b, a, lambda, kClamp, clamped);
        if (std::abs(b - a) <= lambda) {
            ++zero;
            ck.expect(beta == 0, "zero branch missed");
        } else {
            ++active;
            const double kkt = a * std::exp(beta) - b + lambda * (beta > 0 ? 1 : -1);
            ck.expect(beta != 0 && std::abs(kkt) <= kThresholdKkt, "active branch residual " + fmt(kkt));
        }
    }

    auto c = fixture::random_binary(702, 100, 10);
    SolverConfig l1 = config(Variant::L1_IPS, 1e-8);
    l1.lambda = 0;
    const FitResult a = l1_ips_fit(c.inst, l1);
    const FitResult b = ips_fit(c.inst, config(Variant::IPS, 1e-8));
    bool same = a.trace.records.size() == b.trace.records.size() && a.beta == b.beta;
    for (std::size_t k = 0; same && k < a.trace.records.size(); ++k) {
        same = a.trace.records[k].objective == b.trace.records[k].objective &&
               a.trace.records[k].rel_grad == b.trace.records[k].rel_grad &&
               a.trace.records[k].work == b.trace.records[k].work;
    }
    ck.expect(same, "lambda = 0 trace differs from IPS");

    PathSpec ps;
    ps.grid_size = 30;
    ps.r_min = 1e-3;
    ps.solver.eps_tol = 1e-10;
    const PathResult path = l1_path(c.inst, ps);
    double worst = 0;
    for (const auto& p : path.points) {
        worst = std::max(worst, static_cast<double>(p.kkt_residual));
        ck.expect(p.kkt_residual <= kPathKkt, "path KKT " + fmt(p.kkt_residual) + " at lambda " + fmt(p.lambda));
    }
    for (double f : {1.0, 1.5, 10.0}) {
        SolverConfig at = config(Variant::L1_IPS, 1e-10);
        at.lambda = f * path.lambda_max;
        const FitResult r = l1_ips_fit(c.inst, at);
        ck.expect((r.beta.tail(10).array() == 0).all(), "support not empty at " + fmt(f) + " lambda_max");
    }
    return std::to_string(zero) + " zero / " + std::to_string(active) + " active cases, path max KKT " + fmt(worst);
}

std::string x2_stationarity(Check& ck)
{
    const std::vector<fixture::Case> cases{fixture::two_by_two(), fixture::three_way(801), fixture::random_binary(802, 60, 6)};
    double worst = 0;
    for (const auto& c : cases) {
        const FitResult f = x2_ips_fit(c.inst, config(Variant::X2_IPS, 1e-12));
        const Vector eq = c.x.transpose() * (f.mu - Vector(c.n.array().square() / f.mu.array()));
        const double r = inf_norm(eq);
        worst = std::max(worst, r);
        ck.expect(r <= kX2Stationary, "estimating equations off by " + fmt(r));
        const auto& rec = f.trace.records;
        for (std::size_t k = 1; k < rec.size(); ++k)
            ck.expect(rec[k].objective <= rec[k - 1].objective * (1 + 1e-12) + 1e-12,
                      "X2 rises at sweep " + std::to_string(rec[k].iter));
    }
    return "max residual " + fmt(worst);
}

std::string linear_rate(Check& ck)
{
    auto c = fixture::random_binary(100, 150, 10);
    ProblemInstance inst = c.inst;
    inst.set_beta_true(oracle::newton_mle(c.x, c.n, c.q));
    const FitResult f = ips_fit(inst, config(Variant::IPS, 1e-11));
    std::vector<double> it, le;
    for (const auto& r : f.trace.records) {
        // stop before the error reaches round-off
        if (!r.est_error || *r.est_error <= 1e-24) break;
        it.push_back(static_cast<double>(r.iter));
        le.push_back(std::log(*r.est_error));
    }
    const std::size_t half = it.size() / 2;
    const std::vector<double> tx(it.begin() + static_cast<long>(half), it.end());
    const std::vector<double> ty(le.begin() + static_cast<long>(half), le.end());
    ck.expect(tx.size() >= 5, "tail has " + std::to_string(tx.size()) + " points");
    if (tx.size() < 2) return "too few points";
    const oracle::LineFit lf = oracle::fit_line(tx, ty);
    ck.expect(lf.slope < 0, "slope " + fmt(lf.slope));
    ck.expect(lf.r2 >= kRateR2, "R2 " + fmt(lf.r2));
    return std::to_string(tx.size()) + " tail sweeps, slope " + fmt(lf.slope) + ", R2 " + fmt(lf.r2);
}

std::string speed_ordering(Check& ck)
{
    ExperimentSpec spec;
    spec.scenario = Scenario::TableModerate;
    spec.scale_factor = 1.0;
    spec.seed = 2024;
    int wins = 0, aok = 0;
    for (int r = 0; r < kSpeedReps; ++r) {
        const ProblemInstance inst = gen_instance(spec, r);
        SolverConfig cfg = config(Variant::IPS, 1e-4);
        const FitResult fi = fit(inst, cfg);
        cfg.variant = Variant::A_IPS;
        cfg.seed = static_cast<std::uint64_t>(r) + 1;
        const FitResult fa = fit(inst, cfg);
        cfg.variant = Variant::B_IPS;
        const FitResult fb = fit(inst, cfg);
        for (const FitResult* f : {&fi, &fa, &fb})
            ck.expect(f->trace.termination == Termination::TolReached,
                      to_string(f->variant) + " replication " + std::to_string(r) + " " + to_string(f->trace.termination));
        wins += fb.wall_seconds < fi.wall_seconds;
        const bool ok = fa.wall_seconds <= kAipsFactor * fi.wall_seconds;
        aok += ok;
        ck.expect(ok, "a-ips " + fmt(fa.wall_seconds) + " s vs ips " + fmt(fi.wall_seconds) + " s in replication " +
                          std::to_string(r));
    }
    ck.expect(wins >= kSpeedWins, "b-ips faster in only " + std::to_string(wins) + " replications");
    return "b-ips faster in " + std::to_string(wins) + "/" + std::to_string(kSpeedReps) + ", a-ips within 2x in " +
           std::to_string(aok) + "/" + std::to_string(kSpeedReps);
}

std::string determinism(Check& ck)
{
    ExperimentSpec spec;
    spec.scenario = Scenario::TableModerate;
    spec.scale_factor = 0.1;
    spec.replications = 3;
    spec.roster = {Variant::IPS, Variant::A_IPS, Variant::B_IPS, Variant::Q_IPS};
    spec.seed = 13;
    const fs::path d1 = fixture::temp_dir("acc_det1"), d2 = fixture::temp_dir("acc_det2");
    write_report(run_experiment(spec), d1);
    spec.jobs = 2;
    write_report(run_experiment(spec), d2);
    int compared = 0;
    for (const char* f : {"ips.csv", "a-ips.csv", "b-ips.csv", "q-ips.csv", "runs.csv"}) {
        ck.expect(fs::exists(d1 / f) && slurp(d1 / f) == slurp(d2 / f), std::string("report file ") + f + " differs");
        ++compared;
    }

    const fs::path d = fixture::temp_dir("acc_cli");
    ck.expect(run_cli("gen table-moderate --scale 0.1 --seed 5 --out " + (d / "inst").string()) == 0, "gen failed");
    const std::string in = "--design " + (d / "inst" / "design.csv").string() + " --counts " +
                           (d / "inst" / "counts.csv").string();
    for (const char* solver : {"a-ips", "b-ips", "mm-parallel"}) {
        for (const char* o : {"x", "y"}) {
            const std::string out = (d / (std::string(solver) + o)).string();
            ck.expect(run_cli("fit " + in + " --solver " + solver + " --seed 3 --eps 1e-6 --out " + out) == 0,
                      std::string("fit ") + solver + " failed");
        }
        const std::string x = slurp(d / (std::string(solver) + "x") / "trace.csv");
        ck.expect(!x.empty() && x == slurp(d / (std::string(solver) + "y") / "trace.csv"),
                  std::string(solver) + " trace.csv differs");
        ++compared;
    }
    for (const char* o : {"bx", "by"})
        ck.expect(run_cli("bench nonneg-small --scale 0.2 --replications 2 --seed 4 --out " + (d / o).string()) == 0,
                  "bench failed");
    for (const auto& e : fs::directory_iterator(d / "bx")) {
        if (e.path().extension() != ".csv") continue;
        ck.expect(slurp(e.path()) == slurp(d / "by" / e.path().filename()), "bench " + e.path().filename().string() + " differs");
        ++compared;
    }
    return std::to_string(compared) + " files byte-identical";
}

} // namespace

int main()
{
    struct Criterion {
        const char* name;
        std::function<std::string(Check&)> run;
    };
    const std::vector<Criterion> criteria{
        {"design dimensions", design_dimensions},
        {"oracle equivalence", oracle_equivalence},
        {"descent", descent},
        {"IIS equivalence", iis_equivalence},
        {"surrogate majorization", majorization},
        {"gradient checks", gradients},
        {"margins and raking", margins},
        {"l1 correctness", l1_correctness},
        {"X2-IPS stationarity", x2_stationarity},
        {"linear rate", linear_rate},
        {"speed ordering", speed_ordering},
        {"determinism", determinism},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Check ck;
        std::string detail;
        try {
            detail = criteria[i].run(ck);
        } catch (const std::exception& e) {
            ck.failures.push_back(std::string("exception: ") + e.what());
        }
        const bool ok = ck.failures.empty();
        failed += !ok;
        std::cout << (ok ? "PASS" : "FAIL") << " criterion " << i + 1 << ": " << criteria[i].name << " (" << detail << ")\n";
        for (std::size_t k = 0; k < ck.failures.size() && k < 10; ++k) std::cout << "    " << ck.failures[k] << "\n";
        if (ck.failures.size() > 10) std::cout << "    ... " << ck.failures.size() - 10 << " more\n";
        std::cout.flush();
    }
    std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << "\n";
    return failed == 0 ? 0 : 1;
}
