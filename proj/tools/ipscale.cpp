// ipscale: command-line front end (fit, rake, path, bench, gen).

#include "ipscale/csv.hpp"
#include "ipscale/design.hpp"
#include "ipscale/harness.hpp"
#include "ipscale/io.hpp"
#include "ipscale/model.hpp"
#include "ipscale/solvers.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace ipscale;

namespace {

enum Exit { kOk = 0, kInput = 1, kInternal = 2, kNoConvergence = 3 };

std::string slurp(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::ofstream open_out(const fs::path& p)
{
    std::ofstream out(p, std::ios::binary);
    if (!out) throw InputError("cannot write " + p.string());
    return out;
}

void make_dir(const fs::path& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw InputError("cannot create " + dir.string() + ": " + ec.message());
}

std::vector<std::string> split_list(const std::string& s)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

// --- shared solver flags --------------------------------------------------------

struct SolverFlags {
    std::string solver = "ips";
    double eps = 1e-4;
    double t_max = 600;
    long max_iters = 1'000'000;
    double lambda = 0;
    long block_size = 200;
    std::string block_sizes;
    std::string w = "bohning";
    std::uint64_t seed = 0;
    double clamp = kClamp;
    int jobs = 1;
    std::string clock = "work";

    void add(CLI::App* app, bool with_solver = true)
    {
        if (with_solver) app->add_option("--solver", solver, "Solver variant (ips, a-ips, x2-ips, mm-binary, gis, mm-general, "
                                                            "mm-parallel, iis, q-ips, b-ips, newton, l1-ips, ridge-q-ips)")
                             ->capture_default_str();
        app->add_option("--eps", eps, "Relative-gradient tolerance")->capture_default_str()->check(CLI::PositiveNumber);
        app->add_option("--t-max", t_max, "Wall-clock limit in seconds")->capture_default_str();
        app->add_option("--max-iters", max_iters, "Iteration cap")->capture_default_str()->check(CLI::PositiveNumber);
        app->add_option("--lambda", lambda, "Penalty weight (l1-ips, ridge-q-ips)")->capture_default_str()->check(CLI::NonNegativeNumber);
        app->add_option("--block-size", block_size, "Default block size for b-ips and mm-parallel")->capture_default_str()->check(CLI::PositiveNumber);
        app->add_option("--block-sizes", block_sizes, "Explicit comma-separated block sizes");
        app->add_option("--w", w, "Curvature bound for q-ips: bohning or spectral")->capture_default_str()->check(CLI::IsMember({"bohning", "spectral"}));
        app->add_option("--seed", seed, "Random seed")->capture_default_str();
        app->add_option("--clamp", clamp, "Coefficient clamp for divergent coordinates")->capture_default_str()->check(CLI::PositiveNumber);
        app->add_option("--jobs", jobs, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
        app->add_option("--clock", clock, "Time axis of trace files: work (deterministic) or wall")->capture_default_str()->check(CLI::IsMember({"work", "wall"}));
    }

    SolverConfig config() const
    {
        SolverConfig c;
        c.variant = parse_variant(solver);
        c.eps_tol = eps;
        c.t_max_secs = t_max;
        c.max_iters = max_iters;
        c.lambda = lambda;
        c.default_block_size = block_size;
        for (const auto& s : split_list(block_sizes)) {
            try {
                c.block_sizes.push_back(std::stol(s));
            } catch (const std::exception&) {
                throw InputError("--block-sizes: '" + s + "' is not an integer");
            }
        }
        c.w_choice = w == "spectral" ? CurvatureChoice::Spectral : CurvatureChoice::Bohning;
        c.seed = seed;
        c.clamp = clamp;
        c.jobs = jobs;
        return c;
    }
};

// --- input loading ----------------------------------------------------------------

struct Inputs {
    std::string schema, counts, design;

    void add(CLI::App* app)
    {
        app->add_option("--schema", schema, "Table schema JSON (with --counts)");
        app->add_option("--counts", counts, "Counts CSV: factor level columns + count, or a single count column with --design")
            ->required();
        app->add_option("--design", design, "Design triplet CSV (row,col,value)");
    }
};

struct Loaded {
    std::optional<TableData> table;
    std::optional<ProblemInstance> inst;
    const ProblemInstance& instance() const { return table ? table->instance : *inst; }
};

Loaded load(const Inputs& in)
{
    Loaded l;
    if (!in.schema.empty() == !in.design.empty()) throw InputError("give exactly one of --schema or --design");
    const csv::Table counts = csv::read_file(in.counts);
    if (!in.schema.empty()) {
        l.table = load_table_counts(parse_schema_json(slurp(in.schema)), counts);
    } else {
        l.inst = load_design_counts(csv::read_file(in.design), counts);
    }
    return l;
}

void write_trace(const fs::path& p, const ConvergenceTrace& trace, bool wall)
{
    auto out = open_out(p);
    bool est = !trace.records.empty();
    for (const auto& r : trace.records) est = est && r.est_error.has_value();
    std::vector<std::string> head{"iter", wall ? "time_s" : "work", "objective", "rel_grad"};
    if (est) head.emplace_back("est_err");
    csv::write_row(out, head);
    for (const auto& r : trace.records) {
        std::vector<std::string> row{std::to_string(r.iter), csv::format(wall ? r.wall_seconds : r.work),
                                     csv::format(r.objective), csv::format(r.rel_grad)};
        if (est) row.push_back(csv::format(*r.est_error));
        csv::write_row(out, row);
    }
}

void write_beta(const fs::path& p, const DesignMatrix& x, const Vector& beta)
{
    auto out = open_out(p);
    csv::write_row(out, {"column_label", "estimate"});
    for (Index j = 0; j < beta.size(); ++j)
        csv::write_row(out, {x.column_labels()[static_cast<std::size_t>(j)], csv::format(beta[j])});
}

void write_mu(const fs::path& p, const Loaded& l, const Vector& mu)
{
    auto out = open_out(p);
    if (l.table) {
        std::vector<std::string> head;
        for (const auto& f : l.table->schema.factors) head.push_back(f.name);
        head.emplace_back("mu");
        csv::write_row(out, head);
        const auto& kept = l.table->instance.kept_rows();
        for (std::size_t r = 0; r < kept.size(); ++r) {
            std::vector<std::string> row;
            for (int lv : l.table->schema.cell_levels(l.table->cells[static_cast<std::size_t>(kept[r])]))
                row.push_back(std::to_string(lv + 1));
            row.push_back(csv::format(mu[static_cast<Index>(r)]));
            csv::write_row(out, row);
        }
    } else {
        const Vector full = l.inst->expand(mu);
        csv::write_row(out, {"row", "mu"});
        for (Index i = 0; i < full.size(); ++i) csv::write_row(out, {std::to_string(i), csv::format(full[i])});
    }
}

int exit_for(Termination t) { return t == Termination::TolReached ? kOk : kNoConvergence; }

// --- subcommands --------------------------------------------------------------------

int cmd_fit(const Inputs& in, const SolverFlags& sf, const std::string& out_dir)
{
    const Loaded l = load(in);
    const ProblemInstance& inst = l.instance();
    const SolverConfig cfg = sf.config();
    const FitResult f = fit(inst, cfg);
    make_dir(out_dir);
    const fs::path dir(out_dir);
    write_beta(dir / "beta.csv", inst.design(), f.beta);
    write_mu(dir / "mu.csv", l, f.mu);
    write_trace(dir / "trace.csv", f.trace, sf.clock == "wall");

    const Coefficients c{f.beta, f.mu};
    nlohmann::json s;
    s["schema"] = 1;
    s["solver"] = to_string(f.variant);
    s["termination"] = to_string(f.trace.termination);
    s["iterations"] = f.iterations;
    s["objective"] = f.trace.records.empty() ? 0.0 : f.trace.records.back().objective;
    s["rel_grad"] = f.trace.records.empty() ? 0.0 : f.trace.records.back().rel_grad;
    s["g_squared"] = g_squared(inst, c);
    s["pearson_x2"] = pearson_x2(inst, c);
    s["wall_seconds"] = f.wall_seconds;
    s["warnings"] = f.warnings;
    s["n_rows"] = inst.rows();
    s["n_cols"] = inst.cols();
    s["dropped_columns"] = l.table ? l.table->dropped_columns : std::vector<std::string>{};
    open_out(dir / "summary.json") << s.dump(2) << "\n";
    if (f.trace.termination != Termination::TolReached)
        std::cerr << "ipscale fit: stopped with " << to_string(f.trace.termination) << " at relative gradient "
                  << csv::format(s["rel_grad"].get<double>()) << "\n";
    return exit_for(f.trace.termination);
}

int cmd_rake(const std::string& schema_path, const std::string& seed_path, const std::vector<std::string>& margin_paths,
             const SolverFlags& sf, const std::string& out_dir)
{
    const TableSchema schema = parse_schema_json(slurp(schema_path));
    const Vector seed = load_seed_table(schema, csv::read_file(seed_path));
    std::vector<Margin> margins;
    for (const auto& m : margin_paths) margins.push_back(load_margin(schema, csv::read_file(m)));
    RakeProblem rp = build_rake_problem(schema, seed, margins);

    SolverConfig cfg = sf.config();
    cfg.variant = Variant::IPS;
    const FitResult f = ips_fit(rp.instance, cfg);
    const Scalar residual = max_relative_margin_residual(rp.instance, f.mu);
    const bool clamped = f.has_warning(warning::kDivergentCoordinate);

    make_dir(out_dir);
    const fs::path dir(out_dir);
    const Vector table = rp.instance.expand(f.mu);
    {
        auto out = open_out(dir / "adjusted.csv");
        std::vector<std::string> head;
        for (const auto& fc : schema.factors) head.push_back(fc.name);
        head.emplace_back("value");
        csv::write_row(out, head);
        for (Index cell = 0; cell < table.size(); ++cell) {
            std::vector<std::string> row;
            for (int lv : schema.cell_levels(cell)) row.push_back(std::to_string(lv + 1));
            row.push_back(csv::format(table[cell]));
            csv::write_row(out, row);
        }
    }
    write_trace(dir / "trace.csv", f.trace, sf.clock == "wall");
    nlohmann::json s;
    s["schema"] = 1;
    s["termination"] = to_string(f.trace.termination);
    s["iterations"] = f.iterations;
    s["max_relative_residual"] = residual;
    s["clamped"] = clamped;
    s["wall_seconds"] = f.wall_seconds;
    s["warnings"] = f.warnings;
    open_out(dir / "summary.json") << s.dump(2) << "\n";
    if (clamped) {
        std::cerr << "ipscale rake: targets force some cells to zero (coefficient reached the clamp); worst relative "
                     "margin residual "
                  << csv::format(residual) << "\n";
        return kNoConvergence;
    }
    if (!(residual <= 1e-8)) {
        std::cerr << "ipscale rake: margins not matched; worst relative residual " << csv::format(residual) << "\n";
        return kNoConvergence;
    }
    return kOk;
}

int cmd_path(const Inputs& in, const SolverFlags& sf, int grid, double r_min, double gamma, const std::string& out_dir)
{
    const Loaded l = load(in);
    const ProblemInstance& inst = l.instance();
    PathSpec ps;
    ps.grid_size = grid;
    ps.r_min = r_min;
    ps.gamma = gamma;
    ps.solver = sf.config();
    ps.solver.variant = Variant::L1_IPS;
    const PathResult pr = l1_path(inst, ps);

    make_dir(out_dir);
    const fs::path dir(out_dir);
    bool all_ok = true;
    {
        auto out = open_out(dir / "path.csv");
        csv::write_row(out, {"lambda", "support_size", "deviance", "ebic"});
        for (const auto& p : pr.points) {
            csv::write_row(out, {csv::format(p.lambda), std::to_string(p.support_size), csv::format(p.deviance),
                                 csv::format(p.ebic)});
            all_ok = all_ok && p.termination == Termination::TolReached;
        }
    }
    const PathPoint& sel = pr.points[pr.selected];
    write_beta(dir / "selected.csv", inst.design(), sel.beta);
    nlohmann::json s;
    s["schema"] = 1;
    s["lambda_max"] = pr.lambda_max;
    s["selected_lambda"] = sel.lambda;
    s["selected_support_size"] = sel.support_size;
    s["max_kkt_residual"] = 0.0;
    double kkt = 0;
    for (const auto& p : pr.points) kkt = std::max(kkt, p.kkt_residual);
    s["max_kkt_residual"] = kkt;
    s["all_converged"] = all_ok;
    open_out(dir / "summary.json") << s.dump(2) << "\n";
    if (!all_ok) std::cerr << "ipscale path: some grid points stopped before reaching the tolerance\n";
    return all_ok ? kOk : kNoConvergence;
}

struct BenchFlags {
    std::string scenario;
    std::string spec_file;
    double scale = 0.1;
    bool full_scale = false;
    int replications = 20;
    std::string roster;
    int setting = 1;
    long n = 0, p = 0;
    int grid_points = 101;
};

std::vector<Variant> default_roster(Scenario s)
{
    switch (s) {
    case Scenario::TableModerate: return {Variant::IPS, Variant::A_IPS, Variant::B_IPS};
    case Scenario::TableLarge: return {Variant::A_IPS, Variant::B_IPS};
    case Scenario::NonnegSmall: return {Variant::GIS, Variant::IIS, Variant::Q_IPS};
    case Scenario::NonnegLarge: return {Variant::Q_IPS, Variant::B_IPS, Variant::NEWTON};
    case Scenario::General: return {Variant::NEWTON, Variant::B_IPS};
    case Scenario::L1Path: return {Variant::L1_IPS};
    }
    return {};
}

int cmd_bench(const BenchFlags& bf, const SolverFlags& sf, const std::string& out_dir)
{
    ExperimentSpec spec;
    if (!bf.spec_file.empty()) {
        spec = parse_experiment_json(slurp(bf.spec_file));
    } else {
        if (bf.scenario.empty()) throw InputError("bench needs a scenario or --spec");
        spec.scenario = parse_scenario(bf.scenario);
        spec.scale_factor = bf.full_scale ? 1.0 : bf.scale;
        spec.replications = bf.replications;
        spec.setting = bf.setting;
        spec.n_rows = bf.n;
        spec.n_cols = bf.p;
        spec.seed = sf.seed;
        spec.jobs = sf.jobs;
        spec.grid_points = bf.grid_points;
        spec.clock = sf.clock == "wall" ? ClockKind::Wall : ClockKind::Work;
        spec.solver = sf.config();
        spec.solver.jobs = 1;
        for (const auto& r : split_list(bf.roster)) spec.roster.push_back(parse_variant(r));
        if (spec.roster.empty()) spec.roster = default_roster(spec.scenario);
    }
    spec.validate();
    make_dir(out_dir);
    const fs::path dir(out_dir);
    open_out(dir / "experiment.json") << experiment_to_json(spec) << "\n";

    if (spec.scenario == Scenario::L1Path) {
        auto out = open_out(dir / "paths.csv");
        csv::write_row(out, {"replication", "lambda", "support_size", "deviance", "ebic", "kkt_residual", "selected"});
        PathSpec ps;
        ps.solver.eps_tol = std::min(spec.solver.eps_tol, ps.solver.eps_tol);
        ps.solver.max_iters = spec.solver.max_iters;
        ps.solver.t_max_secs = spec.solver.t_max_secs;
        for (int rep = 0; rep < spec.replications; ++rep) {
            const PathResult pr = l1_path(gen_instance(spec, rep), ps);
            for (std::size_t k = 0; k < pr.points.size(); ++k) {
                const auto& p = pr.points[k];
                csv::write_row(out, {std::to_string(rep), csv::format(p.lambda), std::to_string(p.support_size),
                                     csv::format(p.deviance), csv::format(p.ebic), csv::format(p.kkt_residual),
                                     k == pr.selected ? "1" : "0"});
            }
        }
        return kOk;
    }
    const ExperimentReport report = run_experiment(spec);
    write_report(report, dir);
    for (const auto& c : report.curves)
        if (c.failed > 0)
            std::cerr << "ipscale bench: " << to_string(c.variant) << " failed on " << c.failed
                      << " replication(s); see summary.json\n";
    return kOk;
}

int cmd_gen(const BenchFlags& bf, const SolverFlags& sf, const std::string& out_dir)
{
    ExperimentSpec spec;
    spec.scenario = parse_scenario(bf.scenario);
    spec.scale_factor = bf.full_scale ? 1.0 : bf.scale;
    spec.setting = bf.setting;
    spec.n_rows = bf.n;
    spec.n_cols = bf.p;
    spec.seed = sf.seed;
    spec.roster = {Variant::IPS};
    spec.validate();
    const ProblemInstance inst = gen_instance(spec, 0);
    std::optional<TableSchema> schema;
    if (spec.scenario == Scenario::TableModerate || spec.scenario == Scenario::TableLarge ||
        spec.scenario == Scenario::L1Path)
        schema = scenario_schema(spec.scenario, spec.scale_factor);
    write_instance(inst, out_dir, schema);
    return kOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"ipscale: iterative proportional scaling and related solvers for Poisson log-affine models"};
    app.require_subcommand(1);

    std::string out_dir = ".";
    Inputs fit_in, path_in;
    SolverFlags fit_sf, rake_sf, path_sf, bench_sf, gen_sf;

    auto* fit_cmd = app.add_subcommand("fit", "Fit a model to a counts table or a design + counts");
    fit_in.add(fit_cmd);
    fit_sf.add(fit_cmd);
    fit_cmd->add_option("--out", out_dir, "Output directory")->required();

    std::string rake_schema, rake_seed;
    std::vector<std::string> rake_margins;
    auto* rake_cmd = app.add_subcommand("rake", "Adjust a seed table to prescribed margins");
    rake_cmd->add_option("--schema", rake_schema, "Table schema JSON")->required();
    rake_cmd->add_option("--seed-table", rake_seed, "Seed table CSV (factor columns + value)")->required();
    rake_cmd->add_option("--margin", rake_margins, "Margin CSV (factor columns + target); repeatable")->required();
    rake_sf.eps = 1e-12;
    rake_sf.add(rake_cmd, false);
    rake_cmd->add_option("--out", out_dir, "Output directory")->required();

    int grid = 50;
    double r_min = 1e-3, gamma = 1.0;
    auto* path_cmd = app.add_subcommand("path", "l1 regularization path with EBIC selection");
    path_in.add(path_cmd);
    path_sf.eps = 1e-8;
    path_sf.add(path_cmd, false);
    path_cmd->add_option("--grid", grid, "Number of lambda values")->capture_default_str()->check(CLI::PositiveNumber);
    path_cmd->add_option("--r-min", r_min, "Smallest lambda as a fraction of lambda_max")->capture_default_str();
    path_cmd->add_option("--gamma", gamma, "EBIC gamma")->capture_default_str();
    path_cmd->add_option("--out", out_dir, "Output directory")->required();

    BenchFlags bench_bf, gen_bf;
    auto* bench_cmd = app.add_subcommand("bench", "Run a synthetic experiment and write averaged curves");
    bench_cmd->add_option("scenario", bench_bf.scenario,
                          "table-moderate, table-large, nonneg-small, nonneg-large, general, l1-path");
    bench_cmd->add_option("--spec", bench_bf.spec_file, "Experiment spec JSON (overrides the other flags)");
    bench_cmd->add_option("--scale", bench_bf.scale, "Scale factor in (0,1]")->capture_default_str();
    bench_cmd->add_flag("--full-scale", bench_bf.full_scale, "Use the full problem size (scale 1)");
    bench_cmd->add_option("--replications", bench_bf.replications, "Replications")->capture_default_str();
    bench_cmd->add_option("--roster", bench_bf.roster, "Comma-separated solvers (default depends on scenario)");
    bench_cmd->add_option("--setting", bench_bf.setting, "Coefficient setting for table-moderate (1 or 2)")->capture_default_str();
    bench_cmd->add_option("--n", bench_bf.n, "Rows for Gaussian scenarios (overrides the scaled default)");
    bench_cmd->add_option("--p", bench_bf.p, "Columns incl. intercept for Gaussian scenarios");
    bench_cmd->add_option("--grid-points", bench_bf.grid_points, "Points of the averaged time grid")->capture_default_str();
    bench_sf.add(bench_cmd, false);
    bench_cmd->add_option("--out", out_dir, "Output directory")->required();

    auto* gen_cmd = app.add_subcommand("gen", "Write a synthetic instance (design, counts, true coefficients)");
    gen_cmd->add_option("scenario", gen_bf.scenario, "Scenario name")->required();
    gen_cmd->add_option("--scale", gen_bf.scale, "Scale factor in (0,1]")->capture_default_str();
    gen_cmd->add_flag("--full-scale", gen_bf.full_scale, "Use the full problem size (scale 1)");
    gen_cmd->add_option("--setting", gen_bf.setting, "Coefficient setting for table-moderate")->capture_default_str();
    gen_cmd->add_option("--n", gen_bf.n, "Rows for Gaussian scenarios");
    gen_cmd->add_option("--p", gen_bf.p, "Columns incl. intercept for Gaussian scenarios");
    gen_cmd->add_option("--seed", gen_sf.seed, "Random seed")->capture_default_str();
    gen_cmd->add_option("--out", out_dir, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kInput;
    }

    try {
        if (*fit_cmd) return cmd_fit(fit_in, fit_sf, out_dir);
        if (*rake_cmd) return cmd_rake(rake_schema, rake_seed, rake_margins, rake_sf, out_dir);
        if (*path_cmd) return cmd_path(path_in, path_sf, grid, r_min, gamma, out_dir);
        if (*bench_cmd) return cmd_bench(bench_bf, bench_sf, out_dir);
        if (*gen_cmd) return cmd_gen(gen_bf, gen_sf, out_dir);
    } catch (const InfeasibleError& e) {
        std::cerr << "ipscale: infeasible: " << e.what() << "\n";
        return kNoConvergence;
    } catch (const InputError& e) {
        std::cerr << "ipscale: " << e.what() << "\n";
        return kInput;
    } catch (const ContractError& e) {
        std::cerr << "ipscale: " << e.what() << "\n";
        return kInput;
    } catch (const SizeError& e) {
        std::cerr << "ipscale: " << e.what() << "\n";
        return kInput;
    } catch (const std::exception& e) {
        std::cerr << "ipscale: internal error: " << e.what() << "\n";
        return kInternal;
    }
    return kInternal;
}
