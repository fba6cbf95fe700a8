#include "fixtures.hpp"
#include "oracles.hpp"

#include "ipscale/csv.hpp"
#include "ipscale/io.hpp"
#include "ipscale/solvers.hpp"

#include <doctest.h>

#include <sstream>

using namespace ipscale;

namespace {

csv::Table table(const std::string& text, const std::string& name = "t.csv")
{
    std::istringstream in(text);
    return csv::read(in, name);
}

TableSchema two_by_two()
{
    TableSchema s;
    s.factors = {{"r", 2}, {"c", 2}};
    s.order = 1;
    return s;
}

std::string error_of(const std::function<void()>& f)
{
    try {
        f();
    } catch (const std::exception& e) {
        return e.what();
    }
    return "";
}

} // namespace

TEST_CASE("CSV reader")
{
    const csv::Table t = table("a,b\n1,2\n\n3,4\n");
    CHECK(t.header == std::vector<std::string>{"a", "b"});
    CHECK(t.rows.size() == 2);
    CHECK(t.lines[1] == 4);
    CHECK(t.column("b") == 1);
    CHECK(t.column("z") == -1);
    CHECK(csv::to_double(t, 1, 0) == 3.0);
    CHECK(error_of([] { table("a,b\n1\n"); }).find("t.csv:2") != std::string::npos);
    CHECK_THROWS_AS(table(""), InputError);
    const csv::Table bad = table("a\nx1\n");
    CHECK(error_of([&] { csv::to_double(bad, 0, 0); }).find(":2") != std::string::npos);
    CHECK(std::stod(csv::format(0.1)) == 0.1);
    CHECK(std::stod(csv::format(1.0 / 3)) == 1.0 / 3);
}

TEST_CASE("counts table loader")
{
    const TableData d = load_table_counts(two_by_two(), table("r,c,count\n2,2,20\n1,1,10\n1,2,20\n2,1,50\n"));
    CHECK(d.cells == std::vector<Index>{0, 1, 2, 3});
    CHECK(d.instance.counts() == (Vector(4) << 10, 20, 50, 20).finished());
    CHECK(d.dropped_columns.empty());

    // partial table: unobserved cells are left out
    const TableData p = load_table_counts(two_by_two(), table("r,c,count\n1,1,4\n2,1,5\n2,2,6\n"));
    CHECK(p.instance.rows() == 3);

    const TableData z = load_table_counts(two_by_two(), table("r,c,count\n1,1,4\n2,1,5\n"));
    CHECK(z.dropped_columns.size() == 1);
    CHECK(z.instance.cols() == 2);

    CHECK_THROWS_AS(load_table_counts(two_by_two(), table("r,c,count\n1,3,4\n")), InputError);
    CHECK_THROWS_AS(load_table_counts(two_by_two(), table("r,c,count\n1,1,4\n1,1,5\n")), InputError);
    CHECK_THROWS_AS(load_table_counts(two_by_two(), table("r,count\n1,4\n")), InputError);
    CHECK_THROWS_AS(load_table_counts(two_by_two(), table("r,c,count\n1,1,-4\n")), InputError);
    CHECK_THROWS_AS(load_table_counts(two_by_two(), table("r,c,count,extra\n1,1,4,0\n")), InputError);
}

TEST_CASE("design plus counts loader")
{
    const ProblemInstance inst =
        load_design_counts(table("row,col,value\n0,0,1\n1,0,1\n1,1,0.5\n"), table("count\n3\n4\n"));
    CHECK(inst.rows() == 2);
    CHECK(inst.cols() == 2);
    CHECK(inst.suff_stats() == (Vector(2) << 7, 2).finished());
    CHECK_THROWS_AS(load_design_counts(table("row,col,value\n0,0,1\n1,0,1\n"), table("count\n3\n")), InputError);
}

TEST_CASE("uniform-seed raking gives the independence table")
{
    const TableSchema s = two_by_two();
    const Vector seed = load_seed_table(s, table("r,c,value\n1,1,1\n1,2,1\n2,1,1\n2,2,1\n"));
    const Margin rows = load_margin(s, table("r,target\n1,3\n2,1\n"));
    const Margin cols = load_margin(s, table("c,target\n1,2\n2,2\n"));
    const RakeProblem rp = build_rake_problem(s, seed, {rows, cols});
    SolverConfig cfg;
    cfg.eps_tol = 1e-12;
    const FitResult f = ips_fit(rp.instance, cfg);
    const Vector r = rows.targets, c = cols.targets;
    const Matrix expect = r * c.transpose() / r.sum();
    const Vector mu = rp.instance.expand(f.mu);
    for (Index i = 0; i < 2; ++i)
        for (Index j = 0; j < 2; ++j) CHECK(std::abs(mu[2 * i + j] - expect(i, j)) <= 1e-10);
    CHECK(std::abs(expect(0, 0) - 1.5) < 1e-15);
    CHECK(std::abs(expect(1, 1) - 0.5) < 1e-15);
    CHECK(max_relative_margin_residual(rp.instance, f.mu) <= 1e-10);
}

TEST_CASE("raking to the seed's own margins is a fixed point")
{
    const TableSchema s = two_by_two();
    const Vector seed = (Vector(4) << 1, 2, 3, 4).finished();
    Margin rows{{0}, (Vector(2) << 3, 7).finished()};
    Margin cols{{1}, (Vector(2) << 4, 6).finished()};
    const RakeProblem rp = build_rake_problem(s, seed, {rows, cols});
    SolverConfig cfg;
    cfg.eps_tol = 1e-12;
    const FitResult f = ips_fit(rp.instance, cfg);
    CHECK((rp.instance.expand(f.mu) - seed).lpNorm<Eigen::Infinity>() <= 1e-10);
}

TEST_CASE("infeasible raking problems")
{
    const TableSchema s = two_by_two();
    const Vector seed = Vector::Ones(4);
    Margin rows{{0}, (Vector(2) << 3, 1).finished()};
    Margin cols{{1}, (Vector(2) << 2, 3).finished()};
    CHECK_THROWS_AS(build_rake_problem(s, seed, {rows, cols}), InfeasibleError);

    // positive target on a margin cell with no seed mass
    const Vector holes = (Vector(4) << 1, 1, 0, 0).finished();
    Margin r2{{0}, (Vector(2) << 2, 2).finished()};
    CHECK_THROWS_AS(build_rake_problem(s, holes, {r2}), InfeasibleError);

    CHECK_THROWS_AS(load_margin(s, table("r,target\n1,3\n")), InputError);
    CHECK_THROWS_AS(load_margin(s, table("x,target\n1,3\n")), InputError);
}
