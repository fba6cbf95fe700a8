#include "ipscale/csv.hpp"
#include "ipscale/design.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <istream>
#include <ostream>

namespace ipscale {

void write_design_triplets(std::ostream& out, const DesignMatrix& x)
{
    out << "row,col,value\n";
    for (Index j = 0; j < x.cols(); ++j)
        x.for_each_in_column(j, [&](Index i, Scalar v) { out << i << ',' << j << ',' << csv::format(v) << '\n'; });
}

DesignMatrix read_design_triplets(std::istream& in, Index n_rows, Index n_cols)
{
    const auto t = csv::read(in, "design");
    const long cr = t.column("row"), cc = t.column("col"), cv = t.column("value");
    if (cr < 0 || cc < 0 || cv < 0) throw InputError("design: header must contain row,col,value");
    Index max_r = -1, max_c = -1;
    struct Entry {
        Index i, j;
        Scalar v;
    };
    std::vector<Entry> entries;
    entries.reserve(t.rows.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const long i = csv::to_long(t, r, static_cast<std::size_t>(cr));
        const long j = csv::to_long(t, r, static_cast<std::size_t>(cc));
        const double v = csv::to_double(t, r, static_cast<std::size_t>(cv));
        if (i < 0 || j < 0) throw InputError("design:" + std::to_string(t.lines[r]) + ": negative index");
        max_r = std::max<Index>(max_r, i);
        max_c = std::max<Index>(max_c, j);
        entries.push_back({i, j, v});
    }
    if (n_rows < 0) n_rows = max_r + 1;
    if (n_cols < 0) n_cols = max_c + 1;
    if (max_r >= n_rows || max_c >= n_cols) throw InputError("design: index exceeds declared dimensions");
    Matrix dense = Matrix::Zero(n_rows, n_cols);
    for (const auto& e : entries) dense(e.i, e.j) += e.v;
    try {
        return DesignMatrix::from_dense(std::move(dense));
    } catch (const ContractError& e) {
        throw InputError(std::string("design: ") + e.what());
    }
}

TableSchema parse_schema_json(const std::string& text)
{
    TableSchema s;
    try {
        const auto j = nlohmann::json::parse(text);
        for (const auto& f : j.at("factors")) s.factors.push_back({f.at("name").get<std::string>(), f.at("levels").get<int>()});
        s.order = j.value("order", 1);
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("schema JSON: ") + e.what());
    }
    s.validate();
    return s;
}

std::string schema_to_json(const TableSchema& schema)
{
    nlohmann::json j;
    j["factors"] = nlohmann::json::array();
    for (const auto& f : schema.factors) j["factors"].push_back({{"name", f.name}, {"levels", f.levels}});
    j["order"] = schema.order;
    return j.dump(2);
}

} // namespace ipscale
