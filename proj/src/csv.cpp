#include "ipscale/csv.hpp"

#include "ipscale/types.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>

namespace ipscale::csv {

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.push_back(trim(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start)));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

[[noreturn]] void fail(const Table& t, std::size_t line, const std::string& what)
{
    throw InputError(t.source + ":" + std::to_string(line) + ": " + what);
}

} // namespace

long Table::column(const std::string& name) const
{
    for (std::size_t k = 0; k < header.size(); ++k)
        if (header[k] == name) return static_cast<long>(k);
    return -1;
}

Table read(std::istream& in, const std::string& source)
{
    Table t;
    t.source = source;
    std::string line;
    std::size_t n = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++n;
        if (trim(line).empty()) continue;
        auto fields = split(line);
        if (!have_header) {
            t.header = std::move(fields);
            for (const auto& h : t.header)
                if (h.empty()) fail(t, n, "empty header field");
            have_header = true;
            continue;
        }
        if (fields.size() != t.header.size())
            fail(t, n, "expected " + std::to_string(t.header.size()) + " fields, found " + std::to_string(fields.size()));
        t.rows.push_back(std::move(fields));
        t.lines.push_back(n);
    }
    if (!have_header) throw InputError(source + ": missing header line");
    return t;
}

Table read_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path);
    return read(in, path);
}

double to_double(const Table& t, std::size_t row, std::size_t col)
{
    const auto& s = t.rows[row][col];
    if (s.empty()) fail(t, t.lines[row], "empty value in column '" + t.header[col] + "'");
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size() || errno == ERANGE)
        fail(t, t.lines[row], "not a number: '" + s + "' in column '" + t.header[col] + "'");
    return v;
}

long to_long(const Table& t, std::size_t row, std::size_t col)
{
    const auto& s = t.rows[row][col];
    char* end = nullptr;
    errno = 0;
    const long v = std::strtol(s.c_str(), &end, 10);
    if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE)
        fail(t, t.lines[row], "not an integer: '" + s + "' in column '" + t.header[col] + "'");
    return v;
}

std::string format(double value)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

void write_row(std::ostream& out, const std::vector<std::string>& fields)
{
    for (std::size_t k = 0; k < fields.size(); ++k) {
        if (k) out << ',';
        out << fields[k];
    }
    out << '\n';
}

} // namespace ipscale::csv
