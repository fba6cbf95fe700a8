#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace ipscale::csv {

/// Header plus data rows; line numbers are 1-based positions in the source.
struct Table {
    std::string source;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> lines;

    /// Column position by header name, or -1.
    long column(const std::string& name) const;
};

/// Parses comma-separated text with a mandatory header. Blank lines are
/// skipped; every row must have as many fields as the header. Throws
/// InputError with a line-numbered message otherwise.
Table read(std::istream& in, const std::string& source = "<csv>");
Table read_file(const std::string& path);

double to_double(const Table& t, std::size_t row, std::size_t col);
long to_long(const Table& t, std::size_t row, std::size_t col);

/// 17 significant digits, so values round-trip exactly.
std::string format(double value);

/// Writes `header` then rows, comma separated.
void write_row(std::ostream& out, const std::vector<std::string>& fields);

} // namespace ipscale::csv
