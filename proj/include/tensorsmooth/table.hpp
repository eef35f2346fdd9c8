#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tensorsmooth/linalg.hpp"

namespace tensorsmooth {

/// Named numeric columns of equal length.
class Table {
public:
    Table() = default;

    std::size_t rows() const noexcept { return rows_; }
    std::size_t column_count() const noexcept { return names_.size(); }
    const std::vector<std::string>& names() const noexcept { return names_; }
    bool has(std::string_view name) const noexcept;

    /// Throws InputError naming the column when it is absent.
    std::span<const double> column(std::string_view name) const;
    std::span<const double> column(std::size_t index) const { return columns_.at(index); }

    /// Adds or replaces a column; the first column fixes the row count.
    void set(std::string name, Vector values);

private:
    std::vector<std::string> names_;
    std::vector<Vector> columns_;
    std::size_t rows_ = 0;
};

/// Comma separated, header row required, '.' decimal point.  Errors name the
/// line and column.
Table read_csv(std::istream& in);
Table read_csv_file(const std::string& path);

/// Shortest representation that parses back to the same double.
std::string format_double(double v);

void write_csv(std::ostream& out, const Table& table);
void write_csv_file(const std::string& path, const Table& table);

}  // namespace tensorsmooth
