#include "tensorsmooth/table.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "tensorsmooth/errors.hpp"

namespace tensorsmooth {

bool Table::has(std::string_view name) const noexcept {
    for (const auto& n : names_)
        if (n == name) return true;
    return false;
}

std::span<const double> Table::column(std::string_view name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
        if (names_[i] == name) return columns_[i];
    throw InputError("column '" + std::string(name) + "' not found in data");
}

void Table::set(std::string name, Vector values) {
    if (names_.empty()) rows_ = values.size();
    if (values.size() != rows_)
        throw DimensionError("column '" + name + "' has " + std::to_string(values.size()) +
                             " rows, table has " + std::to_string(rows_));
    for (std::size_t i = 0; i < names_.size(); ++i)
        if (names_[i] == name) {
            columns_[i] = std::move(values);
            return;
        }
    names_.push_back(std::move(name));
    columns_.push_back(std::move(values));
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = line.find(',', start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

}  // namespace

Table read_csv(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> names;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
        if (trim(line).empty()) continue;
        for (auto f : split(line)) {
            if (f.size() >= 2 && f.front() == '"' && f.back() == '"') f = f.substr(1, f.size() - 2);
            if (f.empty()) throw InputError("CSV line " + std::to_string(line_no) + ": empty column name");
            for (const auto& n : names)
                if (n == f) throw InputError("CSV header: duplicate column '" + std::string(f) + "'");
            names.emplace_back(f);
        }
        break;
    }
    if (names.empty()) throw InputError("CSV input has no header row");

    std::vector<Vector> cols(names.size());
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split(line);
        if (fields.size() != names.size())
            throw InputError("CSV line " + std::to_string(line_no) + ": expected " +
                             std::to_string(names.size()) + " fields, found " +
                             std::to_string(fields.size()));
        for (std::size_t c = 0; c < fields.size(); ++c) {
            std::string_view f = fields[c];
            if (!f.empty() && f.front() == '+') f.remove_prefix(1);
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
            if (f.empty() || ec != std::errc() || ptr != f.data() + f.size())
                throw InputError("CSV line " + std::to_string(line_no) + ", column '" + names[c] +
                                 "': cannot parse '" + std::string(fields[c]) + "' as a number");
            cols[c].push_back(v);
        }
    }
    Table t;
    for (std::size_t c = 0; c < names.size(); ++c) t.set(std::move(names[c]), std::move(cols[c]));
    return t;
}

Table read_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open data file '" + path + "'");
    return read_csv(in);
}

std::string format_double(double v) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

void write_csv(std::ostream& out, const Table& table) {
    const auto& names = table.names();
    for (std::size_t c = 0; c < names.size(); ++c) out << (c ? "," : "") << names[c];
    out << '\n';
    std::string line;
    for (std::size_t i = 0; i < table.rows(); ++i) {
        line.clear();
        for (std::size_t c = 0; c < names.size(); ++c) {
            if (c) line += ',';
            line += format_double(table.column(c)[i]);
        }
        line += '\n';
        out << line;
    }
}

void write_csv_file(const std::string& path, const Table& table) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    write_csv(out, table);
    if (!out) throw IoError("write to '" + path + "' failed");
}

}  // namespace tensorsmooth
