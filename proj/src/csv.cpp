#include "photoscore/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "photoscore/error.hpp"

namespace photoscore {
namespace {

std::vector<std::string> split_line(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.emplace_back(line.substr(start));
            break;
        }
        out.emplace_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return out;
}

}  // namespace

CsvTable::CsvTable(std::vector<std::string> header, std::vector<std::vector<std::string>> rows)
    : header_(std::move(header)), rows_(std::move(rows)) {}

CsvTable CsvTable::parse(std::string_view text, std::string_view source) {
    CsvTable t;
    t.source_ = std::string(source);
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        std::string_view line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) {
            if (nl == text.size()) break;
            continue;
        }
        auto cells = split_line(line);
        if (t.header_.empty()) {
            t.header_ = std::move(cells);
        } else {
            if (cells.size() != t.header_.size())
                throw ParseError(t.source_, line_no,
                                 "expected " + std::to_string(t.header_.size()) + " fields, got " +
                                     std::to_string(cells.size()));
            t.rows_.push_back(std::move(cells));
        }
        if (nl == text.size()) break;
    }
    if (t.header_.empty()) throw Error(t.source_ + ": missing header");
    return t;
}

CsvTable CsvTable::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

std::optional<std::size_t> CsvTable::column(std::string_view name) const {
    for (std::size_t i = 0; i < header_.size(); ++i)
        if (header_[i] == name) return i;
    return std::nullopt;
}

std::size_t CsvTable::require_column(std::string_view name) const {
    if (auto c = column(name)) return *c;
    throw Error(source_ + ": missing column '" + std::string(name) + "'");
}

std::optional<double> CsvTable::number(std::size_t row, std::size_t col) const {
    const std::string& s = rows_[row][col];
    if (s.empty()) return std::nullopt;
    if (s == "inf") return INFINITY;
    if (s == "-inf") return -INFINITY;
    double v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw ParseError(source_, row + 2,
                         "column '" + header_[col] + "': not a number: '" + s + "'");
    return v;
}

std::string format_real(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

}  // namespace photoscore
