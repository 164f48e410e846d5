#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace photoscore {

// Minimal CSV: comma separated, no quoting (identifiers never contain commas).
class CsvTable {
public:
    CsvTable() = default;
    CsvTable(std::vector<std::string> header, std::vector<std::vector<std::string>> rows);

    static CsvTable parse(std::string_view text, std::string_view source = "csv");
    static CsvTable load(const std::filesystem::path& path);

    const std::vector<std::string>& header() const noexcept { return header_; }
    const std::vector<std::vector<std::string>>& rows() const noexcept { return rows_; }
    std::size_t size() const noexcept { return rows_.size(); }

    std::optional<std::size_t> column(std::string_view name) const;
    // Throws Error when the column is missing.
    std::size_t require_column(std::string_view name) const;

    // Empty cell -> nullopt; unparsable -> ParseError (line = row + 2).
    std::optional<double> number(std::size_t row, std::size_t col) const;
    const std::string& cell(std::size_t row, std::size_t col) const { return rows_[row][col]; }

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
    std::string source_ = "csv";
};

// printf("%.6g"), with "inf"/"-inf"/"nan" for non-finite values.
std::string format_real(double v);

}  // namespace photoscore
