#pragma once

#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "photoscore/csv.hpp"
#include "photoscore/error.hpp"

namespace photoscore {

enum class Transform { Identity, Log };

struct Term {
    std::string variable;
    Transform transform = Transform::Identity;

    std::string label() const;  // "x" or "log(x)"
    friend bool operator==(const Term&, const Term&) = default;
};

// response ~ term + term ...
struct Formula {
    std::string response;
    std::vector<Term> terms;
};

class FormulaError : public Error {
public:
    FormulaError(std::size_t offset, const std::string& message)
        : Error("formula error at offset " + std::to_string(offset) + ": " + message),
          offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

// FORMULA := ident "~" TERM ("+" TERM)* ; TERM := ident | "log(" ident ")"
Formula parse_formula(std::string_view text);

struct DesignMatrix;

struct FormulaEvalOptions {
    // log(x) on these columns means log(1 + x) (counts that may be zero);
    // every other log(x) requires x > 0.
    std::set<std::string, std::less<>> count_columns = {"days", "views"};
    // Rows with an empty cell in any used column are skipped instead of
    // raising an error.
    bool drop_incomplete = true;
};

// Builds a design matrix (no intercept column) and integer response.
DesignMatrix evaluate_formula(const Formula& f, const CsvTable& table,
                              const FormulaEvalOptions& opts = {});

}  // namespace photoscore
