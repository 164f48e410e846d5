#include "photoscore/formula.hpp"

#include <cctype>
#include <cmath>

#include "photoscore/stats.hpp"

namespace photoscore {

std::string Term::label() const {
    return transform == Transform::Log ? "log(" + variable + ")" : variable;
}

namespace {

class FormulaParser {
public:
    explicit FormulaParser(std::string_view text) : text_(text) {}

    Formula parse() {
        Formula f;
        f.response = identifier();
        expect('~');
        f.terms.push_back(term());
        skip_space();
        while (pos_ < text_.size()) {
            expect('+');
            f.terms.push_back(term());
            skip_space();
        }
        return f;
    }

private:
    void skip_space() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    static bool ident_start(char c) {
        return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
    }
    static bool ident_char(char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.';
    }

    std::string identifier() {
        skip_space();
        if (pos_ >= text_.size()) throw FormulaError(pos_, "expected identifier, found end of input");
        if (!ident_start(text_[pos_]))
            throw FormulaError(pos_, std::string("expected identifier, found '") + text_[pos_] + "'");
        const std::size_t start = pos_;
        while (pos_ < text_.size() && ident_char(text_[pos_])) ++pos_;
        return std::string(text_.substr(start, pos_ - start));
    }

    void expect(char c) {
        skip_space();
        if (pos_ >= text_.size())
            throw FormulaError(pos_, std::string("expected '") + c + "', found end of input");
        if (text_[pos_] != c)
            throw FormulaError(pos_, std::string("expected '") + c + "', found '" + text_[pos_] + "'");
        ++pos_;
    }

    Term term() {
        skip_space();
        const std::size_t start = pos_;
        std::string name = identifier();
        skip_space();
        if (pos_ < text_.size() && text_[pos_] == '(') {
            if (name != "log") throw FormulaError(start, "unknown function '" + name + "'");
            ++pos_;
            Term t{identifier(), Transform::Log};
            expect(')');
            return t;
        }
        return Term{std::move(name), Transform::Identity};
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

}  // namespace

Formula parse_formula(std::string_view text) {
    Formula f = FormulaParser(text).parse();
    for (std::size_t i = 0; i < f.terms.size(); ++i) {
        if (f.terms[i].variable == f.response)
            throw FormulaError(0, "response '" + f.response + "' reused as a term");
        for (std::size_t j = 0; j < i; ++j)
            if (f.terms[j].variable == f.terms[i].variable)
                throw FormulaError(0, "duplicate term '" + f.terms[i].variable + "'");
    }
    return f;
}

DesignMatrix evaluate_formula(const Formula& f, const CsvTable& table,
                              const FormulaEvalOptions& opts) {
    const std::size_t ycol = table.require_column(f.response);
    std::vector<std::size_t> cols;
    for (const Term& t : f.terms) cols.push_back(table.require_column(t.variable));

    std::vector<std::vector<double>> rows;
    std::vector<int> ys;
    for (std::size_t r = 0; r < table.size(); ++r) {
        const std::optional<double> yv = table.number(r, ycol);
        std::vector<double> values;
        bool complete = yv.has_value();
        for (std::size_t j = 0; j < cols.size() && complete; ++j) {
            const std::optional<double> v = table.number(r, cols[j]);
            if (!v) {
                complete = false;
                break;
            }
            double x = *v;
            if (f.terms[j].transform == Transform::Log) {
                if (opts.count_columns.contains(f.terms[j].variable)) {
                    if (x < 0.0)
                        throw Error("row " + std::to_string(r + 2) + ": log1p of negative " +
                                    f.terms[j].variable);
                    x = std::log1p(x);
                } else {
                    if (!(x > 0.0))
                        throw Error("row " + std::to_string(r + 2) + ": log of non-positive " +
                                    f.terms[j].variable);
                    x = std::log(x);
                }
            }
            values.push_back(x);
        }
        if (!complete) {
            if (opts.drop_incomplete) continue;
            throw Error("row " + std::to_string(r + 2) + ": missing value");
        }
        const double y = *yv;
        if (y != std::round(y)) throw Error("row " + std::to_string(r + 2) + ": response is not an integer");
        rows.push_back(std::move(values));
        ys.push_back(static_cast<int>(y));
    }

    DesignMatrix m;
    for (const Term& t : f.terms) m.names.push_back(t.label());
    m.x.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    m.y.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t j = 0; j < cols.size(); ++j)
            m.x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = rows[r][j];
        m.y(static_cast<Eigen::Index>(r)) = ys[r];
    }
    return m;
}

}  // namespace photoscore
