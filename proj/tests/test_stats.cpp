#include <doctest.h>

#include <cmath>

#include "photoscore/csv.hpp"
#include "photoscore/error.hpp"
#include "photoscore/formula.hpp"
#include "photoscore/random.hpp"
#include "photoscore/stats.hpp"

using namespace photoscore;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

DesignMatrix simulate_ordinal(int n, const std::vector<double>& beta, double t1, double t2, std::uint64_t seed) {
    Rng rng(seed);
    DesignMatrix d;
    for (std::size_t j = 0; j < beta.size(); ++j) d.names.push_back("x" + std::to_string(j));
    d.x.resize(n, static_cast<Eigen::Index>(beta.size()));
    d.y.resize(n);
    for (int i = 0; i < n; ++i) {
        double eta = 0;
        for (std::size_t j = 0; j < beta.size(); ++j) {
            d.x(i, static_cast<Eigen::Index>(j)) = rng.normal();
            eta += beta[j] * d.x(i, static_cast<Eigen::Index>(j));
        }
        // latent logistic draw
        const double u = rng.uniform(1e-12, 1.0 - 1e-12);
        const double latent = eta + std::log(u / (1 - u));
        d.y(i) = latent <= t1 ? 0 : (latent <= t2 ? 1 : 2);
    }
    return d;
}

DesignMatrix simulate_logistic(int n, double b0, const std::vector<double>& beta, std::uint64_t seed) {
    Rng rng(seed);
    DesignMatrix d;
    for (std::size_t j = 0; j < beta.size(); ++j) d.names.push_back("x" + std::to_string(j));
    d.x.resize(n, static_cast<Eigen::Index>(beta.size()));
    d.y.resize(n);
    for (int i = 0; i < n; ++i) {
        double eta = b0;
        for (std::size_t j = 0; j < beta.size(); ++j) {
            d.x(i, static_cast<Eigen::Index>(j)) = rng.normal();
            eta += beta[j] * d.x(i, static_cast<Eigen::Index>(j));
        }
        d.y(i) = rng.bernoulli(1.0 / (1.0 + std::exp(-eta))) ? 1 : 0;
    }
    return d;
}

template <class F>
VectorXd numeric_gradient(F&& f, const VectorXd& p) {
    VectorXd g(p.size());
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        const double h = 1e-5 * std::max(1.0, std::abs(p(i)));
        VectorXd a = p, b = p;
        a(i) += h;
        b(i) -= h;
        g(i) = (f(a) - f(b)) / (2 * h);
    }
    return g;
}

bool close_rel(double a, double b, double tol) {
    return std::abs(a - b) <= tol * std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

}  // namespace

TEST_CASE("parse formula") {
    const Formula f = parse_formula("sold ~ log(views) + log(price) + quality");
    CHECK(f.response == "sold");
    REQUIRE(f.terms.size() == 3);
    CHECK(f.terms[0] == Term{"views", Transform::Log});
    CHECK(f.terms[1] == Term{"price", Transform::Log});
    CHECK(f.terms[2] == Term{"quality", Transform::Identity});
    CHECK(parse_formula("  y~x  ").terms.size() == 1);
    CHECK(parse_formula("y ~ log ( x )").terms[0].transform == Transform::Log);
}

TEST_CASE("formula errors") {
    CHECK_THROWS_WITH_AS(parse_formula("sold ~ sold"), doctest::Contains("reused"), FormulaError);
    try {
        parse_formula("sold ~");
        FAIL("expected error");
    } catch (const FormulaError& e) {
        CHECK(e.offset() == 6);
    }
    CHECK_THROWS_AS(parse_formula("y ~ x + x"), FormulaError);
    CHECK_THROWS_AS(parse_formula("y ~ x + log(x)"), FormulaError);
    CHECK_THROWS_AS(parse_formula("y ~ exp(x)"), FormulaError);
    CHECK_THROWS_AS(parse_formula("y x"), FormulaError);
    CHECK_THROWS_AS(parse_formula("y ~ x +"), FormulaError);
    CHECK_THROWS_AS(parse_formula("y ~ log(x"), FormulaError);
    CHECK_THROWS_AS(parse_formula(""), FormulaError);
}

TEST_CASE("formula evaluation") {
    const CsvTable t = CsvTable::parse("sold,views,price,q\n1,0,2.5,0.1\n0,9,1,\n0,3,4,0.3\n");
    const DesignMatrix d = evaluate_formula(parse_formula("sold ~ log(views) + log(price) + q"), t);
    REQUIRE(d.rows() == 2);
    CHECK(d.names[0] == "log(views)");
    CHECK(d.x(0, 0) == 0.0);
    CHECK(d.x(0, 1) == doctest::Approx(std::log(2.5)));
    CHECK(d.x(1, 0) == doctest::Approx(std::log(4.0)));
    CHECK(d.y(0) == 1);
    const CsvTable bad = CsvTable::parse("y,p\n1,0\n");
    CHECK_THROWS_AS(evaluate_formula(parse_formula("y ~ log(p)"), bad), Error);
    CHECK_THROWS_AS(evaluate_formula(parse_formula("y ~ missing"), bad), Error);
}

TEST_CASE("odds ratios") {
    CHECK(std::exp(0.16) == doctest::Approx(1.1735).epsilon(1e-4));
    CHECK(std::exp(0.22) == doctest::Approx(1.2461).epsilon(1e-4));
    const DesignMatrix d = simulate_logistic(500, 0.3, {0.16, 0.22}, 3);
    const LogisticFit fit = fit_logistic(d);
    for (std::size_t j = 0; j < fit.beta.size(); ++j)
        CHECK(fit.odds_ratios[j] == std::exp(fit.beta[j].estimate));
    CHECK(fit.aic == 2.0 * fit.parameter_count() - 2.0 * fit.loglik);
}

TEST_CASE("ordinal gradient and hessian match finite differences") {
    const DesignMatrix d = simulate_ordinal(300, {0.8, -0.4}, -0.5, 0.7, 4);
    Rng rng(77);
    for (int t = 0; t < 10; ++t) {
        VectorXd p(4);
        p << rng.normal(), rng.normal(), rng.uniform(-2, 0), rng.uniform(0.1, 2);
        VectorXd g;
        MatrixXd h;
        ordinal_loglik(d, p, &g, &h);
        const VectorXd ng = numeric_gradient([&](const VectorXd& q) { return ordinal_loglik(d, q); }, p);
        for (Eigen::Index i = 0; i < 4; ++i) CHECK(close_rel(g(i), ng(i), 1e-5));
        for (Eigen::Index i = 0; i < 4; ++i) {
            const VectorXd nh = numeric_gradient(
                [&](const VectorXd& q) {
                    VectorXd gg;
                    ordinal_loglik(d, q, &gg);
                    return gg(i);
                },
                p);
            for (Eigen::Index j = 0; j < 4; ++j) CHECK(close_rel(h(i, j), nh(j), 1e-4));
        }
    }
}

TEST_CASE("logistic gradient matches finite differences") {
    const DesignMatrix d = simulate_logistic(300, -0.2, {0.5, 1.0, -0.3}, 5);
    Rng rng(1);
    for (int t = 0; t < 10; ++t) {
        VectorXd p(4);
        for (Eigen::Index i = 0; i < 4; ++i) p(i) = rng.normal();
        VectorXd g;
        logistic_loglik(d, p, &g);
        const VectorXd ng = numeric_gradient([&](const VectorXd& q) { return logistic_loglik(d, q); }, p);
        for (Eigen::Index i = 0; i < 4; ++i) CHECK(close_rel(g(i), ng(i), 1e-5));
    }
}

TEST_CASE("ordinal recovery") {
    const DesignMatrix d = simulate_ordinal(2000, {2.0, -1.5}, -1.0, 1.0, 42);
    const OrdinalFit fit = fit_ordinal(d);
    REQUIRE(fit.converged);
    const double truth[] = {2.0, -1.5};
    for (int j = 0; j < 2; ++j) {
        CHECK(std::abs(fit.beta[static_cast<std::size_t>(j)].estimate - truth[j]) < 0.15);
        CHECK(std::abs(fit.beta[static_cast<std::size_t>(j)].estimate - truth[j]) < 3 * fit.beta[static_cast<std::size_t>(j)].se);
    }
    CHECK(std::abs(fit.cut01.estimate + 1.0) < 3 * fit.cut01.se);
    CHECK(std::abs(fit.cut12.estimate - 1.0) < 3 * fit.cut12.se);
    CHECK(fit.cut01.estimate < fit.cut12.estimate);
    CHECK(fit.aic == 2.0 * fit.parameter_count() - 2.0 * fit.loglik);

    VectorXd p(4), g;
    p << fit.beta[0].estimate, fit.beta[1].estimate, fit.cut01.estimate, fit.cut12.estimate;
    ordinal_loglik(d, p, &g);
    CHECK(g.cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("ordinal loglik beats the null model") {
    const DesignMatrix d = simulate_ordinal(400, {0.3, 0.0}, -0.5, 0.5, 8);
    const OrdinalFit fit = fit_ordinal(d);
    DesignMatrix zero = d;
    zero.x.setZero();
    const OrdinalFit null_fit = fit_ordinal(zero);
    CHECK(fit.loglik >= null_fit.loglik - 1e-9);
}

TEST_CASE("zeroed predictors reproduce class marginals") {
    DesignMatrix d = simulate_ordinal(500, {1.0}, -0.3, 0.9, 6);
    d.x.setZero();
    const OrdinalFit fit = fit_ordinal(d);
    double c0 = 0, c1 = 0;
    for (Eigen::Index i = 0; i < d.rows(); ++i) {
        c0 += d.y(i) == 0;
        c1 += d.y(i) <= 1;
    }
    CHECK(std::abs(logistic_cdf(fit.cut01.estimate) - c0 / 500.0) < 1e-6);
    CHECK(std::abs(logistic_cdf(fit.cut12.estimate) - c1 / 500.0) < 1e-6);
}

TEST_CASE("ordinal rescaling a predictor") {
    DesignMatrix d = simulate_ordinal(600, {0.7, -0.4}, -0.5, 0.6, 10);
    const OrdinalFit a = fit_ordinal(d);
    d.x.col(0) *= 10.0;
    const OrdinalFit b = fit_ordinal(d);
    CHECK(b.beta[0].estimate == doctest::Approx(a.beta[0].estimate * 0.1).epsilon(1e-6));
    CHECK(std::abs(a.loglik - b.loglik) < 1e-6);
    CHECK(std::abs(a.aic - b.aic) < 1e-6);
}

TEST_CASE("ordinal null predictor is rarely significant") {
    int quiet = 0;
    for (std::uint64_t s = 0; s < 200; ++s) {
        const DesignMatrix d = simulate_ordinal(300, {0.0}, -0.5, 0.5, 1000 + s);
        const OrdinalFit fit = fit_ordinal(d);
        quiet += std::abs(fit.beta[0].estimate) < 2 * fit.beta[0].se;
    }
    CHECK(quiet >= 180);
}

TEST_CASE("ordinal errors and diagnostics") {
    DesignMatrix d = simulate_ordinal(100, {1.0}, -0.5, 0.5, 2);
    for (Eigen::Index i = 0; i < d.rows(); ++i)
        if (d.y(i) == 2) d.y(i) = 1;
    CHECK_THROWS_AS(fit_ordinal(d), Error);

    DesignMatrix coll = simulate_ordinal(200, {1.0, 0.5}, -0.5, 0.5, 3);
    coll.x.col(1) = coll.x.col(0) * 2.0;
    const OrdinalFit bad = fit_ordinal(coll);
    CHECK_FALSE(bad.converged);
    CHECK_FALSE(bad.diagnostic.empty());

    DesignMatrix sep = simulate_ordinal(90, {1.0}, -0.5, 0.5, 3);
    for (Eigen::Index i = 0; i < sep.rows(); ++i) sep.x(i, 0) = sep.y(i) * 10.0 + 0.01 * static_cast<double>(i % 3);
    CHECK_FALSE(fit_ordinal(sep).converged);
}

TEST_CASE("logistic recovery on n=5000") {
    const std::vector<double> beta = {0.5, -0.3, 0.16};
    const DesignMatrix d = simulate_logistic(5000, -0.4, beta, 77);
    const LogisticFit fit = fit_logistic(d);
    REQUIRE(fit.converged);
    CHECK(fit.beta[0].name == "(Intercept)");
    CHECK(std::abs(fit.beta[0].estimate + 0.4) < 3 * fit.beta[0].se);
    for (std::size_t j = 0; j < beta.size(); ++j)
        CHECK(std::abs(fit.beta[j + 1].estimate - beta[j]) < 3 * fit.beta[j + 1].se);
    VectorXd p(4), g;
    for (int j = 0; j < 4; ++j) p(j) = fit.beta[static_cast<std::size_t>(j)].estimate;
    logistic_loglik(d, p, &g);
    CHECK(g.cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("intercept-only logistic on balanced data") {
    DesignMatrix d;
    d.x.resize(100, 0);
    d.y.resize(100);
    for (int i = 0; i < 100; ++i) d.y(i) = i % 2;
    const LogisticFit fit = fit_logistic(d);
    CHECK(std::abs(fit.beta[0].estimate) < 1e-8);
    CHECK(fit.converged);
}

TEST_CASE("logistic converges on large n despite gradient round-off") {
    // two groups with log-odds 0 and ln(54/46)
    const int per = 100000;
    DesignMatrix d;
    d.names = {"g"};
    d.x.resize(2 * per, 1);
    d.y.resize(2 * per);
    for (int i = 0; i < per; ++i) {
        d.x(i, 0) = 0;
        d.y(i) = i < per / 2;
        d.x(per + i, 0) = 1;
        d.y(per + i) = i < per * 54 / 100;
    }
    const LogisticFit fit = fit_logistic(d);
    CHECK(fit.converged);
    CHECK(fit.iterations < 10);
    CHECK(fit.beta[0].estimate == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(fit.beta[1].estimate == doctest::Approx(std::log(54.0 / 46.0)).epsilon(1e-9));
}

TEST_CASE("logistic separation is flagged") {
    DesignMatrix d;
    d.names = {"x"};
    d.x.resize(40, 1);
    d.y.resize(40);
    for (int i = 0; i < 40; ++i) {
        d.x(i, 0) = i - 19.5;
        d.y(i) = i >= 20;
    }
    const LogisticFit fit = fit_logistic(d);
    CHECK_FALSE(fit.converged);
    CHECK(fit.diagnostic.find("separation") != std::string::npos);
}

// Upper tail of chi-square(1) by Simpson integration of its density after
// the substitution x = t^2, which removes the 1/sqrt(x) singularity.
double chi1_tail_by_integration(double x0) {
    // P(X > x0) = 1 - 2 * integral_0^sqrt(x0) phi(t) dt
    const double upper = std::sqrt(x0);
    const int n = 20000;
    const double h = upper / n;
    double s = 0;
    for (int i = 0; i <= n; ++i) {
        const double t = i * h;
        const double w = (i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2);
        s += w * std::exp(-t * t / 2) / std::sqrt(2 * M_PI);
    }
    return 1.0 - 2.0 * s * h / 3.0;
}

TEST_CASE("chi squared") {
    const ChiSquared c = chi_squared({{10, 20}, {20, 10}});
    const double a = 10, b = 20, cc = 20, dd = 10, n = 60;
    const double closed = n * std::pow(a * dd - b * cc, 2) / ((a + b) * (cc + dd) * (a + cc) * (b + dd));
    CHECK(c.statistic == doctest::Approx(closed).epsilon(1e-12));
    CHECK(c.statistic == doctest::Approx(6.6667).epsilon(1e-4));
    CHECK(c.dof == 1);

    const ChiSquared same = chi_squared({{5, 7, 9}, {5, 7, 9}});
    CHECK(same.statistic == doctest::Approx(0.0));
    CHECK(same.p == 1.0);

    const double oracle = chi1_tail_by_integration(6.63);
    CHECK(std::abs(oracle - 0.0100) < 0.0005);
    CHECK(chi_squared_upper_tail(6.63, 1) == doctest::Approx(oracle).epsilon(1e-6));

    CHECK_THROWS_AS(chi_squared({{0, 0}, {1, 2}}), Error);
    CHECK_THROWS_AS(chi_squared({{1, 0}, {2, 0}}), Error);
}

TEST_CASE("chi squared is transpose invariant") {
    Rng rng(3);
    for (int t = 0; t < 20; ++t) {
        std::vector<std::vector<double>> m(3, std::vector<double>(4));
        for (auto& r : m)
            for (auto& v : r) v = 1 + static_cast<double>(rng.below(30));
        std::vector<std::vector<double>> tr(4, std::vector<double>(3));
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 4; ++j) tr[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        CHECK(chi_squared(m).statistic == doctest::Approx(chi_squared(tr).statistic).epsilon(1e-12));
    }
}

TEST_CASE("pearson") {
    CHECK(pearson({1, 2, 3, 4}, {5, 7, 9, 11}) == doctest::Approx(1.0));
    CHECK(pearson({1, 2, 3}, {-1, -2, -3}) == doctest::Approx(-1.0));
    CHECK(pearson({1, 2, 3}, {1, 3, 2}) == 0.5);
    CHECK_THROWS_WITH_AS(pearson({1, 1, 1}, {1, 2, 3}), doctest::Contains("undefined"), Error);
    Rng rng(1);
    std::vector<double> x(50), y(50);
    for (int i = 0; i < 50; ++i) {
        x[static_cast<std::size_t>(i)] = rng.normal();
        y[static_cast<std::size_t>(i)] = rng.normal();
    }
    CHECK(pearson(x, x) == doctest::Approx(1.0));
    CHECK(std::abs(pearson(x, y)) <= 1.0);
}

TEST_CASE("kfold accuracy") {
    DesignMatrix sep;
    sep.names = {"x"};
    sep.x.resize(200, 1);
    sep.y.resize(200);
    Rng rng(5);
    for (int i = 0; i < 200; ++i) {
        sep.y(i) = i % 2;
        sep.x(i, 0) = (sep.y(i) ? 1.0 : -1.0) * rng.uniform(0.5, 2.0);
    }
    CHECK(kfold_accuracy(sep, 10, 42) >= 0.99);
    CHECK(kfold_accuracy(sep, 10, 42) == kfold_accuracy(sep, 10, 42));

    int inside = 0;
    for (std::uint64_t s = 0; s < 10; ++s) {
        DesignMatrix null_d = simulate_logistic(2000, 0.0, {0.0, 0.0}, 500 + s);
        const double acc = kfold_accuracy(null_d, 10, s);
        inside += acc >= 0.45 && acc <= 0.55;
    }
    CHECK(inside >= 9);

    DesignMatrix tiny = sep;
    tiny.x.conservativeResize(5, 1);
    tiny.y.conservativeResize(5);
    CHECK_THROWS_AS(kfold_accuracy(tiny, 10, 1), Error);
}

TEST_CASE("helpers") {
    CHECK(significance_stars(0.0005) == "***");
    CHECK(significance_stars(0.005) == "**");
    CHECK(significance_stars(0.03) == "*");
    CHECK(significance_stars(0.2) == "");
    CHECK(round_significant(0.000123456, 4) == doctest::Approx(0.0001235));
    CHECK(round_significant(98765.4, 4) == doctest::Approx(98770));
    CHECK(wald_p(0.0) == 1.0);
    CHECK(wald_p(1.959963984540054) == doctest::Approx(0.05).epsilon(1e-9));
}

TEST_CASE("csv numbers") {
    const CsvTable t = CsvTable::parse("a,b\n1.5,\ninf,x\n");
    CHECK(*t.number(0, 0) == 1.5);
    CHECK_FALSE(t.number(0, 1).has_value());
    CHECK(std::isinf(*t.number(1, 0)));
    CHECK_THROWS_AS(t.number(1, 1), ParseError);
    CHECK(format_real(1.0 / 3.0) == "0.333333");
    CHECK(format_real(2.0) == "2");
}
