#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace photoscore {

struct DesignMatrix {
    std::vector<std::string> names;
    Eigen::MatrixXd x;  // rows x names.size()
    Eigen::VectorXi y;

    Eigen::Index rows() const noexcept { return x.rows(); }
    Eigen::Index cols() const noexcept { return x.cols(); }
    void validate() const;
    // Centers and scales each column to unit population sd.
    DesignMatrix standardized() const;
};

struct Coefficient {
    std::string name;
    double estimate = 0;
    double se = 0;
    double z = 0;
    double p = 1;
};

// logit P(y <= j | x) = theta_j - x.beta, j in {0|1, 1|2}.
struct OrdinalFit {
    std::vector<Coefficient> beta;
    Coefficient cut01;
    Coefficient cut12;
    double loglik = 0;
    double aic = 0;
    long long n = 0;
    int iterations = 0;
    bool converged = false;
    std::string diagnostic;

    int parameter_count() const noexcept { return static_cast<int>(beta.size()) + 2; }
};

struct LogisticFit {
    std::vector<Coefficient> beta;  // beta[0] is "(Intercept)"
    std::vector<double> odds_ratios;
    double loglik = 0;
    double aic = 0;
    long long n = 0;
    int iterations = 0;
    bool converged = false;
    std::string diagnostic;

    int parameter_count() const noexcept { return static_cast<int>(beta.size()); }
};

struct FitOptions {
    int max_iterations = 100;
    double gradient_tolerance = 1e-8;
};

// Newton-Raphson on the exact log-likelihood. Requires all three classes and
// n > k; singular information or separation -> converged = false.
OrdinalFit fit_ordinal(const DesignMatrix& data, const FitOptions& opts = {});
// Newton-Raphson/IRLS with an intercept prepended. Requires both classes.
LogisticFit fit_logistic(const DesignMatrix& data, const FitOptions& opts = {});

// Log-likelihood and its gradient in the packed parameter order used by the
// fitters: ordinal (beta..., theta01, theta12); logistic (intercept, beta...).
double ordinal_loglik(const DesignMatrix& data, const Eigen::VectorXd& params,
                      Eigen::VectorXd* gradient = nullptr, Eigen::MatrixXd* hessian = nullptr);
double logistic_loglik(const DesignMatrix& data, const Eigen::VectorXd& params,
                       Eigen::VectorXd* gradient = nullptr, Eigen::MatrixXd* hessian = nullptr);

inline double aic(int k, double loglik) { return 2.0 * k - 2.0 * loglik; }

double wald_p(double z);
double logistic_cdf(double t);
// "***" p<.001, "**" p<.01, "*" p<.05, "" otherwise.
std::string significance_stars(double p);
// Rounds to `digits` significant digits.
double round_significant(double v, int digits);

struct ChiSquared {
    double statistic = 0;
    int dof = 0;
    double p = 1;
};

// Pearson chi-squared test of independence; rows x cols counts.
ChiSquared chi_squared(const std::vector<std::vector<double>>& table);
// Upper tail of the chi-square distribution, Q(dof/2, x/2).
double chi_squared_upper_tail(double x, int dof);

// Sample Pearson correlation. Throws Error for constant input.
double pearson(const std::vector<double>& x, const std::vector<double>& y);

// Stratified k-fold accuracy of fit_logistic with a p > 0.5 decision.
double kfold_accuracy(const DesignMatrix& data, int k = 10, std::uint64_t seed = 42);

}  // namespace photoscore
