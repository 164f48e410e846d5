#include "photoscore/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

#include <boost/math/special_functions/gamma.hpp>

#include "photoscore/error.hpp"
#include "photoscore/random.hpp"

namespace photoscore {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

void DesignMatrix::validate() const {
    if (x.cols() < 1) throw Error("design matrix has no predictor columns");
    if (static_cast<std::size_t>(x.cols()) != names.size())
        throw Error("design matrix column names do not match columns");
    if (x.rows() != y.size()) throw Error("design matrix response length mismatch");
    if (!x.allFinite()) throw Error("design matrix contains non-finite values");
}

DesignMatrix DesignMatrix::standardized() const {
    DesignMatrix out = *this;
    for (Index j = 0; j < x.cols(); ++j) {
        const double mean = x.col(j).mean();
        const double sd = std::sqrt((x.col(j).array() - mean).square().mean());
        if (!(sd > 0.0)) throw Error("cannot standardize constant column " + names[j]);
        out.x.col(j) = (x.col(j).array() - mean) / sd;
    }
    return out;
}

double logistic_cdf(double t) {
    if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
}

double wald_p(double z) { return std::erfc(std::abs(z) / std::numbers::sqrt2); }

std::string significance_stars(double p) {
    if (p < 0.001) return "***";
    if (p < 0.01) return "**";
    if (p < 0.05) return "*";
    return "";
}

double round_significant(double v, int digits) {
    if (v == 0.0 || !std::isfinite(v)) return v;
    const int magnitude = static_cast<int>(std::ceil(std::log10(std::abs(v))));
    const double scale = std::pow(10.0, digits - magnitude);
    return std::round(v * scale) / scale;
}

namespace {

// log(1 + e^t) without overflow.
double softplus(double t) { return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

double log_cdf(double t) { return -softplus(-t); }
double log_sf(double t) { return -softplus(t); }

Coefficient make_coefficient(std::string name, double estimate, double se) {
    Coefficient c;
    c.name = std::move(name);
    c.estimate = estimate;
    c.se = se;
    c.z = se > 0 ? estimate / se : std::numeric_limits<double>::quiet_NaN();
    c.p = se > 0 ? wald_p(c.z) : std::numeric_limits<double>::quiet_NaN();
    return c;
}

// Solves info * step = gradient for an information matrix that may be
// singular; falls back to a pseudo-inverse over the positive eigenvalues.
VectorXd newton_direction(const MatrixXd& info, const VectorXd& gradient, bool* singular) {
    Eigen::LLT<MatrixXd> llt(info);
    if (llt.info() == Eigen::Success) {
        *singular = false;
        return llt.solve(gradient);
    }
    *singular = true;
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(info);
    const VectorXd& values = eig.eigenvalues();
    const double cutoff = std::max(1e-12, 1e-10 * values.cwiseAbs().maxCoeff());
    VectorXd projected = eig.eigenvectors().transpose() * gradient;
    for (Index i = 0; i < values.size(); ++i)
        projected(i) = values(i) > cutoff ? projected(i) / values(i) : 0.0;
    return eig.eigenvectors() * projected;
}

std::optional<MatrixXd> invert_information(const MatrixXd& info) {
    Eigen::LLT<MatrixXd> llt(info);
    if (llt.info() != Eigen::Success) return std::nullopt;
    MatrixXd inv = llt.solve(MatrixXd::Identity(info.rows(), info.cols()));
    if (!inv.allFinite() || (inv.diagonal().array() <= 0).any()) return std::nullopt;
    return inv;
}

constexpr double kDivergingStep = 1e-3;
// Summing n terms leaves rounding noise in the log-likelihood; a step that
// loses less than this (relative) still counts as an ascent.
constexpr double kLoglikRoundoff = 1e-11;
// Converged when the gain a Newton step predicts is far below what the
// log-likelihood can resolve; the absolute gradient test alone never fires
// for large n.
constexpr double kNegligibleGain = 1e-20;

struct NewtonOutcome {
    VectorXd params;
    double loglik = 0;
    VectorXd gradient;
    MatrixXd hessian;
    int iterations = 0;
    bool gradient_converged = false;
    bool stalled = false;
    // Size of the Newton step still available at the returned point. At a
    // true optimum it vanishes with the gradient; under separation it does not.
    double residual_step = 0;
};

// Damped Newton ascent. `admissible` rejects parameter vectors outside the
// model's domain.
template <class Objective, class Admissible>
NewtonOutcome newton_maximize(VectorXd params, const FitOptions& opts, Objective&& objective,
                              Admissible&& admissible) {
    NewtonOutcome out;
    out.loglik = objective(params, &out.gradient, &out.hessian);
    for (int it = 0; it < opts.max_iterations; ++it) {
        if (out.gradient.cwiseAbs().maxCoeff() < opts.gradient_tolerance) {
            out.gradient_converged = true;
            break;
        }
        bool singular = false;
        const VectorXd step = newton_direction(-out.hessian, out.gradient, &singular);
        if (!singular && out.gradient.dot(step) < kNegligibleGain * std::max(1.0, std::abs(out.loglik))) {
            out.gradient_converged = true;
            break;
        }
        double scale = 1.0;
        bool accepted = false;
        const double floor = out.loglik - kLoglikRoundoff * std::max(1.0, std::abs(out.loglik));
        for (int half = 0; half < 60; ++half, scale *= 0.5) {
            const VectorXd trial = params + scale * step;
            if (!admissible(trial)) continue;
            const double ll = objective(trial, nullptr, nullptr);
            if (std::isfinite(ll) && ll >= floor) {
                params = trial;
                accepted = true;
                break;
            }
        }
        ++out.iterations;
        if (!accepted) {
            out.stalled = true;
            break;
        }
        out.loglik = objective(params, &out.gradient, &out.hessian);
    }
    if (!out.gradient_converged && out.gradient.cwiseAbs().maxCoeff() < opts.gradient_tolerance)
        out.gradient_converged = true;
    bool singular = false;
    out.residual_step = newton_direction(-out.hessian, out.gradient, &singular).cwiseAbs().maxCoeff();
    out.params = std::move(params);
    return out;
}

void require_classes(const Eigen::VectorXi& y, int classes, const char* model) {
    std::vector<long long> counts(static_cast<std::size_t>(classes), 0);
    for (Index i = 0; i < y.size(); ++i) {
        if (y(i) < 0 || y(i) >= classes)
            throw Error(std::string(model) + " response must be in 0.." + std::to_string(classes - 1));
        ++counts[static_cast<std::size_t>(y(i))];
    }
    for (int c = 0; c < classes; ++c)
        if (counts[static_cast<std::size_t>(c)] == 0)
            throw Error(std::string(model) + " response is missing class " + std::to_string(c));
}

}  // namespace

double ordinal_loglik(const DesignMatrix& data, const VectorXd& params, VectorXd* gradient,
                      MatrixXd* hessian) {
    const Index k = data.cols();
    const Index p = k + 2;
    const VectorXd beta = params.head(k);
    const double t1 = params(k);
    const double t2 = params(k + 1);
    if (gradient) gradient->setZero(p);
    if (hessian) hessian->setZero(p, p);
    const VectorXd eta = data.x * beta;

    double ll = 0.0;
    VectorXd v1(p), v2(p), g(p);
    for (Index i = 0; i < data.rows(); ++i) {
        const int y = data.y(i);
        const double u1 = t1 - eta(i);
        const double u2 = t2 - eta(i);
        if (y == 0) {
            ll += log_cdf(u1);
        } else if (y == 2) {
            ll += log_sf(u2);
        } else {
            // F(u2) - F(u1) = F(u2) (1 - F(u1)) (1 - e^(u1 - u2))
            ll += log_cdf(u2) + log_sf(u1) + std::log(-std::expm1(u1 - u2));
        }
        if (!gradient && !hessian) continue;

        // d u / d params: -x for beta, 1 for the cutpoint involved.
        auto direction = [&](VectorXd& v, Index cut) {
            v.head(k) = -data.x.row(i).transpose();
            v(k) = 0.0;
            v(k + 1) = 0.0;
            v(cut) = 1.0;
        };
        if (y == 0) {
            const double F = logistic_cdf(u1);
            direction(v1, k);
            if (gradient) *gradient += (1.0 - F) * v1;
            if (hessian) *hessian -= F * (1.0 - F) * v1 * v1.transpose();
        } else if (y == 2) {
            const double F = logistic_cdf(u2);
            direction(v2, k + 1);
            if (gradient) *gradient -= F * v2;
            if (hessian) *hessian -= F * (1.0 - F) * v2 * v2.transpose();
        } else {
            const double F1 = logistic_cdf(u1);
            const double F2 = logistic_cdf(u2);
            const double f1 = F1 * (1.0 - F1);
            const double f2 = F2 * (1.0 - F2);
            const double prob = F2 * (1.0 - F1) * -std::expm1(u1 - u2);
            direction(v1, k);
            direction(v2, k + 1);
            g = (f2 * v2 - f1 * v1) / prob;
            if (gradient) *gradient += g;
            if (hessian) {
                const double d1 = f1 * (1.0 - 2.0 * F1);
                const double d2 = f2 * (1.0 - 2.0 * F2);
                *hessian += (d2 * v2 * v2.transpose() - d1 * v1 * v1.transpose()) / prob -
                            g * g.transpose();
            }
        }
    }
    return ll;
}

double logistic_loglik(const DesignMatrix& data, const VectorXd& params, VectorXd* gradient,
                       MatrixXd* hessian) {
    const Index k = data.cols();
    const VectorXd eta = (data.x * params.tail(k)).array() + params(0);
    double ll = 0.0;
    if (gradient) gradient->setZero(k + 1);
    if (hessian) hessian->setZero(k + 1, k + 1);
    VectorXd row(k + 1);
    for (Index i = 0; i < data.rows(); ++i) {
        const double e = eta(i);
        ll += data.y(i) * e - softplus(e);
        if (!gradient && !hessian) continue;
        row(0) = 1.0;
        row.tail(k) = data.x.row(i).transpose();
        const double prob = logistic_cdf(e);
        if (gradient) *gradient += (data.y(i) - prob) * row;
        if (hessian) *hessian -= prob * (1.0 - prob) * row * row.transpose();
    }
    return ll;
}

OrdinalFit fit_ordinal(const DesignMatrix& data, const FitOptions& opts) {
    data.validate();
    require_classes(data.y, 3, "ordinal");
    const Index k = data.cols();
    const Index n = data.rows();
    if (n <= k + 2) throw Error("ordinal fit needs more rows than parameters");

    double n0 = 0, n1 = 0;
    for (Index i = 0; i < n; ++i) {
        n0 += data.y(i) == 0;
        n1 += data.y(i) == 1;
    }
    const double c1 = n0 / static_cast<double>(n);
    const double c2 = (n0 + n1) / static_cast<double>(n);
    VectorXd start = VectorXd::Zero(k + 2);
    start(k) = std::log(c1 / (1.0 - c1));
    start(k + 1) = std::log(c2 / (1.0 - c2));

    NewtonOutcome res = newton_maximize(
        start, opts,
        [&](const VectorXd& p, VectorXd* g, MatrixXd* h) { return ordinal_loglik(data, p, g, h); },
        [&](const VectorXd& p) { return p.allFinite() && p(k) < p(k + 1); });

    OrdinalFit fit;
    fit.n = n;
    fit.iterations = res.iterations;
    fit.loglik = res.loglik;
    fit.aic = aic(static_cast<int>(k) + 2, fit.loglik);
    fit.converged = res.gradient_converged;
    if (!res.gradient_converged)
        fit.diagnostic = res.stalled ? "line search failed before the gradient vanished"
                                     : "iteration limit reached";

    const std::optional<MatrixXd> cov = invert_information(-res.hessian);
    if (!cov) {
        fit.converged = false;
        fit.diagnostic = "singular information matrix (collinear predictors or separation)";
    }
    auto se = [&](Index j) {
        return cov ? std::sqrt((*cov)(j, j)) : std::numeric_limits<double>::quiet_NaN();
    };
    for (Index j = 0; j < k; ++j)
        fit.beta.push_back(make_coefficient(data.names[static_cast<std::size_t>(j)], res.params(j), se(j)));
    fit.cut01 = make_coefficient("0|1", res.params(k), se(k));
    fit.cut12 = make_coefficient("1|2", res.params(k + 1), se(k + 1));
    if (fit.converged && res.residual_step > kDivergingStep) {
        fit.converged = false;
        fit.diagnostic = "separation: estimates diverging";
    }
    // an observation fitted with probability 1 only happens under separation
    const VectorXd eta = data.x * res.params.head(k);
    for (Index i = 0; i < n; ++i) {
        const double u1 = res.params(k) - eta(i), u2 = res.params(k + 1) - eta(i);
        double nll = 0.0;
        if (data.y(i) == 0) nll = softplus(-u1);
        else if (data.y(i) == 2) nll = softplus(u2);
        else nll = softplus(-u2) + softplus(u1) - std::log(-std::expm1(u1 - u2));
        if (nll < 1e-15) {
            fit.converged = false;
            fit.diagnostic = "separation: fitted probabilities of 1";
            break;
        }
    }
    return fit;
}

LogisticFit fit_logistic(const DesignMatrix& data, const FitOptions& opts) {
    if (static_cast<std::size_t>(data.x.cols()) != data.names.size())
        throw Error("design matrix column names do not match columns");
    if (data.x.rows() != data.y.size()) throw Error("design matrix response length mismatch");
    if (!data.x.allFinite()) throw Error("design matrix contains non-finite values");
    require_classes(data.y, 2, "logistic");
    const Index k = data.cols();
    const Index n = data.rows();
    if (n <= k + 1) throw Error("logistic fit needs more rows than parameters");

    const double ybar = data.y.cast<double>().mean();
    VectorXd start = VectorXd::Zero(k + 1);
    start(0) = std::log(ybar / (1.0 - ybar));

    NewtonOutcome res = newton_maximize(
        start, opts,
        [&](const VectorXd& p, VectorXd* g, MatrixXd* h) { return logistic_loglik(data, p, g, h); },
        [](const VectorXd& p) { return p.allFinite(); });

    LogisticFit fit;
    fit.n = n;
    fit.iterations = res.iterations;
    fit.loglik = res.loglik;
    fit.aic = aic(static_cast<int>(k) + 1, fit.loglik);
    fit.converged = res.gradient_converged;
    if (!res.gradient_converged)
        fit.diagnostic = res.stalled ? "line search failed before the gradient vanished"
                                     : "iteration limit reached";

    const VectorXd eta = (data.x * res.params.tail(k)).array() + res.params(0);
    if (eta.cwiseAbs().maxCoeff() > 36.0 || (fit.converged && res.residual_step > kDivergingStep)) {
        fit.converged = false;
        fit.diagnostic = "separation: fitted probabilities of 0 or 1";
    }
    const std::optional<MatrixXd> cov = invert_information(-res.hessian);
    if (!cov) {
        fit.converged = false;
        if (fit.diagnostic.empty()) fit.diagnostic = "singular information matrix";
    }
    for (Index j = 0; j <= k; ++j) {
        const double se = cov ? std::sqrt((*cov)(j, j)) : std::numeric_limits<double>::quiet_NaN();
        const std::string name = j == 0 ? "(Intercept)" : data.names[static_cast<std::size_t>(j - 1)];
        fit.beta.push_back(make_coefficient(name, res.params(j), se));
        fit.odds_ratios.push_back(std::exp(res.params(j)));
    }
    return fit;
}

double chi_squared_upper_tail(double x, int dof) {
    if (dof < 1) throw Error("chi-squared needs at least one degree of freedom");
    if (!(x > 0.0)) return 1.0;
    return boost::math::gamma_q(0.5 * dof, 0.5 * x);
}

ChiSquared chi_squared(const std::vector<std::vector<double>>& table) {
    if (table.size() < 2 || table[0].size() < 2)
        throw Error("chi-squared needs at least a 2x2 table");
    const std::size_t r = table.size();
    const std::size_t c = table[0].size();
    std::vector<double> row_sum(r, 0.0), col_sum(c, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < r; ++i) {
        if (table[i].size() != c) throw Error("chi-squared table rows differ in length");
        for (std::size_t j = 0; j < c; ++j) {
            const double v = table[i][j];
            if (!(v >= 0.0) || !std::isfinite(v)) throw Error("chi-squared counts must be non-negative");
            row_sum[i] += v;
            col_sum[j] += v;
            total += v;
        }
    }
    for (std::size_t i = 0; i < r; ++i)
        if (row_sum[i] == 0.0) throw Error("chi-squared table has a zero row sum");
    for (std::size_t j = 0; j < c; ++j)
        if (col_sum[j] == 0.0) throw Error("chi-squared table has a zero column sum");

    ChiSquared out;
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) {
            const double expected = row_sum[i] * col_sum[j] / total;
            const double d = table[i][j] - expected;
            out.statistic += d * d / expected;
        }
    out.dof = static_cast<int>((r - 1) * (c - 1));
    out.p = chi_squared_upper_tail(out.statistic, out.dof);
    return out;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw Error("pearson: vectors differ in length");
    if (x.size() < 2) throw Error("pearson: need at least two observations");
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) throw Error("undefined correlation: constant input");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

namespace {

std::vector<int> stratified_folds(const Eigen::VectorXi& y, int k, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::size_t> zeros, ones;
    for (Index i = 0; i < y.size(); ++i) (y(i) == 1 ? ones : zeros).push_back(static_cast<std::size_t>(i));
    rng.shuffle(zeros);
    rng.shuffle(ones);
    std::vector<int> fold(static_cast<std::size_t>(y.size()));
    std::size_t slot = 0;
    for (const auto* group : {&zeros, &ones})
        for (std::size_t i : *group) fold[i] = static_cast<int>(slot++ % static_cast<std::size_t>(k));
    return fold;
}

DesignMatrix take_rows(const DesignMatrix& data, const std::vector<Index>& rows) {
    DesignMatrix out;
    out.names = data.names;
    out.x.resize(static_cast<Index>(rows.size()), data.cols());
    out.y.resize(static_cast<Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.x.row(static_cast<Index>(i)) = data.x.row(rows[i]);
        out.y(static_cast<Index>(i)) = data.y(rows[i]);
    }
    return out;
}

bool has_both_classes(const DesignMatrix& d) {
    bool zero = false, one = false;
    for (Index i = 0; i < d.y.size(); ++i) (d.y(i) == 1 ? one : zero) = true;
    return zero && one;
}

}  // namespace

double kfold_accuracy(const DesignMatrix& data, int k, std::uint64_t seed) {
    if (k < 2) throw Error("k-fold needs k >= 2");
    if (data.rows() < k) throw Error("k-fold needs at least k rows");
    require_classes(data.y, 2, "k-fold");

    for (int attempt = 0; attempt < 2; ++attempt) {
        const std::vector<int> fold =
            stratified_folds(data.y, k, attempt == 0 ? seed : seed ^ 0x5DEECE66DULL);
        std::vector<DesignMatrix> train, test;
        bool degenerate = false;
        for (int f = 0; f < k && !degenerate; ++f) {
            std::vector<Index> tr, te;
            for (Index i = 0; i < data.rows(); ++i)
                (fold[static_cast<std::size_t>(i)] == f ? te : tr).push_back(i);
            train.push_back(take_rows(data, tr));
            test.push_back(take_rows(data, te));
            degenerate = !has_both_classes(train.back());
        }
        if (degenerate) continue;

        double sum = 0.0;
        for (int f = 0; f < k; ++f) {
            const LogisticFit fit = fit_logistic(train[static_cast<std::size_t>(f)]);
            const DesignMatrix& t = test[static_cast<std::size_t>(f)];
            int correct = 0;
            for (Index i = 0; i < t.rows(); ++i) {
                double eta = fit.beta[0].estimate;
                for (Index j = 0; j < t.cols(); ++j) eta += fit.beta[static_cast<std::size_t>(j + 1)].estimate * t.x(i, j);
                const int predicted = logistic_cdf(eta) > 0.5 ? 1 : 0;
                correct += predicted == t.y(i);
            }
            sum += static_cast<double>(correct) / static_cast<double>(t.rows());
        }
        return sum / k;
    }
    throw Error("k-fold: a training fold lacks one class even after refolding");
}

}  // namespace photoscore
