// One line per acceptance criterion; exit status is nonzero if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "photoscore/annotation.hpp"
#include "photoscore/classify.hpp"
#include "photoscore/codec.hpp"
#include "photoscore/detect.hpp"
#include "photoscore/features_global.hpp"
#include "photoscore/random.hpp"
#include "photoscore/segment.hpp"
#include "photoscore/stats.hpp"
#include "photoscore/synth.hpp"

#ifndef PHOTOSCORE_CLI
#error "PHOTOSCORE_CLI must point at the photoscore executable"
#endif

namespace fs = std::filesystem;
using namespace photoscore;

namespace {

struct Check {
    std::vector<std::string> failures;
    void expect(bool ok, const std::string& what) {
        if (!ok) failures.push_back(what);
    }
};

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

// 1 ------------------------------------------------------------------------

// Binary predictor whose two groups have log-odds 0 and `beta`, so the
// fitted slope is beta up to count rounding.
DesignMatrix two_group_data(double beta, int per_group) {
    const int ones_g1 = static_cast<int>(std::lround(per_group / (1.0 + std::exp(-beta))));
    DesignMatrix d;
    d.names = {"quality"};
    d.x.resize(2 * per_group, 1);
    d.y.resize(2 * per_group);
    for (int i = 0; i < per_group; ++i) {
        d.x(i, 0) = 0.0;
        d.y(i) = i < per_group / 2 ? 1 : 0;
        d.x(per_group + i, 0) = 1.0;
        d.y(per_group + i) = i < ones_g1 ? 1 : 0;
    }
    return d;
}

void criterion_odds_ratio(Check& c) {
    const std::pair<double, double> cases[] = {{0.16, 1.1735}, {0.22, 1.2461}};
    for (const auto& [beta, expected_or] : cases) {
        const LogisticFit fit = fit_logistic(two_group_data(beta, 100000));
        c.expect(fit.converged, "fit did not converge for beta " + num(beta));
        const double b = fit.beta[1].estimate;
        const double orat = fit.odds_ratios[1];
        c.expect(std::abs(b - beta) < 1e-4, "slope " + num(b) + " != " + num(beta));
        c.expect(orat == std::exp(b), "odds ratio is not exp(beta)");
        c.expect(std::abs(orat - expected_or) < 5e-4, "odds ratio " + num(orat) + " vs " + num(expected_or));
        c.expect(std::round(orat * 100) == std::round(expected_or * 100), "odds ratio differs at 2 decimals");
        c.expect(std::abs(std::exp(beta) - expected_or) < 5e-5, "exp(" + num(beta) + ") arithmetic");
    }
}

// 2 ------------------------------------------------------------------------

void criterion_label_smoothing(Check& c) {
    for (int cls = 0; cls < 3; ++cls) {
        const double l = smoothing_loss({{0, 0, 0}}, cls, 0.05);
        // 1.15354 is (1+eps)ln3 = 1.1535429.. printed to 5 decimals
        c.expect(std::round(l * 1e5) == 115354.0, "uniform loss " + num(l));
        c.expect(std::abs(l - 1.05 * std::log(3.0)) < 1e-12, "uniform loss vs (1+eps)ln3");
    }
    Rng rng(2024);
    for (int t = 0; t < 1000; ++t) {
        const Logits l{{rng.normal(0, 4), rng.normal(0, 4), rng.normal(0, 4)}};
        const int cls = static_cast<int>(rng.below(3));
        const double m = std::max({l.x[0], l.x[1], l.x[2]});
        double s = 0;
        for (double v : l.x) s += std::exp(v - m);
        const double nll = m + std::log(s) - l.x[static_cast<std::size_t>(cls)];
        if (std::abs(smoothing_loss(l, cls, 0.0) - nll) > 1e-12) {
            c.expect(false, "eps=0 differs from NLL at trial " + std::to_string(t));
            break;
        }
    }
}

// 3 ------------------------------------------------------------------------

void criterion_ordinal_recovery(Check& c) {
    const std::vector<double> beta = {2.0, -1.5, 0.5};
    const double t1 = -1.0, t2 = 1.0;
    const int n = 2000;
    Rng rng(42);
    DesignMatrix d;
    d.names = {"x1", "x2", "x3"};
    d.x.resize(n, 3);
    d.y.resize(n);
    for (int i = 0; i < n; ++i) {
        double eta = 0;
        for (int j = 0; j < 3; ++j) {
            d.x(i, j) = rng.normal();
            eta += beta[static_cast<std::size_t>(j)] * d.x(i, j);
        }
        const double u = rng.uniform(1e-12, 1 - 1e-12);
        const double latent = eta + std::log(u / (1 - u));
        d.y(i) = latent <= t1 ? 0 : (latent <= t2 ? 1 : 2);
    }
    const OrdinalFit fit = fit_ordinal(d);
    c.expect(fit.converged, "not converged: " + fit.diagnostic);
    std::vector<std::pair<Coefficient, double>> params;
    for (int j = 0; j < 3; ++j) params.push_back({fit.beta[static_cast<std::size_t>(j)], beta[static_cast<std::size_t>(j)]});
    params.push_back({fit.cut01, t1});
    params.push_back({fit.cut12, t2});
    for (const auto& [coef, truth] : params) {
        const double err = std::abs(coef.estimate - truth);
        c.expect(err <= 0.15, coef.name + " off by " + num(err));
        c.expect(err <= 3 * coef.se, coef.name + " outside 3 SE");
    }
    Eigen::VectorXd p(5), g;
    for (int j = 0; j < 3; ++j) p(j) = fit.beta[static_cast<std::size_t>(j)].estimate;
    p(3) = fit.cut01.estimate;
    p(4) = fit.cut12.estimate;
    const double ll = ordinal_loglik(d, p, &g);
    c.expect(g.cwiseAbs().maxCoeff() < 1e-6, "gradient at optimum " + num(g.cwiseAbs().maxCoeff()));
    c.expect(ll == fit.loglik, "reported loglik differs from evaluation");
    c.expect(fit.aic == 2.0 * 5 - 2.0 * fit.loglik, "AIC identity");
}

// 4 ------------------------------------------------------------------------

void criterion_grabcut(Check& c) {
    int good = 0;
    for (std::uint64_t s = 0; s < 20; ++s) {
        const TwoRegionScene scene = make_two_region_scene(64, 64, 1000 + s);
        const GrabCutResult r = grabcut_traced(render_scene(scene.scene), scene.seed_box);
        if (mask_iou(r.mask, scene_mask(scene.scene)) >= 0.95) ++good;
        for (std::size_t t = 1; t < r.energy.size(); ++t)
            if (r.energy[t] > r.energy[t - 1]) {
                c.expect(false, "energy increased on scene " + std::to_string(s));
                break;
            }
    }
    c.expect(good >= 18, "IoU >= 0.95 on " + std::to_string(good) + "/20");
}

// 5 ------------------------------------------------------------------------

void criterion_features(Check& c) {
    c.expect(std::abs(global_features(Image(10, 10, Rgb{1, 1, 1})).brightness - 1.0) < 1e-12, "white brightness");
    const GlobalFeatures u = global_features(Image(10, 10, Rgb{0.4, 0.7, 0.2}));
    c.expect(u.contrast == 0.0 && u.dynamic_range == 0.0, "uniform contrast");
    c.expect(std::abs(global_features(Image(1000, 2000)).resolution - 2.0) < 1e-12, "resolution 2.0");
    c.expect(std::abs(luminance({0, 1, 0}) - 0.6) < 1e-15 && std::abs(luminance({1, 0, 0}) - 0.3) < 1e-15,
             "luminance weights");
    Image half(10, 10, Rgb{0, 0, 0});
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 10; ++x) half.at(x, y) = {1, 1, 1};
    const GlobalFeatures h = global_features(half);
    c.expect(std::abs(h.contrast - 1) < 1e-15 && std::abs(h.dynamic_range - 1) < 1e-15 &&
                 std::abs(h.brightness - 0.5) < 1e-15,
             "half black/white");

    const std::vector<BoundingBox> box = {{10, 20, 70, 40}};
    const ObjectFeatures o = object_features(box, 100, 60);
    c.expect(*o.left_space == 10 && *o.right_space == 30, "spaces");
    c.expect(std::abs(*o.x_asymmetry - 0.2) < 1e-15, "x_asymmetry 0.2");
    const std::vector<BoundingBox> centered = {{20, 10, 80, 50}};
    const ObjectFeatures oc = object_features(centered, 100, 60);
    c.expect(*oc.x_asymmetry == 0.0 && *oc.y_asymmetry == 0.0, "centered asymmetry");
    c.expect(!object_features({}, 100, 60).has_detection, "no boxes");

    Image img(100, 100, Rgb{1, 1, 1});
    Mask m(100, 100);
    for (int y = 0; y < 50; ++y)
        for (int x = 0; x < 50; ++x) {
            m.set(x, y, Region::Foreground);
            img.at(x, y) = {0.1, 0.1, 0.1};
        }
    const RegionalFeatures r = regional_features(img, m);
    c.expect(std::abs(r.fgbg_area_ratio - 1.0 / 3.0) < 1e-12, "area ratio 0.3333");
    c.expect(*r.bg_lightness == 0.0 && *r.bg_nonuniformity == 0.0, "white background lightness 0");
    const RegionalFeatures rb = regional_features(Image(100, 100, Rgb{0, 0, 0}), m);
    c.expect(std::abs(*rb.bg_lightness - 1.0) < 1e-12, "black background lightness 1");
}

// 6 ------------------------------------------------------------------------

void criterion_annotation(Check& c) {
    SynthSpec spec;
    spec.n_images = 500;
    spec.width = 16;
    spec.height = 16;
    const SyntheticCorpus s = generate_synthetic_corpus(spec, 42);
    const auto z = standardize_raters(s.corpus.all_ratings());
    const auto scores = aggregate_image_scores(z);
    const auto kept = filter_by_disagreement(scores, 0.6);
    c.expect(kept.size() == static_cast<std::size_t>(std::floor(0.6 * static_cast<double>(scores.size()) + 1e-9)),
             "kept " + std::to_string(kept.size()) + " of " + std::to_string(scores.size()));
    c.expect(kept.size() * 10 == scores.size() * 6, "exactly 60% of 500");

    std::map<std::string, bool> keep_ids;
    for (const auto& k : kept) keep_ids[k.image_id] = true;
    std::vector<StandardizedRating> retained;
    for (const auto& r : z)
        if (keep_ids.count(r.image_id)) retained.push_back(r);
    const double before = mean_pairwise_pearson(z).mean_rho;
    const double after = mean_pairwise_pearson(retained).mean_rho;
    c.expect(after > before, "rho " + num(before) + " -> " + num(after));

    int prev = 0;
    for (int i = 0; i < 10000; ++i) {
        const int l = static_cast<int>(discretize(-3.0 + 6.0 * i / 9999.0));
        if (l < prev) {
            c.expect(false, "discretize not monotone");
            break;
        }
        prev = l;
    }
}

// 7 ------------------------------------------------------------------------

void criterion_detection(Check& c) {
    const BoundingBox a{0, 0, 10, 10};
    c.expect(iou(a, a) == 1.0, "identical iou");
    c.expect(iou(a, {20, 20, 30, 30}) == 0.0, "disjoint iou");
    c.expect(iou(a, {5, 0, 15, 10}) == 50.0 / 150.0, "iou 0.3333");

    const GroundTruthSet gt = {{"img", {{0, 0, 10, 10}, {50, 50, 60, 60}}}};
    const DetectionSet det = {{"img", {{{0, 0, 10, 10}, 0.9}, {{80, 80, 90, 90}, 0.8}, {{50, 50, 60, 60}, 0.7}}}};
    // hand PR: ranks give (P,R) = (1,.5), (.5,.5), (2/3,1)
    const double oracle = 1.0 * 0.5 + (2.0 / 3.0) * 0.5;
    const double ap = map50(det, gt);
    c.expect(std::abs(ap - oracle) < 1e-6 && std::abs(ap - 0.8333) < 1e-4, "AP " + num(ap));

    const std::vector<BoxPair> pairs = {{a, a}, {a, {5, 0, 15, 10}}, {{0, 0, 20, 10}, {0, 0, 10, 10}}};
    const auto kept = agreement_filter(pairs, 0.5);
    c.expect(kept.size() == 2, "agreement filter kept " + std::to_string(kept.size()));
}

// 8 ------------------------------------------------------------------------

double chi1_tail_simpson(double x0) {
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

void criterion_stats(Check& c) {
    const ChiSquared chi = chi_squared({{10, 20}, {20, 10}});
    c.expect(std::abs(chi.statistic - 6.6667) < 1e-4 && chi.dof == 1, "chi2 statistic " + num(chi.statistic));
    const double p = chi_squared_upper_tail(6.63, 1);
    const double oracle = chi1_tail_simpson(6.63);
    c.expect(std::abs(p - 0.0100) <= 0.0005, "p(6.63) " + num(p));
    c.expect(std::abs(p - oracle) <= 0.0005, "p vs integration oracle " + num(oracle));
    c.expect(pearson({1, 2, 3}, {1, 3, 2}) == 0.5, "pearson 0.5");

    DesignMatrix sep;
    sep.names = {"x"};
    sep.x.resize(300, 1);
    sep.y.resize(300);
    Rng rng(9);
    for (int i = 0; i < 300; ++i) {
        sep.y(i) = i % 2;
        sep.x(i, 0) = (sep.y(i) ? 1 : -1) * rng.uniform(0.2, 3.0);
    }
    const double acc_sep = kfold_accuracy(sep, 10, 42);
    c.expect(acc_sep >= 0.99, "separable cv " + num(acc_sep));
    c.expect(kfold_accuracy(sep, 10, 42) == acc_sep, "cv not deterministic");

    DesignMatrix null_d;
    null_d.names = {"a", "b"};
    null_d.x.resize(2000, 2);
    null_d.y.resize(2000);
    for (int i = 0; i < 2000; ++i) {
        null_d.x(i, 0) = rng.normal();
        null_d.x(i, 1) = rng.normal();
        null_d.y(i) = i % 2;
    }
    const double acc_null = kfold_accuracy(null_d, 10, 42);
    c.expect(acc_null >= 0.45 && acc_null <= 0.55, "null cv " + num(acc_null));
    c.expect(kfold_accuracy(null_d, 10, 42) == acc_null, "null cv not deterministic");
}

// 9 ------------------------------------------------------------------------

int run(const std::string& cmd) {
    const int status = std::system((cmd + " 2>>cli_stderr.log").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::map<std::string, std::vector<std::uint8_t>> snapshot(const fs::path& dir) {
    std::map<std::string, std::vector<std::uint8_t>> out;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file() && e.path().filename() != "cli_stderr.log")
            out[fs::relative(e.path(), dir).string()] = read_file(e.path());
    return out;
}

void pipeline(Check& c, const fs::path& dir) {
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string cli = PHOTOSCORE_CLI;
    const std::string cd = "cd '" + dir.string() + "' && ";
    const std::vector<std::string> steps = {
        "synth --n 200 --seed 42 --out corpus",
        "features extract --manifest corpus/manifest.jsonl --segment --threads 1 --seed 42 --out features.csv",
        "annotate --manifest corpus/manifest.jsonl --out labels.csv --summary annotate.json",
        "fit ordinal --features features.csv --labels labels.csv --out ordinal.json",
        "train --features features.csv --labels labels.csv --seed 42 --out model.json",
        "score --model model.json --features features.csv --out logits.csv",
        "eval forced-choice --scores logits.csv --labels labels.csv --out forced_choice.json",
    };
    for (const std::string& s : steps) {
        const int code = run(cd + "'" + cli + "' " + s);
        if (code != 0) {
            c.expect(false, "'" + s.substr(0, s.find(" --")) + "' exited " + std::to_string(code));
            return;
        }
    }
}

void criterion_end_to_end(Check& c) {
    const fs::path root = fs::temp_directory_path() / "photoscore_acceptance";
    pipeline(c, root / "a");
    if (!c.failures.empty()) return;
    pipeline(c, root / "b");
    if (!c.failures.empty()) return;
    const auto a = snapshot(root / "a");
    const auto b = snapshot(root / "b");
    c.expect(a.size() == b.size() && a.size() > 200, "output file sets differ");
    for (const auto& [name, bytes] : a) {
        auto it = b.find(name);
        if (it == b.end() || it->second != bytes) {
            c.expect(false, "rerun differs: " + name);
            break;
        }
    }
}

// 10 -----------------------------------------------------------------------

void criterion_classifier(Check& c) {
    Rng rng(10);
    const int n = 60, d = 5;
    Eigen::MatrixXd inputs(n, d + 1);
    std::vector<int> labels;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) inputs(i, j) = rng.normal();
        inputs(i, d) = 1;
        labels.push_back(i % 3);
    }
    Eigen::MatrixXd w(3, d + 1);
    for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = rng.normal();
    Eigen::MatrixXd g;
    classifier_objective(w, inputs, labels, 0.05, 1e-4, &g);
    double worst = 0;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        const double h = 1e-5;
        Eigen::MatrixXd p = w, m = w;
        p(i) += h;
        m(i) -= h;
        const double fd = (classifier_objective(p, inputs, labels, 0.05, 1e-4) -
                           classifier_objective(m, inputs, labels, 0.05, 1e-4)) / (2 * h);
        worst = std::max(worst, std::abs(g(i) - fd) / std::max(1.0, std::abs(fd)));
    }
    c.expect(worst <= 1e-5, "gradient rel error " + num(worst));

    for (int t = 0; t < 100; ++t) {
        const Logits l{{rng.normal(0, 10), rng.normal(0, 10), rng.normal(0, 10)}};
        const double k = rng.uniform(-1e3, 1e3);
        const Logits s{{l.x[0] + k, l.x[1] + k, l.x[2] + k}};
        if (std::abs(smoothing_loss(l, t % 3, 0.05) - smoothing_loss(s, t % 3, 0.05)) > 1e-9) {
            c.expect(false, "shift invariance");
            break;
        }
    }

    const double centers[3][2] = {{-2, -2}, {2, -2}, {0, 2.5}};
    std::vector<LabeledRow> rows;
    for (int i = 0; i < 300; ++i) {
        LabeledRow r;
        r.label = static_cast<QualityLabel>(i % 3);
        r.features["u"] = centers[i % 3][0] + rng.normal(0, 0.4);
        r.features["v"] = centers[i % 3][1] + rng.normal(0, 0.4);
        rows.push_back(r);
    }
    const std::vector<std::string> names = {"u", "v"};
    const TrainingResult tr = train_classifier(rows, names);
    std::vector<ScoredLabel> scored;
    for (const auto& r : rows) scored.push_back({predict_logits(tr.model, r.features), r.label});
    const double acc = top1_accuracy(scored);
    c.expect(acc >= 0.95, "training top-1 " + num(acc));
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        double limit_s;
        std::function<void(Check&)> body;
    };
    const std::vector<Criterion> criteria = {
        {1, "odds-ratio arithmetic", 1, criterion_odds_ratio},
        {2, "label-smoothing values", 1, criterion_label_smoothing},
        {3, "ordinal recovery", 10, criterion_ordinal_recovery},
        {4, "grabcut oracle", 30, criterion_grabcut},
        {5, "feature formulas", 5, criterion_features},
        {6, "annotation pipeline", 5, criterion_annotation},
        {7, "detection metrics", 1, criterion_detection},
        {8, "statistics oracles", 10, criterion_stats},
        {9, "end-to-end cli", 120, criterion_end_to_end},
        {10, "classifier checks", 10, criterion_classifier},
    };
    int failed = 0;
    for (const Criterion& cr : criteria) {
        Check check;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            cr.body(check);
        } catch (const std::exception& e) {
            check.expect(false, std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (secs >= cr.limit_s) check.expect(false, "runtime " + num(secs) + "s over " + num(cr.limit_s) + "s");
        const bool ok = check.failures.empty();
        failed += !ok;
        std::printf("criterion %2d %-24s %s  (%.3fs)", cr.id, cr.name, ok ? "PASS" : "FAIL", secs);
        for (const std::string& f : check.failures) std::printf("  [%s]", f.c_str());
        std::printf("\n");
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
