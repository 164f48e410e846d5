#include <doctest.h>

#include <cmath>

#include "photoscore/classify.hpp"
#include "photoscore/error.hpp"
#include "photoscore/random.hpp"

using namespace photoscore;
using Eigen::MatrixXd;

namespace {

std::vector<LabeledRow> separable_rows(int n, std::uint64_t seed) {
    Rng rng(seed);
    const double centers[3][2] = {{-3, 0}, {0, 3}, {3, 0}};
    std::vector<LabeledRow> rows;
    for (int i = 0; i < n; ++i) {
        const int c = i % 3;
        LabeledRow r;
        r.features["a"] = centers[c][0] + rng.normal(0, 0.5);
        r.features["b"] = centers[c][1] + rng.normal(0, 0.5);
        r.features["noise"] = rng.normal();
        r.label = static_cast<QualityLabel>(c);
        rows.push_back(r);
    }
    return rows;
}

const std::vector<std::string> kNames = {"a", "b", "noise"};

}  // namespace

TEST_CASE("smoothing loss values") {
    for (int c = 0; c < 3; ++c) CHECK(std::abs(smoothing_loss({{0, 0, 0}}, c, 0.05) - 1.05 * std::log(3.0)) < 1e-12);
    CHECK(std::abs(smoothing_loss({{0, 0, 0}}, 1, 0.05) - 1.15354) < 1e-5);
    const double direct = std::log1p(2 * std::exp(-10.0));
    CHECK(smoothing_loss({{10, 0, 0}}, 0, 0.0) == doctest::Approx(direct).epsilon(1e-12));
    CHECK(smoothing_loss({{10, 0, 0}}, 0, 0.0) == doctest::Approx(9.08e-5).epsilon(1e-3));
}

TEST_CASE("epsilon zero is plain nll") {
    Rng rng(1);
    for (int t = 0; t < 1000; ++t) {
        const Logits l{{rng.normal(0, 5), rng.normal(0, 5), rng.normal(0, 5)}};
        const int c = static_cast<int>(rng.below(3));
        const double m = std::max({l.x[0], l.x[1], l.x[2]});
        const double lse = m + std::log(std::exp(l.x[0] - m) + std::exp(l.x[1] - m) + std::exp(l.x[2] - m));
        CHECK(std::abs(smoothing_loss(l, c, 0.0) - (lse - l.x[static_cast<std::size_t>(c)])) < 1e-12);
    }
}

TEST_CASE("loss is shift invariant and log-probs normalize") {
    Rng rng(2);
    for (int t = 0; t < 200; ++t) {
        const Logits l{{rng.normal(0, 3), rng.normal(0, 3), rng.normal(0, 3)}};
        const double shift = rng.uniform(-100, 100);
        const Logits s{{l.x[0] + shift, l.x[1] + shift, l.x[2] + shift}};
        for (int c = 0; c < 3; ++c) CHECK(std::abs(smoothing_loss(l, c, 0.05) - smoothing_loss(s, c, 0.05)) < 1e-9);
    }
    for (const Logits& l : {Logits{{1e4, -1e4, 0}}, Logits{{-1e4, -1e4, -1e4}}, Logits{{1e4, 1e4, -3}}}) {
        const LogProbs lp = log_softmax(l);
        double sum = 0;
        for (double v : lp.x) {
            CHECK(v <= 0.0);
            sum += std::exp(v);
        }
        CHECK(std::abs(sum - 1.0) < 1e-9);
        CHECK(std::isfinite(smoothing_loss(l, 1, 0.05)));
    }
}

TEST_CASE("smoothing loss errors") {
    CHECK_THROWS_AS(smoothing_loss({{NAN, 0, 0}}, 0, 0.05), Error);
    CHECK_THROWS_AS(smoothing_loss({{INFINITY, 0, 0}}, 0, 0.05), Error);
    CHECK_THROWS_AS(smoothing_loss({{0, 0, 0}}, 3, 0.05), Error);
    CHECK_THROWS_AS(smoothing_loss({{0, 0, 0}}, 0, 1.0), Error);
}

TEST_CASE("objective gradient matches finite differences") {
    Rng rng(3);
    const int n = 40, d = 4;
    MatrixXd inputs(n, d + 1);
    std::vector<int> labels;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) inputs(i, j) = rng.normal();
        inputs(i, d) = 1.0;
        labels.push_back(static_cast<int>(rng.below(3)));
    }
    for (int t = 0; t < 5; ++t) {
        MatrixXd w(3, d + 1);
        for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = rng.normal();
        MatrixXd g;
        classifier_objective(w, inputs, labels, 0.05, 1e-3, &g);
        for (Eigen::Index i = 0; i < w.size(); ++i) {
            const double h = 1e-5;
            MatrixXd a = w, b = w;
            a(i) += h;
            b(i) -= h;
            const double num = (classifier_objective(a, inputs, labels, 0.05, 1e-3) -
                                classifier_objective(b, inputs, labels, 0.05, 1e-3)) / (2 * h);
            CHECK(std::abs(g(i) - num) <= 1e-5 * std::max(1.0, std::abs(num)));
        }
    }
}

TEST_CASE("separable features train to high accuracy") {
    const auto rows = separable_rows(300, 4);
    const TrainingResult r = train_classifier(rows, kNames);
    std::vector<ScoredLabel> scored;
    for (const auto& row : rows) scored.push_back({predict_logits(r.model, row.features), row.label});
    CHECK(top1_accuracy(scored) >= 0.95);
    CHECK(r.loss_history.size() == 501);
    CHECK(r.rows_used == 300);
}

TEST_CASE("zero epochs predicts uniform") {
    const auto rows = separable_rows(30, 5);
    TrainOptions o;
    o.epochs = 0;
    const TrainingResult r = train_classifier(rows, kNames, o);
    REQUIRE(r.loss_history.size() == 1);
    CHECK(r.loss_history[0] == doctest::Approx(1.05 * std::log(3.0)).epsilon(1e-12));
    const Logits l = predict_logits(r.model, rows[0].features);
    CHECK(l.x[0] == 0.0);
    CHECK(l.x[1] == 0.0);
    CHECK(l.x[2] == 0.0);
}

TEST_CASE("small learning rate gives non-increasing loss") {
    const auto rows = separable_rows(90, 6);
    TrainOptions o;
    o.learning_rate = 1e-3;
    o.epochs = 300;
    const TrainingResult r = train_classifier(rows, kNames, o);
    for (std::size_t i = 1; i < r.loss_history.size(); ++i) CHECK(r.loss_history[i] <= r.loss_history[i - 1]);
}

TEST_CASE("training is deterministic and drops constant features") {
    auto rows = separable_rows(60, 7);
    for (auto& r : rows) r.features["flat"] = 3.0;
    const std::vector<std::string> names = {"a", "flat", "b"};
    const TrainingResult a = train_classifier(rows, names);
    const TrainingResult b = train_classifier(rows, names);
    CHECK(model_to_json(a.model) == model_to_json(b.model));
    CHECK(a.dropped_features == std::vector<std::string>{"flat"});
    CHECK(a.model.feature_names == std::vector<std::string>{"a", "b"});
}

TEST_CASE("training errors") {
    CHECK_THROWS_AS(train_classifier({}, kNames), Error);
    auto rows = separable_rows(30, 8);
    for (auto& r : rows) r.label = QualityLabel::Good;
    CHECK_THROWS_AS(train_classifier(rows, kNames), Error);
    auto flat = separable_rows(30, 8);
    for (auto& r : flat) r.features = {{"a", 1.0}, {"b", 2.0}, {"noise", 0.0}};
    CHECK_THROWS_AS(train_classifier(flat, kNames), Error);
}

TEST_CASE("absent features are excluded or imputed") {
    auto rows = separable_rows(60, 9);
    rows[0].features["a"] = std::nullopt;
    rows[1].features["b"] = std::nullopt;
    CHECK(train_classifier(rows, kNames).rows_used == 58);
    TrainOptions o;
    o.impute_missing = true;
    const TrainingResult r = train_classifier(rows, kNames, o);
    CHECK(r.rows_used == 60);
    CHECK_THROWS_AS(predict_logits(r.model, rows[0].features), Error);
    CHECK_NOTHROW(predict_logits(r.model, rows[0].features, true));
    FeatureRow missing = rows[2].features;
    missing.erase("a");
    CHECK_THROWS_AS(predict_logits(r.model, missing, true), Error);
}

TEST_CASE("prediction is a pure function of features") {
    auto rows = separable_rows(60, 10);
    const TrainingResult a = train_classifier(rows, kNames);
    const Logits before = predict_logits(a.model, rows[3].features);
    CHECK(predict_logits(a.model, rows[3].features).x == before.x);

    ClassifierModel bias = a.model;
    bias.weights.leftCols(bias.weights.cols() - 1).setZero();
    CHECK(predict_logits(bias, rows[0].features).x == predict_logits(bias, rows[5].features).x);
}

TEST_CASE("forced choice") {
    const std::vector<ScoredLabel> s = {{{{0.2, 0.9, 0.5}}, QualityLabel::Good},
                                        {{{1.0, -5.0, 1.0}}, QualityLabel::Bad},
                                        {{{3, 2, 1}}, QualityLabel::Neutral}};
    const ForcedChoice f = forced_choice_accuracy(s);
    CHECK(f.n_used == 2);
    CHECK(f.accuracy == 1.0);
    const std::vector<ScoredLabel> tie_good = {{{{1.0, 0, 1.0}}, QualityLabel::Good}};
    CHECK(forced_choice_accuracy(tie_good).accuracy == 0.0);
    const std::vector<ScoredLabel> neutral = {{{{0, 0, 0}}, QualityLabel::Neutral}};
    CHECK_THROWS_WITH_AS(forced_choice_accuracy(neutral), doctest::Contains("no forced-choice rows"), Error);
}

TEST_CASE("forced choice ignores logit scale") {
    Rng rng(11);
    for (int t = 0; t < 300; ++t) {
        const Logits l{{rng.normal(), rng.normal(), rng.normal()}};
        const double s = rng.uniform(0.01, 100);
        const QualityLabel lab = rng.bernoulli(0.5) ? QualityLabel::Good : QualityLabel::Bad;
        const std::vector<ScoredLabel> a = {{l, lab}};
        const std::vector<ScoredLabel> b = {{{{l.x[0] * s, l.x[1] * s, l.x[2] * s}}, lab}};
        CHECK(forced_choice_accuracy(a).accuracy == forced_choice_accuracy(b).accuracy);
    }
}

TEST_CASE("top1") {
    const std::vector<ScoredLabel> perfect = {{{{1, 0, 0}}, QualityLabel::Bad},
                                              {{{0, 1, 0}}, QualityLabel::Neutral},
                                              {{{0, 0, 1}}, QualityLabel::Good}};
    CHECK(top1_accuracy(perfect) == 1.0);
    std::vector<ScoredLabel> uniform;
    for (int i = 0; i < 10; ++i) uniform.push_back({{{0.5, 0.5, 0.5}}, static_cast<QualityLabel>(i % 3)});
    CHECK(top1_accuracy(uniform) == doctest::Approx(0.4));
    CHECK_THROWS_AS(top1_accuracy({}), Error);
}

TEST_CASE("forced choice is at least top1 on non-neutral rows") {
    Rng rng(12);
    for (int t = 0; t < 200; ++t) {
        std::vector<ScoredLabel> rows;
        for (int i = 0; i < 20; ++i)
            rows.push_back({{{rng.normal(), rng.normal(), rng.normal()}},
                            rng.bernoulli(0.5) ? QualityLabel::Good : QualityLabel::Bad});
        CHECK(forced_choice_accuracy(rows).accuracy >= top1_accuracy(rows));
    }
}

TEST_CASE("model json round trip") {
    const TrainingResult r = train_classifier(separable_rows(60, 13), kNames);
    const std::string text = model_to_json(r.model);
    const ClassifierModel back = model_from_json(text);
    CHECK(back.feature_names == r.model.feature_names);
    CHECK(back.weights == r.model.weights);
    CHECK(model_to_json(back) == text);
    CHECK_THROWS_AS(model_from_json("{}"), Error);
    CHECK_THROWS_AS(model_from_json("not json"), Error);
}
