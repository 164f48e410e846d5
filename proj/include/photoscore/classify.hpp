#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "photoscore/annotation.hpp"

namespace photoscore {

struct FeatureVector;

// Raw scores for Negative / Neutral / Positive.
struct Logits {
    std::array<double, 3> x{};
};

struct LogProbs {
    std::array<double, 3> x{};
};

// Max-shifted log-softmax.
LogProbs log_softmax(const Logits& logits);

// -(1 - eps) * lp[c] - eps * sum_{i != c} lp[i]. Throws Error on non-finite
// logits, c outside {0,1,2} or eps outside [0,1).
double smoothing_loss(const Logits& logits, int c, double epsilon);
// d loss / d logits = (1 + eps) * softmax - target, target[c] = 1 - eps,
// target[i != c] = eps.
std::array<double, 3> smoothing_loss_gradient(const Logits& logits, int c, double epsilon);

using FeatureRow = std::map<std::string, std::optional<double>, std::less<>>;
FeatureRow feature_row(const FeatureVector& f);

struct ClassifierModel {
    std::vector<std::string> feature_names;
    Eigen::MatrixXd weights;  // 3 x (d + 1); last column is the bias
    double epsilon = 0.05;
    std::vector<double> feature_means;
    std::vector<double> feature_stds;
};

struct TrainOptions {
    double epsilon = 0.05;
    double learning_rate = 0.1;
    int epochs = 500;
    double l2 = 1e-4;
    std::uint64_t seed = 42;
    // Fill absent values with the training mean; otherwise such rows are
    // excluded from training.
    bool impute_missing = false;
};

struct LabeledRow {
    FeatureRow features;
    QualityLabel label = QualityLabel::Neutral;
};

struct TrainingResult {
    ClassifierModel model;
    std::vector<double> loss_history;  // objective before each epoch, then final
    std::vector<std::string> dropped_features;  // constant over training rows
    std::size_t rows_used = 0;
};

TrainingResult train_classifier(std::span<const LabeledRow> rows,
                                std::span<const std::string> feature_names,
                                const TrainOptions& opts = {});

// Mean smoothing loss over rows of `inputs` (already normalized, with a
// trailing 1 column) plus l2 * ||W||^2, and optionally its gradient.
double classifier_objective(const Eigen::MatrixXd& weights, const Eigen::MatrixXd& inputs,
                            std::span<const int> labels, double epsilon, double l2,
                            Eigen::MatrixXd* gradient = nullptr);

// W * [z-scored features; 1]. Throws Error for a missing or absent feature
// unless `impute` is set (absent -> training mean).
Logits predict_logits(const ClassifierModel& model, const FeatureRow& row, bool impute = false);

struct ScoredLabel {
    Logits logits;
    QualityLabel label = QualityLabel::Neutral;
};

struct ForcedChoice {
    double accuracy = 0;
    std::size_t n_used = 0;
};

// Neutral ground truth is skipped; predicts Good iff x2 > x0 (ties -> Bad).
ForcedChoice forced_choice_accuracy(std::span<const ScoredLabel> scored);
// argmax with ties to the lower index. Throws Error on empty input.
double top1_accuracy(std::span<const ScoredLabel> scored);

std::string model_to_json(const ClassifierModel& model);
ClassifierModel model_from_json(std::string_view text);
void save_model(const ClassifierModel& model, const std::filesystem::path& path);
ClassifierModel load_model(const std::filesystem::path& path);

struct ImageLogits {
    std::string image_id;
    Logits logits;
};
// image_id,x0,x1,x2
std::string logits_to_csv(std::span<const ImageLogits> rows);
std::vector<ImageLogits> read_logits_csv(const std::filesystem::path& path);

}  // namespace photoscore
