#include "photoscore/classify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "photoscore/csv.hpp"
#include "photoscore/error.hpp"
#include "photoscore/feature_table.hpp"

namespace photoscore {

using Eigen::Index;
using Eigen::MatrixXd;

namespace {

void check_logits(const Logits& l) {
    for (double v : l.x)
        if (!std::isfinite(v)) throw Error("non-finite logit");
}

void check_class(int c, double epsilon) {
    if (c < 0 || c > 2) throw Error("class must be 0, 1 or 2");
    if (!(epsilon >= 0.0 && epsilon < 1.0)) throw Error("epsilon must be in [0,1)");
}

}  // namespace

LogProbs log_softmax(const Logits& logits) {
    const double m = *std::max_element(logits.x.begin(), logits.x.end());
    double sum = 0.0;
    for (double v : logits.x) sum += std::exp(v - m);
    const double log_norm = m + std::log(sum);
    LogProbs out;
    for (int i = 0; i < 3; ++i) out.x[i] = logits.x[i] - log_norm;
    return out;
}

double smoothing_loss(const Logits& logits, int c, double epsilon) {
    check_logits(logits);
    check_class(c, epsilon);
    const LogProbs lp = log_softmax(logits);
    double rest = 0.0;
    for (int i = 0; i < 3; ++i)
        if (i != c) rest += lp.x[i];
    return -(1.0 - epsilon) * lp.x[c] - epsilon * rest;
}

std::array<double, 3> smoothing_loss_gradient(const Logits& logits, int c, double epsilon) {
    check_logits(logits);
    check_class(c, epsilon);
    const LogProbs lp = log_softmax(logits);
    std::array<double, 3> g{};
    for (int i = 0; i < 3; ++i) {
        const double target = i == c ? 1.0 - epsilon : epsilon;
        g[i] = (1.0 + epsilon) * std::exp(lp.x[i]) - target;
    }
    return g;
}

FeatureRow feature_row(const FeatureVector& f) {
    FeatureRow row;
    const auto values = feature_values(f);
    for (std::size_t i = 0; i < kFeatureNames.size(); ++i)
        row.emplace(std::string(kFeatureNames[i]), values[i]);
    return row;
}

double classifier_objective(const MatrixXd& weights, const MatrixXd& inputs,
                            std::span<const int> labels, double epsilon, double l2,
                            MatrixXd* gradient) {
    const Index n = inputs.rows();
    if (n == 0) throw Error("classifier objective over zero rows");
    const MatrixXd logits = inputs * weights.transpose();  // n x 3
    MatrixXd g_logits(n, 3);
    double loss = 0.0;
    for (Index i = 0; i < n; ++i) {
        const Logits l{{logits(i, 0), logits(i, 1), logits(i, 2)}};
        const int c = labels[static_cast<std::size_t>(i)];
        loss += smoothing_loss(l, c, epsilon);
        if (gradient) {
            const auto g = smoothing_loss_gradient(l, c, epsilon);
            for (int j = 0; j < 3; ++j) g_logits(i, j) = g[j];
        }
    }
    const double dn = static_cast<double>(n);
    if (gradient) *gradient = g_logits.transpose() * inputs / dn + 2.0 * l2 * weights;
    return loss / dn + l2 * weights.squaredNorm();
}

TrainingResult train_classifier(std::span<const LabeledRow> rows,
                                std::span<const std::string> feature_names,
                                const TrainOptions& opts) {
    if (rows.empty()) throw Error("no training rows");
    if (feature_names.empty()) throw Error("no features selected");
    if (!(opts.epsilon >= 0.0 && opts.epsilon < 1.0)) throw Error("epsilon must be in [0,1)");
    if (opts.epochs < 0) throw Error("epochs must be non-negative");
    if (!(opts.learning_rate > 0.0)) throw Error("learning rate must be positive");

    const std::size_t d_all = feature_names.size();
    std::vector<std::vector<std::optional<double>>> values;
    std::vector<int> labels;
    for (const LabeledRow& r : rows) {
        std::vector<std::optional<double>> v;
        bool complete = true;
        for (const std::string& name : feature_names) {
            auto it = r.features.find(name);
            if (it == r.features.end()) throw Error("row lacks feature '" + name + "'");
            if (!it->second || !std::isfinite(*it->second)) complete = false;
            v.push_back(it->second && std::isfinite(*it->second) ? it->second : std::nullopt);
        }
        if (!complete && !opts.impute_missing) continue;
        values.push_back(std::move(v));
        labels.push_back(static_cast<int>(r.label));
    }
    if (values.empty()) throw Error("no complete training rows");
    if (std::all_of(labels.begin(), labels.end(), [&](int l) { return l == labels[0]; }))
        throw Error("training needs at least two distinct labels");

    TrainingResult result;
    result.rows_used = values.size();
    std::vector<std::size_t> kept;
    std::vector<double> means, stds;
    for (std::size_t j = 0; j < d_all; ++j) {
        double sum = 0.0;
        std::size_t count = 0;
        for (const auto& v : values)
            if (v[j]) {
                sum += *v[j];
                ++count;
            }
        if (count == 0) {
            result.dropped_features.push_back(feature_names[j]);
            continue;
        }
        const double mean = sum / static_cast<double>(count);
        double ss = 0.0;
        for (const auto& v : values) {
            const double x = v[j].value_or(mean);
            ss += (x - mean) * (x - mean);
        }
        const double sd = std::sqrt(ss / static_cast<double>(values.size()));
        if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
            result.dropped_features.push_back(feature_names[j]);
            continue;
        }
        kept.push_back(j);
        means.push_back(mean);
        stds.push_back(sd);
    }
    if (kept.empty()) throw Error("all features are constant over the training rows");

    const Index n = static_cast<Index>(values.size());
    const Index d = static_cast<Index>(kept.size());
    MatrixXd inputs(n, d + 1);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < d; ++j) {
            const std::size_t src = kept[static_cast<std::size_t>(j)];
            const double mean = means[static_cast<std::size_t>(j)];
            const double x = values[static_cast<std::size_t>(i)][src].value_or(mean);
            inputs(i, j) = (x - mean) / stds[static_cast<std::size_t>(j)];
        }
        inputs(i, d) = 1.0;
    }

    ClassifierModel& model = result.model;
    for (std::size_t j : kept) model.feature_names.push_back(feature_names[j]);
    model.feature_means = means;
    model.feature_stds = stds;
    model.epsilon = opts.epsilon;
    model.weights = MatrixXd::Zero(3, d + 1);

    MatrixXd grad;
    for (int epoch = 0; epoch < opts.epochs; ++epoch) {
        result.loss_history.push_back(
            classifier_objective(model.weights, inputs, labels, opts.epsilon, opts.l2, &grad));
        model.weights -= opts.learning_rate * grad;
    }
    result.loss_history.push_back(
        classifier_objective(model.weights, inputs, labels, opts.epsilon, opts.l2));
    return result;
}

Logits predict_logits(const ClassifierModel& model, const FeatureRow& row, bool impute) {
    const Index d = static_cast<Index>(model.feature_names.size());
    if (model.weights.rows() != 3 || model.weights.cols() != d + 1)
        throw Error("model weights do not match its feature list");
    Eigen::VectorXd z(d + 1);
    for (Index j = 0; j < d; ++j) {
        const std::string& name = model.feature_names[static_cast<std::size_t>(j)];
        auto it = row.find(name);
        if (it == row.end()) throw Error("input lacks model feature '" + name + "'");
        if (!it->second || !std::isfinite(*it->second)) {
            if (!impute) throw Error("feature '" + name + "' is absent");
            z(j) = 0.0;
        } else {
            z(j) = (*it->second - model.feature_means[static_cast<std::size_t>(j)]) /
                   model.feature_stds[static_cast<std::size_t>(j)];
        }
    }
    z(d) = 1.0;
    const Eigen::Vector3d out = model.weights * z;
    return Logits{{out(0), out(1), out(2)}};
}

ForcedChoice forced_choice_accuracy(std::span<const ScoredLabel> scored) {
    ForcedChoice out;
    std::size_t correct = 0;
    for (const ScoredLabel& s : scored) {
        if (s.label == QualityLabel::Neutral) continue;
        ++out.n_used;
        const bool positive = s.logits.x[2] > s.logits.x[0];
        correct += positive == (s.label == QualityLabel::Good);
    }
    if (out.n_used == 0) throw Error("no forced-choice rows: every label is neutral");
    out.accuracy = static_cast<double>(correct) / static_cast<double>(out.n_used);
    return out;
}

double top1_accuracy(std::span<const ScoredLabel> scored) {
    if (scored.empty()) throw Error("top-1 accuracy over zero rows");
    std::size_t correct = 0;
    for (const ScoredLabel& s : scored) {
        int best = 0;
        for (int i = 1; i < 3; ++i)
            if (s.logits.x[i] > s.logits.x[best]) best = i;
        correct += best == static_cast<int>(s.label);
    }
    return static_cast<double>(correct) / static_cast<double>(scored.size());
}

std::string model_to_json(const ClassifierModel& model) {
    nlohmann::ordered_json j;
    j["feature_names"] = model.feature_names;
    nlohmann::ordered_json w = nlohmann::ordered_json::array();
    for (Index r = 0; r < model.weights.rows(); ++r) {
        std::vector<double> row(static_cast<std::size_t>(model.weights.cols()));
        for (Index c = 0; c < model.weights.cols(); ++c) row[static_cast<std::size_t>(c)] = model.weights(r, c);
        w.push_back(row);
    }
    j["weights"] = w;
    j["epsilon"] = model.epsilon;
    j["means"] = model.feature_means;
    j["stds"] = model.feature_stds;
    return j.dump(2) + "\n";
}

ClassifierModel model_from_json(std::string_view text) {
    ClassifierModel m;
    try {
        const auto j = nlohmann::json::parse(text);
        m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
        m.epsilon = j.at("epsilon").get<double>();
        m.feature_means = j.at("means").get<std::vector<double>>();
        m.feature_stds = j.at("stds").get<std::vector<double>>();
        const auto rows = j.at("weights").get<std::vector<std::vector<double>>>();
        const std::size_t d = m.feature_names.size();
        if (rows.size() != 3) throw Error("model: weights must have 3 rows");
        m.weights.resize(3, static_cast<Index>(d + 1));
        for (std::size_t r = 0; r < 3; ++r) {
            if (rows[r].size() != d + 1) throw Error("model: weight row length must be features + 1");
            for (std::size_t c = 0; c <= d; ++c) m.weights(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("model: ") + e.what());
    }
    if (m.feature_means.size() != m.feature_names.size() || m.feature_stds.size() != m.feature_names.size())
        throw Error("model: means/stds length must match feature_names");
    for (double s : m.feature_stds)
        if (!(s > 0.0)) throw Error("model: stds must be positive");
    if (!(m.epsilon >= 0.0 && m.epsilon < 1.0)) throw Error("model: epsilon must be in [0,1)");
    return m;
}

void save_model(const ClassifierModel& model, const std::filesystem::path& path) {
    const std::string text = model_to_json(model);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
}

ClassifierModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path.string());
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return model_from_json(text);
}

std::string logits_to_csv(std::span<const ImageLogits> rows) {
    std::string out = "image_id,x0,x1,x2\n";
    char buf[32];
    for (const ImageLogits& r : rows) {
        out += r.image_id;
        for (double v : r.logits.x) {
            std::snprintf(buf, sizeof buf, ",%.9g", v);
            out += buf;
        }
        out += '\n';
    }
    return out;
}

std::vector<ImageLogits> read_logits_csv(const std::filesystem::path& path) {
    const CsvTable t = CsvTable::load(path);
    const std::size_t id = t.require_column("image_id");
    const std::size_t cols[3] = {t.require_column("x0"), t.require_column("x1"), t.require_column("x2")};
    std::vector<ImageLogits> out;
    for (std::size_t r = 0; r < t.size(); ++r) {
        ImageLogits row;
        row.image_id = t.cell(r, id);
        for (int i = 0; i < 3; ++i) {
            const auto v = t.number(r, cols[i]);
            if (!v || !std::isfinite(*v))
                throw ParseError(path.string(), r + 2, "field 'x" + std::to_string(i) + "': missing or non-finite");
            row.logits.x[static_cast<std::size_t>(i)] = *v;
        }
        out.push_back(std::move(row));
    }
    return out;
}

}  // namespace photoscore
