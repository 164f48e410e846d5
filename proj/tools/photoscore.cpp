#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "photoscore/annotation.hpp"
#include "photoscore/classify.hpp"
#include "photoscore/codec.hpp"
#include "photoscore/corpus.hpp"
#include "photoscore/csv.hpp"
#include "photoscore/detect.hpp"
#include "photoscore/error.hpp"
#include "photoscore/feature_table.hpp"
#include "photoscore/formula.hpp"
#include "photoscore/segment.hpp"
#include "photoscore/stats.hpp"
#include "photoscore/synth.hpp"

namespace fs = std::filesystem;
using namespace photoscore;
using ojson = nlohmann::ordered_json;

namespace {

const std::vector<std::string> kOrdinalPredictors = {
    "brightness",      "contrast",           "dynamic_range",        "resolution",
    "x_asymmetry",     "y_asymmetry",        "fgbg_area_ratio",      "bgfg_brightness_diff",
    "bgfg_contrast_diff", "bg_lightness",    "bg_nonuniformity"};

void warn(const std::string& msg) { std::cerr << "photoscore: warning: " << msg << "\n"; }

// Outputs are staged in memory and written only after every input has been
// validated, so a failing command leaves no partial files behind.
class Outputs {
public:
    void add(const fs::path& path, std::string text) { files_.emplace_back(path, std::move(text)); }

    void commit() const {
        for (const auto& [path, text] : files_) {
            if (path.empty() || path == "-") {
                std::cout << text;
                continue;
            }
            if (path.has_parent_path()) fs::create_directories(path.parent_path());
            const fs::path tmp = path.string() + ".tmp";
            {
                std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
                if (!out) throw Error("cannot write " + path.string());
                out << text;
                if (!out) throw Error("write failed: " + path.string());
            }
            fs::rename(tmp, path);
        }
    }

private:
    std::vector<std::pair<fs::path, std::string>> files_;
};

std::string dump(const ojson& j) { return j.dump(2) + "\n"; }

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

// image_id -> label from any CSV with image_id and label columns.
std::map<std::string, QualityLabel> read_labels(const fs::path& path) {
    const CsvTable t = CsvTable::load(path);
    const std::size_t id = t.require_column("image_id");
    const std::size_t lab = t.require_column("label");
    std::map<std::string, QualityLabel> out;
    for (std::size_t r = 0; r < t.size(); ++r) {
        const auto v = t.number(r, lab);
        if (!v) continue;
        if (*v != 0.0 && *v != 1.0 && *v != 2.0)
            throw ParseError(path.string(), r + 2, "field 'label': must be 0, 1 or 2");
        out[t.cell(r, id)] = static_cast<QualityLabel>(static_cast<int>(*v));
    }
    return out;
}

std::vector<FeatureRecord> load_features_with_labels(const fs::path& features,
                                                     const std::string& labels) {
    std::vector<FeatureRecord> recs = read_feature_table(features);
    if (!labels.empty()) {
        const auto map = read_labels(labels);
        for (FeatureRecord& r : recs) {
            auto it = map.find(r.image_id);
            r.label = it == map.end() ? std::nullopt : std::optional<QualityLabel>(it->second);
        }
    }
    return recs;
}

ojson coefficient_json(const Coefficient& c) {
    ojson j;
    j["estimate"] = c.estimate;
    j["se"] = c.se;
    j["z"] = c.z;
    j["p"] = round_significant(c.p, 4);
    j["signif"] = significance_stars(c.p);
    return j;
}

// Drops columns that are constant over the rows, which would make the
// information matrix singular (e.g. width on a fixed-size corpus).
DesignMatrix drop_constant_columns(const DesignMatrix& d, std::vector<std::string>* dropped) {
    std::vector<Eigen::Index> keep;
    for (Eigen::Index j = 0; j < d.cols(); ++j) {
        if (d.rows() > 0 && (d.x.col(j).array() == d.x(0, j)).all())
            dropped->push_back(d.names[static_cast<std::size_t>(j)]);
        else
            keep.push_back(j);
    }
    DesignMatrix out;
    out.y = d.y;
    out.x.resize(d.rows(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) {
        out.x.col(static_cast<Eigen::Index>(k)) = d.x.col(keep[k]);
        out.names.push_back(d.names[static_cast<std::size_t>(keep[k])]);
    }
    return out;
}

DesignMatrix drop_nonfinite_rows(const DesignMatrix& d, std::size_t* dropped) {
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < d.rows(); ++i)
        if (d.x.row(i).allFinite()) keep.push_back(i);
    *dropped = static_cast<std::size_t>(d.rows()) - keep.size();
    DesignMatrix out;
    out.names = d.names;
    out.x.resize(static_cast<Eigen::Index>(keep.size()), d.cols());
    out.y.resize(static_cast<Eigen::Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) {
        out.x.row(static_cast<Eigen::Index>(k)) = d.x.row(keep[k]);
        out.y(static_cast<Eigen::Index>(k)) = d.y(keep[k]);
    }
    return out;
}

// Feature records as a CSV table whose label column reflects any override.
CsvTable feature_csv_table(const std::vector<FeatureRecord>& recs) {
    return CsvTable::parse(feature_table_to_csv(recs), "features");
}

DesignMatrix design_from(const CsvTable& table, const std::string& formula_text,
                         const std::vector<std::string>& predictors, const std::string& response) {
    Formula f;
    if (!formula_text.empty()) {
        f = parse_formula(formula_text);
    } else {
        f.response = response;
        for (const std::string& p : predictors) f.terms.push_back({p, Transform::Identity});
    }
    std::size_t nonfinite = 0;
    DesignMatrix d = drop_nonfinite_rows(evaluate_formula(f, table), &nonfinite);
    if (nonfinite > 0) warn(std::to_string(nonfinite) + " rows with non-finite values excluded");
    return d;
}

// ---- synth -------------------------------------------------------------

struct SynthArgs {
    int n = 50;
    int width = 128;
    int height = 128;
    double rater_noise = SynthSpec{}.rater_noise;
    std::uint64_t seed = 42;
    std::string out;
};

void run_synth(const SynthArgs& a) {
    SynthSpec spec;
    spec.n_images = a.n;
    spec.width = a.width;
    spec.height = a.height;
    spec.rater_noise = a.rater_noise;
    const SyntheticCorpus s = generate_synthetic_corpus(spec, a.seed);
    write_synthetic_corpus(s, a.out);
    std::cerr << "photoscore: wrote " << s.corpus.size() << " images to " << a.out << "\n";
}

// ---- ingest ------------------------------------------------------------

struct IngestArgs {
    std::string manifest;
    std::string out;
    std::string listings_out;
};

void run_ingest(const IngestArgs& a) {
    const ListingCorpus c = load_manifest(a.manifest);
    std::map<std::string, int> categories;
    std::size_t detections = 0;
    for (const ImageRecord& r : c.images()) {
        ++categories[r.category];
        detections += r.detections.size();
    }
    std::set<std::string> raters;
    for (const RatingRecord& r : c.all_ratings()) raters.insert(r.rater_id);

    ojson j;
    j["images"] = c.size();
    j["ratings"] = c.rating_count();
    j["raters"] = raters.size();
    j["detections"] = detections;
    j["listings"] = c.listings().size();
    j["categories"] = categories;

    Outputs out;
    out.add(a.out, dump(j));
    if (!a.listings_out.empty()) {
        std::string csv = "listing_id,image_id,category,days,views,price,sold,aesthetic,quality\n";
        for (const ImageRecord& r : c.images()) {
            if (!r.listing || !r.primary_for_listing) continue;
            const ListingMeta& m = *r.listing;
            csv += m.listing_id + "," + r.image_id + "," + r.category + "," +
                   std::to_string(m.days_listed) + "," + std::to_string(m.view_count) + "," +
                   format_real(m.price) + "," + (m.sold ? "1" : "0") + "," +
                   (m.aesthetic_score ? format_real(*m.aesthetic_score) : "") + "," +
                   (m.quality_score ? format_real(*m.quality_score) : "") + "\n";
        }
        out.add(a.listings_out, csv);
    }
    out.commit();
}

// ---- annotate ----------------------------------------------------------

struct AnnotateArgs {
    std::string manifest;
    std::string out;
    std::string summary;
    double retain = 0.6;
    int min_common = 5;
};

ojson rho_json(const PairwiseCorrelation& p) {
    ojson j;
    j["mean_rho"] = p.n_pairs > 0 ? ojson(p.mean_rho) : ojson(nullptr);
    j["stderr"] = p.n_pairs > 0 ? ojson(p.stderr_rho) : ojson(nullptr);
    j["n_pairs"] = p.n_pairs;
    return j;
}

void run_annotate(const AnnotateArgs& a) {
    ManifestOptions mo;
    mo.check_boxes_against_images = false;
    const ListingCorpus c = load_manifest(a.manifest, mo);
    if (c.rating_count() == 0) throw Error("manifest has no ratings");
    AnnotationOptions opts;
    opts.retain_fraction = a.retain;
    opts.min_common = a.min_common;
    const AnnotationResult r = annotate_corpus(c, opts);

    int counts[3] = {0, 0, 0};
    for (const LabeledScore& l : r.labels) ++counts[static_cast<int>(l.label)];
    ojson j;
    j["images_rated"] = r.images_before_filter;
    j["images_retained"] = r.labels.size();
    j["labels"] = {{"bad", counts[0]}, {"neutral", counts[1]}, {"good", counts[2]}};
    j["rho_all"] = rho_json(r.rho_before);
    j["rho_retained"] = rho_json(r.rho_after);

    Outputs out;
    out.add(a.out, labels_to_csv(r.labels));
    out.add(a.summary, dump(j));
    out.commit();
}

// ---- features extract --------------------------------------------------

struct ExtractArgs {
    std::string manifest;
    std::string out;
    std::string labels;
    std::string detections;
    bool segment = false;
    double conf_threshold = kDefaultConfidenceThreshold;
    int threads = 1;
    std::uint64_t seed = 42;
};

void run_extract(const ExtractArgs& a) {
    const ListingCorpus c = load_manifest(a.manifest);
    if (c.empty()) throw Error("manifest has no images");

    std::map<std::string, std::vector<ScoredBox>> boxes;
    if (!a.detections.empty()) {
        const DetectionSet d = load_detections(a.detections);
        for (const auto& [id, list] : d) {
            if (!c.find(id)) throw Error("detections name unknown image '" + id + "'");
            boxes[id] = list;
        }
    } else {
        for (const ImageRecord& r : c.images())
            for (const Detection& d : r.detections)
                boxes[r.image_id].push_back({d.box, d.confidence.value_or(1.0)});
    }

    std::map<std::string, QualityLabel> labels;
    if (!a.labels.empty()) {
        labels = read_labels(a.labels);
    } else if (c.rating_count() > 0) {
        for (const LabeledScore& l : annotate_corpus(c).labels) labels[l.score.image_id] = l.label;
    }

    const std::size_t n = c.size();
    std::vector<FeatureRecord> records(n);
    std::vector<std::exception_ptr> errors(n);
    std::vector<std::string> notes(n);
    std::atomic<std::size_t> next{0};
    GrabCutParams params;
    params.seed = a.seed;

    auto work = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                const ImageRecord& rec = c.images()[i];
                const Image img = load_image(c.resolve(rec));
                FeatureRecord& out = records[i];
                out.image_id = rec.image_id;
                out.features.global = global_features(img);
                auto it = boxes.find(rec.image_id);
                std::vector<BoundingBox> kept;
                if (it != boxes.end()) {
                    for (const ScoredBox& b : it->second)
                        if (!b.box.valid_for(img.width(), img.height()))
                            throw Error(rec.image_id + ": detection box outside the image");
                    kept = filter_by_confidence(it->second, a.conf_threshold);
                }
                out.features.object = object_features(kept, img.width(), img.height());
                if (a.segment && !kept.empty()) {
                    const BoundingBox hull = union_hull(kept);
                    if (hull.area() >= static_cast<long long>(img.width()) * img.height())
                        notes[i] = rec.image_id + ": box covers the whole image, not segmented";
                    else
                        out.features.regional = regional_features(img, grabcut(img, hull, params));
                }
                auto lab = labels.find(rec.image_id);
                if (lab != labels.end()) out.label = lab->second;
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const int workers = std::max(1, std::min<int>(a.threads, static_cast<int>(n)));
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < workers; ++t) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    for (std::size_t i = 0; i < n; ++i)
        if (errors[i]) std::rethrow_exception(errors[i]);
    for (const std::string& note : notes)
        if (!note.empty()) warn(note);

    Outputs out;
    out.add(a.out, feature_table_to_csv(records));
    out.commit();
}

// ---- segment -----------------------------------------------------------

struct SegmentArgs {
    std::string image;
    std::string box;
    std::string out;
    int iterations = GrabCutParams{}.max_iterations;
    double gamma = GrabCutParams{}.gamma;
    int components = GrabCutParams{}.gmm_components;
    std::uint64_t seed = 42;
};

void run_segment(const SegmentArgs& a) {
    const auto parts = split_list(a.box);
    if (parts.size() != 4) throw Error("--box must be left,top,right,bottom");
    int v[4];
    for (int i = 0; i < 4; ++i) {
        try {
            std::size_t used = 0;
            v[i] = std::stoi(parts[static_cast<std::size_t>(i)], &used);
            if (used != parts[static_cast<std::size_t>(i)].size()) throw std::invalid_argument("");
        } catch (const std::exception&) {
            throw Error("--box values must be integers");
        }
    }
    const Image img = load_image(a.image);
    const BoundingBox box{v[0], v[1], v[2], v[3]};
    if (!box.valid_for(img.width(), img.height())) throw Error("--box lies outside the image");
    GrabCutParams p;
    p.max_iterations = a.iterations;
    p.gamma = a.gamma;
    p.gmm_components = a.components;
    p.seed = a.seed;
    const GrabCutResult r = grabcut_traced(img, box, p);
    const Bytes png = encode_mask_png(r.mask);

    ojson j;
    j["foreground_pixels"] = r.mask.count(Region::Foreground);
    j["iterations"] = r.iterations;
    j["energy"] = r.energy;
    const RegionalFeatures f = regional_features(img, r.mask);
    j["fgbg_area_ratio"] = std::isfinite(f.fgbg_area_ratio) ? ojson(f.fgbg_area_ratio) : ojson("inf");

    Outputs out;
    out.add(a.out, std::string(png.begin(), png.end()));
    out.add("-", dump(j));
    out.commit();
}

// ---- fit ---------------------------------------------------------------

struct FitArgs {
    std::string features;
    std::string data;
    std::string labels;
    std::string predictors;
    std::string formula;
    std::string out;
    bool zscore = false;
};

void run_fit_ordinal(const FitArgs& a) {
    CsvTable table;
    if (!a.data.empty()) {
        table = CsvTable::load(a.data);
    } else {
        if (a.features.empty()) throw Error("fit ordinal needs --features or --data");
        table = feature_csv_table(load_features_with_labels(a.features, a.labels));
    }
    std::vector<std::string> predictors;
    if (!a.predictors.empty()) {
        predictors = split_list(a.predictors);
    } else {
        // default set minus columns never filled in (regional ones without --segment)
        for (const std::string& p : kOrdinalPredictors) {
            const std::size_t col = table.require_column(p);
            bool any = false;
            for (std::size_t r = 0; r < table.size() && !any; ++r) any = table.number(r, col).has_value();
            if (any) predictors.push_back(p);
            else warn("predictor '" + p + "' is empty in every row, skipped");
        }
    }
    DesignMatrix d = design_from(table, a.formula, predictors, "label");
    std::vector<std::string> dropped;
    d = drop_constant_columns(d, &dropped);
    for (const std::string& name : dropped) warn("constant predictor '" + name + "' dropped");
    if (d.cols() == 0) throw Error("no non-constant predictors left");
    if (a.zscore) d = d.standardized();
    const OrdinalFit fit = fit_ordinal(d);
    if (!fit.converged) warn("ordinal fit did not converge: " + fit.diagnostic);

    ojson j;
    j["model"] = "ordinal";
    ojson coefs = ojson::object();
    for (const Coefficient& c : fit.beta) coefs[c.name] = coefficient_json(c);
    j["coefficients"] = coefs;
    j["cutpoints"] = {{"0|1", fit.cut01.estimate}, {"1|2", fit.cut12.estimate}};
    j["cutpoint_se"] = {{"0|1", fit.cut01.se}, {"1|2", fit.cut12.se}};
    j["loglik"] = fit.loglik;
    j["aic"] = fit.aic;
    j["n"] = fit.n;
    j["converged"] = fit.converged;
    j["iterations"] = fit.iterations;
    if (!fit.diagnostic.empty()) j["diagnostic"] = fit.diagnostic;
    j["zscored"] = a.zscore;
    j["dropped"] = dropped;

    Outputs out;
    out.add(a.out, dump(j));
    out.commit();
}

void run_fit_logistic(const FitArgs& a) {
    if (a.formula.empty()) throw Error("fit logistic needs --formula");
    if (a.data.empty()) throw Error("fit logistic needs --data");
    DesignMatrix d = design_from(CsvTable::load(a.data), a.formula, {}, "");
    if (a.zscore) d = d.standardized();
    const LogisticFit fit = fit_logistic(d);
    if (!fit.converged) warn("logistic fit did not converge: " + fit.diagnostic);

    ojson j;
    j["model"] = "logistic";
    ojson coefs = ojson::object();
    ojson odds = ojson::object();
    for (std::size_t i = 0; i < fit.beta.size(); ++i) {
        coefs[fit.beta[i].name] = coefficient_json(fit.beta[i]);
        odds[fit.beta[i].name] = fit.odds_ratios[i];
    }
    j["coefficients"] = coefs;
    j["odds_ratios"] = odds;
    j["loglik"] = fit.loglik;
    j["aic"] = fit.aic;
    j["n"] = fit.n;
    j["converged"] = fit.converged;
    j["iterations"] = fit.iterations;
    if (!fit.diagnostic.empty()) j["diagnostic"] = fit.diagnostic;

    Outputs out;
    out.add(a.out, dump(j));
    out.commit();
}

// ---- train / score -----------------------------------------------------

struct TrainArgs {
    std::string features;
    std::string labels;
    std::string columns;
    std::string out;
    TrainOptions opts;
};

void run_train(const TrainArgs& a) {
    const auto recs = load_features_with_labels(a.features, a.labels);
    std::vector<LabeledRow> rows;
    for (const FeatureRecord& r : recs)
        if (r.label) rows.push_back({feature_row(r.features), *r.label});
    if (rows.empty()) throw Error("no labeled rows in the feature table");
    std::vector<std::string> names;
    if (a.columns.empty()) {
        for (auto n : kFeatureNames) {
            const std::string name(n);
            const bool any = std::any_of(rows.begin(), rows.end(), [&](const LabeledRow& r) {
                auto it = r.features.find(name);
                return it != r.features.end() && it->second.has_value();
            });
            if (any) names.push_back(name);
            else warn("feature '" + name + "' is empty in every row, skipped");
        }
    } else {
        names = split_list(a.columns);
    }
    const TrainingResult r = train_classifier(rows, names, a.opts);
    for (const std::string& f : r.dropped_features) warn("constant feature '" + f + "' dropped");
    std::cerr << "photoscore: trained on " << r.rows_used << " rows, loss "
              << format_real(r.loss_history.front()) << " -> " << format_real(r.loss_history.back())
              << "\n";
    Outputs out;
    out.add(a.out, model_to_json(r.model));
    out.commit();
}

struct ScoreArgs {
    std::string model;
    std::string features;
    std::string out;
    bool impute = false;
};

void run_score(const ScoreArgs& a) {
    const ClassifierModel m = load_model(a.model);
    const auto recs = read_feature_table(a.features);
    std::vector<ImageLogits> rows;
    std::size_t skipped = 0;
    for (const FeatureRecord& r : recs) {
        const FeatureRow row = feature_row(r.features);
        bool complete = true;
        for (const std::string& name : m.feature_names) {
            auto it = row.find(name);
            if (it == row.end()) throw Error("feature table lacks model feature '" + name + "'");
            if (!it->second || !std::isfinite(*it->second)) complete = false;
        }
        if (!complete && !a.impute) {
            ++skipped;
            continue;
        }
        rows.push_back({r.image_id, predict_logits(m, row, a.impute)});
    }
    if (skipped > 0) warn(std::to_string(skipped) + " rows with absent features not scored");
    if (rows.empty()) throw Error("no rows could be scored");
    Outputs out;
    out.add(a.out, logits_to_csv(rows));
    out.commit();
}

// ---- eval --------------------------------------------------------------

struct EvalArgs {
    std::string scores;
    std::string labels;
    std::string detections;
    std::string groundtruth;
    std::string out;
};

std::vector<ScoredLabel> join_scores(const EvalArgs& a) {
    const auto logits = read_logits_csv(a.scores);
    const auto labels = read_labels(a.labels);
    std::vector<ScoredLabel> out;
    std::size_t unlabeled = 0;
    for (const ImageLogits& l : logits) {
        auto it = labels.find(l.image_id);
        if (it == labels.end()) {
            ++unlabeled;
            continue;
        }
        out.push_back({l.logits, it->second});
    }
    if (unlabeled > 0) warn(std::to_string(unlabeled) + " scored images have no label");
    return out;
}

void run_eval_forced(const EvalArgs& a) {
    const ForcedChoice f = forced_choice_accuracy(join_scores(a));
    ojson j;
    j["metric"] = "forced_choice";
    j["accuracy"] = f.accuracy;
    j["n_used"] = f.n_used;
    Outputs out;
    out.add(a.out, dump(j));
    out.commit();
}

void run_eval_top1(const EvalArgs& a) {
    const auto rows = join_scores(a);
    ojson j;
    j["metric"] = "top1";
    j["accuracy"] = top1_accuracy(rows);
    j["n"] = rows.size();
    Outputs out;
    out.add(a.out, dump(j));
    out.commit();
}

void run_eval_map(const EvalArgs& a) {
    const double ap = map50(load_detections(a.detections), load_groundtruth(a.groundtruth));
    ojson j;
    j["metric"] = "map50";
    j["ap"] = ap;
    Outputs out;
    out.add(a.out, dump(j));
    out.commit();
}

// ---- chisq / cv --------------------------------------------------------

struct ChisqArgs {
    std::string features;
    std::string labels;
    std::string table;
    std::string out;
};

void run_chisq(const ChisqArgs& a) {
    std::vector<std::vector<double>> table;
    ojson j;
    if (!a.table.empty()) {
        std::stringstream rows(a.table);
        std::string row;
        while (std::getline(rows, row, ';')) {
            std::vector<double> r;
            for (const std::string& cell : split_list(row)) {
                try {
                    r.push_back(std::stod(cell));
                } catch (const std::exception&) {
                    throw Error("--table cell '" + cell + "' is not a number");
                }
            }
            table.push_back(r);
        }
    } else {
        if (a.features.empty()) throw Error("chisq needs --features or --table");
        std::vector<CountLabel> rows;
        for (const FeatureRecord& r : load_features_with_labels(a.features, a.labels))
            if (r.label) rows.push_back({r.features.object.object_cnt, static_cast<int>(*r.label)});
        if (rows.empty()) throw Error("no labeled rows in the feature table");
        const DetectionLabelTable full = detection_label_table(rows);
        const char* row_names[3] = {"0", "1", ">=2"};
        const char* col_names[3] = {"bad", "neutral", "good"};
        std::array<bool, 3> col_used{};
        for (const auto& r : full)
            for (int c = 0; c < 3; ++c) col_used[static_cast<std::size_t>(c)] = col_used[static_cast<std::size_t>(c)] || r[static_cast<std::size_t>(c)] > 0;
        ojson counts = ojson::object();
        for (int r = 0; r < 3; ++r) {
            ojson line = ojson::object();
            for (int c = 0; c < 3; ++c) line[col_names[c]] = full[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
            counts[row_names[r]] = line;
            long long total = 0;
            for (long long v : full[static_cast<std::size_t>(r)]) total += v;
            if (total == 0) continue;  // empty detection-count rows carry no information
            std::vector<double> kept;
            for (int c = 0; c < 3; ++c)
                if (col_used[static_cast<std::size_t>(c)]) kept.push_back(static_cast<double>(full[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]));
            table.push_back(kept);
        }
        j["counts"] = counts;
    }
    const ChiSquared c = chi_squared(table);
    j["statistic"] = c.statistic;
    j["dof"] = c.dof;
    j["p"] = round_significant(c.p, 4);
    Outputs out;
    out.add(a.out, dump(j));
    out.commit();
}

struct CvArgs {
    std::string formula;
    std::string data;
    int k = 10;
    std::uint64_t seed = 42;
    std::string out;
};

void run_cv(const CvArgs& a) {
    const DesignMatrix d = design_from(CsvTable::load(a.data), a.formula, {}, "");
    const double acc = kfold_accuracy(d, a.k, a.seed);
    ojson j;
    j["metric"] = "kfold_accuracy";
    j["k"] = a.k;
    j["seed"] = a.seed;
    j["n"] = d.rows();
    j["accuracy"] = acc;
    Outputs out;
    out.add(a.out, dump(j));
    out.commit();
}

// ---- report ------------------------------------------------------------

struct ReportArgs {
    std::string features;
    std::string column;
    std::string out_dir;
    int bins = 20;
};

double quantile(std::vector<double> sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::string histogram_svg(const std::string& column, const std::vector<double>& values, int bins) {
    const double lo = values.front(), hi = values.back();
    const double span = hi > lo ? hi - lo : 1.0;
    std::vector<int> counts(static_cast<std::size_t>(bins), 0);
    for (double v : values) {
        auto b = static_cast<std::size_t>((v - lo) / span * bins);
        ++counts[std::min(b, counts.size() - 1)];
    }
    const int peak = *std::max_element(counts.begin(), counts.end());
    const double w = 640, h = 360, ml = 50, mr = 20, mt = 30, mb = 50;
    const double pw = w - ml - mr, ph = h - mt - mb;
    char buf[256];
    std::string svg;
    std::snprintf(buf, sizeof buf,
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%g\" height=\"%g\" viewBox=\"0 0 %g %g\">\n",
                  w, h, w, h);
    svg += buf;
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%g\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">%s (n=%zu)</text>\n",
                  w / 2, column.c_str(), values.size());
    svg += buf;
    for (int i = 0; i < bins; ++i) {
        const double bh = peak > 0 ? ph * counts[static_cast<std::size_t>(i)] / peak : 0.0;
        std::snprintf(buf, sizeof buf,
                      "<rect x=\"%.2f\" y=\"%.2f\" width=\"%.2f\" height=\"%.2f\" fill=\"#4a78a8\" stroke=\"white\"/>\n",
                      ml + pw * i / bins, mt + ph - bh, pw / bins, bh);
        svg += buf;
    }
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n"
                  "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n",
                  ml, mt + ph, ml + pw, mt + ph, ml, mt, ml, mt + ph);
    svg += buf;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%g\" y=\"%g\" font-family=\"sans-serif\" font-size=\"11\">%s</text>\n"
                  "<text x=\"%g\" y=\"%g\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">%s</text>\n"
                  "<text x=\"%g\" y=\"%g\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">%d</text>\n",
                  ml, mt + ph + 18, format_real(lo).c_str(), ml + pw, mt + ph + 18, format_real(hi).c_str(),
                  ml - 6, mt + 10, peak);
    svg += buf;
    svg += "</svg>\n";
    return svg;
}

void run_report(const ReportArgs& a) {
    if (a.bins < 1) throw Error("--bins must be positive");
    const CsvTable t = CsvTable::load(a.features);
    std::string summary = "column,n,mean,sd,min,q25,median,q75,max\n";
    std::vector<double> chosen;
    bool found = false;
    for (std::size_t c = 0; c < t.header().size(); ++c) {
        const std::string& name = t.header()[c];
        if (name == "image_id") continue;
        std::vector<double> v;
        for (std::size_t r = 0; r < t.size(); ++r) {
            const auto x = t.number(r, c);
            if (x && std::isfinite(*x)) v.push_back(*x);
        }
        std::sort(v.begin(), v.end());
        if (name == a.column) {
            found = true;
            chosen = v;
        }
        summary += name + "," + std::to_string(v.size());
        if (v.empty()) {
            summary += ",,,,,,,\n";
            continue;
        }
        double mean = 0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        double ss = 0;
        for (double x : v) ss += (x - mean) * (x - mean);
        const double sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
        summary += "," + format_real(mean) + "," + format_real(sd) + "," + format_real(v.front()) + "," +
                   format_real(quantile(v, 0.25)) + "," + format_real(quantile(v, 0.5)) + "," +
                   format_real(quantile(v, 0.75)) + "," + format_real(v.back()) + "\n";
    }
    if (!found) throw Error("column '" + a.column + "' not in " + a.features);
    if (chosen.empty()) throw Error("column '" + a.column + "' has no finite values");
    Outputs out;
    out.add(fs::path(a.out_dir) / "summary.csv", summary);
    out.add(fs::path(a.out_dir) / ("histogram_" + a.column + ".svg"), histogram_svg(a.column, chosen, a.bins));
    out.commit();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"photoscore: product photo quality toolkit"};
    app.require_subcommand(1);
    std::function<void()> action;

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "Generate a synthetic listing corpus");
    s->add_option("--n", synth.n, "Number of images")->capture_default_str();
    s->add_option("--width", synth.width, "Image width")->capture_default_str();
    s->add_option("--height", synth.height, "Image height")->capture_default_str();
    s->add_option("--rater-noise", synth.rater_noise, "Per-rating noise sd")->capture_default_str();
    s->add_option("--seed", synth.seed, "Random seed")->capture_default_str();
    s->add_option("--out", synth.out, "Output directory")->required();
    s->callback([&] { action = [&] { run_synth(synth); }; });

    IngestArgs ingest;
    auto* in = app.add_subcommand("ingest", "Validate a manifest and summarize it");
    in->add_option("--manifest", ingest.manifest, "JSONL manifest")->required();
    in->add_option("--out", ingest.out, "Summary JSON (default stdout)");
    in->add_option("--listings-out", ingest.listings_out, "Listing table CSV");
    in->callback([&] { action = [&] { run_ingest(ingest); }; });

    AnnotateArgs ann;
    auto* an = app.add_subcommand("annotate", "Standardize, filter and discretize crowd ratings");
    an->add_option("--manifest", ann.manifest, "JSONL manifest")->required();
    an->add_option("--out", ann.out, "Labels CSV")->required();
    an->add_option("--summary", ann.summary, "Agreement summary JSON (default stdout)");
    an->add_option("--retain", ann.retain, "Fraction of images kept")->capture_default_str();
    an->add_option("--min-common", ann.min_common, "Shared images for a rater pair")->capture_default_str();
    an->callback([&] { action = [&] { run_annotate(ann); }; });

    ExtractArgs ex;
    auto* feat = app.add_subcommand("features", "Feature extraction");
    feat->require_subcommand(1);
    auto* fx = feat->add_subcommand("extract", "Compute the photo feature table");
    fx->add_option("--manifest", ex.manifest, "JSONL manifest")->required();
    fx->add_option("--out", ex.out, "Feature CSV")->required();
    fx->add_flag("--segment", ex.segment, "Run GrabCut for regional features");
    fx->add_option("--conf-threshold", ex.conf_threshold, "Detection confidence threshold")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));
    fx->add_option("--labels", ex.labels, "Labels CSV (default: derived from manifest ratings)");
    fx->add_option("--detections", ex.detections, "Detections JSONL overriding the manifest");
    fx->add_option("--threads", ex.threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
    fx->add_option("--seed", ex.seed, "GrabCut seed")->capture_default_str();
    fx->callback([&] { action = [&] { run_extract(ex); }; });

    SegmentArgs seg;
    auto* sg = app.add_subcommand("segment", "GrabCut one image into a PNG mask");
    sg->add_option("--image", seg.image, "Input image")->required();
    sg->add_option("--box", seg.box, "Seed box left,top,right,bottom")->required();
    sg->add_option("--out", seg.out, "Mask PNG")->required();
    sg->add_option("--iterations", seg.iterations)->capture_default_str();
    sg->add_option("--gamma", seg.gamma)->capture_default_str();
    sg->add_option("--components", seg.components)->capture_default_str();
    sg->add_option("--seed", seg.seed)->capture_default_str();
    sg->callback([&] { action = [&] { run_segment(seg); }; });

    FitArgs ford, flog;
    auto* fit = app.add_subcommand("fit", "Regression models");
    fit->require_subcommand(1);
    auto* fo = fit->add_subcommand("ordinal", "Ordered logit of quality labels on features");
    fo->add_option("--features", ford.features, "Feature CSV");
    fo->add_option("--data", ford.data, "Any CSV (use with --formula)");
    fo->add_option("--labels", ford.labels, "Labels CSV overriding the label column");
    fo->add_option("--predictors", ford.predictors, "Comma separated predictor columns");
    fo->add_option("--formula", ford.formula, "label ~ a + log(b) ...");
    fo->add_flag("--zscore", ford.zscore, "Standardize predictors");
    fo->add_option("--out", ford.out, "Fit JSON (default stdout)");
    fo->callback([&] { action = [&] { run_fit_ordinal(ford); }; });
    auto* fl = fit->add_subcommand("logistic", "Binary logit, e.g. sales");
    fl->add_option("--formula", flog.formula, "sold ~ log(views) + ...")->required();
    fl->add_option("--data", flog.data, "CSV with the formula columns")->required();
    fl->add_flag("--zscore", flog.zscore, "Standardize predictors");
    fl->add_option("--out", flog.out, "Fit JSON (default stdout)");
    fl->callback([&] { action = [&] { run_fit_logistic(flog); }; });

    TrainArgs tr;
    auto* t = app.add_subcommand("train", "Train the label-smoothing linear classifier");
    t->add_option("--features", tr.features, "Feature CSV")->required();
    t->add_option("--labels", tr.labels, "Labels CSV overriding the label column");
    t->add_option("--columns", tr.columns, "Comma separated feature columns (default all)");
    t->add_option("--out", tr.out, "Model JSON")->required();
    t->add_option("--epsilon", tr.opts.epsilon)->capture_default_str();
    t->add_option("--lr", tr.opts.learning_rate)->capture_default_str();
    t->add_option("--epochs", tr.opts.epochs)->capture_default_str();
    t->add_option("--l2", tr.opts.l2)->capture_default_str();
    t->add_option("--seed", tr.opts.seed)->capture_default_str();
    t->add_flag("--impute", tr.opts.impute_missing, "Mean-impute absent features");
    t->callback([&] { action = [&] { run_train(tr); }; });

    ScoreArgs sc;
    auto* so = app.add_subcommand("score", "Write classifier logits for a feature table");
    so->add_option("--model", sc.model, "Model JSON")->required();
    so->add_option("--features", sc.features, "Feature CSV")->required();
    so->add_option("--out", sc.out, "Logits CSV")->required();
    so->add_flag("--impute", sc.impute, "Mean-impute absent features");
    so->callback([&] { action = [&] { run_score(sc); }; });

    EvalArgs ev_fc, ev_t1, ev_map;
    auto* ev = app.add_subcommand("eval", "Evaluation metrics");
    ev->require_subcommand(1);
    auto* efc = ev->add_subcommand("forced-choice", "Binary forced-choice accuracy");
    efc->add_option("--scores", ev_fc.scores, "Logits CSV image_id,x0,x1,x2")->required();
    efc->add_option("--labels", ev_fc.labels, "CSV with image_id,label")->required();
    efc->add_option("--out", ev_fc.out, "Result JSON (default stdout)");
    efc->callback([&] { action = [&] { run_eval_forced(ev_fc); }; });
    auto* et1 = ev->add_subcommand("top1", "Three-way top-1 accuracy");
    et1->add_option("--scores", ev_t1.scores, "Logits CSV image_id,x0,x1,x2")->required();
    et1->add_option("--labels", ev_t1.labels, "CSV with image_id,label")->required();
    et1->add_option("--out", ev_t1.out, "Result JSON (default stdout)");
    et1->callback([&] { action = [&] { run_eval_top1(ev_t1); }; });
    auto* emap = ev->add_subcommand("map", "Detection AP at IoU 0.5");
    emap->add_option("--detections", ev_map.detections, "Detections JSONL")->required();
    emap->add_option("--groundtruth", ev_map.groundtruth, "Ground-truth JSONL")->required();
    emap->add_option("--out", ev_map.out, "Result JSON (default stdout)");
    emap->callback([&] { action = [&] { run_eval_map(ev_map); }; });

    ChisqArgs chi;
    auto* ch = app.add_subcommand("chisq", "Chi-squared test of detection count vs label");
    ch->add_option("--features", chi.features, "Feature CSV");
    ch->add_option("--labels", chi.labels, "Labels CSV overriding the label column");
    ch->add_option("--table", chi.table, "Explicit counts, rows separated by ';'");
    ch->add_option("--out", chi.out, "Result JSON (default stdout)");
    ch->callback([&] { action = [&] { run_chisq(chi); }; });

    CvArgs cv;
    auto* cvc = app.add_subcommand("cv", "Stratified k-fold accuracy of a logistic model");
    cvc->add_option("--formula", cv.formula, "sold ~ ...")->required();
    cvc->add_option("--data", cv.data, "CSV with the formula columns")->required();
    cvc->add_option("--k", cv.k)->capture_default_str();
    cvc->add_option("--seed", cv.seed)->capture_default_str();
    cvc->add_option("--out", cv.out, "Result JSON (default stdout)");
    cvc->callback([&] { action = [&] { run_cv(cv); }; });

    ReportArgs rep;
    auto* rp = app.add_subcommand("report", "Summary statistics CSV and an SVG histogram");
    rp->add_option("--features", rep.features, "Feature CSV (or any numeric CSV)")->required();
    rp->add_option("--column", rep.column, "Column for the histogram")->required();
    rp->add_option("--out-dir", rep.out_dir, "Output directory")->required();
    rp->add_option("--bins", rep.bins)->capture_default_str();
    rp->callback([&] { action = [&] { run_report(rep); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "photoscore: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    try {
        action();
    } catch (const Error& e) {
        std::cerr << "photoscore: error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "photoscore: error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
