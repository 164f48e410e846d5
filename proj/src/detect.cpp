#include "photoscore/detect.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "photoscore/error.hpp"

namespace photoscore {

double iou(const BoundingBox& a, const BoundingBox& b) noexcept {
    const long long iw = std::max(0, std::min(a.right, b.right) - std::max(a.left, b.left));
    const long long ih = std::max(0, std::min(a.bottom, b.bottom) - std::max(a.top, b.top));
    const long long inter = iw * ih;
    const long long uni = a.area() + b.area() - inter;
    return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

std::vector<BoxPair> agreement_filter(std::span<const BoxPair> pairs, double threshold) {
    if (!(threshold > 0.0 && threshold <= 1.0))
        throw Error("agreement threshold must be in (0,1]");
    std::vector<BoxPair> kept;
    for (const BoxPair& p : pairs)
        if (iou(p.first, p.second) >= threshold) kept.push_back(p);
    return kept;
}

double average_precision(const DetectionSet& detections, const GroundTruthSet& groundtruth,
                         double iou_threshold) {
    std::size_t total_gt = 0;
    for (const auto& [id, boxes] : groundtruth) total_gt += boxes.size();

    struct Ranked {
        double conf;
        const std::string* image;
        std::size_t order;
        BoundingBox box;
    };
    std::vector<Ranked> ranked;
    for (const auto& [id, boxes] : detections) {
        if (!groundtruth.contains(id))
            throw Error("detection for image '" + id + "' has no ground-truth entry");
        for (const ScoredBox& sb : boxes) {
            if (!(sb.confidence >= 0.0 && sb.confidence <= 1.0))
                throw Error("detection confidence outside [0,1]");
            ranked.push_back({sb.confidence, &id, ranked.size(), sb.box});
        }
    }
    if (total_gt == 0) throw Error("undefined AP: no ground-truth boxes");

    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const Ranked& a, const Ranked& b) { return a.conf > b.conf; });

    std::map<std::string, std::vector<bool>> matched;
    for (const auto& [id, boxes] : groundtruth) matched[id].assign(boxes.size(), false);

    std::vector<double> precision, recall;
    std::size_t tp = 0, fp = 0;
    for (const Ranked& d : ranked) {
        const auto& gts = groundtruth.at(*d.image);
        auto& used = matched[*d.image];
        double best = -1.0;
        std::size_t best_idx = 0;
        for (std::size_t g = 0; g < gts.size(); ++g) {
            if (used[g]) continue;
            const double o = iou(d.box, gts[g]);
            if (o > best) {
                best = o;
                best_idx = g;
            }
        }
        if (best >= iou_threshold) {
            used[best_idx] = true;
            ++tp;
        } else {
            ++fp;
        }
        precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
        recall.push_back(static_cast<double>(tp) / static_cast<double>(total_gt));
    }

    // all-points interpolation: integrate the monotone precision envelope
    for (std::size_t i = precision.size(); i-- > 1;)
        precision[i - 1] = std::max(precision[i - 1], precision[i]);
    double ap = 0.0, prev_recall = 0.0;
    for (std::size_t i = 0; i < precision.size(); ++i) {
        ap += (recall[i] - prev_recall) * precision[i];
        prev_recall = recall[i];
    }
    return ap;
}

double map50(const DetectionSet& detections, const GroundTruthSet& groundtruth) {
    return average_precision(detections, groundtruth, 0.5);
}

std::vector<BoundingBox> filter_by_confidence(std::span<const ScoredBox> boxes, double threshold) {
    std::vector<BoundingBox> out;
    for (const ScoredBox& b : boxes)
        if (b.confidence >= threshold) out.push_back(b.box);
    return out;
}

ObjectFeatures object_features(std::span<const BoundingBox> boxes, int width, int height) {
    ObjectFeatures f;
    f.object_cnt = static_cast<int>(boxes.size());
    f.has_detection = !boxes.empty();
    if (boxes.empty()) return f;
    for (const BoundingBox& b : boxes)
        if (!b.valid_for(width, height)) throw Error("bounding box outside the image");

    const BoundingBox hull = union_hull(boxes);
    f.top_space = hull.top;
    f.bottom_space = height - hull.bottom;
    f.left_space = hull.left;
    f.right_space = width - hull.right;
    f.x_asymmetry = std::abs(*f.right_space - *f.left_space) / static_cast<double>(width);
    f.y_asymmetry = std::abs(*f.top_space - *f.bottom_space) / static_cast<double>(height);
    return f;
}

DetectionLabelTable detection_label_table(std::span<const CountLabel> rows) {
    if (rows.empty()) throw Error("detection_label_table: no rows");
    DetectionLabelTable t{};
    for (const CountLabel& r : rows) {
        if (r.label < 0 || r.label > 2) throw Error("label outside {0,1,2}");
        if (r.object_cnt < 0) throw Error("negative object count");
        const int row = std::min(r.object_cnt, 2);
        ++t[static_cast<std::size_t>(row)][static_cast<std::size_t>(r.label)];
    }
    return t;
}

namespace {

using json = nlohmann::json;

template <class Fn>
void for_each_jsonl(const std::filesystem::path& path, Fn&& fn) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            fn(json::parse(line));
        } catch (const json::exception& e) {
            throw ParseError(path.string(), line_no, e.what());
        } catch (const ParseError&) {
            throw;
        } catch (const Error& e) {
            throw ParseError(path.string(), line_no, e.what());
        }
    }
}

BoundingBox box_from_json(const json& b) {
    BoundingBox box{b.at("left").get<int>(), b.at("top").get<int>(), b.at("right").get<int>(),
                    b.at("bottom").get<int>()};
    if (box.left < 0 || box.top < 0 || box.left >= box.right || box.top >= box.bottom)
        throw Error("degenerate or negative box");
    return box;
}

nlohmann::ordered_json box_to_json(const BoundingBox& b) {
    nlohmann::ordered_json j;
    j["left"] = b.left;
    j["top"] = b.top;
    j["right"] = b.right;
    j["bottom"] = b.bottom;
    return j;
}

}  // namespace

DetectionSet load_detections(const std::filesystem::path& path) {
    DetectionSet set;
    for_each_jsonl(path, [&](const json& obj) {
        auto& boxes = set[obj.at("image_id").get<std::string>()];
        for (const json& b : obj.at("boxes")) {
            const double conf = b.at("conf").get<double>();
            if (!(conf >= 0.0 && conf <= 1.0)) throw Error("confidence outside [0,1]");
            boxes.push_back({box_from_json(b), conf});
        }
    });
    return set;
}

GroundTruthSet load_groundtruth(const std::filesystem::path& path) {
    GroundTruthSet set;
    for_each_jsonl(path, [&](const json& obj) {
        auto& boxes = set[obj.at("image_id").get<std::string>()];
        for (const json& b : obj.at("boxes")) boxes.push_back(box_from_json(b));
    });
    return set;
}

std::string detections_to_jsonl(const DetectionSet& set) {
    std::string out;
    for (const auto& [id, boxes] : set) {
        nlohmann::ordered_json arr = nlohmann::ordered_json::array();
        for (const ScoredBox& sb : boxes) {
            nlohmann::ordered_json b = box_to_json(sb.box);
            b["conf"] = sb.confidence;
            arr.push_back(std::move(b));
        }
        out += nlohmann::ordered_json{{"image_id", id}, {"boxes", std::move(arr)}}.dump() + "\n";
    }
    return out;
}

std::string groundtruth_to_jsonl(const GroundTruthSet& set) {
    std::string out;
    for (const auto& [id, boxes] : set) {
        nlohmann::ordered_json arr = nlohmann::ordered_json::array();
        for (const BoundingBox& b : boxes) arr.push_back(box_to_json(b));
        out += nlohmann::ordered_json{{"image_id", id}, {"boxes", std::move(arr)}}.dump() + "\n";
    }
    return out;
}

}  // namespace photoscore
