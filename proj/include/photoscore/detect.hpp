#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "photoscore/image.hpp"

namespace photoscore {

inline constexpr double kDefaultConfidenceThreshold = 0.90;

double iou(const BoundingBox& a, const BoundingBox& b) noexcept;

using BoxPair = std::pair<BoundingBox, BoundingBox>;

// Keeps annotation pairs whose overlap is at least `threshold`.
std::vector<BoxPair> agreement_filter(std::span<const BoxPair> pairs, double threshold = 0.5);

struct ScoredBox {
    BoundingBox box;
    double confidence = 1.0;
};

// Keyed by image id; ordered so every fold over it is deterministic.
using DetectionSet = std::map<std::string, std::vector<ScoredBox>>;
using GroundTruthSet = std::map<std::string, std::vector<BoundingBox>>;

// Single-class average precision at IoU >= 0.5 with greedy highest-IoU
// matching and all-points interpolation.
double map50(const DetectionSet& detections, const GroundTruthSet& groundtruth);
double average_precision(const DetectionSet& detections, const GroundTruthSet& groundtruth,
                         double iou_threshold);

std::vector<BoundingBox> filter_by_confidence(std::span<const ScoredBox> boxes,
                                              double threshold = kDefaultConfidenceThreshold);

struct ObjectFeatures {
    int object_cnt = 0;
    bool has_detection = false;
    // Distances from the union hull of all boxes to each image edge.
    std::optional<int> top_space;
    std::optional<int> bottom_space;
    std::optional<int> left_space;
    std::optional<int> right_space;
    std::optional<double> x_asymmetry;  // |right - left| / width
    std::optional<double> y_asymmetry;  // |top - bottom| / height
};

ObjectFeatures object_features(std::span<const BoundingBox> boxes, int width, int height);

// Rows: 0 / 1 / >=2 detections. Columns: Bad / Neutral / Good.
using DetectionLabelTable = std::array<std::array<long long, 3>, 3>;

struct CountLabel {
    int object_cnt = 0;
    int label = 0;  // 0, 1, 2
};
DetectionLabelTable detection_label_table(std::span<const CountLabel> rows);

// Detections / ground-truth JSONL: {"image_id": str, "boxes": [{...,"conf": f}]}.
DetectionSet load_detections(const std::filesystem::path& path);
GroundTruthSet load_groundtruth(const std::filesystem::path& path);
std::string detections_to_jsonl(const DetectionSet& set);
std::string groundtruth_to_jsonl(const GroundTruthSet& set);

}  // namespace photoscore
