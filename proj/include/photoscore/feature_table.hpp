#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "photoscore/annotation.hpp"
#include "photoscore/detect.hpp"
#include "photoscore/features_global.hpp"
#include "photoscore/segment.hpp"

namespace photoscore {

struct FeatureVector {
    GlobalFeatures global;
    ObjectFeatures object;
    std::optional<RegionalFeatures> regional;  // absent without segmentation
};

// The 18 photo features in table order.
inline constexpr std::array<std::string_view, 18> kFeatureNames = {
    "width",          "height",        "resolution",     "brightness",
    "contrast",       "dynamic_range", "object_cnt",     "top_space",
    "bottom_space",   "left_space",    "right_space",    "x_asymmetry",
    "y_asymmetry",    "fgbg_area_ratio", "bgfg_brightness_diff", "bgfg_contrast_diff",
    "bg_lightness",   "bg_nonuniformity"};

// Values aligned with kFeatureNames; nullopt where the feature is absent.
std::array<std::optional<double>, 18> feature_values(const FeatureVector& f);

struct FeatureRecord {
    std::string image_id;
    FeatureVector features;
    std::optional<QualityLabel> label;
};

// Exact CSV header line (without newline).
std::string_view feature_csv_header();

std::string feature_table_to_csv(std::span<const FeatureRecord> records);
// Throws Error on empty input or an unwritable path.
void write_feature_table(std::span<const FeatureRecord> records, const std::filesystem::path& path);
std::vector<FeatureRecord> read_feature_table(const std::filesystem::path& path);
std::vector<FeatureRecord> parse_feature_table(std::string_view text,
                                               std::string_view source = "features");

}  // namespace photoscore
