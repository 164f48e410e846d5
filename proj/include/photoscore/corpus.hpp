#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "photoscore/image.hpp"

namespace photoscore {

struct RatingRecord {
    std::string image_id;
    std::string rater_id;
    int raw_score = 0;  // 1..5

    friend bool operator==(const RatingRecord&, const RatingRecord&) = default;
};

struct Detection {
    BoundingBox box;
    std::optional<double> confidence;  // absent for human-drawn boxes

    friend bool operator==(const Detection&, const Detection&) = default;
};

struct ListingMeta {
    std::string listing_id;
    long long days_listed = 0;
    long long view_count = 0;
    double price = 1.0;
    bool sold = false;
    std::optional<double> aesthetic_score;
    std::optional<double> quality_score;

    friend bool operator==(const ListingMeta&, const ListingMeta&) = default;
};

struct ImageRecord {
    std::string image_id;
    std::string path;  // as written in the manifest
    std::string category;
    std::vector<Detection> detections;
    std::vector<RatingRecord> ratings;
    std::optional<ListingMeta> listing;
    // False when another image of the same listing appeared earlier in the
    // manifest; only the primary image enters listing-level analyses.
    bool primary_for_listing = true;

    friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

// Images in manifest order. Immutable after load; safe to share read-only.
class ListingCorpus {
public:
    ListingCorpus() = default;
    explicit ListingCorpus(std::vector<ImageRecord> images, std::filesystem::path base_dir = {});

    const std::vector<ImageRecord>& images() const noexcept { return images_; }
    std::size_t size() const noexcept { return images_.size(); }
    bool empty() const noexcept { return images_.empty(); }

    const ImageRecord* find(std::string_view image_id) const;
    std::filesystem::path resolve(const ImageRecord& rec) const;
    const std::filesystem::path& base_dir() const noexcept { return base_dir_; }

    std::vector<RatingRecord> all_ratings() const;
    // Listing metadata of primary images, in manifest order.
    std::vector<ListingMeta> listings() const;
    std::size_t rating_count() const;

private:
    std::vector<ImageRecord> images_;
    std::map<std::string, std::size_t, std::less<>> index_;
    std::filesystem::path base_dir_;
};

inline constexpr std::string_view kCategories[] = {"shoe", "handbag"};

struct ManifestOptions {
    // Check boxes against the referenced image's header dimensions.
    bool check_boxes_against_images = true;
};

// JSON-lines manifest, one image record per line. Blank lines are skipped.
// Throws ParseError naming the line for malformed or invalid records.
ListingCorpus load_manifest(const std::filesystem::path& path, ManifestOptions opts = {});
ListingCorpus parse_manifest(std::string_view text, const std::filesystem::path& base_dir,
                             ManifestOptions opts = {}, std::string_view source = "manifest");

std::string manifest_to_string(const ListingCorpus& corpus);
void write_manifest(const ListingCorpus& corpus, const std::filesystem::path& path);

}  // namespace photoscore
