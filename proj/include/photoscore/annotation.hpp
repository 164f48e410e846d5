#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "photoscore/corpus.hpp"

namespace photoscore {

struct StandardizedRating {
    std::string image_id;
    std::string rater_id;
    double z = 0;
};

struct ImageScore {
    std::string image_id;
    double mean_z = 0;
    double std_z = 0;  // population sd
    int n_raters = 0;
};

enum class QualityLabel : int { Bad = 0, Neutral = 1, Good = 2 };

// Per rater z = (raw - mean) / popstd; raters with a single rating or zero
// spread get z = 0. Output order follows the input.
std::vector<StandardizedRating> standardize_raters(std::span<const RatingRecord> ratings);

// One score per image, ordered by image id.
std::vector<ImageScore> aggregate_image_scores(std::span<const StandardizedRating> ratings);

// Keeps floor(retain_fraction * N) images with the smallest std_z; ties go to
// the smaller image id. Output ordered by image id.
std::vector<ImageScore> filter_by_disagreement(std::span<const ImageScore> scores,
                                               double retain_fraction = 0.6);

// Rounds mean_z half away from zero: >0 Good, 0 Neutral, <0 Bad.
QualityLabel discretize(const ImageScore& score);
QualityLabel discretize(double mean_z);

struct PairwiseCorrelation {
    double mean_rho = 0;
    double stderr_rho = 0;  // sample sd / sqrt(n_pairs); 0 for one pair
    int n_pairs = 0;
};

// Mean Pearson rho over rater pairs sharing at least `min_common` images.
// Pairs where either rater is constant over the shared images are skipped.
// Throws Error("insufficient overlap") when no pair qualifies.
PairwiseCorrelation mean_pairwise_pearson(std::span<const StandardizedRating> ratings,
                                          int min_common = 5);

struct LabeledScore {
    ImageScore score;
    QualityLabel label = QualityLabel::Neutral;
};

struct AnnotationOptions {
    double retain_fraction = 0.6;
    int min_common = 5;
};

struct AnnotationResult {
    std::vector<LabeledScore> labels;  // retained images, ordered by image id
    std::size_t images_before_filter = 0;
    // Agreement over all images and over retained images only; n_pairs == 0
    // when no pair had enough overlap.
    PairwiseCorrelation rho_before;
    PairwiseCorrelation rho_after;
};

// Full pipeline over a corpus: standardize all raters, then filter and
// discretize each category independently.
AnnotationResult annotate_corpus(const ListingCorpus& corpus, const AnnotationOptions& opts = {});

// image_id,mean_z,std_z,n_raters,label
std::string labels_to_csv(std::span<const LabeledScore> labels);
void write_labels_csv(std::span<const LabeledScore> labels, const std::filesystem::path& path);

}  // namespace photoscore
