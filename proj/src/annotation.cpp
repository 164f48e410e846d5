#include "photoscore/annotation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "photoscore/csv.hpp"
#include "photoscore/error.hpp"
#include "photoscore/stats.hpp"

namespace photoscore {

std::vector<StandardizedRating> standardize_raters(std::span<const RatingRecord> ratings) {
    struct Moments {
        double sum = 0, sum_sq = 0;
        std::size_t n = 0;
        int min = 6, max = 0;
    };
    std::map<std::string, Moments, std::less<>> by_rater;
    for (const RatingRecord& r : ratings) {
        Moments& m = by_rater[r.rater_id];
        m.sum += r.raw_score;
        ++m.n;
        m.min = std::min(m.min, r.raw_score);
        m.max = std::max(m.max, r.raw_score);
    }
    std::map<std::string, std::pair<double, double>, std::less<>> mean_sd;
    for (auto& [rater, m] : by_rater) {
        const double mean = m.sum / static_cast<double>(m.n);
        double ss = 0.0;
        for (const RatingRecord& r : ratings)
            if (r.rater_id == rater) ss += (r.raw_score - mean) * (r.raw_score - mean);
        const double sd = (m.n < 2 || m.min == m.max) ? 0.0 : std::sqrt(ss / static_cast<double>(m.n));
        mean_sd[rater] = {mean, sd};
    }
    std::vector<StandardizedRating> out;
    out.reserve(ratings.size());
    for (const RatingRecord& r : ratings) {
        const auto& [mean, sd] = mean_sd.at(r.rater_id);
        out.push_back({r.image_id, r.rater_id, sd > 0.0 ? (r.raw_score - mean) / sd : 0.0});
    }
    return out;
}

std::vector<ImageScore> aggregate_image_scores(std::span<const StandardizedRating> ratings) {
    std::map<std::string, std::vector<double>, std::less<>> by_image;
    for (const StandardizedRating& r : ratings) by_image[r.image_id].push_back(r.z);
    std::vector<ImageScore> out;
    for (auto& [id, zs] : by_image) {
        // sort so the result does not depend on rating order
        std::sort(zs.begin(), zs.end());
        double sum = 0.0;
        for (double z : zs) sum += z;
        const double mean = sum / static_cast<double>(zs.size());
        double ss = 0.0;
        for (double z : zs) ss += (z - mean) * (z - mean);
        out.push_back({id, mean, std::sqrt(ss / static_cast<double>(zs.size())),
                       static_cast<int>(zs.size())});
    }
    return out;
}

std::vector<ImageScore> filter_by_disagreement(std::span<const ImageScore> scores,
                                               double retain_fraction) {
    if (!(retain_fraction > 0.0 && retain_fraction <= 1.0))
        throw Error("retain_fraction must be in (0,1]");
    std::vector<ImageScore> sorted(scores.begin(), scores.end());
    std::sort(sorted.begin(), sorted.end(), [](const ImageScore& a, const ImageScore& b) {
        if (a.std_z != b.std_z) return a.std_z < b.std_z;
        return a.image_id < b.image_id;
    });
    const auto keep = static_cast<std::size_t>(
        std::floor(retain_fraction * static_cast<double>(sorted.size()) + 1e-9));
    sorted.resize(std::min(keep, sorted.size()));
    std::sort(sorted.begin(), sorted.end(),
              [](const ImageScore& a, const ImageScore& b) { return a.image_id < b.image_id; });
    return sorted;
}

QualityLabel discretize(double mean_z) {
    const double r = std::round(mean_z);  // half away from zero
    if (r > 0) return QualityLabel::Good;
    if (r < 0) return QualityLabel::Bad;
    return QualityLabel::Neutral;
}

QualityLabel discretize(const ImageScore& score) { return discretize(score.mean_z); }

PairwiseCorrelation mean_pairwise_pearson(std::span<const StandardizedRating> ratings,
                                          int min_common) {
    std::map<std::string, std::map<std::string, double>, std::less<>> by_rater;
    for (const StandardizedRating& r : ratings) by_rater[r.rater_id][r.image_id] = r.z;

    std::vector<double> rhos;
    std::vector<double> x, y;
    for (auto a = by_rater.begin(); a != by_rater.end(); ++a) {
        for (auto b = std::next(a); b != by_rater.end(); ++b) {
            x.clear();
            y.clear();
            for (const auto& [image, z] : a->second) {
                auto it = b->second.find(image);
                if (it == b->second.end()) continue;
                x.push_back(z);
                y.push_back(it->second);
            }
            if (static_cast<int>(x.size()) < min_common || x.size() < 2) continue;
            const auto [xl, xh] = std::minmax_element(x.begin(), x.end());
            const auto [yl, yh] = std::minmax_element(y.begin(), y.end());
            if (*xl == *xh || *yl == *yh) continue;
            rhos.push_back(pearson(x, y));
        }
    }
    if (rhos.empty()) throw Error("insufficient overlap: no rater pair shares enough images");

    PairwiseCorrelation out;
    out.n_pairs = static_cast<int>(rhos.size());
    double sum = 0.0;
    for (double r : rhos) sum += r;
    out.mean_rho = sum / static_cast<double>(rhos.size());
    if (rhos.size() > 1) {
        double ss = 0.0;
        for (double r : rhos) ss += (r - out.mean_rho) * (r - out.mean_rho);
        const double sd = std::sqrt(ss / static_cast<double>(rhos.size() - 1));
        out.stderr_rho = sd / std::sqrt(static_cast<double>(rhos.size()));
    }
    return out;
}

AnnotationResult annotate_corpus(const ListingCorpus& corpus, const AnnotationOptions& opts) {
    const std::vector<RatingRecord> all = corpus.all_ratings();
    const std::vector<StandardizedRating> std_ratings = standardize_raters(all);
    const std::vector<ImageScore> scores = aggregate_image_scores(std_ratings);

    std::map<std::string, std::vector<ImageScore>> by_category;
    for (const ImageScore& s : scores) {
        const ImageRecord* rec = corpus.find(s.image_id);
        by_category[rec ? rec->category : std::string()].push_back(s);
    }

    AnnotationResult result;
    result.images_before_filter = scores.size();
    std::set<std::string, std::less<>> kept_ids;
    for (auto& [category, group] : by_category)
        for (const ImageScore& s : filter_by_disagreement(group, opts.retain_fraction)) {
            kept_ids.insert(s.image_id);
            result.labels.push_back({s, discretize(s)});
        }
    std::sort(result.labels.begin(), result.labels.end(),
              [](const LabeledScore& a, const LabeledScore& b) {
                  return a.score.image_id < b.score.image_id;
              });

    auto safe_rho = [&](std::span<const StandardizedRating> rs) {
        try {
            return mean_pairwise_pearson(rs, opts.min_common);
        } catch (const Error&) {
            return PairwiseCorrelation{};
        }
    };
    result.rho_before = safe_rho(std_ratings);
    std::vector<StandardizedRating> retained;
    for (const StandardizedRating& r : std_ratings)
        if (kept_ids.contains(r.image_id)) retained.push_back(r);
    result.rho_after = safe_rho(retained);
    return result;
}

std::string labels_to_csv(std::span<const LabeledScore> labels) {
    std::string out = "image_id,mean_z,std_z,n_raters,label\n";
    for (const LabeledScore& l : labels) {
        out += l.score.image_id + "," + format_real(l.score.mean_z) + "," +
               format_real(l.score.std_z) + "," + std::to_string(l.score.n_raters) + "," +
               std::to_string(static_cast<int>(l.label)) + "\n";
    }
    return out;
}

void write_labels_csv(std::span<const LabeledScore> labels, const std::filesystem::path& path) {
    const std::string text = labels_to_csv(labels);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
}

}  // namespace photoscore
