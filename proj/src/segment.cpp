#include "photoscore/segment.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "photoscore/error.hpp"
#include "photoscore/features_global.hpp"
#include "photoscore/gmm.hpp"

namespace photoscore {
namespace {

using detail::ColorGmm;

// Forward 8-neighbour offsets; each unordered pair is visited once.
constexpr std::array<std::array<int, 2>, 4> kForward = {{{1, 0}, {0, 1}, {1, 1}, {-1, 1}}};

double sq_diff(const Rgb& a, const Rgb& b) {
    const double dr = a.r - b.r, dg = a.g - b.g, db = a.b - b.b;
    return dr * dr + dg * dg + db * db;
}

struct PairTerm {
    int j;
    double weight;
};

class GrabCutState {
public:
    GrabCutState(const Image& img, const BoundingBox& box, const GrabCutParams& params)
        : img_(img),
          w_(img.width()),
          h_(img.height()),
          n_(static_cast<std::size_t>(w_) * static_cast<std::size_t>(h_)),
          params_(params),
          fg_(params.gmm_components),
          bg_(params.gmm_components),
          hard_bg_(n_),
          fg_label_(n_) {
        for (int y = 0; y < h_; ++y)
            for (int x = 0; x < w_; ++x) {
                const std::size_t i = idx(x, y);
                hard_bg_[i] = !box.contains(x, y);
                fg_label_[i] = !hard_bg_[i];
            }
        build_pairs();
    }

    void initialize_models() {
        std::vector<Rgb> fg_px, bg_px;
        for (std::size_t i = 0; i < n_; ++i) (fg_label_[i] ? fg_px : bg_px).push_back(pixel(i));
        const auto fg_init = detail::kmeans_assign(fg_px, params_.gmm_components, params_.seed);
        const auto bg_init = detail::kmeans_assign(
            bg_px, params_.gmm_components, params_.seed ^ 0x9E3779B97F4A7C15ULL);
        fg_.fit(fg_px, fg_init);
        bg_.fit(bg_px, bg_init);
    }

    // Hard component assignment followed by a guarded refit of both models.
    void learn_models() {
        std::vector<Rgb> fg_px, bg_px;
        std::vector<int> fg_k, bg_k;
        for (std::size_t i = 0; i < n_; ++i) {
            const Rgb& z = pixel(i);
            if (fg_label_[i]) {
                fg_px.push_back(z);
                fg_k.push_back(fg_.best_component(z));
            } else {
                bg_px.push_back(z);
                bg_k.push_back(bg_.best_component(z));
            }
        }
        fg_.fit(fg_px, fg_k);
        bg_.fit(bg_px, bg_k);
    }

    // Exact minimisation over labels for the current colour models.
    std::size_t cut() {
        detail::MaxFlowGraph graph(static_cast<int>(n_));
        const double hard = 9.0 * params_.gamma + 1.0;
        for (std::size_t i = 0; i < n_; ++i) {
            const int v = static_cast<int>(i);
            if (hard_bg_[i]) {
                graph.add_terminal_weights(v, 0.0, hard);
            } else {
                const Rgb& z = pixel(i);
                graph.add_terminal_weights(v, bg_.cost(z), fg_.cost(z));
            }
        }
        for (std::size_t i = 0; i < n_; ++i)
            for (const PairTerm& p : pairs_[i])
                graph.add_edge(static_cast<int>(i), p.j, p.weight, p.weight);
        graph.max_flow();

        std::size_t changed = 0;
        for (std::size_t i = 0; i < n_; ++i) {
            const bool fg = !hard_bg_[i] && graph.in_source_segment(static_cast<int>(i));
            if (fg != fg_label_[i]) ++changed;
            fg_label_[i] = fg;
        }
        return changed;
    }

    double energy() const {
        double e = 0.0;
        for (std::size_t i = 0; i < n_; ++i) {
            const Rgb& z = pixel(i);
            e += fg_label_[i] ? fg_.cost(z) : bg_.cost(z);
            for (const PairTerm& p : pairs_[i])
                if (fg_label_[i] != fg_label_[static_cast<std::size_t>(p.j)]) e += p.weight;
        }
        return e;
    }

    Mask mask() const {
        Mask m(w_, h_);
        auto labels = m.labels();
        for (std::size_t i = 0; i < n_; ++i)
            labels[i] = fg_label_[i] ? Region::Foreground : Region::Background;
        return m;
    }

    std::size_t size() const { return n_; }

private:
    std::size_t idx(int x, int y) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(w_) +
               static_cast<std::size_t>(x);
    }
    const Rgb& pixel(std::size_t i) const { return img_.pixels()[i]; }

    // V(m,n) = gamma * exp(-beta * |z_m - z_n|^2), beta = 1 / (2 <|z_m - z_n|^2>)
    void build_pairs() {
        double sum = 0.0;
        std::size_t count = 0;
        for (int y = 0; y < h_; ++y)
            for (int x = 0; x < w_; ++x)
                for (const auto& d : kForward) {
                    const int nx = x + d[0], ny = y + d[1];
                    if (nx < 0 || nx >= w_ || ny >= h_) continue;
                    sum += sq_diff(img_.at(x, y), img_.at(nx, ny));
                    ++count;
                }
        const double beta = (count == 0 || sum <= 0.0) ? 0.0 : 1.0 / (2.0 * sum / count);
        pairs_.assign(n_, {});
        for (int y = 0; y < h_; ++y)
            for (int x = 0; x < w_; ++x)
                for (const auto& d : kForward) {
                    const int nx = x + d[0], ny = y + d[1];
                    if (nx < 0 || nx >= w_ || ny >= h_) continue;
                    const double wgt =
                        params_.gamma * std::exp(-beta * sq_diff(img_.at(x, y), img_.at(nx, ny)));
                    pairs_[idx(x, y)].push_back({static_cast<int>(idx(nx, ny)), wgt});
                }
    }

    const Image& img_;
    int w_, h_;
    std::size_t n_;
    GrabCutParams params_;
    ColorGmm fg_, bg_;
    std::vector<bool> hard_bg_;
    std::vector<bool> fg_label_;
    std::vector<std::vector<PairTerm>> pairs_;
};

}  // namespace

GrabCutResult grabcut_traced(const Image& img, const BoundingBox& seed_box,
                             const GrabCutParams& params) {
    if (params.gmm_components < 1) throw Error("gmm_components must be >= 1");
    if (!(params.gamma > 0.0)) throw Error("gamma must be > 0");
    if (params.max_iterations < 1) throw Error("max_iterations must be >= 1");
    if (img.empty()) throw Error("grabcut: empty image");
    if (!seed_box.valid_for(img.width(), img.height()))
        throw Error("grabcut: seed box outside the image");
    if (seed_box.left == 0 && seed_box.top == 0 && seed_box.right == img.width() &&
        seed_box.bottom == img.height())
        throw Error("grabcut: no background seed (box covers the entire image)");

    GrabCutState state(img, seed_box, params);
    state.initialize_models();

    GrabCutResult result;
    result.energy.push_back(state.energy());
    for (int it = 1; it <= params.max_iterations; ++it) {
        state.learn_models();
        const std::size_t changed = state.cut();
        result.energy.push_back(state.energy());
        result.iterations = it;
        result.changed_fraction = static_cast<double>(changed) / static_cast<double>(state.size());
        if (result.changed_fraction < params.convergence_fraction) break;
    }
    result.mask = state.mask();
    return result;
}

Mask grabcut(const Image& img, const BoundingBox& seed_box, const GrabCutParams& params) {
    return grabcut_traced(img, seed_box, params).mask;
}

RegionalFeatures regional_features(const Image& img, const Mask& mask) {
    if (mask.width() != img.width() || mask.height() != img.height())
        throw Error("regional_features: mask does not match image");
    std::vector<double> fg_l, bg_l;
    double bg_dist = 0.0;
    const auto px = img.pixels();
    const auto labels = mask.labels();
    for (std::size_t i = 0; i < px.size(); ++i) {
        const double l = luminance(px[i]);
        if (labels[i] == Region::Foreground) {
            fg_l.push_back(l);
        } else {
            bg_l.push_back(l);
            const double dr = 1.0 - px[i].r, dg = 1.0 - px[i].g, db = 1.0 - px[i].b;
            bg_dist += std::sqrt(dr * dr + dg * dg + db * db) / std::sqrt(3.0);
        }
    }
    auto mean = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    };

    RegionalFeatures f;
    if (bg_l.empty()) {
        f.fgbg_area_ratio = kInfiniteAreaRatio;
        return f;
    }
    f.fgbg_area_ratio = static_cast<double>(fg_l.size()) / static_cast<double>(bg_l.size());
    const double bg_mean = mean(bg_l);
    f.bg_lightness = bg_dist / static_cast<double>(bg_l.size());
    const auto [lo, hi] = std::minmax_element(bg_l.begin(), bg_l.end());
    double ss = 0.0;
    if (*lo != *hi)
        for (double l : bg_l) ss += (l - bg_mean) * (l - bg_mean);
    f.bg_nonuniformity = std::sqrt(ss / static_cast<double>(bg_l.size()));
    if (!fg_l.empty()) {
        f.bgfg_brightness_diff = bg_mean - mean(fg_l);
        f.bgfg_contrast_diff = michelson_contrast(bg_l) - michelson_contrast(fg_l);
    }
    return f;
}

}  // namespace photoscore
