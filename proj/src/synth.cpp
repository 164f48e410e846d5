#include "photoscore/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "photoscore/codec.hpp"
#include "photoscore/csv.hpp"
#include "photoscore/error.hpp"
#include "photoscore/random.hpp"

namespace photoscore {
namespace {

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

double color_distance(const Rgb& a, const Rgb& b) {
    return std::sqrt((a.r - b.r) * (a.r - b.r) + (a.g - b.g) * (a.g - b.g) +
                     (a.b - b.b) * (a.b - b.b));
}

bool covers(const SceneObject& o, double px, double py) {
    const double dx = (px - o.cx) / o.rx;
    const double dy = (py - o.cy) / o.ry;
    if (o.ellipse) return dx * dx + dy * dy <= 1.0;
    return std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0;
}

std::string padded_id(const char* prefix, int i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%05d", prefix, i);
    return buf;
}

Rgb random_object_color(Rng& rng, const Rgb& background) {
    Rgb c;
    for (int attempt = 0; attempt < 64; ++attempt) {
        c = {rng.uniform(0.05, 0.6), rng.uniform(0.05, 0.6), rng.uniform(0.05, 0.6)};
        if (color_distance(c, background) >= 0.45) return c;
    }
    return {0.1, 0.1, 0.1};
}

void validate(const SynthSpec& s) {
    if (s.n_images <= 0) throw Error("synthetic corpus: n_images must be positive");
    if (s.width < 16 || s.height < 16) throw Error("synthetic corpus: canvas must be >= 16x16");
    if (s.batch_size <= 0 || s.raters_per_batch <= 0)
        throw Error("synthetic corpus: batch_size and raters_per_batch must be positive");
    if (!(s.min_area_fraction > 0.0 && s.min_area_fraction <= s.max_area_fraction &&
          s.max_area_fraction <= 0.6))
        throw Error("synthetic corpus: need 0 < min_area_fraction <= max_area_fraction <= 0.6");
    if (s.image_noise < 0.0 || s.rater_noise < 0.0)
        throw Error("synthetic corpus: noise levels must be non-negative");
    for (double p : {s.second_object_rate, s.miss_rate, s.false_positive_rate, s.rater_bias_rate,
                     s.spammer_fraction})
        if (!(p >= 0.0 && p <= 1.0)) throw Error("synthetic corpus: rates must lie in [0,1]");
}

// Places `count` objects side by side around a jittered centre, keeping a
// 4 px margin to the canvas edge.
std::vector<SceneObject> place_objects(Rng& rng, int width, int height, int count,
                                       double area_fraction, double off_center,
                                       const Rgb& background) {
    const double canvas = static_cast<double>(width) * static_cast<double>(height);
    const double per_object = area_fraction * canvas / count;
    const Rgb color = random_object_color(rng, background);
    std::vector<SceneObject> objs;
    for (int k = 0; k < count; ++k) {
        SceneObject o;
        o.ellipse = rng.bernoulli(0.6);
        const double aspect = rng.uniform(0.6, 1.6);
        const double area_unit = o.ellipse ? std::numbers::pi : 4.0;
        o.ry = std::sqrt(per_object / (area_unit * aspect));
        o.rx = o.ry * aspect;
        o.color = color;
        objs.push_back(o);
    }
    const double margin = 4.0;
    double total_w = 0.0, max_ry = 0.0;
    for (const auto& o : objs) {
        total_w += 2.0 * o.rx;
        max_ry = std::max(max_ry, o.ry);
    }
    const double gap = count > 1 ? 0.04 * width : 0.0;
    total_w += gap * (count - 1);
    // shrink when the group does not fit
    const double fit = std::min({1.0, (width - 2 * margin - 2) / total_w,
                                 (height - 2 * margin - 2) / (2.0 * max_ry)});
    if (fit < 1.0) {
        for (auto& o : objs) {
            o.rx *= fit;
            o.ry *= fit;
        }
        total_w *= fit;
        max_ry *= fit;
    }
    const double half_w = total_w / 2.0;
    double gx = width / 2.0 + rng.normal() * off_center * width;
    double gy = height / 2.0 + rng.normal() * off_center * height;
    gx = std::clamp(gx, margin + half_w + 1, width - margin - half_w - 1);
    gy = std::clamp(gy, margin + max_ry + 1, height - margin - max_ry - 1);
    double x = gx - half_w;
    for (auto& o : objs) {
        o.cx = x + o.rx;
        o.cy = gy;
        x += 2.0 * o.rx + gap * fit;
    }
    return objs;
}

}  // namespace

Image render_scene(const Scene& scene) {
    Image img(scene.width, scene.height);
    Rng noise(scene.noise_seed);
    for (int y = 0; y < scene.height; ++y) {
        const double shade = scene.gradient * ((y + 0.5) / scene.height - 0.5);
        for (int x = 0; x < scene.width; ++x) {
            Rgb c{scene.background.r + shade, scene.background.g + shade,
                  scene.background.b + shade};
            for (const SceneObject& o : scene.objects)
                if (covers(o, x + 0.5, y + 0.5)) c = o.color;
            if (scene.noise > 0.0) {
                c.r += scene.noise * noise.normal();
                c.g += scene.noise * noise.normal();
                c.b += scene.noise * noise.normal();
            }
            img.at(x, y) = {clamp01(c.r), clamp01(c.g), clamp01(c.b)};
        }
    }
    return quantize_8bit(img);
}

Mask scene_mask(const Scene& scene) {
    Mask m(scene.width, scene.height);
    for (int y = 0; y < scene.height; ++y)
        for (int x = 0; x < scene.width; ++x)
            for (const SceneObject& o : scene.objects)
                if (covers(o, x + 0.5, y + 0.5)) m.set(x, y, Region::Foreground);
    return m;
}

BoundingBox object_box(const Scene& scene, const SceneObject& obj) {
    BoundingBox b{scene.width, scene.height, 0, 0};
    for (int y = 0; y < scene.height; ++y)
        for (int x = 0; x < scene.width; ++x)
            if (covers(obj, x + 0.5, y + 0.5)) {
                b.left = std::min(b.left, x);
                b.top = std::min(b.top, y);
                b.right = std::max(b.right, x + 1);
                b.bottom = std::max(b.bottom, y + 1);
            }
    if (b.left >= b.right) throw Error("synthetic object covers no pixel");
    return b;
}

SyntheticCorpus generate_synthetic_corpus(const SynthSpec& spec, std::uint64_t seed) {
    validate(spec);
    Rng rng(seed);
    SyntheticCorpus out;
    std::vector<ImageRecord> records;
    const int W = spec.width, H = spec.height;

    for (int i = 0; i < spec.n_images; ++i) {
        const double q = rng.normal();
        const double s = sigmoid(1.5 * q);

        Scene sc;
        sc.width = W;
        sc.height = H;
        sc.latent_quality = q;
        const double bg_l = std::clamp(0.55 + 0.4 * s + rng.normal(0.0, 0.05), 0.3, 1.0);
        sc.background = {clamp01(bg_l + rng.normal(0.0, 0.02)), clamp01(bg_l + rng.normal(0.0, 0.02)),
                         clamp01(bg_l + rng.normal(0.0, 0.02))};
        sc.gradient = 0.3 * (1.0 - s) * rng.uniform(0.5, 1.0);
        sc.noise = spec.image_noise * (1.0 + 1.5 * (1.0 - s));
        const int count = rng.bernoulli(spec.second_object_rate) ? 2 : 1;
        const double t = std::clamp(0.5 - 0.25 * q + rng.normal(0.0, 0.15), 0.0, 1.0);
        const double area = spec.min_area_fraction + t * (spec.max_area_fraction - spec.min_area_fraction);
        sc.objects = place_objects(rng, W, H, count, area, 0.03 + 0.1 * (1.0 - s), sc.background);
        sc.noise_seed = rng.next();

        ImageRecord rec;
        rec.image_id = padded_id("img_", i);
        rec.path = "images/" + rec.image_id + ".png";
        rec.category = rng.bernoulli(0.5) ? "shoe" : "handbag";

        std::vector<BoundingBox> truth;
        for (const SceneObject& o : sc.objects) truth.push_back(object_box(sc, o));
        if (!rng.bernoulli(spec.miss_rate)) {
            for (const BoundingBox& b : truth) {
                const int m = 2 + static_cast<int>(rng.below(3));
                BoundingBox d{std::max(b.left - m, 1), std::max(b.top - m, 1),
                              std::min(b.right + m, W - 1), std::min(b.bottom + m, H - 1)};
                rec.detections.push_back({d, rng.uniform(0.9, 1.0)});
            }
        }
        if (rng.bernoulli(spec.false_positive_rate)) {
            const int bw = 8 + static_cast<int>(rng.below(static_cast<std::uint64_t>(W / 4)));
            const int bh = 8 + static_cast<int>(rng.below(static_cast<std::uint64_t>(H / 4)));
            const int l = static_cast<int>(rng.below(static_cast<std::uint64_t>(W - bw)));
            const int tp = static_cast<int>(rng.below(static_cast<std::uint64_t>(H - bh)));
            rec.detections.push_back({{l, tp, l + bw, tp + bh}, rng.uniform(0.3, 0.85)});
        }

        ListingMeta meta;
        meta.listing_id = padded_id("L", i);
        meta.days_listed = static_cast<long long>(std::floor(std::exp(rng.normal(2.5, 1.0))));
        meta.view_count = static_cast<long long>(std::floor(std::exp(rng.normal(3.5, 1.2))));
        meta.price = std::max(0.01, std::round(std::exp(rng.normal(3.5, 0.7)) * 100.0) / 100.0);
        meta.quality_score = q;
        meta.aesthetic_score = 0.4 * q + rng.normal(0.0, 0.9);
        const SalesModel& b = spec.sales;
        const double eta = b.intercept + b.days * std::log1p(static_cast<double>(meta.days_listed)) +
                           b.views * std::log1p(static_cast<double>(meta.view_count)) +
                           b.price * std::log(meta.price) + b.quality * q +
                           b.aesthetic * *meta.aesthetic_score;
        meta.sold = rng.bernoulli(sigmoid(eta));
        rec.listing = meta;

        records.push_back(std::move(rec));
        out.scenes.push_back(std::move(sc));
        out.true_boxes.push_back(std::move(truth));
    }

    // Crowd ratings: each batch is rated in full by its own raters.
    const int n_batches = (spec.n_images + spec.batch_size - 1) / spec.batch_size;
    for (int bi = 0; bi < n_batches; ++bi) {
        const int begin = bi * spec.batch_size;
        const int end = std::min(spec.n_images, begin + spec.batch_size);
        for (int r = 0; r < spec.raters_per_batch; ++r) {
            char id[32];
            std::snprintf(id, sizeof id, "w%03d_%02d", bi, r);
            const int bias = rng.bernoulli(spec.rater_bias_rate) ? (rng.bernoulli(0.5) ? 1 : -1) : 0;
            const bool spammer = rng.bernoulli(spec.spammer_fraction);
            for (int i = begin; i < end; ++i) {
                const std::size_t k = static_cast<std::size_t>(i);
                int score;
                if (spammer) {
                    score = 1 + static_cast<int>(rng.below(5));
                } else {
                    // integer offsets keep a noise-free rater an exact shift of the truth
                    const double truth = 3.0 + std::clamp(out.scenes[k].latent_quality, -1.49, 1.49);
                    const double noise = spec.rater_noise > 0.0 ? spec.rater_noise * rng.normal() : 0.0;
                    score = static_cast<int>(std::lround(truth + bias + noise));
                    score = std::clamp(score, 1, 5);
                }
                records[k].ratings.push_back({records[k].image_id, id, score});
            }
        }
    }

    out.corpus = ListingCorpus(std::move(records));
    return out;
}

TwoRegionScene make_two_region_scene(int width, int height, std::uint64_t seed) {
    if (width < 16 || height < 16) throw Error("two-region scene must be >= 16x16");
    Rng rng(seed);
    Scene sc;
    sc.width = width;
    sc.height = height;
    const double l = rng.uniform(0.75, 1.0);
    sc.background = {clamp01(l + rng.normal(0.0, 0.03)), clamp01(l + rng.normal(0.0, 0.03)),
                     clamp01(l + rng.normal(0.0, 0.03))};
    sc.noise = 0.03;
    sc.objects = place_objects(rng, width, height, 1, rng.uniform(0.1, 0.35), 0.08, sc.background);
    sc.noise_seed = rng.next();

    const BoundingBox tight = object_box(sc, sc.objects.front());
    const int m = 3;
    TwoRegionScene out{sc, {std::max(tight.left - m, 1), std::max(tight.top - m, 1),
                            std::min(tight.right + m, width - 1), std::min(tight.bottom + m, height - 1)}};
    return out;
}

void write_synthetic_corpus(const SyntheticCorpus& synth, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir / "images");
    const auto& images = synth.corpus.images();
    std::string truth = "image_id,latent_quality,true_boxes\n";
    for (std::size_t i = 0; i < images.size(); ++i) {
        write_file(dir / images[i].path, encode_png(render_scene(synth.scenes[i])));
        truth += images[i].image_id + "," + format_real(synth.scenes[i].latent_quality) + ",";
        for (std::size_t b = 0; b < synth.true_boxes[i].size(); ++b) {
            const BoundingBox& box = synth.true_boxes[i][b];
            if (b > 0) truth += ";";
            truth += std::to_string(box.left) + " " + std::to_string(box.top) + " " +
                     std::to_string(box.right) + " " + std::to_string(box.bottom);
        }
        truth += "\n";
    }
    write_manifest(synth.corpus, dir / "manifest.jsonl");
    std::ofstream t(dir / "truth.csv", std::ios::binary | std::ios::trunc);
    if (!t) throw Error("cannot write " + (dir / "truth.csv").string());
    t << truth;
}

}  // namespace photoscore
