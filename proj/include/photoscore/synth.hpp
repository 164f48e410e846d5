#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "photoscore/corpus.hpp"
#include "photoscore/image.hpp"

namespace photoscore {

// Coefficients of the logistic sales model used to draw `sold`:
// logit P(sold) = intercept + days*log1p(days) + views*log1p(views)
//                 + price*log(price) + quality*quality + aesthetic*aesthetic
struct SalesModel {
    double intercept = -1.0;
    double days = -0.3;
    double views = 0.5;
    double price = -0.2;
    double quality = 0.16;
    double aesthetic = 0.1;
};

struct SynthSpec {
    int n_images = 50;
    int width = 128;
    int height = 128;

    // Foreground objects: 1 or 2 ellipses/rectangles per image.
    double second_object_rate = 0.5;
    double min_area_fraction = 0.08;  // per-image total object area / canvas
    double max_area_fraction = 0.30;
    double image_noise = 0.02;  // per-pixel Gaussian noise sd

    // Detections derived from the true objects.
    double miss_rate = 0.07;           // probability an image has no detection
    double false_positive_rate = 0.2;  // low-confidence spurious box per image

    // Rater population: images are rated in batches; every rater in a batch
    // rates every image of that batch.
    int batch_size = 50;
    int raters_per_batch = 5;
    double rater_noise = 0.7;       // sd of per-rating noise
    double rater_bias_rate = 0.4;   // probability a rater has a +-1 offset
    double spammer_fraction = 0.1;  // raters scoring uniformly at random

    SalesModel sales;
};

struct SceneObject {
    bool ellipse = true;
    double cx = 0, cy = 0;  // center, pixels
    double rx = 0, ry = 0;  // half extents, pixels
    Rgb color;
};

// Everything needed to render one synthetic photo and its ground truth.
struct Scene {
    int width = 0;
    int height = 0;
    Rgb background;
    double gradient = 0.0;  // vertical background gradient amplitude
    double noise = 0.0;
    std::uint64_t noise_seed = 0;
    std::vector<SceneObject> objects;
    double latent_quality = 0.0;
};

struct SyntheticCorpus {
    ListingCorpus corpus;       // records reference images/<image_id>.png
    std::vector<Scene> scenes;  // parallel to corpus.images()
    std::vector<std::vector<BoundingBox>> true_boxes;
};

// Deterministic in (spec, seed). Throws Error on non-positive counts/sizes.
SyntheticCorpus generate_synthetic_corpus(const SynthSpec& spec, std::uint64_t seed);

// Rendered photo, quantized to 8 bits so it equals its own PNG decode.
Image render_scene(const Scene& scene);
Mask scene_mask(const Scene& scene);
// Tight box around one object, clipped to the canvas.
BoundingBox object_box(const Scene& scene, const SceneObject& obj);

// One uniform-ish object on a uniform-ish ground, for segmentation oracles.
struct TwoRegionScene {
    Scene scene;
    BoundingBox seed_box;  // true object box grown by a margin
};
TwoRegionScene make_two_region_scene(int width, int height, std::uint64_t seed);

// Writes images/<id>.png, manifest.jsonl and truth.csv under `dir`.
void write_synthetic_corpus(const SyntheticCorpus& synth, const std::filesystem::path& dir);

}  // namespace photoscore
