#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "salient/dataset.hpp"
#include "salient/imaging.hpp"

namespace salient::synth {

/// Texture families. The positive class always uses `diagonal_strokes`;
/// comparative images draw from the other three according to genre_mix.
enum class Texture { diagonal_strokes, counter_strokes, cross_hatch, blotches };

struct SynthConfig {
    int n_positive = 12;             // training images per class
    int n_comparative = 37;
    int n_positive_test = 0;
    int n_comparative_test = 0;
    int n_external = 0;              // blended images for corroboration runs
    int image_side_px = 1024;        // at native density
    double native_density = 50.0;    // px per canvas cm
    std::uint64_t seed = 1;
    double contrast = 1.0;           // texture amplitude; 0 leaves only shared noise
    std::vector<double> genre_mix{1.0, 1.0, 1.0};  // counter_strokes, cross_hatch, blotches
    double stroke_period_cm = 0.6;

    void validate() const;
};

/// Per-image seed derived from the corpus seed (splitmix64 of seed + index).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

/// Single texture image at native density. `blend` mixes the positive
/// family (1.0) with `family` (0.0); only used for external images.
CanvasImage render_texture(const SynthConfig& config, Texture family, std::uint64_t image_seed,
                           double blend = 0.0);

struct Corpus {
    Manifest manifest;
    std::vector<CanvasImage> images;  // same order as manifest entries
};

/// Builds the images and a manifest (paths relative to the output dir).
Corpus generate_corpus(const SynthConfig& config);

/// Writes images as PNG plus manifest.jsonl under `dir`.
void write_corpus(const Corpus& corpus, const std::filesystem::path& dir);

struct Region {
    int x, y, width, height;
    ImageClass image_class;
};

/// Background class plus non-overlapping rectangles drawn on top.
struct Layout {
    ImageClass background = ImageClass::positive;
    std::vector<Region> regions;
    Texture comparative_texture = Texture::counter_strokes;
};

struct Composite {
    CanvasImage image;  // RGB at native density
    CanvasImage mask;   // 255 = positive, 0 = comparative
};

/// Fills each region of the layout with its class texture. Throws on
/// overlapping or out-of-canvas regions.
Composite generate_composite(const SynthConfig& config, const Layout& layout,
                             std::uint64_t image_seed);

}  // namespace salient::synth
