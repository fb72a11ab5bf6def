#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "salient/entropy_tiler.hpp"
#include "salient/imaging.hpp"
#include "salient/trainer.hpp"

namespace salient {

using ProbGrid = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CountGrid = Eigen::Array<std::int32_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Per-pixel mean probability of the salient tiles covering each pixel.
/// Pixels with coverage 0 carry no data (mean_prob is 0 there).
struct ProbabilityMap {
    ProbGrid mean_prob;  // (row = y, col = x)
    CountGrid coverage;
    double density = 0.0;
    TileSpec tile;
    std::string model_id;

    int width() const { return static_cast<int>(mean_prob.cols()); }
    int height() const { return static_cast<int>(mean_prob.rows()); }

    /// Coverage-weighted mean of mean_prob over covered pixels.
    double weighted_mean() const;
};

struct ScoredTiles {
    std::vector<Tile> tiles;
    std::vector<double> probabilities;
};

/// Brings an image to the model's analysis density and to luminance.
CanvasImage analysis_image(const CanvasImage& img, double density);

/// Model probabilities for given tiles of a single-channel image.
std::vector<double> tile_probabilities(const TrainedModel& model, const CanvasImage& gray,
                                       const std::vector<Tile>& tiles);

/// Entropy-gated tiles of `img` (converted via analysis_image) and their
/// probabilities. Throws when no tile is salient.
ScoredTiles score_salient_tiles(const TrainedModel& model, const CanvasImage& img,
                                const TileSpec& spec);

double mean_probability(const std::vector<double>& probabilities);

/// Share of tiles with p > 0.5; an alternative overall score.
double fraction_positive(const std::vector<double>& probabilities);

/// Mean probability over the image's salient tiles.
double image_probability(const TrainedModel& model, const CanvasImage& img, const TileSpec& spec);

/// Accumulates tile probabilities into a map, in tile order.
ProbabilityMap accumulate_map(int width, int height, const std::vector<Tile>& tiles,
                              const std::vector<double>& probabilities);

ProbabilityMap probability_map(const TrainedModel& model, const CanvasImage& img,
                               const TileSpec& spec);

enum class ProbabilityBin { blue, green, gold, red };

/// p >= 0.65 red; 0.5 <= p < 0.65 gold; 0.35 < p < 0.5 green; p <= 0.35 blue.
ProbabilityBin probability_bin(double p);

std::array<std::uint8_t, 4> bin_color(ProbabilityBin bin);

/// RGBA overlay at map resolution; uncovered pixels are fully transparent.
std::vector<std::uint8_t> render_map(const ProbabilityMap& map);

/// Nearest-neighbour rescale of an RGBA buffer.
std::vector<std::uint8_t> upsample_nearest(const std::vector<std::uint8_t>& rgba, int width,
                                           int height, int out_width, int out_height);

/// Alpha-blends an RGBA overlay (same size) onto an image; returns RGB.
CanvasImage composite(const CanvasImage& base, const std::vector<std::uint8_t>& rgba);

enum class Verdict { positive, comparative };

/// Positive iff p > threshold; ties are comparative.
Verdict classify_image(double overall_probability, double threshold = 0.5);

// Numeric dump: text header terminated by "end\n", then float64 mean_prob
// and int32 coverage grids, row-major, little-endian.
void write_map_dump(const ProbabilityMap& map, const std::filesystem::path& path);
ProbabilityMap read_map_dump(const std::filesystem::path& path);

}  // namespace salient
