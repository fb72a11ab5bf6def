#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "salient/imaging.hpp"

namespace salient {

enum class TileLabel { positive, comparative, unlabeled };

std::string to_string(TileLabel label);
TileLabel tile_label_from_string(const std::string& s);

/// Square tile geometry. Stride is side * (1 - overlap) rounded to nearest,
/// never below one pixel.
struct TileSpec {
    int side_px = 350;
    double overlap_fraction = 0.0;

    TileSpec() = default;
    TileSpec(int side, double overlap);

    int stride() const;

    bool operator==(const TileSpec&) const = default;
};

struct TilePosition {
    int x;
    int y;
    bool operator==(const TilePosition&) const = default;
};

struct Tile {
    int x = 0;
    int y = 0;
    int side = 0;
    double entropy_bits = 0.0;
    std::string source_id;
    TileLabel label = TileLabel::unlabeled;

    bool operator==(const Tile&) const = default;
};

/// Shannon entropy (bits) of the 256-bin histogram of an 8-bit window.
template <typename Derived>
double shannon_entropy(const Eigen::MatrixBase<Derived>& region);

/// Entropy of a 256-bin histogram with `total` samples.
double histogram_entropy(const std::array<long, 256>& counts, long total);

/// Positions per axis: floor((dim - side) / stride) + 1, or 0 if dim < side.
int positions_per_axis(int dim, const TileSpec& spec);

/// Row-major grid origins; empty when the image is smaller than a tile.
std::vector<TilePosition> tile_positions(int width, int height, const TileSpec& spec);

/// Grid tiles whose entropy is at least `threshold`.
std::vector<Tile> gate_tiles(const CanvasImage& gray, const TileSpec& spec, double threshold,
                             TileLabel label = TileLabel::unlabeled);

/// Grid tiles whose entropy is at least that of the whole image.
std::vector<Tile> salient_tiles(const CanvasImage& gray, const TileSpec& spec,
                                TileLabel label = TileLabel::unlabeled);

/// "{source_id}_{x}_{y}_{side}.png"
std::string tile_filename(const Tile& t);

/// Writes one PNG per tile plus `index.tsv` into `dir`. `images` maps each
/// tile's source_id to its (single-channel, analysis-density) image.
void write_tileset(const std::filesystem::path& dir, const std::vector<Tile>& tiles,
                   const std::vector<const CanvasImage*>& images);

std::vector<Tile> read_tile_index(const std::filesystem::path& index_file);

// ---------------------------------------------------------------------------

template <typename Derived>
double shannon_entropy(const Eigen::MatrixBase<Derived>& region) {
    static_assert(std::is_same_v<typename Derived::Scalar, std::uint8_t>,
                  "entropy is defined over 8-bit samples");
    const long total = static_cast<long>(region.size());
    std::array<long, 256> counts{};
    for (Eigen::Index r = 0; r < region.rows(); ++r)
        for (Eigen::Index c = 0; c < region.cols(); ++c)
            ++counts[region(r, c)];
    return histogram_entropy(counts, total);
}

}  // namespace salient
