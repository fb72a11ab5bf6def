#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "salient/entropy_tiler.hpp"
#include "salient/imaging.hpp"

namespace salient {

enum class ImageClass { positive, comparative };
enum class Role { train, test, external };
enum class Genre { portrait, madonna_and_child, religious_scene, single_figure, other };
enum class QualityFlag { ok, degraded };

std::string to_string(ImageClass v);
std::string to_string(Role v);
std::string to_string(Genre v);
std::string to_string(QualityFlag v);
ImageClass image_class_from_string(const std::string& s);
Role role_from_string(const std::string& s);
Genre genre_from_string(const std::string& s);
QualityFlag quality_flag_from_string(const std::string& s);

TileLabel tile_label(ImageClass c);

/// One painting in a corpus manifest.
struct ManifestEntry {
    std::string id;
    std::string title;
    ImageClass image_class = ImageClass::comparative;
    Role role = Role::train;
    Genre genre = Genre::other;
    std::string attribution_status;
    std::string image_path;  // as written; relative paths resolve against the manifest dir
    double canvas_width_cm = 0.0;
    QualityFlag quality_flag = QualityFlag::ok;

    bool operator==(const ManifestEntry&) const = default;
};

struct Manifest {
    std::filesystem::path base_dir;
    std::vector<ManifestEntry> entries;

    std::filesystem::path resolve(const ManifestEntry& e) const;
    const ManifestEntry& find(const std::string& id) const;
};

/// Reads a JSON-lines manifest (one object per line). Blank lines and
/// lines starting with '#' are skipped. Validation errors name the line.
Manifest load_manifest(const std::filesystem::path& path);
Manifest parse_manifest(std::istream& in, const std::filesystem::path& base_dir,
                        bool check_images = true, const std::string& origin = "manifest");
void write_manifest(const Manifest& manifest, const std::filesystem::path& path);

/// Luminance image at analysis density, keyed to its manifest entry.
struct AnalysisImage {
    ManifestEntry entry;
    CanvasImage gray;
};

/// Load, assign density from the canvas width, resample, convert to luma.
AnalysisImage prepare_image(const Manifest& manifest, const ManifestEntry& entry, double density);

struct ClassCounts {
    std::size_t positive = 0;
    std::size_t comparative = 0;

    /// positive / comparative; 0 when there are no comparative tiles.
    double ratio() const;
};

struct TileSets {
    std::vector<Tile> train_tiles;
    std::vector<Tile> test_tiles;
    ClassCounts train_counts;
    ClassCounts test_counts;
    std::vector<std::string> warnings;
};

/// Balance band for tile populations.
inline constexpr double kBalanceLow = 0.8;
inline constexpr double kBalanceHigh = 1.25;

/// Tiles train/test images with per-class overlap and entropy gating.
/// Degraded images are dropped from training (with a warning).
TileSets build_tilesets(const std::vector<AnalysisImage>& images, int side, double pos_overlap,
                        double neg_overlap);

/// Smallest positive overlap (base + k * 0.005, capped at 0.98) giving
/// positive tiles >= 0.9 * comparative tiles over the training images.
double balance_overlaps(const std::vector<AnalysisImage>& images, int side,
                        double base_neg_overlap);

enum class SplitKind { curated, random };

struct SplitPlan {
    std::vector<std::string> train_ids;
    std::vector<std::string> test_ids;
    std::vector<std::string> positive_test_ids;
    std::optional<std::uint64_t> seed;
    SplitKind kind = SplitKind::curated;

    bool operator==(const SplitPlan&) const = default;
};

/// Train/test exactly as the manifest roles say.
SplitPlan curated_split(const std::vector<ManifestEntry>& entries);

/// Positives keep their manifest role; non-external comparatives are
/// shuffled by `seed` and dealt n_train to train, then n_test to test.
SplitPlan random_split(const std::vector<ManifestEntry>& pool, std::size_t n_train,
                       std::size_t n_test, std::uint64_t seed);

/// Copy of `entries` with train/test roles rewritten from `plan`
/// (train/test entries named in neither set are dropped).
std::vector<ManifestEntry> apply_split(const std::vector<ManifestEntry>& entries,
                                       const SplitPlan& plan);

std::string split_to_json(const SplitPlan& plan);
SplitPlan split_from_json(const std::string& text);

}  // namespace salient
