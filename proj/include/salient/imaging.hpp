#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace salient {

using GrayMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using GrayMap = Eigen::Map<const GrayMatrix>;

/// 8-bit raster (1 or 3 interleaved channels) tied to a physical canvas.
///
/// Density is pixels per canvas centimetre. It is carried alongside the
/// pixels rather than read from file metadata; an image loaded without a
/// manifest has no density until one is assigned.
class CanvasImage {
public:
    CanvasImage() = default;
    CanvasImage(int width, int height, int channels, std::optional<double> density,
                std::string source_id);
    CanvasImage(int width, int height, int channels, std::optional<double> density,
                std::string source_id, std::vector<std::uint8_t> pixels);

    int width() const { return width_; }
    int height() const { return height_; }
    int channels() const { return channels_; }
    std::optional<double> density() const { return density_; }
    const std::string& source_id() const { return source_id_; }

    void set_density(double px_per_cm);
    void set_source_id(std::string id) { source_id_ = std::move(id); }

    std::uint8_t& at(int x, int y, int c = 0) { return pixels_[index(x, y, c)]; }
    std::uint8_t at(int x, int y, int c = 0) const { return pixels_[index(x, y, c)]; }

    const std::vector<std::uint8_t>& pixels() const { return pixels_; }
    std::vector<std::uint8_t>& pixels() { return pixels_; }

    /// Row-major view of a single-channel image.
    GrayMap gray() const;

    /// Copy of the square/rectangular window at (x, y); must lie inside.
    CanvasImage crop(int x, int y, int w, int h) const;

    bool operator==(const CanvasImage& other) const = default;

private:
    std::size_t index(int x, int y, int c) const {
        return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
    }

    int width_ = 0;
    int height_ = 0;
    int channels_ = 1;
    std::optional<double> density_;
    std::string source_id_;
    std::vector<std::uint8_t> pixels_;
};

/// Output dimension for a density change: round(dim * ratio), at least 1.
int scaled_dimension(int dim, double ratio);

/// Resample to a new density. Area averaging when shrinking, bilinear when
/// growing; identical density returns an exact copy.
CanvasImage resample_to_density(const CanvasImage& img, double target_density);

/// Resample to explicit pixel dimensions (same filters); density scales
/// with the horizontal factor.
CanvasImage resize(const CanvasImage& img, int width, int height);

/// ITU-R 601 luma, rounded to nearest. Single-channel input is returned as is.
CanvasImage to_luminance(const CanvasImage& img);

// PNG / JPEG I/O. Density is never taken from the file.
CanvasImage read_image(const std::filesystem::path& path);
void write_png(const CanvasImage& img, const std::filesystem::path& path);

/// RGBA writer for overlays; `rgba` holds width*height*4 bytes.
void write_png_rgba(const std::vector<std::uint8_t>& rgba, int width, int height,
                    const std::filesystem::path& path);

}  // namespace salient
