#pragma once

#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>

#include "salient/imaging.hpp"

namespace salient::testing {

/// Fresh per-test scratch directory under the build tree.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const char* root = std::getenv("SALIENT_TMP");
    std::filesystem::path dir =
        std::filesystem::path(root ? root : std::filesystem::temp_directory_path().string()) / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline CanvasImage constant_image(int w, int h, std::uint8_t value, int channels = 1,
                                  std::optional<double> density = 25.0,
                                  const std::string& id = "const") {
    CanvasImage img(w, h, channels, density, id);
    std::fill(img.pixels().begin(), img.pixels().end(), value);
    return img;
}

inline CanvasImage noise_image(int w, int h, std::uint64_t seed, int channels = 1,
                               std::optional<double> density = 25.0,
                               const std::string& id = "noise") {
    CanvasImage img(w, h, channels, density, id);
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> px(0, 255);
    for (auto& p : img.pixels())
        p = static_cast<std::uint8_t>(px(rng));
    return img;
}

/// Full-range noise on the left half, faint noise on the right: tiles in
/// the busy half clear the whole-image entropy gate.
inline CanvasImage half_busy_image(int w, int h, std::uint64_t seed, int channels = 1,
                                   std::optional<double> density = 25.0,
                                   const std::string& id = "half") {
    CanvasImage img = noise_image(w, h, seed, channels, density, id);
    for (int y = 0; y < h; ++y)
        for (int x = w / 2; x < w; ++x)
            for (int c = 0; c < channels; ++c)
                img.at(x, y, c) = static_cast<std::uint8_t>(120 + img.at(x, y, c) / 32);
    return img;
}

}  // namespace salient::testing
