#include "salient/inference_maps.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>

#include "salient/error.hpp"

namespace salient {

double ProbabilityMap::weighted_mean() const {
    const double total = coverage.cast<double>().sum();
    if (total == 0.0)
        throw data_error("probability map has no covered pixels");
    return (mean_prob * coverage.cast<double>()).sum() / total;
}

CanvasImage analysis_image(const CanvasImage& img, double density) {
    CanvasImage out = img;
    if (out.density() && *out.density() != density)
        out = resample_to_density(out, density);
    else if (!out.density())
        out.set_density(density);
    return to_luminance(out);
}

std::vector<double> tile_probabilities(const TrainedModel& model, const CanvasImage& gray,
                                       const std::vector<Tile>& tiles) {
    constexpr std::size_t kChunk = 64;
    const int side = model.spec.input_side;
    const Eigen::Index per = static_cast<Eigen::Index>(side) * side;
    std::vector<double> probs;
    probs.reserve(tiles.size());
    for (std::size_t start = 0; start < tiles.size(); start += kChunk) {
        const auto n = static_cast<Eigen::Index>(std::min(kChunk, tiles.size() - start));
        cnn::Tensor<float> batch({n, 1, side, side});
        for (Eigen::Index i = 0; i < n; ++i)
            tile_input(gray, tiles[start + static_cast<std::size_t>(i)], side, batch.data() + i * per);
        const auto p = cnn::forward(model.spec, model.params, batch);
        for (Eigen::Index i = 0; i < n; ++i)
            probs.push_back(static_cast<double>(p[i]));
    }
    return probs;
}

namespace {

ScoredTiles score_gray(const TrainedModel& model, const CanvasImage& gray, const TileSpec& spec) {
    ScoredTiles scored;
    scored.tiles = salient_tiles(gray, spec);
    if (scored.tiles.empty())
        throw data_error("image '" + gray.source_id() + "' not analyzable at this tile size (" +
                         std::to_string(spec.side_px) + " px)");
    scored.probabilities = tile_probabilities(model, gray, scored.tiles);
    return scored;
}

}  // namespace

ScoredTiles score_salient_tiles(const TrainedModel& model, const CanvasImage& img,
                                const TileSpec& spec) {
    return score_gray(model, analysis_image(img, model.provenance.tiles.density), spec);
}

double mean_probability(const std::vector<double>& probabilities) {
    if (probabilities.empty())
        throw data_error("image not analyzable at this tile size: no salient tiles");
    double sum = 0.0;
    for (double p : probabilities)
        sum += p;
    return sum / static_cast<double>(probabilities.size());
}

double fraction_positive(const std::vector<double>& probabilities) {
    if (probabilities.empty())
        throw data_error("image not analyzable at this tile size: no salient tiles");
    const auto hits = std::count_if(probabilities.begin(), probabilities.end(),
                                    [](double p) { return p > 0.5; });
    return static_cast<double>(hits) / static_cast<double>(probabilities.size());
}

double image_probability(const TrainedModel& model, const CanvasImage& img, const TileSpec& spec) {
    return mean_probability(score_salient_tiles(model, img, spec).probabilities);
}

ProbabilityMap accumulate_map(int width, int height, const std::vector<Tile>& tiles,
                              const std::vector<double>& probabilities) {
    if (tiles.size() != probabilities.size())
        throw data_error("one probability per tile required");
    ProbabilityMap map;
    ProbGrid sum = ProbGrid::Zero(height, width);
    map.coverage = CountGrid::Zero(height, width);
    for (std::size_t i = 0; i < tiles.size(); ++i) {
        const Tile& t = tiles[i];
        if (t.x < 0 || t.y < 0 || t.x + t.side > width || t.y + t.side > height)
            throw data_error("tile outside map bounds");
        sum.block(t.y, t.x, t.side, t.side) += probabilities[i];
        map.coverage.block(t.y, t.x, t.side, t.side) += 1;
    }
    map.mean_prob = (map.coverage > 0).select(sum / map.coverage.cast<double>().max(1.0), 0.0);
    return map;
}

ProbabilityMap probability_map(const TrainedModel& model, const CanvasImage& img,
                               const TileSpec& spec) {
    const double density = model.provenance.tiles.density;
    const CanvasImage gray = analysis_image(img, density);
    const ScoredTiles scored = score_gray(model, gray, spec);
    ProbabilityMap map = accumulate_map(gray.width(), gray.height(), scored.tiles,
                                        scored.probabilities);
    map.density = density;
    map.tile = spec;
    map.model_id = model.id();
    return map;
}

ProbabilityBin probability_bin(double p) {
    if (p >= 0.65)
        return ProbabilityBin::red;
    if (p >= 0.5)
        return ProbabilityBin::gold;
    if (p > 0.35)
        return ProbabilityBin::green;
    return ProbabilityBin::blue;
}

std::array<std::uint8_t, 4> bin_color(ProbabilityBin bin) {
    switch (bin) {
    case ProbabilityBin::red: return {220, 30, 30, 140};
    case ProbabilityBin::gold: return {230, 180, 40, 140};
    case ProbabilityBin::green: return {60, 160, 60, 140};
    case ProbabilityBin::blue: return {40, 60, 200, 140};
    }
    return {0, 0, 0, 0};
}

std::vector<std::uint8_t> render_map(const ProbabilityMap& map) {
    const int w = map.width(), h = map.height();
    std::vector<std::uint8_t> rgba(static_cast<std::size_t>(w) * h * 4, 0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (map.coverage(y, x) == 0)
                continue;
            const auto c = bin_color(probability_bin(map.mean_prob(y, x)));
            std::copy(c.begin(), c.end(), rgba.begin() + (static_cast<std::size_t>(y) * w + x) * 4);
        }
    return rgba;
}

std::vector<std::uint8_t> upsample_nearest(const std::vector<std::uint8_t>& rgba, int width,
                                           int height, int out_width, int out_height) {
    std::vector<std::uint8_t> out(static_cast<std::size_t>(out_width) * out_height * 4);
    for (int y = 0; y < out_height; ++y) {
        const int sy = std::min(height - 1, static_cast<int>((y + 0.5) * height / out_height));
        for (int x = 0; x < out_width; ++x) {
            const int sx = std::min(width - 1, static_cast<int>((x + 0.5) * width / out_width));
            std::copy_n(rgba.begin() + (static_cast<std::size_t>(sy) * width + sx) * 4, 4,
                        out.begin() + (static_cast<std::size_t>(y) * out_width + x) * 4);
        }
    }
    return out;
}

CanvasImage composite(const CanvasImage& base, const std::vector<std::uint8_t>& rgba) {
    if (rgba.size() != static_cast<std::size_t>(base.width()) * base.height() * 4)
        throw data_error("overlay size does not match image");
    CanvasImage out(base.width(), base.height(), 3, base.density(), base.source_id());
    for (int y = 0; y < base.height(); ++y)
        for (int x = 0; x < base.width(); ++x) {
            const std::size_t o = (static_cast<std::size_t>(y) * base.width() + x) * 4;
            const double a = rgba[o + 3] / 255.0;
            for (int c = 0; c < 3; ++c) {
                const double under = base.at(x, y, base.channels() == 3 ? c : 0);
                out.at(x, y, c) =
                    static_cast<std::uint8_t>(std::lround(under * (1.0 - a) + rgba[o + c] * a));
            }
        }
    return out;
}

Verdict classify_image(double overall_probability, double threshold) {
    return overall_probability > threshold ? Verdict::positive : Verdict::comparative;
}

// ---------------------------------------------------------------------------

static_assert(std::endian::native == std::endian::little, "map dumps are little-endian");

void write_map_dump(const ProbabilityMap& map, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw data_error("cannot write map dump '" + path.string() + "'");
    out.precision(17);
    out << "SALIENT-MAP 1\n"
        << "width " << map.width() << '\n'
        << "height " << map.height() << '\n'
        << "density " << map.density << '\n'
        << "tile_side " << map.tile.side_px << '\n'
        << "overlap " << map.tile.overlap_fraction << '\n'
        << "model " << map.model_id << '\n'
        << "end\n";
    out.write(reinterpret_cast<const char*>(map.mean_prob.data()),
              static_cast<std::streamsize>(map.mean_prob.size() * sizeof(double)));
    out.write(reinterpret_cast<const char*>(map.coverage.data()),
              static_cast<std::streamsize>(map.coverage.size() * sizeof(std::int32_t)));
}

ProbabilityMap read_map_dump(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw data_error("map dump not found: '" + path.string() + "'");
    std::string line;
    std::getline(in, line);
    if (line != "SALIENT-MAP 1")
        throw data_error("'" + path.string() + "' is not a map dump");
    ProbabilityMap map;
    int width = 0, height = 0;
    while (std::getline(in, line) && line != "end") {
        std::istringstream kv(line);
        std::string key;
        kv >> key;
        if (key == "width") kv >> width;
        else if (key == "height") kv >> height;
        else if (key == "density") kv >> map.density;
        else if (key == "tile_side") kv >> map.tile.side_px;
        else if (key == "overlap") kv >> map.tile.overlap_fraction;
        else if (key == "model") std::getline(kv >> std::ws, map.model_id);
    }
    if (width < 1 || height < 1)
        throw data_error("map dump '" + path.string() + "' has no dimensions");
    map.mean_prob.resize(height, width);
    map.coverage.resize(height, width);
    in.read(reinterpret_cast<char*>(map.mean_prob.data()),
            static_cast<std::streamsize>(map.mean_prob.size() * sizeof(double)));
    in.read(reinterpret_cast<char*>(map.coverage.data()),
            static_cast<std::streamsize>(map.coverage.size() * sizeof(std::int32_t)));
    if (!in)
        throw data_error("map dump '" + path.string() + "' is truncated");
    return map;
}

}  // namespace salient
