#include "salient/entropy_tiler.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "salient/error.hpp"

namespace salient {

std::string to_string(TileLabel label) {
    switch (label) {
    case TileLabel::positive: return "positive";
    case TileLabel::comparative: return "comparative";
    case TileLabel::unlabeled: return "unlabeled";
    }
    return "unlabeled";
}

TileLabel tile_label_from_string(const std::string& s) {
    if (s == "positive") return TileLabel::positive;
    if (s == "comparative") return TileLabel::comparative;
    if (s == "unlabeled") return TileLabel::unlabeled;
    throw data_error("unknown tile label '" + s + "'");
}

TileSpec::TileSpec(int side, double overlap) : side_px(side), overlap_fraction(overlap) {
    if (side < 2)
        throw config_error("tile side must be at least 2 px");
    if (!(overlap >= 0.0 && overlap < 1.0))
        throw config_error("tile overlap must lie in [0, 1)");
}

int TileSpec::stride() const {
    return std::max(1, static_cast<int>(std::lround(side_px * (1.0 - overlap_fraction))));
}

double histogram_entropy(const std::array<long, 256>& counts, long total) {
    if (total <= 0)
        throw data_error("entropy of an empty region is undefined");
    double h = 0.0;
    const double n = static_cast<double>(total);
    for (long count : counts) {
        if (count == 0)
            continue;
        const double p = count / n;
        h -= p * std::log2(p);
    }
    // -0.0 for a single bin
    return h <= 0.0 ? 0.0 : h;
}

int positions_per_axis(int dim, const TileSpec& spec) {
    if (dim < spec.side_px)
        return 0;
    return (dim - spec.side_px) / spec.stride() + 1;
}

std::vector<TilePosition> tile_positions(int width, int height, const TileSpec& spec) {
    const int nx = positions_per_axis(width, spec);
    const int ny = positions_per_axis(height, spec);
    const int stride = spec.stride();
    std::vector<TilePosition> out;
    out.reserve(static_cast<std::size_t>(nx) * ny);
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i)
            out.push_back({i * stride, j * stride});
    return out;
}

std::vector<Tile> gate_tiles(const CanvasImage& gray, const TileSpec& spec, double threshold,
                             TileLabel label) {
    const GrayMap pixels = gray.gray();
    std::vector<Tile> out;
    for (const auto& pos : tile_positions(gray.width(), gray.height(), spec)) {
        const double h =
            shannon_entropy(pixels.block(pos.y, pos.x, spec.side_px, spec.side_px));
        if (h >= threshold)
            out.push_back({pos.x, pos.y, spec.side_px, h, gray.source_id(), label});
    }
    return out;
}

std::vector<Tile> salient_tiles(const CanvasImage& gray, const TileSpec& spec, TileLabel label) {
    return gate_tiles(gray, spec, shannon_entropy(gray.gray()), label);
}

std::string tile_filename(const Tile& t) {
    std::ostringstream os;
    os << t.source_id << '_' << t.x << '_' << t.y << '_' << t.side << ".png";
    return os.str();
}

void write_tileset(const std::filesystem::path& dir, const std::vector<Tile>& tiles,
                   const std::vector<const CanvasImage*>& images) {
    std::filesystem::create_directories(dir);
    std::map<std::string, const CanvasImage*> by_id;
    for (const auto* img : images)
        by_id[img->source_id()] = img;

    std::ofstream index(dir / "index.tsv");
    if (!index)
        throw data_error("cannot write tile index in '" + dir.string() + "'");
    index << "source_id\tx\ty\tside\tentropy\tlabel\tfile\n";
    index.precision(17);
    for (const Tile& t : tiles) {
        auto it = by_id.find(t.source_id);
        if (it == by_id.end())
            throw data_error("no image for tile source '" + t.source_id + "'");
        const std::string name = tile_filename(t);
        write_png(it->second->crop(t.x, t.y, t.side, t.side), dir / name);
        index << t.source_id << '\t' << t.x << '\t' << t.y << '\t' << t.side << '\t'
              << t.entropy_bits << '\t' << to_string(t.label) << '\t' << name << '\n';
    }
}

std::vector<Tile> read_tile_index(const std::filesystem::path& index_file) {
    std::ifstream in(index_file);
    if (!in)
        throw data_error("tile index not found: '" + index_file.string() + "'");
    std::string line;
    std::getline(in, line);  // header
    std::vector<Tile> tiles;
    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty())
            continue;
        std::istringstream fields(line);
        Tile t;
        std::string label, file;
        if (!std::getline(fields, t.source_id, '\t') || !(fields >> t.x >> t.y >> t.side >>
                                                          t.entropy_bits >> label))
            throw data_error(index_file.string() + ":" + std::to_string(row) +
                             ": malformed tile record");
        t.label = tile_label_from_string(label);
        tiles.push_back(std::move(t));
    }
    return tiles;
}

}  // namespace salient
