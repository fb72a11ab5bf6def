#include "salient/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "salient/error.hpp"

namespace salient::synth {

void SynthConfig::validate() const {
    if (n_positive < 1 || n_comparative < 1)
        throw config_error("synthetic corpus needs at least one image per class");
    if (n_positive_test < 0 || n_comparative_test < 0 || n_external < 0)
        throw config_error("image counts must be non-negative");
    if (image_side_px < 8)
        throw config_error("synthetic image side must be at least 8 px");
    if (!(native_density > 0.0))
        throw config_error("native density must be positive");
    if (!(contrast >= 0.0 && contrast <= 1.0))
        throw config_error("contrast must lie in [0, 1]");
    if (genre_mix.size() != 3 ||
        std::any_of(genre_mix.begin(), genre_mix.end(), [](double w) { return w < 0.0; }) ||
        std::all_of(genre_mix.begin(), genre_mix.end(), [](double w) { return w == 0.0; }))
        throw config_error("genre_mix needs three non-negative weights, not all zero");
    if (!(stroke_period_cm > 0.0))
        throw config_error("stroke period must be positive");
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

namespace {

using Field = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr double kTextureAmplitude = 70.0;
constexpr double kNoiseAmplitude = 18.0;

// Box blur with clamped borders, applied along both axes.
Field box_blur(const Field& in, int radius) {
    Field tmp(in.rows(), in.cols()), out(in.rows(), in.cols());
    const double norm = 1.0 / (2 * radius + 1);
    for (Eigen::Index y = 0; y < in.rows(); ++y)
        for (Eigen::Index x = 0; x < in.cols(); ++x) {
            double acc = 0.0;
            for (int d = -radius; d <= radius; ++d)
                acc += in(y, std::clamp<Eigen::Index>(x + d, 0, in.cols() - 1));
            tmp(y, x) = acc * norm;
        }
    for (Eigen::Index y = 0; y < in.rows(); ++y)
        for (Eigen::Index x = 0; x < in.cols(); ++x) {
            double acc = 0.0;
            for (int d = -radius; d <= radius; ++d)
                acc += tmp(std::clamp<Eigen::Index>(y + d, 0, in.rows() - 1), x);
            out(y, x) = acc * norm;
        }
    return out;
}

// Smooth amplitude envelope in [0.25, 1] from a few Gaussian bumps; gives
// each image calm and busy areas so entropy gating has something to reject.
Field envelope(int side, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> pos(0.0, side);
    std::uniform_real_distribution<double> width(0.15 * side, 0.35 * side);
    Field env = Field::Zero(side, side);
    for (int k = 0; k < 4; ++k) {
        const double cx = pos(rng), cy = pos(rng), s = width(rng);
        for (int y = 0; y < side; ++y)
            for (int x = 0; x < side; ++x) {
                const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
                env(y, x) += std::exp(-d2 / (2 * s * s));
            }
    }
    env = env / env.maxCoeff();
    return 0.25 + 0.75 * env;
}

Field strokes(int side, double period, double angle, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> phase(0.0, 2 * std::numbers::pi);
    std::normal_distribution<double> wobble(0.0, 1.0);
    // Low-frequency phase wobble breaks the sinusoid into stroke-like bands.
    Field jitter(side, side);
    for (Eigen::Index i = 0; i < jitter.size(); ++i)
        jitter(i) = wobble(rng);
    jitter = box_blur(box_blur(jitter, std::max(1, side / 64)), std::max(1, side / 64));
    jitter = jitter / std::max(1e-9, jitter.abs().maxCoeff());
    const double p0 = phase(rng);
    const double c = std::cos(angle), s = std::sin(angle);
    Field f(side, side);
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) {
            const double u = x * c + y * s;
            f(y, x) = std::sin(2 * std::numbers::pi * u / period + p0 + 1.5 * jitter(y, x));
        }
    return f;
}

Field pattern(Texture family, int side, double period, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> tilt(-0.15, 0.15);
    switch (family) {
    case Texture::diagonal_strokes:
        return strokes(side, period, std::numbers::pi / 4 + tilt(rng), rng);
    case Texture::counter_strokes:
        return strokes(side, period, 3 * std::numbers::pi / 4 + tilt(rng), rng);
    case Texture::cross_hatch: {
        const double a = tilt(rng);
        return 0.5 * (strokes(side, 0.7 * period, a, rng) +
                      strokes(side, 0.7 * period, std::numbers::pi / 2 + a, rng));
    }
    case Texture::blotches: {
        std::normal_distribution<double> g(0.0, 1.0);
        Field f(side, side);
        for (Eigen::Index i = 0; i < f.size(); ++i)
            f(i) = g(rng);
        const int r = std::max(1, static_cast<int>(period / 4));
        f = box_blur(box_blur(f, r), r);
        const double sd = std::sqrt((f - f.mean()).square().mean());
        return (f / (2.5 * std::max(sd, 1e-9))).max(-1.0).min(1.0);
    }
    }
    return Field::Zero(side, side);
}

CanvasImage to_rgb(const Field& value, double density, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> tint(-6, 6);
    const int tr = tint(rng), tg = tint(rng), tb = tint(rng);
    const int side = static_cast<int>(value.rows());
    CanvasImage img(side, side, 3, density, "");
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) {
            const double v = value(y, x);
            img.at(x, y, 0) = static_cast<std::uint8_t>(std::clamp(std::lround(v + tr), 0L, 255L));
            img.at(x, y, 1) = static_cast<std::uint8_t>(std::clamp(std::lround(v + tg), 0L, 255L));
            img.at(x, y, 2) = static_cast<std::uint8_t>(std::clamp(std::lround(v + tb), 0L, 255L));
        }
    return img;
}

struct Canvas {
    Field env;
    Field noise;
};

Canvas base_canvas(int side, std::mt19937_64& rng) {
    Canvas c{envelope(side, rng), Field(side, side)};
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (Eigen::Index i = 0; i < c.noise.size(); ++i)
        c.noise(i) = u(rng);
    return c;
}

Field compose(const Canvas& canvas, const Field& texture, double contrast) {
    return 128.0 + canvas.env * (contrast * kTextureAmplitude * texture + kNoiseAmplitude * canvas.noise);
}

double period_px(const SynthConfig& config) {
    return config.stroke_period_cm * config.native_density;
}

}  // namespace

CanvasImage render_texture(const SynthConfig& config, Texture family, std::uint64_t image_seed,
                           double blend) {
    std::mt19937_64 rng(image_seed);
    const int side = config.image_side_px;
    const Canvas canvas = base_canvas(side, rng);
    Field texture = pattern(family, side, period_px(config), rng);
    if (blend > 0.0 && family != Texture::diagonal_strokes)
        texture = blend * pattern(Texture::diagonal_strokes, side, period_px(config), rng) +
                  (1.0 - blend) * texture;
    return to_rgb(compose(canvas, texture, config.contrast), config.native_density, rng);
}

Corpus generate_corpus(const SynthConfig& config) {
    config.validate();
    Corpus corpus;
    std::discrete_distribution<int> pick_genre(config.genre_mix.begin(), config.genre_mix.end());
    constexpr Texture kComparative[3] = {Texture::counter_strokes, Texture::cross_hatch,
                                         Texture::blotches};
    constexpr Genre kGenres[4] = {Genre::portrait, Genre::madonna_and_child, Genre::religious_scene,
                                  Genre::single_figure};
    const double width_cm = config.image_side_px / config.native_density;

    std::uint64_t index = 0;
    auto add = [&](const std::string& prefix, int count, ImageClass cls, Role role) {
        for (int i = 0; i < count; ++i, ++index) {
            const std::uint64_t seed = derive_seed(config.seed, index);
            std::mt19937_64 meta_rng(seed ^ 0xa5a5a5a5a5a5a5a5ULL);
            Texture family = Texture::diagonal_strokes;
            double blend = 0.0;
            if (role == Role::external) {
                family = kComparative[pick_genre(meta_rng)];
                blend = count > 1 ? static_cast<double>(i) / (count - 1) : 0.5;
            } else if (cls == ImageClass::comparative) {
                family = kComparative[pick_genre(meta_rng)];
            }
            ManifestEntry e;
            e.id = prefix + "_" + std::to_string(i + 1);
            e.title = "synthetic " + to_string(cls) + " " + to_string(role) + " " +
                      std::to_string(i + 1);
            e.image_class = cls;
            e.role = role;
            e.genre = kGenres[index % 4];
            e.attribution_status = role == Role::external
                                       ? "blend " + std::to_string(blend).substr(0, 4)
                                       : "synthetic";
            e.image_path = "images/" + e.id + ".png";
            e.canvas_width_cm = width_cm;
            CanvasImage img = render_texture(config, family, seed, blend);
            img.set_source_id(e.id);
            corpus.manifest.entries.push_back(std::move(e));
            corpus.images.push_back(std::move(img));
        }
    };
    add("pos_train", config.n_positive, ImageClass::positive, Role::train);
    add("cmp_train", config.n_comparative, ImageClass::comparative, Role::train);
    add("pos_test", config.n_positive_test, ImageClass::positive, Role::test);
    add("cmp_test", config.n_comparative_test, ImageClass::comparative, Role::test);
    add("external", config.n_external, ImageClass::comparative, Role::external);
    return corpus;
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir / "images");
    for (std::size_t i = 0; i < corpus.images.size(); ++i)
        write_png(corpus.images[i], dir / corpus.manifest.entries[i].image_path);
    Manifest m = corpus.manifest;
    m.base_dir = dir;
    write_manifest(m, dir / "manifest.jsonl");
}

Composite generate_composite(const SynthConfig& config, const Layout& layout,
                             std::uint64_t image_seed) {
    config.validate();
    const int side = config.image_side_px;
    CanvasImage mask(side, side, 1, config.native_density, "mask");
    std::vector<std::uint8_t> claimed(static_cast<std::size_t>(side) * side, 0);
    const std::uint8_t bg = layout.background == ImageClass::positive ? 255 : 0;
    std::fill(mask.pixels().begin(), mask.pixels().end(), bg);
    for (const auto& r : layout.regions) {
        if (r.x < 0 || r.y < 0 || r.width < 1 || r.height < 1 || r.x + r.width > side ||
            r.y + r.height > side)
            throw config_error("composite region lies outside the canvas");
        for (int y = r.y; y < r.y + r.height; ++y)
            for (int x = r.x; x < r.x + r.width; ++x) {
                auto& c = claimed[static_cast<std::size_t>(y) * side + x];
                if (c)
                    throw config_error("composite regions overlap");
                c = 1;
                mask.at(x, y) = r.image_class == ImageClass::positive ? 255 : 0;
            }
    }

    std::mt19937_64 rng(image_seed);
    const Canvas canvas = base_canvas(side, rng);
    const Field pos = pattern(Texture::diagonal_strokes, side, period_px(config), rng);
    const Field neg = pattern(layout.comparative_texture, side, period_px(config), rng);
    Field texture(side, side);
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x)
            texture(y, x) = mask.at(x, y) ? pos(y, x) : neg(y, x);
    CanvasImage img = to_rgb(compose(canvas, texture, config.contrast), config.native_density, rng);
    img.set_source_id("composite");
    return {std::move(img), std::move(mask)};
}

}  // namespace salient::synth
