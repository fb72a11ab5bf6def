#include "salient/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "salient/error.hpp"

namespace salient {

using nlohmann::json;

namespace {

template <typename Enum, std::size_t N>
Enum parse_enum(const std::string& s, const std::array<std::pair<const char*, Enum>, N>& table,
                const char* what) {
    for (const auto& [name, value] : table)
        if (s == name)
            return value;
    throw data_error(std::string("unknown ") + what + " '" + s + "'");
}

template <typename Enum, std::size_t N>
std::string enum_name(Enum v, const std::array<std::pair<const char*, Enum>, N>& table) {
    for (const auto& [name, value] : table)
        if (v == value)
            return name;
    return "?";
}

constexpr std::array<std::pair<const char*, ImageClass>, 2> kClasses{{
    {"positive", ImageClass::positive}, {"comparative", ImageClass::comparative}}};
constexpr std::array<std::pair<const char*, Role>, 3> kRoles{{
    {"train", Role::train}, {"test", Role::test}, {"external", Role::external}}};
constexpr std::array<std::pair<const char*, Genre>, 5> kGenres{{
    {"portrait", Genre::portrait},
    {"madonna_and_child", Genre::madonna_and_child},
    {"religious_scene", Genre::religious_scene},
    {"single_figure", Genre::single_figure},
    {"other", Genre::other}}};
constexpr std::array<std::pair<const char*, QualityFlag>, 2> kFlags{{
    {"ok", QualityFlag::ok}, {"degraded", QualityFlag::degraded}}};

}  // namespace

std::string to_string(ImageClass v) { return enum_name(v, kClasses); }
std::string to_string(Role v) { return enum_name(v, kRoles); }
std::string to_string(Genre v) { return enum_name(v, kGenres); }
std::string to_string(QualityFlag v) { return enum_name(v, kFlags); }
ImageClass image_class_from_string(const std::string& s) { return parse_enum(s, kClasses, "class"); }
Role role_from_string(const std::string& s) { return parse_enum(s, kRoles, "role"); }
Genre genre_from_string(const std::string& s) { return parse_enum(s, kGenres, "genre"); }
QualityFlag quality_flag_from_string(const std::string& s) {
    return parse_enum(s, kFlags, "quality_flag");
}

TileLabel tile_label(ImageClass c) {
    return c == ImageClass::positive ? TileLabel::positive : TileLabel::comparative;
}

// ---------------------------------------------------------------------------
// Manifest

std::filesystem::path Manifest::resolve(const ManifestEntry& e) const {
    std::filesystem::path p(e.image_path);
    return p.is_absolute() ? p : base_dir / p;
}

const ManifestEntry& Manifest::find(const std::string& id) const {
    for (const auto& e : entries)
        if (e.id == id)
            return e;
    throw data_error("manifest has no entry '" + id + "'");
}

namespace {

ManifestEntry entry_from_json(const json& j) {
    ManifestEntry e;
    e.id = j.at("id").get<std::string>();
    e.title = j.value("title", "");
    e.image_class = image_class_from_string(j.at("class").get<std::string>());
    e.role = role_from_string(j.at("role").get<std::string>());
    e.genre = genre_from_string(j.value("genre", "other"));
    e.attribution_status = j.value("attribution_status", "");
    e.image_path = j.at("image_path").get<std::string>();
    e.canvas_width_cm = j.at("canvas_width_cm").get<double>();
    e.quality_flag = quality_flag_from_string(j.value("quality_flag", "ok"));
    return e;
}

nlohmann::ordered_json entry_to_json(const ManifestEntry& e) {
    // ordered_json keeps the documented field order in written files
    return nlohmann::ordered_json{{"id", e.id},
                                  {"title", e.title},
                                  {"class", to_string(e.image_class)},
                                  {"role", to_string(e.role)},
                                  {"genre", to_string(e.genre)},
                                  {"attribution_status", e.attribution_status},
                                  {"image_path", e.image_path},
                                  {"canvas_width_cm", e.canvas_width_cm},
                                  {"quality_flag", to_string(e.quality_flag)}};
}

}  // namespace

Manifest parse_manifest(std::istream& in, const std::filesystem::path& base_dir,
                        bool check_images, const std::string& origin) {
    Manifest manifest;
    manifest.base_dir = base_dir;
    std::set<std::string> seen;
    std::vector<std::string> problems;
    std::string line;
    int row = 0;
    while (std::getline(in, line)) {
        ++row;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#')
            continue;
        const std::string where = origin + ":" + std::to_string(row) + ": ";
        ManifestEntry e;
        try {
            e = entry_from_json(json::parse(line));
        } catch (const json::exception& ex) {
            problems.push_back(where + "malformed record (" + ex.what() + ")");
            continue;
        } catch (const Error& ex) {
            problems.push_back(where + ex.what());
            continue;
        }
        if (!seen.insert(e.id).second)
            problems.push_back(where + "duplicate id '" + e.id + "'");
        if (!(e.canvas_width_cm > 0.0) || !std::isfinite(e.canvas_width_cm))
            problems.push_back(where + "nonpositive canvas_width_cm for '" + e.id + "'");
        if (check_images && e.role != Role::external) {
            std::ifstream probe(manifest.resolve(e), std::ios::binary);
            if (!probe)
                problems.push_back(where + "missing image '" + e.image_path + "' for '" + e.id + "'");
        }
        manifest.entries.push_back(std::move(e));
    }
    if (!problems.empty()) {
        std::string msg = "invalid manifest:";
        for (const auto& p : problems)
            msg += "\n  " + p;
        throw data_error(msg);
    }
    return manifest;
}

Manifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw data_error("manifest not found: '" + path.string() + "'");
    return parse_manifest(in, path.parent_path(), true, path.string());
}

void write_manifest(const Manifest& manifest, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out)
        throw data_error("cannot write manifest '" + path.string() + "'");
    for (const auto& e : manifest.entries)
        out << entry_to_json(e).dump() << '\n';
}

AnalysisImage prepare_image(const Manifest& manifest, const ManifestEntry& entry, double density) {
    CanvasImage img = read_image(manifest.resolve(entry));
    img.set_source_id(entry.id);
    img.set_density(img.width() / entry.canvas_width_cm);
    return {entry, to_luminance(resample_to_density(img, density))};
}

// ---------------------------------------------------------------------------
// Tile sets

double ClassCounts::ratio() const {
    return comparative == 0 ? 0.0 : static_cast<double>(positive) / comparative;
}

namespace {

void count_tile(ClassCounts& counts, TileLabel label, std::size_t n) {
    if (label == TileLabel::positive)
        counts.positive += n;
    else
        counts.comparative += n;
}

}  // namespace

TileSets build_tilesets(const std::vector<AnalysisImage>& images, int side, double pos_overlap,
                        double neg_overlap) {
    TileSets sets;
    const TileSpec pos_spec(side, pos_overlap);
    const TileSpec neg_spec(side, neg_overlap);
    if (side < 100 || side > 650)
        sets.warnings.push_back("tile side " + std::to_string(side) +
                                " px lies outside the usual 100-650 px range");

    std::vector<std::string> too_small;
    for (const auto& img : images) {
        if (img.entry.role == Role::external)
            continue;
        if (img.gray.width() < side || img.gray.height() < side)
            too_small.push_back(img.entry.id + " (" + std::to_string(img.gray.width()) + "x" +
                                std::to_string(img.gray.height()) + ")");
    }
    if (!too_small.empty()) {
        std::string msg = "images smaller than the " + std::to_string(side) + " px tile side:";
        for (const auto& s : too_small)
            msg += " " + s;
        throw data_error(msg);
    }

    for (const auto& img : images) {
        const auto& e = img.entry;
        if (e.role == Role::external)
            continue;
        if (e.role == Role::train && e.quality_flag == QualityFlag::degraded) {
            sets.warnings.push_back("degraded image '" + e.id + "' excluded from training");
            continue;
        }
        const TileLabel label = tile_label(e.image_class);
        const TileSpec& spec = e.image_class == ImageClass::positive ? pos_spec : neg_spec;
        auto tiles = salient_tiles(img.gray, spec, label);
        auto& dest = e.role == Role::train ? sets.train_tiles : sets.test_tiles;
        count_tile(e.role == Role::train ? sets.train_counts : sets.test_counts, label, tiles.size());
        dest.insert(dest.end(), tiles.begin(), tiles.end());
    }

    const double r = sets.train_counts.ratio();
    if (sets.train_counts.positive > 0 && sets.train_counts.comparative > 0 &&
        (r < kBalanceLow || r > kBalanceHigh)) {
        std::ostringstream os;
        os << "training tiles unbalanced: " << sets.train_counts.positive << " positive vs "
           << sets.train_counts.comparative << " comparative (ratio " << r << ")";
        sets.warnings.push_back(os.str());
    }
    return sets;
}

double balance_overlaps(const std::vector<AnalysisImage>& images, int side,
                        double base_neg_overlap) {
    constexpr double kStep = 0.005;
    constexpr double kCap = 0.98;
    constexpr double kRequired = 0.9;

    const TileSpec neg_spec(side, base_neg_overlap);
    std::size_t neg_count = 0;
    std::vector<const AnalysisImage*> positives;
    for (const auto& img : images) {
        if (img.entry.role != Role::train || img.entry.quality_flag == QualityFlag::degraded)
            continue;
        if (img.entry.image_class == ImageClass::positive)
            positives.push_back(&img);
        else
            neg_count += salient_tiles(img.gray, neg_spec).size();
    }
    if (neg_count == 0)
        throw data_error("cannot balance overlaps: no comparative training tiles");
    if (positives.empty())
        throw data_error("cannot balance overlaps: no positive training images");

    // Entropy thresholds do not depend on the overlap; compute them once.
    std::vector<double> thresholds;
    for (const auto* img : positives)
        thresholds.push_back(shannon_entropy(img->gray.gray()));

    double best_ratio = 0.0;
    for (int k = 0;; ++k) {
        const double overlap = base_neg_overlap + k * kStep;
        if (overlap > kCap + 1e-12)
            break;
        const TileSpec spec(side, overlap);
        std::size_t pos_count = 0;
        for (std::size_t i = 0; i < positives.size(); ++i)
            pos_count += gate_tiles(positives[i]->gray, spec, thresholds[i]).size();
        const double ratio = static_cast<double>(pos_count) / neg_count;
        best_ratio = std::max(best_ratio, ratio);
        if (pos_count >= kRequired * neg_count)
            return overlap;
    }
    std::ostringstream os;
    os << "cannot balance overlaps below " << kCap << ": best positive/comparative ratio "
       << best_ratio;
    throw data_error(os.str());
}

// ---------------------------------------------------------------------------
// Splits

SplitPlan curated_split(const std::vector<ManifestEntry>& entries) {
    SplitPlan plan;
    plan.kind = SplitKind::curated;
    for (const auto& e : entries) {
        if (e.role == Role::train)
            plan.train_ids.push_back(e.id);
        else if (e.role == Role::test) {
            plan.test_ids.push_back(e.id);
            if (e.image_class == ImageClass::positive)
                plan.positive_test_ids.push_back(e.id);
        }
    }
    return plan;
}

SplitPlan random_split(const std::vector<ManifestEntry>& pool, std::size_t n_train,
                       std::size_t n_test, std::uint64_t seed) {
    SplitPlan plan;
    plan.kind = SplitKind::random;
    plan.seed = seed;
    std::vector<std::string> comparatives;
    for (const auto& e : pool) {
        if (e.role == Role::external)
            continue;
        if (e.image_class == ImageClass::positive) {
            if (e.role == Role::train) {
                plan.train_ids.push_back(e.id);
            } else {
                plan.test_ids.push_back(e.id);
                plan.positive_test_ids.push_back(e.id);
            }
        } else {
            comparatives.push_back(e.id);
        }
    }
    if (n_train + n_test > comparatives.size())
        throw data_error("random split needs " + std::to_string(n_train + n_test) +
                         " comparative images but the pool has " +
                         std::to_string(comparatives.size()));
    std::mt19937_64 rng(seed);
    std::shuffle(comparatives.begin(), comparatives.end(), rng);
    plan.train_ids.insert(plan.train_ids.end(), comparatives.begin(),
                          comparatives.begin() + static_cast<std::ptrdiff_t>(n_train));
    plan.test_ids.insert(plan.test_ids.end(),
                         comparatives.begin() + static_cast<std::ptrdiff_t>(n_train),
                         comparatives.begin() + static_cast<std::ptrdiff_t>(n_train + n_test));
    return plan;
}

std::vector<ManifestEntry> apply_split(const std::vector<ManifestEntry>& entries,
                                       const SplitPlan& plan) {
    const std::set<std::string> train(plan.train_ids.begin(), plan.train_ids.end());
    const std::set<std::string> test(plan.test_ids.begin(), plan.test_ids.end());
    std::vector<ManifestEntry> out;
    for (auto e : entries) {
        if (e.role == Role::external) {
            out.push_back(std::move(e));
        } else if (train.count(e.id)) {
            e.role = Role::train;
            out.push_back(std::move(e));
        } else if (test.count(e.id)) {
            e.role = Role::test;
            out.push_back(std::move(e));
        }
    }
    return out;
}

std::string split_to_json(const SplitPlan& plan) {
    nlohmann::ordered_json j{{"kind", plan.kind == SplitKind::curated ? "curated" : "random"},
                             {"seed", plan.seed ? json(*plan.seed) : json(nullptr)},
                             {"train_ids", plan.train_ids},
                             {"test_ids", plan.test_ids},
                             {"positive_test_ids", plan.positive_test_ids}};
    return j.dump(2);
}

SplitPlan split_from_json(const std::string& text) {
    const json j = json::parse(text);
    SplitPlan plan;
    const auto kind = j.at("kind").get<std::string>();
    if (kind != "curated" && kind != "random")
        throw data_error("unknown split kind '" + kind + "'");
    plan.kind = kind == "curated" ? SplitKind::curated : SplitKind::random;
    if (!j.at("seed").is_null())
        plan.seed = j.at("seed").get<std::uint64_t>();
    plan.train_ids = j.at("train_ids").get<std::vector<std::string>>();
    plan.test_ids = j.at("test_ids").get<std::vector<std::string>>();
    plan.positive_test_ids = j.at("positive_test_ids").get<std::vector<std::string>>();
    return plan;
}

}  // namespace salient
