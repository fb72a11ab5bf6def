#include "run_config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "salient/error.hpp"

namespace salient::cli {

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(
    RunConfig, manifest, out, density, tile_side, pos_overlap, neg_overlap, balance, split,
    split_train, split_test, variant, input_side, epochs, batch_size, learning_rate, momentum,
    shuffle, seed, models, threads, synth_positive, synth_comparative, synth_positive_test,
    synth_comparative_test, synth_external, synth_side, synth_native_density, synth_contrast,
    synth_composite)

cnn::ArchitectureSpec RunConfig::architecture() const {
    const auto v = cnn::variant_from_string(variant);
    auto spec = v == cnn::Variant::five_layer ? cnn::ArchitectureSpec::five_layer(input_side)
                                              : cnn::ArchitectureSpec::eight_layer(input_side);
    spec.validate();
    return spec;
}

Hyperparams RunConfig::hyperparams() const {
    Hyperparams h;
    h.epochs = epochs;
    h.batch_size = batch_size;
    h.learning_rate = learning_rate;
    h.momentum = momentum;
    h.shuffle = shuffle;
    h.seed = seed;
    h.validate();
    return h;
}

TileConfig RunConfig::tile_config() const {
    return {density, tile_side, pos_overlap, neg_overlap};
}

synth::SynthConfig RunConfig::synth_config() const {
    synth::SynthConfig c;
    c.n_positive = synth_positive;
    c.n_comparative = synth_comparative;
    c.n_positive_test = synth_positive_test;
    c.n_comparative_test = synth_comparative_test;
    c.n_external = synth_external;
    c.image_side_px = synth_side;
    c.native_density = synth_native_density;
    c.contrast = synth_contrast;
    c.seed = seed;
    c.validate();
    return c;
}

std::vector<std::uint64_t> RunConfig::model_seeds() const {
    std::vector<std::uint64_t> seeds;
    for (int k = 0; k < models; ++k)
        seeds.push_back(seed + static_cast<std::uint64_t>(k));
    return seeds;
}

void RunConfig::validate() const {
    if (!(density > 0.0))
        throw config_error("density must be positive");
    TileSpec(tile_side, pos_overlap);
    TileSpec(tile_side, neg_overlap);
    if (split != "curated" && split != "random")
        throw config_error("split must be 'curated' or 'random', got '" + split + "'");
    if (split_train < 0 || split_test < 0)
        throw config_error("split sizes must be non-negative");
    if (models < 1)
        throw config_error("models must be >= 1");
    if (threads < 1)
        throw config_error("threads must be >= 1");
    if (out.empty())
        throw config_error("out (run directory) must not be empty");
    architecture();
    hyperparams();
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw config_error("config file not found: '" + path.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw config_error("config '" + path.string() + "' is not valid JSON: " + e.what());
    }
    const nlohmann::json known = RunConfig{};
    for (const auto& [key, value] : j.items())
        if (!known.contains(key))
            throw config_error("config '" + path.string() + "': unknown key '" + key + "'");
    try {
        return j.get<RunConfig>();
    } catch (const nlohmann::json::exception& e) {
        throw config_error("config '" + path.string() + "': " + e.what());
    }
}

std::string config_to_json(const RunConfig& config) {
    return nlohmann::json(config).dump(2);
}

void save_config(const RunConfig& config, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out)
        throw data_error("cannot write config snapshot '" + path.string() + "'");
    out << config_to_json(config) << '\n';
}

}  // namespace salient::cli
