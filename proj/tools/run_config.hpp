#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "salient/cnn/network.hpp"
#include "salient/synth.hpp"
#include "salient/trainer.hpp"

namespace salient::cli {

/// Everything a stage needs. Every field is a config-file key and a
/// `--flag` of the same name (underscores become dashes).
struct RunConfig {
    std::string manifest;        // corpus manifest (JSON lines)
    std::string out = "run";     // run directory; every stage writes only here

    double density = 25.0;       // analysis px per canvas cm
    int tile_side = 350;
    double pos_overlap = 0.94;
    double neg_overlap = 0.92;
    bool balance = false;        // derive pos_overlap from the tile populations

    std::string split = "curated";  // curated | random
    int split_train = 32;           // comparative images (random split only)
    int split_test = 32;

    std::string variant = "five_layer";
    int input_side = 128;
    int epochs = 20;
    int batch_size = 32;
    double learning_rate = 0.01;
    double momentum = 0.9;
    bool shuffle = true;
    std::uint64_t seed = 1;      // model k uses seed + k; splits and synth use seed
    int models = 1;
    int threads = 1;

    // synth
    int synth_positive = 12;
    int synth_comparative = 37;
    int synth_positive_test = 2;
    int synth_comparative_test = 16;
    int synth_external = 3;
    int synth_side = 1024;
    double synth_native_density = 50.0;
    double synth_contrast = 1.0;
    bool synth_composite = false;  // also write a positive field with a comparative island

    cnn::ArchitectureSpec architecture() const;
    Hyperparams hyperparams() const;
    TileConfig tile_config() const;
    synth::SynthConfig synth_config() const;
    std::vector<std::uint64_t> model_seeds() const;

    void validate() const;
};

RunConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const RunConfig& config);
void save_config(const RunConfig& config, const std::filesystem::path& path);

}  // namespace salient::cli
