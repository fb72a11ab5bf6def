#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "salient/cnn/network.hpp"
#include "salient/entropy_tiler.hpp"
#include "salient/imaging.hpp"

namespace salient {

struct Hyperparams {
    int epochs = 20;
    int batch_size = 32;
    double learning_rate = 0.01;
    double momentum = 0.9;
    std::uint64_t seed = 0;
    bool shuffle = true;

    void validate() const;
    bool operator==(const Hyperparams&) const = default;
};

/// Tiling used to produce a model's training data; maps must reuse it.
struct TileConfig {
    double density = 25.0;
    int side = 350;
    double pos_overlap = 0.94;
    double neg_overlap = 0.92;

    bool operator==(const TileConfig&) const = default;
};

struct Provenance {
    std::string split_id;
    TileConfig tiles;
    std::string tileset_fingerprint;

    bool operator==(const Provenance&) const = default;
};

struct EpochMetrics {
    int epoch = 0;
    double loss = 0.0;
    double accuracy = 0.0;

    bool operator==(const EpochMetrics&) const = default;
};

struct TrainedModel {
    cnn::ArchitectureSpec spec;
    cnn::Parameters<float> params;
    Hyperparams hyper;
    std::vector<EpochMetrics> history;
    Provenance provenance;

    std::string id() const;
};

/// Network inputs for a set of tiles: [N, 1, S, S] in [0, 1] plus labels.
struct TrainingSet {
    cnn::Tensor<float> inputs;
    cnn::Tensor<float> labels;
    std::vector<std::string> source_ids;

    Eigen::Index size() const { return labels.size(); }
};

/// Crops a tile from a single-channel image and resamples it to the
/// network input side, scaled to [0, 1].
void tile_input(const CanvasImage& gray, const Tile& tile, int input_side, float* out);

/// `images` maps source_id to the analysis-density luminance image.
TrainingSet make_training_set(const std::vector<Tile>& tiles,
                              const std::map<std::string, const CanvasImage*>& images,
                              int input_side);

/// 64-bit FNV-1a over tile records and input pixels, as hex.
std::string fingerprint(const std::vector<Tile>& tiles, const TrainingSet& set);

/// Mini-batch SGD with momentum on mean BCE. Deterministic given the seed.
TrainedModel train_model(const cnn::ArchitectureSpec& spec, const TrainingSet& data,
                         const Hyperparams& hyper, Provenance provenance = {});

/// One model per seed; each model depends only on its own seed.
std::vector<TrainedModel> train_ensemble(const cnn::ArchitectureSpec& spec,
                                         const TrainingSet& data, const Hyperparams& hyper,
                                         const std::vector<std::uint64_t>& seeds,
                                         Provenance provenance = {}, int threads = 1);

/// Fraction of tiles whose thresholded prediction (p > 0.5) matches the label.
double tile_accuracy(const TrainedModel& model, const TrainingSet& data);

/// Image-level outcome of one model on a labelled test set.
struct ModelScore {
    double accuracy = 0.0;
    int false_positives = 0;
    int false_negatives = 0;
    int positives = 0;
    int total = 0;
};

struct RankedModel {
    std::size_t index;  // into the input model list
    std::uint64_t seed;
    ModelScore score;
};

struct Selection {
    std::vector<RankedModel> ranked;
    std::vector<std::string> diagnostics;
};

/// Keeps models with zero false negatives, best accuracy first; ties go to
/// fewer false positives, then the lower seed.
Selection select_successful(const std::vector<TrainedModel>& models,
                            const std::function<ModelScore(const TrainedModel&)>& score);

// Model bundles: text header line, JSON metadata line, raw float32 tensors.
void save_model(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path);

}  // namespace salient
