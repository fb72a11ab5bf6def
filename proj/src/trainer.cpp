#include "salient/trainer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <future>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "salient/error.hpp"

namespace salient {

using nlohmann::json;
using nlohmann::ordered_json;

void Hyperparams::validate() const {
    if (epochs < 1)
        throw config_error("epochs must be >= 1");
    if (batch_size < 1)
        throw config_error("batch_size must be >= 1");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
        throw config_error("learning_rate must be a finite non-negative number");
    if (!(momentum >= 0.0 && momentum < 1.0))
        throw config_error("momentum must lie in [0, 1)");
}

std::string TrainedModel::id() const {
    std::string id = cnn::to_string(spec.variant) + "-seed" + std::to_string(hyper.seed);
    if (!provenance.split_id.empty())
        id = provenance.split_id + "-" + id;
    return id;
}

void tile_input(const CanvasImage& gray, const Tile& tile, int input_side, float* out) {
    const CanvasImage crop = gray.crop(tile.x, tile.y, tile.side, tile.side);
    const CanvasImage scaled =
        tile.side == input_side ? crop : resize(crop, input_side, input_side);
    const auto& px = scaled.pixels();
    for (std::size_t i = 0; i < px.size(); ++i)
        out[i] = static_cast<float>(px[i]) / 255.0f;
}

TrainingSet make_training_set(const std::vector<Tile>& tiles,
                              const std::map<std::string, const CanvasImage*>& images,
                              int input_side) {
    const auto n = static_cast<Eigen::Index>(tiles.size());
    const Eigen::Index per = static_cast<Eigen::Index>(input_side) * input_side;
    TrainingSet set{cnn::Tensor<float>({n, 1, input_side, input_side}), cnn::Tensor<float>({n}), {}};
    for (Eigen::Index i = 0; i < n; ++i) {
        const Tile& t = tiles[static_cast<std::size_t>(i)];
        auto it = images.find(t.source_id);
        if (it == images.end())
            throw data_error("no image loaded for tile source '" + t.source_id + "'");
        if (t.label == TileLabel::unlabeled)
            throw data_error("training tiles must be labelled (source '" + t.source_id + "')");
        tile_input(*it->second, t, input_side, set.inputs.data() + i * per);
        set.labels.values[i] = t.label == TileLabel::positive ? 1.0f : 0.0f;
        set.source_ids.push_back(t.source_id);
    }
    return set;
}

namespace {

struct Fnv1a {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    void bytes(const void* data, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= p[i];
            h *= 0x100000001b3ULL;
        }
    }
};

}  // namespace

std::string fingerprint(const std::vector<Tile>& tiles, const TrainingSet& set) {
    Fnv1a f;
    for (const Tile& t : tiles) {
        f.bytes(t.source_id.data(), t.source_id.size());
        const int geom[4] = {t.x, t.y, t.side, static_cast<int>(t.label)};
        f.bytes(geom, sizeof(geom));
    }
    f.bytes(set.inputs.data(), static_cast<std::size_t>(set.inputs.size()) * sizeof(float));
    std::ostringstream os;
    os << std::hex << f.h;
    return os.str();
}

TrainedModel train_model(const cnn::ArchitectureSpec& spec, const TrainingSet& data,
                         const Hyperparams& hyper, Provenance provenance) {
    hyper.validate();
    spec.validate();
    const Eigen::Index n = data.size();
    if (n == 0)
        throw data_error("training set is empty");
    const bool has_pos = (data.labels.values.array() == 1.0f).any();
    const bool has_neg = (data.labels.values.array() == 0.0f).any();
    if (!has_pos || !has_neg)
        throw data_error("training set must contain both positive and comparative tiles");
    if (data.inputs.dim(2) != spec.input_side)
        throw data_error("training inputs have side " + std::to_string(data.inputs.dim(2)) +
                         " but the architecture expects " + std::to_string(spec.input_side));

    TrainedModel model{spec, cnn::init_parameters<float>(spec, hyper.seed), hyper, {},
                       std::move(provenance)};
    auto velocity = cnn::zeros_like(model.params);

    // Shuffling draws from its own stream so initialisation is unaffected
    // by the shuffle flag.
    std::mt19937_64 shuffle_rng(hyper.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});

    const Eigen::Index per = data.inputs.size() / n;
    const auto lr = static_cast<float>(hyper.learning_rate);
    const auto mu = static_cast<float>(hyper.momentum);

    for (int epoch = 1; epoch <= hyper.epochs; ++epoch) {
        if (hyper.shuffle)
            std::shuffle(order.begin(), order.end(), shuffle_rng);
        double loss_sum = 0.0;
        Eigen::Index correct = 0;
        for (Eigen::Index start = 0; start < n; start += hyper.batch_size) {
            const Eigen::Index b = std::min<Eigen::Index>(hyper.batch_size, n - start);
            cnn::Tensor<float> batch({b, 1, data.inputs.dim(2), data.inputs.dim(3)});
            cnn::Tensor<float> labels({b});
            for (Eigen::Index i = 0; i < b; ++i) {
                const Eigen::Index src = order[static_cast<std::size_t>(start + i)];
                batch.values.segment(i * per, per) = data.inputs.values.segment(src * per, per);
                labels.values[i] = data.labels.values[src];
            }
            auto step = cnn::loss_and_gradients(model.spec, model.params, batch, labels);
            if (!std::isfinite(step.loss))
                throw numeric_error("non-finite training loss at epoch " + std::to_string(epoch) +
                                    ", batch starting at " + std::to_string(start) + " (seed " +
                                    std::to_string(hyper.seed) + ")");
            for (std::size_t p = 0; p < model.params.size(); ++p) {
                velocity[p].values = mu * velocity[p].values + step.grads[p].values;
                model.params[p].values -= lr * velocity[p].values;
            }
            loss_sum += static_cast<double>(step.loss) * static_cast<double>(b);
            for (Eigen::Index i = 0; i < b; ++i)
                correct += (step.probabilities[i] > 0.5f) == (labels.values[i] == 1.0f);
        }
        model.history.push_back({epoch, loss_sum / static_cast<double>(n),
                                 static_cast<double>(correct) / static_cast<double>(n)});
    }
    return model;
}

std::vector<TrainedModel> train_ensemble(const cnn::ArchitectureSpec& spec,
                                         const TrainingSet& data, const Hyperparams& hyper,
                                         const std::vector<std::uint64_t>& seeds,
                                         Provenance provenance, int threads) {
    if (seeds.empty())
        throw config_error("train_ensemble needs at least one seed");
    std::vector<TrainedModel> models(seeds.size());
    const std::size_t workers = static_cast<std::size_t>(std::max(1, threads));
    for (std::size_t start = 0; start < seeds.size(); start += workers) {
        std::vector<std::future<TrainedModel>> jobs;
        for (std::size_t i = start; i < std::min(seeds.size(), start + workers); ++i) {
            Hyperparams h = hyper;
            h.seed = seeds[i];
            jobs.push_back(std::async(workers == 1 ? std::launch::deferred : std::launch::async,
                                      [&, h] { return train_model(spec, data, h, provenance); }));
        }
        for (std::size_t j = 0; j < jobs.size(); ++j)
            models[start + j] = jobs[j].get();
    }
    return models;
}

double tile_accuracy(const TrainedModel& model, const TrainingSet& data) {
    if (data.size() == 0)
        throw data_error("tile_accuracy on an empty set");
    const auto probs = cnn::forward(model.spec, model.params, data.inputs);
    Eigen::Index correct = 0;
    for (Eigen::Index i = 0; i < probs.size(); ++i)
        correct += (probs[i] > 0.5f) == (data.labels.values[i] == 1.0f);
    return static_cast<double>(correct) / static_cast<double>(probs.size());
}

Selection select_successful(const std::vector<TrainedModel>& models,
                            const std::function<ModelScore(const TrainedModel&)>& score) {
    Selection sel;
    for (std::size_t i = 0; i < models.size(); ++i) {
        const ModelScore s = score(models[i]);
        if (s.positives < 1)
            throw data_error("model selection needs at least one positive test image");
        if (s.false_negatives > 0) {
            sel.diagnostics.push_back(models[i].id() + ": rejected, " +
                                      std::to_string(s.false_negatives) + " false negative(s)");
            continue;
        }
        sel.ranked.push_back({i, models[i].hyper.seed, s});
    }
    std::stable_sort(sel.ranked.begin(), sel.ranked.end(), [](const auto& a, const auto& b) {
        if (a.score.accuracy != b.score.accuracy)
            return a.score.accuracy > b.score.accuracy;
        if (a.score.false_positives != b.score.false_positives)
            return a.score.false_positives < b.score.false_positives;
        return a.seed < b.seed;
    });
    if (sel.ranked.empty())
        sel.diagnostics.push_back("no model is free of false negatives");
    return sel;
}

// ---------------------------------------------------------------------------
// Model bundles

namespace {

constexpr const char* kModelMagic = "SALIENT-MODEL 1";

static_assert(std::endian::native == std::endian::little,
              "model bundles store little-endian float32");

ordered_json spec_to_json(const cnn::ArchitectureSpec& spec) {
    ordered_json layers = ordered_json::array();
    for (const auto& l : spec.layers)
        layers.push_back({{"kernel", l.kernel},
                          {"out_channels", l.out_channels},
                          {"pad", l.pad},
                          {"pool", l.pool}});
    return {{"variant", cnn::to_string(spec.variant)},
            {"input_side", spec.input_side},
            {"layers", layers}};
}

cnn::ArchitectureSpec spec_from_json(const json& j) {
    cnn::ArchitectureSpec spec;
    spec.variant = cnn::variant_from_string(j.at("variant").get<std::string>());
    spec.input_side = j.at("input_side").get<int>();
    for (const auto& l : j.at("layers"))
        spec.layers.push_back({l.at("kernel").get<int>(), l.at("out_channels").get<int>(),
                               l.at("pad").get<int>(), l.at("pool").get<bool>()});
    spec.validate();
    return spec;
}

}  // namespace

void save_model(const TrainedModel& model, const std::filesystem::path& path) {
    ordered_json tensors = ordered_json::array();
    for (const auto& e : model.params.entries)
        tensors.push_back({{"name", e.name}, {"shape", e.tensor.shape}});
    ordered_json history = ordered_json::array();
    for (const auto& h : model.history)
        history.push_back({{"epoch", h.epoch}, {"loss", h.loss}, {"accuracy", h.accuracy}});
    const auto& t = model.provenance.tiles;
    ordered_json meta{
        {"architecture", spec_to_json(model.spec)},
        {"density", t.density},
        {"tile", {{"side", t.side}, {"pos_overlap", t.pos_overlap}, {"neg_overlap", t.neg_overlap}}},
        {"seed", model.hyper.seed},
        {"hyper",
         {{"epochs", model.hyper.epochs},
          {"batch_size", model.hyper.batch_size},
          {"learning_rate", model.hyper.learning_rate},
          {"momentum", model.hyper.momentum},
          {"shuffle", model.hyper.shuffle}}},
        {"history", history},
        {"provenance",
         {{"split_id", model.provenance.split_id},
          {"tileset_fingerprint", model.provenance.tileset_fingerprint}}},
        {"tensors", tensors}};

    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw data_error("cannot write model '" + path.string() + "'");
    out << kModelMagic << '\n' << meta.dump() << '\n';
    for (const auto& e : model.params.entries)
        out.write(reinterpret_cast<const char*>(e.tensor.data()),
                  static_cast<std::streamsize>(e.tensor.size() * sizeof(float)));
    if (!out)
        throw data_error("failed writing model '" + path.string() + "'");
}

TrainedModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw data_error("model not found: '" + path.string() + "'");
    std::string magic, meta_line;
    std::getline(in, magic);
    if (magic != kModelMagic)
        throw data_error("'" + path.string() + "' is not a model bundle (bad header)");
    std::getline(in, meta_line);
    TrainedModel model;
    try {
        const json meta = json::parse(meta_line);
        model.spec = spec_from_json(meta.at("architecture"));
        model.provenance.tiles.density = meta.at("density").get<double>();
        const auto& tile = meta.at("tile");
        model.provenance.tiles.side = tile.at("side").get<int>();
        model.provenance.tiles.pos_overlap = tile.at("pos_overlap").get<double>();
        model.provenance.tiles.neg_overlap = tile.at("neg_overlap").get<double>();
        const auto& h = meta.at("hyper");
        model.hyper.seed = meta.at("seed").get<std::uint64_t>();
        model.hyper.epochs = h.at("epochs").get<int>();
        model.hyper.batch_size = h.at("batch_size").get<int>();
        model.hyper.learning_rate = h.at("learning_rate").get<double>();
        model.hyper.momentum = h.at("momentum").get<double>();
        model.hyper.shuffle = h.at("shuffle").get<bool>();
        for (const auto& e : meta.at("history"))
            model.history.push_back({e.at("epoch").get<int>(), e.at("loss").get<double>(),
                                     e.at("accuracy").get<double>()});
        model.provenance.split_id = meta.at("provenance").at("split_id").get<std::string>();
        model.provenance.tileset_fingerprint =
            meta.at("provenance").at("tileset_fingerprint").get<std::string>();
        for (const auto& t : meta.at("tensors")) {
            cnn::Tensor<float> tensor(t.at("shape").get<cnn::Shape>());
            in.read(reinterpret_cast<char*>(tensor.data()),
                    static_cast<std::streamsize>(tensor.size() * sizeof(float)));
            if (!in)
                throw data_error("model '" + path.string() + "' is truncated");
            model.params.entries.push_back({t.at("name").get<std::string>(), std::move(tensor)});
        }
    } catch (const json::exception& ex) {
        throw data_error("model '" + path.string() + "' has malformed metadata: " + ex.what());
    }
    cnn::check_parameters(model.spec, model.params);
    return model;
}

}  // namespace salient
