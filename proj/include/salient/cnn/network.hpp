#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "salient/cnn/ops.hpp"
#include "salient/cnn/tensor.hpp"

namespace salient::cnn {

enum class Variant { five_layer, eight_layer };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);

struct ConvLayerSpec {
    int kernel = 3;
    int out_channels = 16;
    int pad = 0;
    bool pool = false;

    bool operator==(const ConvLayerSpec&) const = default;
};

/// Stack of ReLU conv layers (optional 2x2 pool after each), then global
/// average pooling, one dense unit and a sigmoid. Inputs are single-channel
/// squares of side `input_side`.
struct ArchitectureSpec {
    Variant variant = Variant::five_layer;
    int input_side = 128;
    std::vector<ConvLayerSpec> layers;

    static ArchitectureSpec five_layer(int input_side = 128);
    static ArchitectureSpec eight_layer(int input_side = 128);

    /// Throws if the layer count, kernel ordering or spatial sizes are invalid.
    void validate() const;

    /// Spatial side after each conv layer (and its pool, if any).
    std::vector<int> feature_sides() const;

    bool operator==(const ArchitectureSpec&) const = default;
};

template <typename Scalar>
struct NamedTensor {
    std::string name;
    Tensor<Scalar> tensor;
};

/// Ordered parameters: conv{i}.weight, conv{i}.bias for each layer, then
/// dense.weight and dense.bias.
template <typename Scalar>
struct Parameters {
    std::vector<NamedTensor<Scalar>> entries;

    std::size_t size() const { return entries.size(); }
    Tensor<Scalar>& operator[](std::size_t i) { return entries[i].tensor; }
    const Tensor<Scalar>& operator[](std::size_t i) const { return entries[i].tensor; }

    Eigen::Index scalar_count() const {
        Eigen::Index n = 0;
        for (const auto& e : entries)
            n += e.tensor.size();
        return n;
    }
};

/// Parameter shapes implied by the architecture, in storage order.
std::vector<std::pair<std::string, Shape>> parameter_layout(const ArchitectureSpec& spec);

template <typename Scalar>
void check_parameters(const ArchitectureSpec& spec, const Parameters<Scalar>& params) {
    const auto layout = parameter_layout(spec);
    if (layout.size() != params.size())
        throw numeric_error("parameter count does not match architecture");
    for (std::size_t i = 0; i < layout.size(); ++i)
        if (layout[i].first != params.entries[i].name || layout[i].second != params[i].shape)
            throw numeric_error("parameter '" + params.entries[i].name + "' has shape " +
                                shape_string(params[i].shape) + ", expected '" + layout[i].first +
                                "' " + shape_string(layout[i].second));
}

/// He-uniform weights (limit sqrt(6 / fan_in)), zero biases.
template <typename Scalar>
Parameters<Scalar> init_parameters(const ArchitectureSpec& spec, std::uint64_t seed) {
    spec.validate();
    std::mt19937_64 rng(seed);
    Parameters<Scalar> params;
    for (auto& [name, shape] : parameter_layout(spec)) {
        Tensor<Scalar> t(shape);
        if (shape.size() > 1) {
            const Eigen::Index fan_in = shape_size(shape) / shape[0];
            const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
            std::uniform_real_distribution<double> dist(-limit, limit);
            for (Eigen::Index i = 0; i < t.size(); ++i)
                t.values[i] = static_cast<Scalar>(dist(rng));
        }
        params.entries.push_back({name, std::move(t)});
    }
    return params;
}

template <typename Scalar>
Parameters<Scalar> zeros_like(const Parameters<Scalar>& params) {
    Parameters<Scalar> z;
    for (const auto& e : params.entries)
        z.entries.push_back({e.name, Tensor<Scalar>(e.tensor.shape)});
    return z;
}

namespace detail {

template <typename Scalar>
struct LayerCache {
    Tensor<Scalar> input;
    Tensor<Scalar> pre_activation;
    std::vector<Eigen::Index> argmax;  // empty unless the layer pools
};

template <typename Scalar>
struct SampleCache {
    std::vector<LayerCache<Scalar>> layers;
    Shape final_shape;        // feature map entering global pooling
    Tensor<Scalar> features;  // [1, C] after global pooling
};

template <typename Scalar>
Tensor<Scalar> sample_view(const Tensor<Scalar>& batch, Eigen::Index n) {
    const Eigen::Index per = batch.size() / batch.dim(0);
    return Tensor<Scalar>({1, batch.dim(1), batch.dim(2), batch.dim(3)},
                          batch.values.segment(n * per, per));
}

template <typename Scalar>
Scalar forward_sample(const ArchitectureSpec& spec, const Parameters<Scalar>& params,
                      Tensor<Scalar> x, SampleCache<Scalar>* cache) {
    for (std::size_t l = 0; l < spec.layers.size(); ++l) {
        const auto& layer = spec.layers[l];
        Tensor<Scalar> z = conv2d(x, params[2 * l], params[2 * l + 1], 1, layer.pad);
        Tensor<Scalar> a = relu(z);
        std::vector<Eigen::Index> argmax;
        Tensor<Scalar> next;
        if (layer.pool) {
            auto pooled = maxpool2x2(a);
            next = std::move(pooled.output);
            argmax = std::move(pooled.argmax);
        }
        if (cache)
            cache->layers.push_back({std::move(x), std::move(z), std::move(argmax)});
        x = layer.pool ? std::move(next) : std::move(a);
    }
    Tensor<Scalar> features = global_avg_pool(x);
    const std::size_t d = 2 * spec.layers.size();
    const Tensor<Scalar> logit = dense(features, params[d], params[d + 1]);
    if (cache) {
        cache->final_shape = x.shape;
        cache->features = std::move(features);
    }
    return logit.values[0];
}

}  // namespace detail

/// Pre-sigmoid scores, one per sample. Samples are processed independently,
/// so a tile's score does not depend on the rest of the batch.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> forward_logits(const ArchitectureSpec& spec,
                                                        const Parameters<Scalar>& params,
                                                        const Tensor<Scalar>& batch) {
    check_parameters(spec, params);
    if (batch.shape.size() != 4 || batch.dim(1) != 1 || batch.dim(2) != spec.input_side ||
        batch.dim(3) != spec.input_side)
        throw numeric_error("network expects [N,1," + std::to_string(spec.input_side) + "," +
                            std::to_string(spec.input_side) + "] input, got " +
                            shape_string(batch.shape));
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out(batch.dim(0));
    for (Eigen::Index n = 0; n < batch.dim(0); ++n)
        out[n] = detail::forward_sample<Scalar>(spec, params, detail::sample_view(batch, n), nullptr);
    return out;
}

/// Tile probabilities in [0, 1], in batch order.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> forward(const ArchitectureSpec& spec,
                                                 const Parameters<Scalar>& params,
                                                 const Tensor<Scalar>& batch) {
    Tensor<Scalar> logits({batch.dim(0)}, forward_logits(spec, params, batch));
    return sigmoid(logits).values;
}

template <typename Scalar>
struct LossAndGradients {
    Scalar loss{};
    Parameters<Scalar> grads;
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> probabilities;
};

/// Mean binary cross-entropy over the batch and its parameter gradients.
/// The sigmoid/BCE pair is differentiated jointly (dL/dlogit = (p - y) / N)
/// so saturated outputs still receive gradient.
template <typename Scalar>
LossAndGradients<Scalar> loss_and_gradients(const ArchitectureSpec& spec,
                                            const Parameters<Scalar>& params,
                                            const Tensor<Scalar>& batch,
                                            const Tensor<Scalar>& labels) {
    check_parameters(spec, params);
    const Eigen::Index n_samples = batch.dim(0);
    if (labels.size() != n_samples)
        throw numeric_error("one label per sample required");

    LossAndGradients<Scalar> result{Scalar(0), zeros_like(params), {}};
    Tensor<Scalar> logits({n_samples});
    const std::size_t d = 2 * spec.layers.size();

    for (Eigen::Index n = 0; n < n_samples; ++n) {
        detail::SampleCache<Scalar> cache;
        logits.values[n] =
            detail::forward_sample<Scalar>(spec, params, detail::sample_view(batch, n), &cache);
        const Scalar p = Scalar(1) / (Scalar(1) + std::exp(-logits.values[n]));
        const Scalar y = labels.values[n];
        Tensor<Scalar> grad_logit({1, 1});
        grad_logit.values[0] = (p - y) / Scalar(n_samples);

        auto dg = dense_backward(cache.features, params[d], grad_logit);
        result.grads[d].values += dg.weights.values;
        result.grads[d + 1].values += dg.bias.values;

        Tensor<Scalar> grad = global_avg_pool_backward(cache.final_shape, dg.input);
        for (std::size_t l = spec.layers.size(); l-- > 0;) {
            auto& lc = cache.layers[l];
            if (spec.layers[l].pool)
                grad = maxpool2x2_backward(lc.pre_activation.shape, lc.argmax, grad);
            grad = relu_backward(lc.pre_activation, grad);
            auto cg = conv2d_backward(lc.input, params[2 * l], grad, 1, spec.layers[l].pad, l > 0);
            result.grads[2 * l].values += cg.weights.values;
            result.grads[2 * l + 1].values += cg.bias.values;
            grad = std::move(cg.input);
        }
    }
    result.probabilities = sigmoid(logits).values;
    result.loss = binary_cross_entropy(Tensor<Scalar>({n_samples}, result.probabilities), labels);
    return result;
}

}  // namespace salient::cnn
