#pragma once

#include <random>
#include <vector>

#include "grad_check.hpp"
#include "salient/cnn/network.hpp"

namespace salient::testing {

using cnn::ArchitectureSpec;
using cnn::Parameters;
namespace detail = cnn::detail;

// Mean BCE from the network's logits, evaluated in double.
template <typename Scalar>
double reference_loss(const ArchitectureSpec& spec, const Parameters<Scalar>& params,
                      const Tensor<Scalar>& batch, const Tensor<Scalar>& labels) {
    const auto logits = forward_logits(spec, params, batch);
    double total = 0.0;
    for (Eigen::Index i = 0; i < logits.size(); ++i) {
        const double z = logits[i], y = labels.values[i];
        const double sp_neg = std::max(-z, 0.0) + std::log1p(std::exp(-std::abs(z)));
        total += y * sp_neg + (1 - y) * (sp_neg + z);
    }
    return total / static_cast<double>(logits.size());
}

// ReLU signs and pooling winners for every sample. A finite difference is
// only a valid oracle when this pattern is identical at x - eps and x + eps;
// otherwise the interval straddles a kink of the piecewise-linear network.
template <typename Scalar>
std::vector<Eigen::Index> activation_pattern(const ArchitectureSpec& spec,
                                             const Parameters<Scalar>& params,
                                             const Tensor<Scalar>& batch) {
    std::vector<Eigen::Index> out;
    for (Eigen::Index n = 0; n < batch.dim(0); ++n) {
        detail::SampleCache<Scalar> cache;
        detail::forward_sample<Scalar>(spec, params, detail::sample_view(batch, n), &cache);
        for (const auto& layer : cache.layers) {
            for (Eigen::Index i = 0; i < layer.pre_activation.size(); ++i)
                out.push_back(layer.pre_activation.values[i] > Scalar(0));
            out.insert(out.end(), layer.argmax.begin(), layer.argmax.end());
        }
    }
    return out;
}

struct FdSummary {
    double worst = 0.0;
    std::vector<int> checked;  // valid coordinates per parameter tensor
};

// Checks up to `per_tensor` kink-free coordinates of every parameter tensor
// (trying at most `attempts` candidates each).
template <typename Scalar>
FdSummary network_fd(const ArchitectureSpec& spec, std::uint64_t seed, Scalar eps,
                     int per_tensor, int attempts) {
    std::mt19937_64 rng(seed);
    auto params = init_parameters<Scalar>(spec, seed);
    std::uniform_real_distribution<double> bias(-0.1, 0.1), pixel(0.0, 1.0);
    for (std::size_t t = 1; t < params.size(); t += 2)  // nonzero biases exercise more paths
        for (Eigen::Index i = 0; i < params[t].size(); ++i)
            params[t].values[i] = static_cast<Scalar>(bias(rng));
    Tensor<Scalar> batch({2, 1, spec.input_side, spec.input_side});
    for (Eigen::Index i = 0; i < batch.size(); ++i)
        batch.values[i] = static_cast<Scalar>(pixel(rng));
    Tensor<Scalar> labels({2});
    labels.values << Scalar(1), Scalar(0);
    const auto analytic = loss_and_gradients(spec, params, batch, labels);
    const auto base = activation_pattern(spec, params, batch);

    FdSummary summary;
    for (std::size_t t = 0; t < params.size(); ++t) {
        std::uniform_int_distribution<Eigen::Index> pick(0, params[t].size() - 1);
        int valid = 0;
        for (int a = 0; a < attempts && valid < per_tensor; ++a) {
            const Eigen::Index i = pick(rng);
            const Scalar orig = params[t].values[i];
            const Scalar hi = orig + eps, lo = orig - eps;
            params[t].values[i] = hi;
            const double f_hi = reference_loss(spec, params, batch, labels);
            bool smooth = activation_pattern(spec, params, batch) == base;
            params[t].values[i] = lo;
            const double f_lo = reference_loss(spec, params, batch, labels);
            smooth = smooth && activation_pattern(spec, params, batch) == base;
            params[t].values[i] = orig;
            if (!smooth)
                continue;
            ++valid;
            const double numeric = (f_hi - f_lo) / (static_cast<double>(hi) - lo);
            summary.worst =
                std::max(summary.worst, gradient_error(analytic.grads[t].values[i], numeric));
        }
        summary.checked.push_back(valid);
    }
    return summary;
}

}  // namespace salient::testing
