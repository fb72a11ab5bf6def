#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "salient/cnn/tensor.hpp"

namespace salient::testing {

using cnn::Shape;
using cnn::Tensor;

inline constexpr float kFdEpsilon = 1e-3f;
inline constexpr double kFdTolerance = 1e-3;

/// |a - n| / max(|a|, |n|, 1): relative for large gradients, absolute near zero.
inline double gradient_error(double analytic, double numeric) {
    return std::abs(analytic - numeric) /
           std::max({std::abs(analytic), std::abs(numeric), 1.0});
}

/// Weighted sum of outputs, accumulated in double so the finite difference
/// sees the float32 op rather than the reduction's rounding.
inline double project(const Tensor<float>& out, const Tensor<float>& weights) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < out.size(); ++i)
        s += static_cast<double>(out.values[i]) * weights.values[i];
    return s;
}

/// Central-difference check of `analytic` (d objective / d x) at up to
/// `max_coords` coordinates of x. Returns the worst error seen.
inline double check_gradient(Tensor<float>& x, const Tensor<float>& analytic,
                             const std::function<double()>& objective, std::mt19937_64& rng,
                             Eigen::Index max_coords = 40) {
    std::vector<Eigen::Index> coords(static_cast<std::size_t>(x.size()));
    for (Eigen::Index i = 0; i < x.size(); ++i)
        coords[static_cast<std::size_t>(i)] = i;
    std::shuffle(coords.begin(), coords.end(), rng);
    if (static_cast<Eigen::Index>(coords.size()) > max_coords)
        coords.resize(static_cast<std::size_t>(max_coords));
    double worst = 0.0;
    for (const auto i : coords) {
        const float orig = x.values[i];
        const float hi = orig + kFdEpsilon, lo = orig - kFdEpsilon;
        x.values[i] = hi;
        const double f_hi = objective();
        x.values[i] = lo;
        const double f_lo = objective();
        x.values[i] = orig;
        // divide by the step actually taken in float32
        const double numeric = (f_hi - f_lo) / (static_cast<double>(hi) - lo);
        worst = std::max(worst, gradient_error(analytic.values[i], numeric));
    }
    return worst;
}

inline Tensor<float> uniform_tensor(Shape shape, std::mt19937_64& rng, float lo = -1.f,
                                    float hi = 1.f) {
    Tensor<float> t(std::move(shape));
    std::uniform_real_distribution<float> u(lo, hi);
    for (Eigen::Index i = 0; i < t.size(); ++i)
        t.values[i] = u(rng);
    return t;
}

}  // namespace salient::testing
