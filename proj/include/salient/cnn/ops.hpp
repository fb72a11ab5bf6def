#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Core>

#include "salient/cnn/tensor.hpp"

namespace salient::cnn {

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using RowMap = Eigen::Map<RowMatrix<Scalar>>;
template <typename Scalar>
using ConstRowMap = Eigen::Map<const RowMatrix<Scalar>>;

struct ConvGeometry {
    Eigen::Index batch, channels, height, width;
    Eigen::Index out_channels, kernel, stride, pad;
    Eigen::Index out_height, out_width;

    Eigen::Index patch_size() const { return channels * kernel * kernel; }
    Eigen::Index out_pixels() const { return out_height * out_width; }
};

/// Validates an NCHW input against [O, C, K, K] weights.
inline ConvGeometry conv_geometry(const Shape& input, const Shape& weights, int stride, int pad) {
    if (input.size() != 4 || weights.size() != 4)
        throw numeric_error("conv2d expects NCHW input and OCKK weights, got " +
                            shape_string(input) + " and " + shape_string(weights));
    if (input[1] != weights[1])
        throw numeric_error("conv2d channel mismatch: input " + shape_string(input) +
                            ", weights " + shape_string(weights));
    if (weights[2] != weights[3])
        throw numeric_error("conv2d kernels must be square");
    if (stride < 1 || pad < 0)
        throw numeric_error("conv2d stride must be >= 1 and padding >= 0");
    ConvGeometry g{input[0], input[1], input[2], input[3], weights[0], weights[2], stride, pad, 0, 0};
    const Eigen::Index span_h = g.height + 2 * pad - g.kernel;
    const Eigen::Index span_w = g.width + 2 * pad - g.kernel;
    if (span_h < 0 || span_w < 0)
        throw numeric_error("conv2d output would be empty for input " + shape_string(input));
    g.out_height = span_h / stride + 1;
    g.out_width = span_w / stride + 1;
    return g;
}

/// Unfolds one CHW sample into a (C*K*K) x (Ho*Wo) patch matrix.
template <typename Scalar>
void im2col(const Scalar* image, const ConvGeometry& g, RowMatrix<Scalar>& cols) {
    cols.resize(g.patch_size(), g.out_pixels());
    Eigen::Index row = 0;
    for (Eigen::Index c = 0; c < g.channels; ++c) {
        const Scalar* plane = image + c * g.height * g.width;
        for (Eigen::Index ky = 0; ky < g.kernel; ++ky)
            for (Eigen::Index kx = 0; kx < g.kernel; ++kx, ++row) {
                Scalar* dst = cols.row(row).data();
                for (Eigen::Index oy = 0; oy < g.out_height; ++oy) {
                    const Eigen::Index iy = oy * g.stride + ky - g.pad;
                    for (Eigen::Index ox = 0; ox < g.out_width; ++ox) {
                        const Eigen::Index ix = ox * g.stride + kx - g.pad;
                        *dst++ = (iy >= 0 && iy < g.height && ix >= 0 && ix < g.width)
                                     ? plane[iy * g.width + ix]
                                     : Scalar(0);
                    }
                }
            }
    }
}

/// Adjoint of im2col: scatters (adds) patch gradients back into a CHW sample.
template <typename Scalar>
void col2im(const RowMatrix<Scalar>& cols, const ConvGeometry& g, Scalar* image) {
    Eigen::Index row = 0;
    for (Eigen::Index c = 0; c < g.channels; ++c) {
        Scalar* plane = image + c * g.height * g.width;
        for (Eigen::Index ky = 0; ky < g.kernel; ++ky)
            for (Eigen::Index kx = 0; kx < g.kernel; ++kx, ++row) {
                const Scalar* src = cols.row(row).data();
                for (Eigen::Index oy = 0; oy < g.out_height; ++oy) {
                    const Eigen::Index iy = oy * g.stride + ky - g.pad;
                    for (Eigen::Index ox = 0; ox < g.out_width; ++ox, ++src) {
                        const Eigen::Index ix = ox * g.stride + kx - g.pad;
                        if (iy >= 0 && iy < g.height && ix >= 0 && ix < g.width)
                            plane[iy * g.width + ix] += *src;
                    }
                }
            }
    }
}

/// Cross-correlation over an NCHW batch (zero padding `pad`, default valid).
template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& input, const Tensor<Scalar>& weights,
                      const Tensor<Scalar>& bias, int stride = 1, int pad = 0) {
    const ConvGeometry g = conv_geometry(input.shape, weights.shape, stride, pad);
    if (bias.size() != g.out_channels)
        throw numeric_error("conv2d bias length must equal output channels");
    Tensor<Scalar> out({g.batch, g.out_channels, g.out_height, g.out_width});
    const ConstRowMap<Scalar> w(weights.data(), g.out_channels, g.patch_size());
    RowMatrix<Scalar> cols;
    for (Eigen::Index n = 0; n < g.batch; ++n) {
        im2col(input.data() + n * g.channels * g.height * g.width, g, cols);
        RowMap<Scalar> y(out.data() + n * g.out_channels * g.out_pixels(), g.out_channels,
                         g.out_pixels());
        y.noalias() = w * cols;
        y.colwise() += bias.values;
    }
    return out;
}

template <typename Scalar>
struct Conv2dGrads {
    Tensor<Scalar> input;  // empty shape when not requested
    Tensor<Scalar> weights;
    Tensor<Scalar> bias;
};

template <typename Scalar>
Conv2dGrads<Scalar> conv2d_backward(const Tensor<Scalar>& input, const Tensor<Scalar>& weights,
                                    const Tensor<Scalar>& grad_out, int stride = 1, int pad = 0,
                                    bool want_input_grad = true) {
    const ConvGeometry g = conv_geometry(input.shape, weights.shape, stride, pad);
    if (grad_out.shape != Shape{g.batch, g.out_channels, g.out_height, g.out_width})
        throw numeric_error("conv2d_backward gradient shape mismatch");
    Conv2dGrads<Scalar> grads{want_input_grad ? Tensor<Scalar>(input.shape) : Tensor<Scalar>(),
                              Tensor<Scalar>(weights.shape), Tensor<Scalar>({g.out_channels})};
    const ConstRowMap<Scalar> w(weights.data(), g.out_channels, g.patch_size());
    RowMap<Scalar> dw(grads.weights.data(), g.out_channels, g.patch_size());
    RowMatrix<Scalar> cols, dcols;
    for (Eigen::Index n = 0; n < g.batch; ++n) {
        const Scalar* sample = input.data() + n * g.channels * g.height * g.width;
        const ConstRowMap<Scalar> dy(grad_out.data() + n * g.out_channels * g.out_pixels(),
                                     g.out_channels, g.out_pixels());
        im2col(sample, g, cols);
        dw.noalias() += dy * cols.transpose();
        grads.bias.values += dy.rowwise().sum();
        if (want_input_grad) {
            dcols.noalias() = w.transpose() * dy;
            col2im(dcols, g, grads.input.data() + n * g.channels * g.height * g.width);
        }
    }
    return grads;
}

template <typename Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& input) {
    return Tensor<Scalar>(input.shape, input.values.cwiseMax(Scalar(0)));
}

template <typename Scalar>
Tensor<Scalar> relu_backward(const Tensor<Scalar>& input, const Tensor<Scalar>& grad_out) {
    if (input.shape != grad_out.shape)
        throw numeric_error("relu_backward shape mismatch");
    return Tensor<Scalar>(input.shape,
                          (input.values.array() > Scalar(0)).select(grad_out.values, Scalar(0)));
}

template <typename Scalar>
struct PoolResult {
    Tensor<Scalar> output;
    std::vector<Eigen::Index> argmax;  // flat input index per output element
};

/// 2x2 max pooling, stride 2, odd trailing rows/columns dropped. Ties go to
/// the first element in row-major order.
template <typename Scalar>
PoolResult<Scalar> maxpool2x2(const Tensor<Scalar>& input) {
    if (input.shape.size() != 4)
        throw numeric_error("maxpool2x2 expects NCHW input, got " + shape_string(input.shape));
    const Eigen::Index nc = input.dim(0) * input.dim(1);
    const Eigen::Index h = input.dim(2), w = input.dim(3);
    const Eigen::Index oh = h / 2, ow = w / 2;
    if (oh < 1 || ow < 1)
        throw numeric_error("maxpool2x2 input too small: " + shape_string(input.shape));
    PoolResult<Scalar> r{Tensor<Scalar>({input.dim(0), input.dim(1), oh, ow}), {}};
    r.argmax.resize(static_cast<std::size_t>(r.output.size()));
    Eigen::Index o = 0;
    for (Eigen::Index p = 0; p < nc; ++p) {
        const Eigen::Index base = p * h * w;
        for (Eigen::Index y = 0; y < oh; ++y)
            for (Eigen::Index x = 0; x < ow; ++x, ++o) {
                const Eigen::Index i0 = base + 2 * y * w + 2 * x;
                const Eigen::Index cand[4] = {i0, i0 + 1, i0 + w, i0 + w + 1};
                Eigen::Index best = cand[0];
                for (int k = 1; k < 4; ++k)
                    if (input.values[cand[k]] > input.values[best])
                        best = cand[k];
                r.output.values[o] = input.values[best];
                r.argmax[static_cast<std::size_t>(o)] = best;
            }
    }
    return r;
}

template <typename Scalar>
Tensor<Scalar> maxpool2x2_backward(const Shape& input_shape,
                                   const std::vector<Eigen::Index>& argmax,
                                   const Tensor<Scalar>& grad_out) {
    if (static_cast<Eigen::Index>(argmax.size()) != grad_out.size())
        throw numeric_error("maxpool2x2_backward shape mismatch");
    Tensor<Scalar> grad(input_shape);
    for (std::size_t o = 0; o < argmax.size(); ++o)
        grad.values[argmax[o]] += grad_out.values[static_cast<Eigen::Index>(o)];
    return grad;
}

/// NCHW -> [N, C] spatial mean.
template <typename Scalar>
Tensor<Scalar> global_avg_pool(const Tensor<Scalar>& input) {
    if (input.shape.size() != 4)
        throw numeric_error("global_avg_pool expects NCHW input");
    const Eigen::Index nc = input.dim(0) * input.dim(1);
    const Eigen::Index hw = input.dim(2) * input.dim(3);
    const ConstRowMap<Scalar> x(input.data(), nc, hw);
    return Tensor<Scalar>({input.dim(0), input.dim(1)}, x.rowwise().mean());
}

template <typename Scalar>
Tensor<Scalar> global_avg_pool_backward(const Shape& input_shape, const Tensor<Scalar>& grad_out) {
    const Eigen::Index nc = input_shape.at(0) * input_shape.at(1);
    const Eigen::Index hw = input_shape.at(2) * input_shape.at(3);
    if (grad_out.size() != nc)
        throw numeric_error("global_avg_pool_backward shape mismatch");
    Tensor<Scalar> grad(input_shape);
    RowMap<Scalar> g(grad.data(), nc, hw);
    g.colwise() = grad_out.values / Scalar(hw);
    return grad;
}

/// [N, F] x [O, F]^T + bias -> [N, O].
template <typename Scalar>
Tensor<Scalar> dense(const Tensor<Scalar>& input, const Tensor<Scalar>& weights,
                     const Tensor<Scalar>& bias) {
    if (input.shape.size() != 2 || weights.shape.size() != 2 || input.dim(1) != weights.dim(1) ||
        bias.size() != weights.dim(0))
        throw numeric_error("dense shape mismatch: input " + shape_string(input.shape) +
                            ", weights " + shape_string(weights.shape));
    const Eigen::Index n = input.dim(0), f = input.dim(1), o = weights.dim(0);
    Tensor<Scalar> out({n, o});
    RowMap<Scalar> y(out.data(), n, o);
    y.noalias() = ConstRowMap<Scalar>(input.data(), n, f) *
                  ConstRowMap<Scalar>(weights.data(), o, f).transpose();
    y.rowwise() += bias.values.transpose();
    return out;
}

template <typename Scalar>
struct DenseGrads {
    Tensor<Scalar> input;
    Tensor<Scalar> weights;
    Tensor<Scalar> bias;
};

template <typename Scalar>
DenseGrads<Scalar> dense_backward(const Tensor<Scalar>& input, const Tensor<Scalar>& weights,
                                  const Tensor<Scalar>& grad_out) {
    const Eigen::Index n = input.dim(0), f = input.dim(1), o = weights.dim(0);
    if (grad_out.shape != Shape{n, o})
        throw numeric_error("dense_backward gradient shape mismatch");
    DenseGrads<Scalar> g{Tensor<Scalar>(input.shape), Tensor<Scalar>(weights.shape),
                         Tensor<Scalar>(Shape{o})};
    const ConstRowMap<Scalar> x(input.data(), n, f);
    const ConstRowMap<Scalar> w(weights.data(), o, f);
    const ConstRowMap<Scalar> dy(grad_out.data(), n, o);
    RowMap<Scalar>(g.input.data(), n, f).noalias() = dy * w;
    RowMap<Scalar>(g.weights.data(), o, f).noalias() = dy.transpose() * x;
    g.bias.values = dy.colwise().sum().transpose();
    return g;
}

template <typename Scalar>
Tensor<Scalar> sigmoid(const Tensor<Scalar>& input) {
    return Tensor<Scalar>(input.shape,
                          (Scalar(1) / (Scalar(1) + (-input.values.array()).exp())).matrix());
}

/// Takes the forward *output* y; dx = dy * y * (1 - y).
template <typename Scalar>
Tensor<Scalar> sigmoid_backward(const Tensor<Scalar>& output, const Tensor<Scalar>& grad_out) {
    if (output.shape != grad_out.shape)
        throw numeric_error("sigmoid_backward shape mismatch");
    const auto y = output.values.array();
    return Tensor<Scalar>(output.shape,
                          (grad_out.values.array() * y * (Scalar(1) - y)).matrix());
}

inline constexpr double kProbabilityClamp = 1e-7;

namespace detail {

template <typename Scalar>
void check_labels(const Tensor<Scalar>& probs, const Tensor<Scalar>& labels) {
    if (probs.size() != labels.size() || probs.size() == 0)
        throw numeric_error("binary_cross_entropy needs equal, non-empty probability and label sets");
    for (Eigen::Index i = 0; i < labels.size(); ++i)
        if (labels.values[i] != Scalar(0) && labels.values[i] != Scalar(1))
            throw numeric_error("binary_cross_entropy label outside {0, 1}");
}

}  // namespace detail

/// Mean of -[y ln p + (1 - y) ln(1 - p)], p clamped to [1e-7, 1 - 1e-7].
template <typename Scalar>
Scalar binary_cross_entropy(const Tensor<Scalar>& probs, const Tensor<Scalar>& labels) {
    detail::check_labels(probs, labels);
    const Scalar lo(kProbabilityClamp), hi(Scalar(1) - Scalar(kProbabilityClamp));
    Scalar total(0);
    for (Eigen::Index i = 0; i < probs.size(); ++i) {
        const Scalar p = std::clamp(probs.values[i], lo, hi);
        const Scalar y = labels.values[i];
        total -= y * std::log(p) + (Scalar(1) - y) * std::log(Scalar(1) - p);
    }
    return total / Scalar(probs.size());
}

template <typename Scalar>
Tensor<Scalar> binary_cross_entropy_backward(const Tensor<Scalar>& probs,
                                             const Tensor<Scalar>& labels) {
    detail::check_labels(probs, labels);
    const Scalar lo(kProbabilityClamp), hi(Scalar(1) - Scalar(kProbabilityClamp));
    Tensor<Scalar> grad(probs.shape);
    const Scalar n(probs.size());
    for (Eigen::Index i = 0; i < probs.size(); ++i) {
        const Scalar p = std::clamp(probs.values[i], lo, hi);
        const Scalar y = labels.values[i];
        grad.values[i] = (-y / p + (Scalar(1) - y) / (Scalar(1) - p)) / n;
    }
    return grad;
}

}  // namespace salient::cnn
