#pragma once

#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "salient/error.hpp"

namespace salient::cnn {

using Shape = std::vector<Eigen::Index>;

inline Eigen::Index shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), Eigen::Index{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape);

/// Dense row-major tensor. Image batches use NCHW.
template <typename Scalar>
struct Tensor {
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    Shape shape;
    Vector values;
    std::optional<Vector> grad;

    Tensor() = default;
    explicit Tensor(Shape s) : shape(std::move(s)), values(Vector::Zero(shape_size(shape))) {}
    Tensor(Shape s, Vector v) : shape(std::move(s)), values(std::move(v)) {
        if (shape_size(shape) != values.size())
            throw numeric_error("tensor values do not match shape " + shape_string(shape));
    }

    Eigen::Index size() const { return values.size(); }
    Eigen::Index dim(std::size_t i) const { return shape.at(i); }
    Scalar* data() { return values.data(); }
    const Scalar* data() const { return values.data(); }

    void zero_grad() { grad = Vector::Zero(values.size()); }

    template <typename Other>
    Tensor<Other> cast() const {
        Tensor<Other> out(shape, values.template cast<Other>());
        if (grad)
            out.grad = grad->template cast<Other>();
        return out;
    }
};

inline std::string shape_string(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i)
        s += (i ? "," : "") + std::to_string(shape[i]);
    return s + "]";
}

}  // namespace salient::cnn
