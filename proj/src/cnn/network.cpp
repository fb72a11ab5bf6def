#include "salient/cnn/network.hpp"

#include <algorithm>

namespace salient::cnn {

std::string to_string(Variant v) {
    return v == Variant::five_layer ? "five_layer" : "eight_layer";
}

Variant variant_from_string(const std::string& s) {
    if (s == "five_layer")
        return Variant::five_layer;
    if (s == "eight_layer")
        return Variant::eight_layer;
    throw config_error("unknown architecture '" + s + "' (expected five_layer or eight_layer)");
}

ArchitectureSpec ArchitectureSpec::five_layer(int input_side) {
    ArchitectureSpec spec;
    spec.variant = Variant::five_layer;
    spec.input_side = input_side;
    spec.layers = {{3, 16, 0, true}, {3, 32, 0, true}, {3, 64, 0, true},
                   {3, 128, 0, true}, {3, 128, 0, false}};
    return spec;
}

// The 3x3 stages are zero-padded; with valid convolutions the eighth layer
// would have no spatial extent left at a 128 px input.
ArchitectureSpec ArchitectureSpec::eight_layer(int input_side) {
    ArchitectureSpec spec;
    spec.variant = Variant::eight_layer;
    spec.input_side = input_side;
    spec.layers = {{7, 16, 0, true},  {5, 32, 0, true},  {3, 64, 1, false},  {3, 64, 1, true},
                   {3, 128, 1, false}, {3, 128, 1, true}, {3, 256, 1, false}, {3, 256, 1, false}};
    return spec;
}

std::vector<int> ArchitectureSpec::feature_sides() const {
    std::vector<int> sides;
    int side = input_side;
    for (const auto& l : layers) {
        side = side + 2 * l.pad - l.kernel + 1;
        if (side < 1)
            throw config_error("input side " + std::to_string(input_side) +
                               " too small for the " + to_string(variant) + " architecture");
        if (l.pool) {
            side /= 2;
            if (side < 1)
                throw config_error("input side " + std::to_string(input_side) +
                                   " too small to pool in the " + to_string(variant) +
                                   " architecture");
        }
        sides.push_back(side);
    }
    return sides;
}

void ArchitectureSpec::validate() const {
    const std::size_t expected = variant == Variant::five_layer ? 5 : 8;
    if (layers.size() != expected)
        throw config_error(to_string(variant) + " requires exactly " + std::to_string(expected) +
                           " conv layers, got " + std::to_string(layers.size()));
    for (const auto& l : layers)
        if (l.kernel < 1 || l.out_channels < 1 || l.pad < 0)
            throw config_error("invalid conv layer parameters");
    if (variant == Variant::eight_layer) {
        const int early = std::min(layers[0].kernel, layers[1].kernel);
        for (std::size_t i = 2; i < layers.size(); ++i)
            if (layers[i].kernel >= early)
                throw config_error("eight_layer early kernels must exceed later kernels");
    }
    feature_sides();
}

std::vector<std::pair<std::string, Shape>> parameter_layout(const ArchitectureSpec& spec) {
    std::vector<std::pair<std::string, Shape>> layout;
    Eigen::Index channels = 1;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const auto& l = spec.layers[i];
        const std::string prefix = "conv" + std::to_string(i + 1);
        layout.push_back({prefix + ".weight", {l.out_channels, channels, l.kernel, l.kernel}});
        layout.push_back({prefix + ".bias", {l.out_channels}});
        channels = l.out_channels;
    }
    layout.push_back({"dense.weight", {1, channels}});
    layout.push_back({"dense.bias", {1}});
    return layout;
}

}  // namespace salient::cnn
