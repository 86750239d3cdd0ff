#include "sidekit/layers.hpp"

#include <cmath>

namespace sidekit::nn {

Tensor2 glorot_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
    const float limit = std::sqrt(6.0f / static_cast<float>(fan_in + fan_out));
    std::uniform_real_distribution<float> dist(-limit, limit);
    Tensor2 w(fan_in, fan_out);
    for (float& v : w.values()) v = dist(rng);
    return w;
}

void add_linear(ParamSet& params, const std::string& prefix, std::size_t in, std::size_t out,
                std::mt19937_64& rng) {
    params.add(prefix + ".w", glorot_uniform(in, out, rng));
    params.add(prefix + ".b", Tensor2(1, out));
}

NodeId linear(Graph& g, const std::string& prefix, NodeId x) {
    NodeId y = g.add(g.matmul(x, g.parameter(prefix + ".w")), g.parameter(prefix + ".b"));
    g.label(y, prefix);
    return y;
}

void add_mlp(ParamSet& params, const MlpSpec& spec, std::mt19937_64& rng) {
    for (std::size_t i = 0; i + 1 < spec.widths.size(); ++i) {
        add_linear(params, spec.prefix + ".l" + std::to_string(i), spec.widths[i], spec.widths[i + 1], rng);
    }
}

NodeId mlp(Graph& g, const MlpSpec& spec, NodeId x) {
    const std::size_t layers = spec.widths.size() - 1;
    for (std::size_t i = 0; i < layers; ++i) {
        x = linear(g, spec.prefix + ".l" + std::to_string(i), x);
        if (i + 1 < layers || spec.relu_last) x = g.relu(x);
    }
    return x;
}

}  // namespace sidekit::nn
