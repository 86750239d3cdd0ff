#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sidekit/graph.hpp"

namespace sidekit::nn {

/// Glorot-uniform matrix: U(-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))).
Tensor2 glorot_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng);

/// Registers "<prefix>.w" (in x out, Glorot) and "<prefix>.b" (1 x out, zero).
void add_linear(ParamSet& params, const std::string& prefix, std::size_t in, std::size_t out,
                std::mt19937_64& rng);

/// x * W + b using the parameters registered by add_linear.
NodeId linear(Graph& g, const std::string& prefix, NodeId x);

/// Stack of linear layers named "<prefix>.l<i>"; relu after each hidden layer
/// and, when `relu_last` is set, after the final one as well.
struct MlpSpec {
    std::string prefix;
    std::vector<std::size_t> widths;  // input width first, output width last
    bool relu_last = false;
};

void add_mlp(ParamSet& params, const MlpSpec& spec, std::mt19937_64& rng);
NodeId mlp(Graph& g, const MlpSpec& spec, NodeId x);

}  // namespace sidekit::nn
