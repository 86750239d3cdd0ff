#pragma once

#include <cstdint>
#include <vector>

#include "sidekit/graph.hpp"

namespace sidekit::nn {

struct AdamConfig {
    float learning_rate = 1e-3f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float epsilon = 1e-8f;
};

/// Per-parameter moment estimates for bias-corrected Adam.
struct AdamState {
    std::uint64_t step = 0;
    AdamConfig config;
    std::vector<Tensor2> first_moment;
    std::vector<Tensor2> second_moment;
};

AdamState make_adam_state(const ParamSet& params, AdamConfig config = {});

/// Applies one update in place and increments the step. All gradients are
/// validated before any parameter changes; a non-finite entry throws
/// NumericError naming the parameter.
void adam_step(AdamState& state, ParamSet& params, const Gradients& grads);

}  // namespace sidekit::nn
