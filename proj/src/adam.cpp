#include "sidekit/adam.hpp"

#include <cmath>

#include "sidekit/error.hpp"

namespace sidekit::nn {

AdamState make_adam_state(const ParamSet& params, AdamConfig config) {
    if (!(config.learning_rate >= 0.0f)) throw InvalidArgument("adam: learning rate must be >= 0");
    if (!(config.beta1 >= 0.0f && config.beta1 < 1.0f && config.beta2 >= 0.0f && config.beta2 < 1.0f)) {
        throw InvalidArgument("adam: betas must lie in [0, 1)");
    }
    AdamState s;
    s.config = config;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const Tensor2& p = params.value(i);
        s.first_moment.emplace_back(p.rows(), p.cols());
        s.second_moment.emplace_back(p.rows(), p.cols());
    }
    return s;
}

void adam_step(AdamState& state, ParamSet& params, const Gradients& grads) {
    if (grads.by_param.size() != params.size() || state.first_moment.size() != params.size()) {
        throw ShapeError("adam: gradient/state count does not match parameter count");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        const Tensor2& p = params.value(i);
        const Tensor2& g = grads[i];
        if (g.rows() != p.rows() || g.cols() != p.cols()) {
            throw ShapeError("adam: gradient shape mismatch for '" + params.name(i) + "'");
        }
        if (first_non_finite(g) != g.size()) {
            throw NumericError("adam: non-finite gradient for parameter '" + params.name(i) + "'");
        }
    }

    ++state.step;
    const AdamConfig& c = state.config;
    const double t = static_cast<double>(state.step);
    const float correct1 = static_cast<float>(1.0 - std::pow(static_cast<double>(c.beta1), t));
    const float correct2 = static_cast<float>(1.0 - std::pow(static_cast<double>(c.beta2), t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto p = params.value(i).values();
        const auto g = grads[i].values();
        auto m = state.first_moment[i].values();
        auto v = state.second_moment[i].values();
        for (std::size_t j = 0; j < p.size(); ++j) {
            m[j] = c.beta1 * m[j] + (1.0f - c.beta1) * g[j];
            v[j] = c.beta2 * v[j] + (1.0f - c.beta2) * g[j] * g[j];
            const float mhat = m[j] / correct1;
            const float vhat = v[j] / correct2;
            p[j] -= c.learning_rate * mhat / (std::sqrt(vhat) + c.epsilon);
        }
    }
}

}  // namespace sidekit::nn
