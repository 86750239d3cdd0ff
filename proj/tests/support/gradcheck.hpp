#pragma once

// Central finite-difference oracle for the autodiff engine. Lives in test
// code only and never calls Graph::backward when producing its estimate.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>

#include "sidekit/graph.hpp"

namespace sidekit::testing {

struct GradCheckResult {
    double worst_relative_error = 0.0;
    std::string worst_param;
};

using LossBuilder = std::function<nn::NodeId(nn::Graph&)>;

inline float evaluate_loss(const nn::ParamSet& params, const LossBuilder& build) {
    nn::Graph g(&params);
    const nn::NodeId loss = build(g);
    g.forward();
    return g.value(loss)(0, 0);
}

/// Compares the analytic gradient of every parameter against central
/// differences with step `h`. The error per parameter is the norm-wise
/// relative error ||a - n|| / max(||a||, ||n||, floor).
inline GradCheckResult gradcheck(nn::ParamSet& params, const LossBuilder& build, float h = 1e-3f,
                                 double floor = 1e-3) {
    nn::Graph g(&params);
    const nn::NodeId loss = build(g);
    g.forward();
    const nn::Gradients analytic = g.backward(loss);

    GradCheckResult result;
    for (std::size_t p = 0; p < params.size(); ++p) {
        auto values = params.value(p).values();
        double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
        for (std::size_t j = 0; j < values.size(); ++j) {
            const float saved = values[j];
            values[j] = saved + h;
            const double up = evaluate_loss(params, build);
            values[j] = saved - h;
            const double down = evaluate_loss(params, build);
            values[j] = saved;
            const double numeric = (up - down) / (2.0 * h);
            const double a = analytic[p].values()[j];
            diff2 += (a - numeric) * (a - numeric);
            a2 += a * a;
            n2 += numeric * numeric;
        }
        const double denom = std::max({std::sqrt(a2), std::sqrt(n2), floor});
        const double rel = std::sqrt(diff2) / denom;
        if (rel > result.worst_relative_error) {
            result.worst_relative_error = rel;
            result.worst_param = params.name(p);
        }
    }
    return result;
}

inline Tensor2 random_tensor(std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                             float lo = -1.0f, float hi = 1.0f) {
    std::uniform_real_distribution<float> dist(lo, hi);
    Tensor2 t(rows, cols);
    for (float& v : t.values()) v = dist(rng);
    return t;
}

/// Random values with |v| in [gap, 1], for ops with a kink at zero.
inline Tensor2 random_away_from_zero(std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                                     float gap = 0.05f) {
    std::uniform_real_distribution<float> mag(gap, 1.0f);
    std::bernoulli_distribution sign(0.5);
    Tensor2 t(rows, cols);
    for (float& v : t.values()) v = sign(rng) ? mag(rng) : -mag(rng);
    return t;
}

}  // namespace sidekit::testing
