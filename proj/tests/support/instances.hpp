#pragma once

// Random problem generators shared by unit and acceptance tests.

#include <random>

#include "sidekit/quant/structured.hpp"
#include "sidekit/tensor.hpp"

namespace sidekit::testing {

struct LineInstance {
    quant::LineCodebook codebook;
    std::vector<float> x;
};

/// K in [1, 8] random lines in d in [8, 16] dimensions with references spread
/// N(0, 2^2) per coordinate, ternary grid, and a query sampled near one line:
/// x = b_j + t u_j + noise with t ~ U[-1, 1] (inside the grid) and noise
/// N(0, 0.05^2) per coordinate.
inline LineInstance make_line_instance(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const std::size_t lines = std::uniform_int_distribution<std::size_t>(1, 8)(rng);
    const std::size_t dim = std::uniform_int_distribution<std::size_t>(8, 16)(rng);
    std::normal_distribution<float> normal(0.0f, 1.0f);
    Tensor2 u(lines, dim), b(lines, dim);
    for (std::size_t k = 0; k < lines; ++k) {
        float n2 = 0.0f;
        for (std::size_t j = 0; j < dim; ++j) {
            u(k, j) = normal(rng);
            n2 += u(k, j) * u(k, j);
            b(k, j) = 2.0f * normal(rng);
        }
        const float n = std::sqrt(n2);
        for (std::size_t j = 0; j < dim; ++j) u(k, j) /= n;
    }
    const std::size_t target = std::uniform_int_distribution<std::size_t>(0, lines - 1)(rng);
    const float t = std::uniform_real_distribution<float>(-1.0f, 1.0f)(rng);
    std::vector<float> x(dim);
    for (std::size_t j = 0; j < dim; ++j) x[j] = b(target, j) + t * u(target, j) + 0.05f * normal(rng);
    return {quant::LineCodebook(std::move(u), std::move(b), 3), std::move(x)};
}

}  // namespace sidekit::testing
