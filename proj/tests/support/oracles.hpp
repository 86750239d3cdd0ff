#pragma once

// Independent brute-force references used by the quantizer and codec tests.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>
#include <vector>

#include "sidekit/quant/dpca.hpp"
#include "sidekit/quant/structured.hpp"
#include "sidekit/tensor.hpp"

namespace sidekit::testing {

/// Nearest codeword over the explicit set {s_l u_k + b_k : all k, l}, scanning
/// k then l so the first minimum wins (lower index tie rule).
struct BruteCodeword {
    std::uint32_t line = 0;
    std::uint32_t level = 0;
    double distance = 0.0;
};

inline BruteCodeword brute_force_line_codeword(const quant::LineCodebook& cb, std::span<const float> x) {
    BruteCodeword best{0, 0, std::numeric_limits<double>::infinity()};
    for (std::uint32_t k = 0; k < cb.lines(); ++k) {
        for (std::uint32_t l = 0; l < cb.levels(); ++l) {
            const double s = -1.0 + 2.0 * l / (cb.levels() - 1.0);
            double d2 = 0.0;
            for (std::size_t j = 0; j < x.size(); ++j) {
                const double c = s * cb.directions()(k, j) + cb.references()(k, j);
                d2 += (x[j] - c) * (x[j] - c);
            }
            if (d2 < best.distance) best = {k, l, d2};
        }
    }
    return best;
}

/// argmin_k of the point-to-line distance, evaluated independently.
inline std::uint32_t brute_force_nearest_line(const quant::LineCodebook& cb, std::span<const float> x) {
    std::uint32_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::uint32_t k = 0; k < cb.lines(); ++k) {
        // Distance to the foot of the perpendicular.
        double t = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) t += (x[j] - cb.references()(k, j)) * cb.directions()(k, j);
        double d2 = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) {
            const double foot = cb.references()(k, j) + t * cb.directions()(k, j);
            d2 += (x[j] - foot) * (x[j] - foot);
        }
        if (d2 < best_d) {
            best_d = d2;
            best = k;
        }
    }
    return best;
}

/// Plain re-summation of sum_d (s_d u_d + b_d) per group.
inline std::vector<float> naive_dpca_sum(const quant::DpcaStack& stack, const std::vector<int>& digits_depth_major) {
    std::vector<float> out(stack.dim(), 0.0f);
    const std::size_t w = stack.group_width();
    for (std::size_t g = 0; g < stack.groups(); ++g) {
        for (std::size_t d = 0; d < stack.depth(); ++d) {
            const float s = static_cast<float>(digits_depth_major[d * stack.groups() + g]);
            for (std::size_t j = 0; j < w; ++j) {
                out[g * w + j] += s * stack.component(g, d)[j] + stack.offset(g, d)[j];
            }
        }
    }
    return out;
}

/// Indices of `count` nearest rows by squared distance via a full stable sort.
inline std::vector<std::uint32_t> brute_force_nearest_rows(const Tensor2& rows, std::span<const float> x,
                                                           std::size_t count) {
    std::vector<std::pair<double, std::uint32_t>> all;
    for (std::uint32_t i = 0; i < rows.rows(); ++i) {
        double d = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) d += (x[j] - rows(i, j)) * (x[j] - rows(i, j));
        all.emplace_back(d, i);
    }
    std::stable_sort(all.begin(), all.end(), [](auto& a, auto& b) { return a.first < b.first; });
    std::vector<std::uint32_t> out;
    for (std::size_t i = 0; i < count && i < all.size(); ++i) out.push_back(all[i].second);
    return out;
}

}  // namespace sidekit::testing
