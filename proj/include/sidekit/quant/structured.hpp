#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sidekit/tensor.hpp"

namespace sidekit::quant {

/// Codebook made of K lines: codeword (k, l) = s_l * u_k + b_k, where the
/// signed distances s_l form the uniform grid {2l/(L-1) - 1}.
class LineCodebook {
public:
    /// Directions must be unit length within 1e-5.
    LineCodebook(Tensor2 directions, Tensor2 references, std::uint32_t levels);

    std::size_t lines() const noexcept { return directions_.rows(); }
    std::size_t dim() const noexcept { return directions_.cols(); }
    std::uint32_t levels() const noexcept { return levels_; }
    const Tensor2& directions() const noexcept { return directions_; }
    const Tensor2& references() const noexcept { return references_; }

    /// Grid value s_l.
    float level_value(std::uint32_t level) const;
    std::vector<float> codeword(std::uint32_t line, std::uint32_t level) const;

private:
    Tensor2 directions_;
    Tensor2 references_;
    std::uint32_t levels_;
};

struct StructuredCode {
    std::uint32_t line = 0;
    std::uint32_t level = 0;
    float projection = 0.0f;  // signed distance along the chosen line
    std::vector<float> reconstruction;
};

/// Picks the line with the smallest point-to-line distance
/// ||x - b||^2 - <x - b, u>^2 (ties to the lower index), projects onto it and
/// rounds the signed distance to the nearest grid level (clamped to the grid).
StructuredCode structured_assign(const LineCodebook& codebook, std::span<const float> x);

}  // namespace sidekit::quant
