#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sidekit/quant/codeword.hpp"

namespace sidekit::quant {

/// Discrete-PCA codebook: per product group g and residual depth d, a
/// component vector u and an offset b. A vector is approximated per group by
/// sum_d (s_d * u_d + b_d) with ternary weights s_d in {-1, 0, +1}.
///
/// Component norms are free; the ternary weight is chosen on the projection
/// coefficient <r - b, u> / ||u||^2.
class DpcaStack {
public:
    DpcaStack(std::size_t depth, std::size_t groups, std::size_t group_width);

    std::size_t depth() const noexcept { return depth_; }
    std::size_t groups() const noexcept { return groups_; }
    std::size_t group_width() const noexcept { return width_; }
    std::size_t dim() const noexcept { return groups_ * width_; }
    /// Number of ternary digits in a code (depth * groups).
    std::size_t code_length() const noexcept { return depth_ * groups_; }

    std::span<float> component(std::size_t group, std::size_t d);
    std::span<const float> component(std::size_t group, std::size_t d) const;
    std::span<float> offset(std::size_t group, std::size_t d);
    std::span<const float> offset(std::size_t group, std::size_t d) const;

    /// Digit position of (group, depth) inside a code: depth-major, so any
    /// prefix of the code covers the shallowest depths of every group.
    std::size_t digit_index(std::size_t group, std::size_t d) const noexcept { return d * groups_ + group; }

private:
    std::size_t depth_;
    std::size_t groups_;
    std::size_t width_;
    std::vector<float> components_;
    std::vector<float> offsets_;
};

struct DpcaEncoding {
    CodewordVector code;              // levels in {0,1,2} = ternary weight + 1
    std::vector<float> reconstruction;
    std::vector<float> residual;      // x - reconstruction
};

/// Greedy residual encoding. Throws on zero-norm components.
DpcaEncoding dpca_encode(const DpcaStack& stack, std::span<const float> x);

/// Sum of (s_d * u_d + b_d) over the first `depth_prefix` depths of every
/// group (all depths when depth_prefix is 0), joined across groups.
std::vector<float> dpca_decode(const DpcaStack& stack, const CodewordVector& code,
                               std::size_t depth_prefix = 0);

/// Ternary weight in {-1, 0, +1} stored at a code position.
int ternary_digit(const CodewordVector& code, std::size_t i);

}  // namespace sidekit::quant
