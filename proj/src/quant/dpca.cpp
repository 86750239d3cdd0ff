#include "sidekit/quant/dpca.hpp"

#include <cmath>

#include "sidekit/error.hpp"
#include "sidekit/quant/fsq.hpp"

namespace sidekit::quant {

DpcaStack::DpcaStack(std::size_t depth, std::size_t groups, std::size_t group_width)
    : depth_(depth), groups_(groups), width_(group_width),
      components_(depth * groups * group_width, 0.0f), offsets_(depth * groups * group_width, 0.0f) {
    if (depth == 0 || groups == 0 || group_width == 0) {
        throw InvalidArgument("DpcaStack: depth, groups and group width must be >= 1");
    }
}

std::span<float> DpcaStack::component(std::size_t g, std::size_t d) {
    return {components_.data() + (g * depth_ + d) * width_, width_};
}
std::span<const float> DpcaStack::component(std::size_t g, std::size_t d) const {
    return {components_.data() + (g * depth_ + d) * width_, width_};
}
std::span<float> DpcaStack::offset(std::size_t g, std::size_t d) {
    return {offsets_.data() + (g * depth_ + d) * width_, width_};
}
std::span<const float> DpcaStack::offset(std::size_t g, std::size_t d) const {
    return {offsets_.data() + (g * depth_ + d) * width_, width_};
}

int ternary_digit(const CodewordVector& code, std::size_t i) {
    return static_cast<int>(code.levels.at(i)) - 1;
}

namespace {

// recon += s * u + b, shared by encode and decode so both accumulate identically.
void accumulate_term(std::span<float> recon, int s, std::span<const float> u, std::span<const float> b) {
    const float sf = static_cast<float>(s);
    for (std::size_t j = 0; j < recon.size(); ++j) recon[j] += sf * u[j] + b[j];
}

}  // namespace

DpcaEncoding dpca_encode(const DpcaStack& stack, std::span<const float> x) {
    if (x.size() != stack.dim()) {
        throw ShapeError("dpca_encode: vector has dimension " + std::to_string(x.size()) +
                         ", stack expects " + std::to_string(stack.dim()));
    }
    const std::size_t w = stack.group_width();
    DpcaEncoding out;
    out.code.base = 3;
    out.code.levels.assign(stack.code_length(), 1);
    out.reconstruction.assign(x.size(), 0.0f);
    out.residual.assign(x.begin(), x.end());
    for (std::size_t g = 0; g < stack.groups(); ++g) {
        const auto xg = x.subspan(g * w, w);
        auto recon = std::span<float>(out.reconstruction).subspan(g * w, w);
        for (std::size_t d = 0; d < stack.depth(); ++d) {
            const auto u = stack.component(g, d);
            const auto b = stack.offset(g, d);
            double unorm2 = 0.0, proj = 0.0;
            for (std::size_t j = 0; j < w; ++j) {
                unorm2 += static_cast<double>(u[j]) * u[j];
                const double r = static_cast<double>(xg[j]) - recon[j];
                proj += (r - b[j]) * u[j];
            }
            if (unorm2 == 0.0) {
                throw NumericError("dpca_encode: zero-norm component (group " + std::to_string(g) +
                                   ", depth " + std::to_string(d) + ")");
            }
            // Projection coefficient in units of ||u||, snapped by the L=3 scalar quantizer.
            const std::uint32_t level = fsq_level(static_cast<float>(proj / unorm2), 3);
            out.code.levels[stack.digit_index(g, d)] = level;
            accumulate_term(recon, static_cast<int>(level) - 1, u, b);
        }
        for (std::size_t j = 0; j < w; ++j) out.residual[g * w + j] = xg[j] - recon[j];
    }
    return out;
}

std::vector<float> dpca_decode(const DpcaStack& stack, const CodewordVector& code, std::size_t depth_prefix) {
    if (code.size() != stack.code_length()) {
        throw ShapeError("dpca_decode: code has " + std::to_string(code.size()) + " digits, expected " +
                         std::to_string(stack.code_length()));
    }
    if (depth_prefix == 0) depth_prefix = stack.depth();
    if (depth_prefix > stack.depth()) throw InvalidArgument("dpca_decode: depth prefix exceeds stack depth");
    const std::size_t w = stack.group_width();
    std::vector<float> out(stack.dim(), 0.0f);
    for (std::size_t g = 0; g < stack.groups(); ++g) {
        auto recon = std::span<float>(out).subspan(g * w, w);
        for (std::size_t d = 0; d < depth_prefix; ++d) {
            const std::uint32_t level = code.levels[stack.digit_index(g, d)];
            if (level > 2) throw InvalidArgument("dpca_decode: digit is not ternary");
            accumulate_term(recon, static_cast<int>(level) - 1, stack.component(g, d), stack.offset(g, d));
        }
    }
    return out;
}

}  // namespace sidekit::quant
