#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sidekit/quant/codeword.hpp"

namespace sidekit::quant {

/// Finite scalar quantizer: each latent dimension is bounded with tanh and
/// rounded onto a uniform grid of `levels` points spanning [-1, 1].
struct FsqConfig {
    std::size_t latent_dims = 1;
    std::uint32_t levels = 3;
};

void validate(const FsqConfig& cfg);

/// Level index of one latent value: round((tanh(z) + 1) / 2 * (L - 1)),
/// halves rounded away from zero.
std::uint32_t fsq_level(float z, std::uint32_t levels);

/// Grid value of a level: 2 * level / (L - 1) - 1.
float fsq_value(std::uint32_t level, std::uint32_t levels);

struct FsqResult {
    CodewordVector code;
    std::vector<float> quantized;
};

FsqResult fsq_quantize(const FsqConfig& cfg, std::span<const float> z);

}  // namespace sidekit::quant
