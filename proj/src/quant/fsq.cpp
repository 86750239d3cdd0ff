#include "sidekit/quant/fsq.hpp"

#include <algorithm>
#include <cmath>

#include "sidekit/error.hpp"

namespace sidekit::quant {

void validate(const FsqConfig& cfg) {
    if (cfg.levels < 2) throw InvalidArgument("FSQ: levels must be >= 2");
    if (cfg.latent_dims == 0) throw InvalidArgument("FSQ: latent_dims must be >= 1");
}

std::uint32_t fsq_level(float z, std::uint32_t levels) {
    if (!std::isfinite(z)) throw NumericError("FSQ: non-finite latent value");
    const double u = std::tanh(static_cast<double>(z));
    const double scaled = (u + 1.0) / 2.0 * static_cast<double>(levels - 1);
    const double level = std::clamp(std::round(scaled), 0.0, static_cast<double>(levels - 1));
    return static_cast<std::uint32_t>(level);
}

float fsq_value(std::uint32_t level, std::uint32_t levels) {
    return static_cast<float>(2.0 * level / static_cast<double>(levels - 1) - 1.0);
}

FsqResult fsq_quantize(const FsqConfig& cfg, std::span<const float> z) {
    validate(cfg);
    if (z.size() != cfg.latent_dims) {
        throw ShapeError("FSQ: latent has " + std::to_string(z.size()) + " dims, expected " +
                         std::to_string(cfg.latent_dims));
    }
    FsqResult r;
    r.code.base = cfg.levels;
    r.code.levels.resize(z.size());
    r.quantized.resize(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        r.code.levels[i] = fsq_level(z[i], cfg.levels);
        r.quantized[i] = fsq_value(r.code.levels[i], cfg.levels);
    }
    return r;
}

}  // namespace sidekit::quant
