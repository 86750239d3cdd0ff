#include "sidekit/quant/structured.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sidekit/error.hpp"

namespace sidekit::quant {

LineCodebook::LineCodebook(Tensor2 directions, Tensor2 references, std::uint32_t levels)
    : directions_(std::move(directions)), references_(std::move(references)), levels_(levels) {
    if (levels_ < 2) throw InvalidArgument("LineCodebook: levels must be >= 2");
    if (directions_.rows() != references_.rows() || directions_.cols() != references_.cols()) {
        throw ShapeError("LineCodebook: directions " + directions_.shape_string() + " vs references " +
                         references_.shape_string());
    }
    if (directions_.rows() == 0) throw InvalidArgument("LineCodebook: needs at least one line");
    for (std::size_t k = 0; k < directions_.rows(); ++k) {
        const double norm = std::sqrt(static_cast<double>(dot(directions_.row(k), directions_.row(k))));
        if (std::fabs(norm - 1.0) > 1e-5) {
            throw InvalidArgument("LineCodebook: direction " + std::to_string(k) + " has norm " +
                                  std::to_string(norm));
        }
    }
}

float LineCodebook::level_value(std::uint32_t level) const {
    return static_cast<float>(2.0 * level / static_cast<double>(levels_ - 1) - 1.0);
}

std::vector<float> LineCodebook::codeword(std::uint32_t line, std::uint32_t level) const {
    const float s = level_value(level);
    std::vector<float> c(dim());
    for (std::size_t j = 0; j < dim(); ++j) c[j] = s * directions_(line, j) + references_(line, j);
    return c;
}

StructuredCode structured_assign(const LineCodebook& cb, std::span<const float> x) {
    if (x.size() != cb.dim()) {
        throw ShapeError("structured_assign: vector has dimension " + std::to_string(x.size()) +
                         ", codebook expects " + std::to_string(cb.dim()));
    }
    StructuredCode out;
    double best = std::numeric_limits<double>::infinity();
    double best_proj = 0.0;
    for (std::size_t k = 0; k < cb.lines(); ++k) {
        double norm2 = 0.0, proj = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) {
            const double diff = static_cast<double>(x[j]) - cb.references()(k, j);
            norm2 += diff * diff;
            proj += diff * cb.directions()(k, j);
        }
        const double line_dist = norm2 - proj * proj;
        if (line_dist < best) {
            best = line_dist;
            best_proj = proj;
            out.line = static_cast<std::uint32_t>(k);
        }
    }
    out.projection = static_cast<float>(best_proj);
    // Nearest grid level; an exact midpoint goes to the lower level.
    const double steps = (best_proj + 1.0) / 2.0 * (cb.levels() - 1);
    out.level = static_cast<std::uint32_t>(std::clamp(std::ceil(steps - 0.5), 0.0, static_cast<double>(cb.levels() - 1)));
    out.reconstruction = cb.codeword(out.line, out.level);
    return out;
}

}  // namespace sidekit::quant
