#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sidekit/tensor.hpp"

namespace sidekit::quant {

struct KMeansCodebook {
    Tensor2 centroids;  // k x d

    std::size_t k() const noexcept { return centroids.rows(); }
    std::size_t dim() const noexcept { return centroids.cols(); }
};

struct KMeansFit {
    KMeansCodebook codebook;
    /// Within-cluster sum of squares after each assignment step.
    std::vector<double> objective;
    std::vector<std::uint32_t> assignment;
    /// Set when the corpus has fewer than k distinct rows.
    bool degenerate = false;
};

/// Lloyd's algorithm with k-means++ seeding. Stops early once assignments
/// stop changing. Empty clusters are reseeded at the point farthest from its
/// assigned centroid.
KMeansFit kmeans_fit(const Tensor2& corpus, std::size_t k, std::size_t iters, std::uint64_t seed);

/// Nearest centroid by Euclidean distance; ties go to the lower index.
std::uint32_t kmeans_assign(const KMeansCodebook& codebook, std::span<const float> x);

/// The `count` nearest centroids, ascending by distance, ties by lower index.
std::vector<std::uint32_t> kmeans_top_k(const KMeansCodebook& codebook, std::span<const float> x,
                                        std::size_t count);

struct ResidualCode {
    std::vector<std::uint32_t> indices;  // one per layer
    std::vector<float> reconstruction;
};

/// Greedy layer-by-layer assignment; reconstruction is the sum of the
/// selected codewords, and each layer sees x minus the partial sum so far.
ResidualCode residual_quantize(std::span<const KMeansCodebook> layers, std::span<const float> x);

/// Contiguous equal-width slices; `parts` must divide x.size().
std::vector<std::vector<float>> product_split(std::span<const float> x, std::size_t parts);
std::vector<float> product_join(std::span<const std::vector<float>> parts);

/// Product of residual k-means stacks: `groups` disjoint slices, each with
/// `depth` residual layers of `k` centroids. Covers plain k-means (1, 1),
/// residual quantization (1, D) and product quantization (P, 1).
class VqStack {
public:
    VqStack() = default;
    VqStack(std::size_t groups, std::size_t depth, std::vector<KMeansCodebook> books);

    static VqStack fit(const Tensor2& corpus, std::size_t k, std::size_t groups, std::size_t depth,
                       std::size_t iters, std::uint64_t seed);

    std::size_t groups() const noexcept { return groups_; }
    std::size_t depth() const noexcept { return depth_; }
    std::size_t codebook_size() const;
    std::size_t dim() const;
    const KMeansCodebook& book(std::size_t group, std::size_t layer) const {
        return books_[group * depth_ + layer];
    }

    /// Indices ordered depth-major (layer * groups + group).
    std::vector<std::uint32_t> encode(std::span<const float> x) const;
    std::vector<float> decode(std::span<const std::uint32_t> indices) const;

private:
    std::size_t groups_ = 0;
    std::size_t depth_ = 0;
    std::vector<KMeansCodebook> books_;
};

}  // namespace sidekit::quant
