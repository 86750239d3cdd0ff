#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sidekit/tensor.hpp"

namespace sidekit {

/// Mean over rows of 1 - cos(x_i, xhat_i). Throws NumericError naming the
/// first zero-norm row.
double cosine_recon_loss(const Tensor2& x, const Tensor2& xhat);

using NeighborLists = std::vector<std::vector<std::uint32_t>>;

/// Exhaustive cosine top-`depth` neighbours of each query row inside `corpus`,
/// excluding the query itself. Ties go to the lower index; zero-norm rows
/// score 0 against everything. Query-parallel.
NeighborLists knn_ground_truth(const Tensor2& corpus, std::span<const std::uint32_t> queries,
                               std::size_t depth);

struct RecallReport {
    std::vector<std::size_t> ks;
    std::vector<double> recall;
    std::size_t queries = 0;
    std::size_t corpus_size = 0;
    std::size_t truth_depth = 0;
};

/// recall@k = |truth ∩ candidates[:k]| / |truth|, averaged over queries.
RecallReport recall_at_k(const NeighborLists& truth, const NeighborLists& candidates,
                         std::span<const std::size_t> ks, std::size_t corpus_size = 0);

/// Expected recall@k of uniformly random candidates: k / (corpus_size - 1).
double random_recall(std::size_t k, std::size_t corpus_size);

struct NEReport {
    double ne = 0.0;
    std::size_t samples = 0;
    double prior = 0.0;
    double mean_log_loss = 0.0;
};

inline constexpr double kPredictionClip = 1e-7;

/// Normalized entropy: mean log-loss divided by the entropy of the label prior.
/// Predictions are clipped to [1e-7, 1 - 1e-7].
NEReport normalized_entropy(std::span<const float> labels, std::span<const double> predictions);

}  // namespace sidekit
