#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "sidekit/tensor.hpp"

namespace sidekit {

/// Corpus with planted clusters: unit-norm random centers plus isotropic
/// Gaussian noise of total norm about `spread` per row.
struct ClusteredCorpusSpec {
    std::size_t rows = 20000;
    std::size_t dim = 64;
    std::size_t clusters = 64;
    float spread = 0.3f;
    std::uint64_t seed = 0;
};

Tensor2 make_clustered_corpus(const ClusteredCorpusSpec& spec, std::vector<std::uint32_t>* cluster_of = nullptr);

/// Several signals sharing one clustered latent:
/// signal k = shared * A_k + private_k * B_k + noise_k, with independent random
/// maps per signal and a clustered private latent per signal (none when
/// private_dim is 0).
struct CorrelatedSignalsSpec {
    std::size_t rows = 8000;
    std::vector<std::size_t> dims{64, 64};
    std::size_t latent_dim = 16;
    std::size_t private_dim = 0;
    std::size_t clusters = 32;
    float spread = 0.3f;
    float noise = 0.1f;
    std::uint64_t seed = 0;
};

std::vector<Tensor2> make_correlated_signals(const CorrelatedSignalsSpec& spec);

}  // namespace sidekit
