#include "sidekit/synthetic.hpp"

#include <cmath>
#include <random>

#include "sidekit/error.hpp"

namespace sidekit {

Tensor2 make_clustered_corpus(const ClusteredCorpusSpec& spec, std::vector<std::uint32_t>* cluster_of) {
    if (spec.dim == 0 || spec.clusters == 0) throw InvalidArgument("corpus needs at least one dimension and one cluster");
    if (!(spec.spread >= 0.0f)) throw InvalidArgument("cluster spread must be nonnegative");
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<float> normal(0.0f, 1.0f);
    Tensor2 centers(spec.clusters, spec.dim);
    for (std::size_t c = 0; c < spec.clusters; ++c) {
        float n2 = 0.0f;
        for (float& v : centers.row(c)) {
            v = normal(rng);
            n2 += v * v;
        }
        const float inv = 1.0f / std::sqrt(n2);
        for (float& v : centers.row(c)) v *= inv;
    }
    const float sigma = spec.spread / std::sqrt(static_cast<float>(spec.dim));
    std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(spec.clusters - 1));
    Tensor2 x(spec.rows, spec.dim);
    if (cluster_of) cluster_of->resize(spec.rows);
    for (std::size_t i = 0; i < spec.rows; ++i) {
        const std::uint32_t c = pick(rng);
        if (cluster_of) (*cluster_of)[i] = c;
        for (std::size_t j = 0; j < spec.dim; ++j) x(i, j) = centers(c, j) + sigma * normal(rng);
    }
    return x;
}

std::vector<Tensor2> make_correlated_signals(const CorrelatedSignalsSpec& spec) {
    const Tensor2 latent = make_clustered_corpus({spec.rows, spec.latent_dim, spec.clusters, spec.spread, spec.seed});
    std::mt19937_64 rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
    std::normal_distribution<float> normal(0.0f, 1.0f);
    auto random_map = [&](std::size_t from, std::size_t to) {
        Tensor2 map(from, to);
        const float scale = 1.0f / std::sqrt(static_cast<float>(from));
        for (float& v : map.values()) v = scale * normal(rng);
        return map;
    };
    std::vector<Tensor2> out;
    for (std::size_t k = 0; k < spec.dims.size(); ++k) {
        const std::size_t dim = spec.dims[k];
        Tensor2 x = matmul(latent, random_map(spec.latent_dim, dim));
        if (spec.private_dim > 0) {
            const Tensor2 own = make_clustered_corpus(
                {spec.rows, spec.private_dim, spec.clusters, spec.spread, spec.seed + 0x51ed27 * (k + 1)});
            gemm(own, false, random_map(spec.private_dim, dim), false, x, true);
        }
        const float sigma = spec.noise / std::sqrt(static_cast<float>(dim));
        for (float& v : x.values()) v += sigma * normal(rng);
        out.push_back(std::move(x));
    }
    return out;
}

}  // namespace sidekit
