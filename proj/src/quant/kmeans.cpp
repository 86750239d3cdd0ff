#include "sidekit/quant/kmeans.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>

#include "sidekit/error.hpp"

namespace sidekit::quant {

namespace {

double row_sq_distance(std::span<const float> a, std::span<const float> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - b[i];
        acc += d * d;
    }
    return acc;
}

void check_dim(const KMeansCodebook& cb, std::span<const float> x) {
    if (x.size() != cb.dim()) {
        throw ShapeError("k-means: vector has dimension " + std::to_string(x.size()) +
                         ", codebook expects " + std::to_string(cb.dim()));
    }
}

}  // namespace

std::uint32_t kmeans_assign(const KMeansCodebook& codebook, std::span<const float> x) {
    check_dim(codebook, x);
    if (codebook.k() == 0) throw InvalidArgument("k-means: empty codebook");
    std::uint32_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < codebook.k(); ++c) {
        const double d = row_sq_distance(x, codebook.centroids.row(c));
        if (d < best_d) {
            best_d = d;
            best = static_cast<std::uint32_t>(c);
        }
    }
    return best;
}

std::vector<std::uint32_t> kmeans_top_k(const KMeansCodebook& codebook, std::span<const float> x,
                                        std::size_t count) {
    check_dim(codebook, x);
    count = std::min(count, codebook.k());
    std::vector<std::pair<double, std::uint32_t>> scored(codebook.k());
    for (std::size_t c = 0; c < codebook.k(); ++c) {
        scored[c] = {row_sq_distance(x, codebook.centroids.row(c)), static_cast<std::uint32_t>(c)};
    }
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(count), scored.end());
    std::vector<std::uint32_t> out(count);
    for (std::size_t i = 0; i < count; ++i) out[i] = scored[i].second;
    return out;
}

KMeansFit kmeans_fit(const Tensor2& corpus, std::size_t k, std::size_t iters, std::uint64_t seed) {
    const std::size_t n = corpus.rows();
    const std::size_t d = corpus.cols();
    if (k == 0) throw InvalidArgument("k-means: k must be >= 1");
    if (k > n) {
        throw InvalidArgument("k-means: k=" + std::to_string(k) + " exceeds corpus rows " + std::to_string(n));
    }
    if (iters == 0) throw InvalidArgument("k-means: iters must be >= 1");

    KMeansFit fit;
    Tensor2& centroids = fit.codebook.centroids;
    centroids = Tensor2(k, d);
    std::mt19937_64 rng(seed);

    // k-means++ seeding.
    std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
    std::size_t first = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    std::copy_n(corpus.row(first).begin(), d, centroids.row(0).begin());
    for (std::size_t c = 1; c < k; ++c) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            nearest[i] = std::min(nearest[i], row_sq_distance(corpus.row(i), centroids.row(c - 1)));
            total += nearest[i];
        }
        std::size_t pick = 0;
        if (total <= 0.0) {
            fit.degenerate = true;
            pick = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
        } else {
            double target = std::uniform_real_distribution<double>(0.0, total)(rng);
            pick = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                target -= nearest[i];
                if (target < 0.0 && nearest[i] > 0.0) {
                    pick = i;
                    break;
                }
            }
            while (nearest[pick] <= 0.0 && pick > 0) --pick;
        }
        std::copy_n(corpus.row(pick).begin(), d, centroids.row(c).begin());
    }

    std::vector<std::uint32_t>& assign = fit.assignment;
    assign.assign(n, 0);
    std::vector<double> dist(n);
    std::vector<std::size_t> counts(k);
    for (std::size_t it = 0; it < iters; ++it) {
        bool changed = it == 0;
        double objective = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const std::uint32_t a = kmeans_assign(fit.codebook, corpus.row(i));
            changed = changed || a != assign[i];
            assign[i] = a;
            dist[i] = row_sq_distance(corpus.row(i), centroids.row(a));
            objective += dist[i];
        }
        if (!changed) break;

        // Empty clusters take the point currently farthest from its centroid.
        std::fill(counts.begin(), counts.end(), 0);
        for (std::uint32_t a : assign) ++counts[a];
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] != 0) continue;
            const std::size_t far = static_cast<std::size_t>(
                std::max_element(dist.begin(), dist.end()) - dist.begin());
            if (dist[far] <= 0.0) {
                fit.degenerate = true;
                continue;
            }
            --counts[assign[far]];
            objective -= dist[far];
            assign[far] = static_cast<std::uint32_t>(c);
            dist[far] = 0.0;
            counts[c] = 1;
        }
        fit.objective.push_back(objective);

        Tensor2 sums(k, d);
        for (std::size_t i = 0; i < n; ++i) {
            auto dst = sums.row(assign[i]);
            const auto src = corpus.row(i);
            for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) continue;
            auto dst = centroids.row(c);
            const auto src = sums.row(c);
            for (std::size_t j = 0; j < d; ++j) dst[j] = src[j] / static_cast<float>(counts[c]);
        }
    }
    return fit;
}

ResidualCode residual_quantize(std::span<const KMeansCodebook> layers, std::span<const float> x) {
    ResidualCode code;
    code.reconstruction.assign(x.size(), 0.0f);
    std::vector<float> residual(x.begin(), x.end());
    for (const KMeansCodebook& layer : layers) {
        check_dim(layer, x);
        const std::uint32_t idx = kmeans_assign(layer, residual);
        code.indices.push_back(idx);
        const auto c = layer.centroids.row(idx);
        for (std::size_t j = 0; j < x.size(); ++j) {
            code.reconstruction[j] += c[j];
            residual[j] = x[j] - code.reconstruction[j];
        }
    }
    return code;
}

std::vector<std::vector<float>> product_split(std::span<const float> x, std::size_t parts) {
    if (parts == 0 || x.size() % parts != 0) {
        throw InvalidArgument("product_split: " + std::to_string(parts) + " groups do not divide dimension " +
                              std::to_string(x.size()));
    }
    const std::size_t w = x.size() / parts;
    std::vector<std::vector<float>> out(parts);
    for (std::size_t p = 0; p < parts; ++p) out[p].assign(x.begin() + p * w, x.begin() + (p + 1) * w);
    return out;
}

std::vector<float> product_join(std::span<const std::vector<float>> parts) {
    std::vector<float> out;
    for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
    return out;
}

VqStack::VqStack(std::size_t groups, std::size_t depth, std::vector<KMeansCodebook> books)
    : groups_(groups), depth_(depth), books_(std::move(books)) {
    if (groups == 0 || depth == 0 || books_.size() != groups * depth) {
        throw InvalidArgument("VqStack: expected groups*depth codebooks");
    }
    for (const auto& b : books_) {
        if (b.dim() != books_[0].dim() || b.k() != books_[0].k()) {
            throw ShapeError("VqStack: codebooks must share shape");
        }
    }
}

std::size_t VqStack::codebook_size() const { return books_.empty() ? 0 : books_[0].k(); }
std::size_t VqStack::dim() const { return books_.empty() ? 0 : books_[0].dim() * groups_; }

VqStack VqStack::fit(const Tensor2& corpus, std::size_t k, std::size_t groups, std::size_t depth,
                     std::size_t iters, std::uint64_t seed) {
    if (groups == 0 || corpus.cols() % groups != 0) {
        throw InvalidArgument("VqStack: " + std::to_string(groups) + " groups do not divide dimension " +
                              std::to_string(corpus.cols()));
    }
    if (depth == 0) throw InvalidArgument("VqStack: depth must be >= 1");
    const std::size_t w = corpus.cols() / groups;
    std::vector<KMeansCodebook> books(groups * depth);
    for (std::size_t g = 0; g < groups; ++g) {
        Tensor2 residual(corpus.rows(), w);
        for (std::size_t i = 0; i < corpus.rows(); ++i) {
            std::copy_n(corpus.row(i).begin() + g * w, w, residual.row(i).begin());
        }
        for (std::size_t layer = 0; layer < depth; ++layer) {
            KMeansFit f = kmeans_fit(residual, k, iters, seed + 1000003ULL * (g * depth + layer));
            for (std::size_t i = 0; i < residual.rows(); ++i) {
                const auto c = f.codebook.centroids.row(f.assignment[i]);
                auto r = residual.row(i);
                for (std::size_t j = 0; j < w; ++j) r[j] -= c[j];
            }
            books[g * depth + layer] = std::move(f.codebook);
        }
    }
    return VqStack(groups, depth, std::move(books));
}

std::vector<std::uint32_t> VqStack::encode(std::span<const float> x) const {
    if (x.size() != dim()) throw ShapeError("VqStack: dimension mismatch");
    const auto parts = product_split(x, groups_);
    std::vector<std::uint32_t> out(groups_ * depth_);
    for (std::size_t g = 0; g < groups_; ++g) {
        const auto code = residual_quantize(
            std::span<const KMeansCodebook>(books_).subspan(g * depth_, depth_), parts[g]);
        for (std::size_t l = 0; l < depth_; ++l) out[l * groups_ + g] = code.indices[l];
    }
    return out;
}

std::vector<float> VqStack::decode(std::span<const std::uint32_t> indices) const {
    if (indices.size() != groups_ * depth_) throw ShapeError("VqStack: code length mismatch");
    const std::size_t w = books_[0].dim();
    std::vector<float> out(dim(), 0.0f);
    for (std::size_t g = 0; g < groups_; ++g) {
        for (std::size_t l = 0; l < depth_; ++l) {
            const std::uint32_t idx = indices[l * groups_ + g];
            const auto& cb = book(g, l);
            if (idx >= cb.k()) throw InvalidArgument("VqStack: codeword index out of range");
            const auto c = cb.centroids.row(idx);
            for (std::size_t j = 0; j < w; ++j) out[g * w + j] += c[j];
        }
    }
    return out;
}

}  // namespace sidekit::quant
