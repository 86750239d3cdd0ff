#include "sidekit/eval.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sidekit/error.hpp"
#include "sidekit/parallel.hpp"

namespace sidekit {

namespace {

double norm(std::span<const float> v) {
    double s = 0.0;
    for (const float a : v) s += static_cast<double>(a) * a;
    return std::sqrt(s);
}

}  // namespace

double cosine_recon_loss(const Tensor2& x, const Tensor2& xhat) {
    if (x.rows() != xhat.rows() || x.cols() != xhat.cols()) {
        throw ShapeError("cosine_recon_loss: shapes " + x.shape_string() + " and " + xhat.shape_string() + " differ");
    }
    if (x.rows() == 0) throw ShapeError("cosine_recon_loss: empty corpus");
    double total = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const double na = norm(x.row(i));
        const double nb = norm(xhat.row(i));
        if (na == 0.0 || nb == 0.0) {
            throw NumericError("cosine_recon_loss: zero-norm row " + std::to_string(i) +
                               (na == 0.0 ? " in the input" : " in the reconstruction"));
        }
        double d = 0.0;
        for (std::size_t j = 0; j < x.cols(); ++j) d += static_cast<double>(x(i, j)) * xhat(i, j);
        total += 1.0 - d / (na * nb);
    }
    return total / static_cast<double>(x.rows());
}

NeighborLists knn_ground_truth(const Tensor2& corpus, std::span<const std::uint32_t> queries,
                               std::size_t depth) {
    const std::size_t n = corpus.rows();
    if (depth < 1) throw InvalidArgument("knn depth must be at least 1");
    if (n == 0 || depth > n - 1) {
        throw InvalidArgument("knn depth " + std::to_string(depth) + " exceeds corpus size minus one (" +
                              std::to_string(n == 0 ? 0 : n - 1) + ")");
    }
    for (const std::uint32_t q : queries) {
        if (q >= n) throw InvalidArgument("query row " + std::to_string(q) + " outside corpus of " + std::to_string(n));
    }
    const std::size_t dim = corpus.cols();
    std::vector<double> unit(n * dim);
    for (std::size_t i = 0; i < n; ++i) {
        const double nr = norm(corpus.row(i));
        const double inv = nr > 0.0 ? 1.0 / nr : 0.0;
        for (std::size_t j = 0; j < dim; ++j) unit[i * dim + j] = corpus(i, j) * inv;
    }
    NeighborLists out(queries.size());
    parallel_for(queries.size(), [&](std::size_t qi) {
        const std::uint32_t q = queries[qi];
        const double* qv = unit.data() + static_cast<std::size_t>(q) * dim;
        std::vector<std::pair<double, std::uint32_t>> scored;
        scored.reserve(n - 1);
        for (std::size_t i = 0; i < n; ++i) {
            if (i == q) continue;
            const double* v = unit.data() + i * dim;
            double s = 0.0;
            for (std::size_t j = 0; j < dim; ++j) s += qv[j] * v[j];
            scored.emplace_back(-s, static_cast<std::uint32_t>(i));
        }
        std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(depth), scored.end());
        auto& row = out[qi];
        row.resize(depth);
        for (std::size_t k = 0; k < depth; ++k) row[k] = scored[k].second;
    });
    return out;
}

RecallReport recall_at_k(const NeighborLists& truth, const NeighborLists& candidates,
                         std::span<const std::size_t> ks, std::size_t corpus_size) {
    if (truth.size() != candidates.size()) {
        throw ShapeError("recall_at_k: " + std::to_string(truth.size()) + " truth lists but " +
                         std::to_string(candidates.size()) + " candidate lists");
    }
    if (truth.empty()) throw InvalidArgument("recall_at_k: no queries");
    std::vector<std::size_t> sorted(ks.begin(), ks.end());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t kmax = sorted.empty() ? 0 : sorted.back();

    RecallReport report;
    report.ks = sorted;
    report.recall.assign(sorted.size(), 0.0);
    report.queries = truth.size();
    report.corpus_size = corpus_size;
    report.truth_depth = truth.front().size();
    for (std::size_t q = 0; q < truth.size(); ++q) {
        if (candidates[q].size() < kmax) {
            throw InvalidArgument("recall_at_k: query " + std::to_string(q) + " has " +
                                  std::to_string(candidates[q].size()) + " candidates, need " + std::to_string(kmax));
        }
        if (truth[q].empty()) throw InvalidArgument("recall_at_k: empty truth list for query " + std::to_string(q));
        std::vector<std::uint32_t> gt = truth[q];
        std::sort(gt.begin(), gt.end());
        for (std::size_t i = 0; i < sorted.size(); ++i) {
            std::size_t hits = 0;
            for (std::size_t c = 0; c < sorted[i]; ++c) {
                if (std::binary_search(gt.begin(), gt.end(), candidates[q][c])) ++hits;
            }
            report.recall[i] += static_cast<double>(hits) / static_cast<double>(gt.size());
        }
    }
    for (double& r : report.recall) r /= static_cast<double>(truth.size());
    for (std::size_t i = 1; i < report.recall.size(); ++i) {
        if (report.recall[i] < report.recall[i - 1]) {
            throw NumericError("recall_at_k: recall decreased from k=" + std::to_string(sorted[i - 1]) +
                               " to k=" + std::to_string(sorted[i]) + "; candidate lists contain duplicates");
        }
    }
    return report;
}

double random_recall(std::size_t k, std::size_t corpus_size) {
    if (corpus_size < 2) throw InvalidArgument("random_recall: corpus needs at least two rows");
    return std::min(1.0, static_cast<double>(k) / static_cast<double>(corpus_size - 1));
}

NEReport normalized_entropy(std::span<const float> labels, std::span<const double> predictions) {
    if (labels.size() != predictions.size()) {
        throw ShapeError("normalized_entropy: " + std::to_string(labels.size()) + " labels but " +
                         std::to_string(predictions.size()) + " predictions");
    }
    if (labels.empty()) throw InvalidArgument("normalized_entropy: no samples");
    std::size_t positives = 0;
    double log_loss = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const float y = labels[i];
        if (y != 0.0f && y != 1.0f) {
            throw InvalidArgument("normalized_entropy: label " + std::to_string(y) + " at index " +
                                  std::to_string(i) + " is not binary");
        }
        if (!std::isfinite(predictions[i])) {
            throw NumericError("normalized_entropy: non-finite prediction at index " + std::to_string(i));
        }
        const double p = std::clamp(predictions[i], kPredictionClip, 1.0 - kPredictionClip);
        if (y == 1.0f) {
            ++positives;
            log_loss -= std::log(p);
        } else {
            log_loss -= std::log1p(-p);
        }
    }
    const double n = static_cast<double>(labels.size());
    NEReport report;
    report.samples = labels.size();
    report.prior = static_cast<double>(positives) / n;
    if (positives == 0 || positives == labels.size()) {
        throw InvalidArgument("normalized_entropy: labels are all one class; prior entropy is zero");
    }
    report.mean_log_loss = log_loss / n;
    const double p = report.prior;
    const double prior_entropy = -(p * std::log(p) + (1.0 - p) * std::log1p(-p));
    report.ne = report.mean_log_loss / prior_entropy;
    return report;
}

}  // namespace sidekit
