#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "sidekit/eval.hpp"
#include "sidekit/graph.hpp"
#include "sidekit/sid_codec.hpp"
#include "sidekit/tensor.hpp"

namespace sidekit {

/// Single-layer pooled attention: U = softmax(Q K^T / sqrt(d)) V with K = V Theta.
Tensor2 pma_forward(const Tensor2& queries, const Tensor2& values, const Tensor2& theta);

/// Per-event sum over grams of table_g[sid_hash(sid_g, hash_size)].
/// `sids` holds one row of grams per event; one table per gram.
Tensor2 build_features_sid(std::span<const std::vector<SemanticId>> sids, std::span<const Tensor2> tables,
                           std::uint64_t hash_size);

/// Per-event projection h Omega of SIDE vectors (events x t) with Omega t x d.
Tensor2 build_features_side(const Tensor2& side, const Tensor2& omega);

/// One impression: a user history, a candidate item and its click label.
struct Impression {
    std::uint32_t user = 0;
    std::vector<std::uint32_t> history;
    std::uint32_t candidate = 0;
    float label = 0.0f;
    double probability = 0.0;  // generating click probability
};

struct EngagementConfig {
    std::size_t users = 10000;
    std::size_t max_history = 32;
    std::size_t min_history = 8;
    std::size_t candidates_per_user = 4;
    std::size_t neighborhood = 50;  // items around a user's anchor
    float focus = 0.8f;             // share of history drawn from the anchor neighbourhood
    float affinity = 4.0f;
    float bias = -1.0f;
    std::uint64_t seed = 0;
};

/// Synthetic engagement log over an item catalogue.
///
/// Each user picks an anchor item; history items come from the anchor's
/// cosine neighbourhood with probability `focus` and uniformly otherwise.
/// Click probability of a candidate is sigmoid(affinity * <pref, item> + bias)
/// where pref is the mean of the unit-normalized history latents.
struct EngagementSet {
    std::size_t items = 0;
    std::size_t max_history = 0;
    std::uint64_t seed = 0;
    std::vector<Impression> impressions;
};

EngagementSet generate_engagement(const Tensor2& item_latents, const EngagementConfig& cfg);

std::string format_engagement(const EngagementSet& set);
EngagementSet parse_engagement(const std::string& text);
void write_engagement(const std::filesystem::path& path, const EngagementSet& set);
EngagementSet read_engagement(const std::filesystem::path& path);

/// Per-item feature sources: SIDs (grams per item) and their SIDE vectors.
struct ItemFeatures {
    SidScheme scheme;
    std::vector<std::vector<SemanticId>> sids;
    Tensor2 side;  // items x (grams * n)

    static ItemFeatures from_sids(const SidFile& file);
    std::size_t items() const noexcept { return sids.size(); }
    std::size_t grams() const noexcept { return sids.empty() ? 0 : sids[0].size(); }
};

enum class FeaturePath : std::uint8_t { Sid, Side, NoHistory };
std::string_view feature_path_name(FeaturePath path);

/// Item features feed the candidate query q and the history values V; the
/// pooled history U = PMA(q, V) and a dense block go through a logistic head
/// over [U, q, U * q, dense]. The no-history ablation drops U.
///
/// Parameters: "sid.table.<g>" (hash_size x d) or "side.omega" (t x d),
/// "pma.theta" (d x d), "dense.w/.b" and "head.w/.b".
struct ToyRankingModel {
    FeaturePath path = FeaturePath::Side;
    std::size_t dim = 16;
    std::uint64_t hash_size = 1;
    std::size_t grams = 0;
    std::size_t side_width = 0;
    std::size_t max_history = 32;
    nn::ParamSet params;
};

ToyRankingModel make_ranking_model(FeaturePath path, const ItemFeatures& items, std::size_t dim,
                                   std::uint64_t hash_size, std::size_t max_history, std::uint64_t seed);

/// Scalars in the item feature path: the hashed tables or Omega.
std::size_t feature_param_count(const ToyRankingModel& model);

/// Click logits for a batch of impressions as a graph node (batch x 1).
nn::NodeId ranking_logits(const ToyRankingModel& model, nn::Graph& g, const ItemFeatures& items,
                          std::span<const Impression> batch);

std::vector<double> predict(const ToyRankingModel& model, const ItemFeatures& items,
                            std::span<const Impression> impressions, std::size_t batch_size = 512);

struct RankingConfig {
    std::size_t dim = 16;
    std::uint64_t hash_size = 0;  // 0: collision-free (max SID + 1)
    std::size_t epochs = 8;
    std::size_t batch_size = 256;
    float learning_rate = 3e-3f;
    double test_fraction = 0.2;
    std::uint64_t seed = 0;
};

struct VariantResult {
    FeaturePath path;
    NEReport ne;
    std::size_t feature_params = 0;
    std::size_t total_params = 0;
    std::vector<double> epoch_loss;
};

struct AbReport {
    std::uint64_t hash_size = 0;
    std::size_t train_impressions = 0;
    std::size_t test_impressions = 0;
    double generator_ne = 0.0;  // NE of the true click probabilities on the test split
    std::vector<VariantResult> variants;

    const VariantResult& variant(FeaturePath path) const;
};

/// Trains every requested variant on the same split and seeds and reports test NE.
/// Users are split by id; the last `test_fraction` of users form the test split.
AbReport run_ab(const EngagementSet& data, const ItemFeatures& items, const RankingConfig& cfg,
                std::span<const FeaturePath> variants);

/// Markdown table: variant, click NE, NE gain relative to SID, feature-path parameters.
std::string format_ab_markdown(const AbReport& report);

}  // namespace sidekit
