#include "sidekit/ranking.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>

#include "sidekit/adam.hpp"
#include "sidekit/binary_io.hpp"
#include "sidekit/error.hpp"
#include "sidekit/layers.hpp"

namespace sidekit {

using nn::Graph;
using nn::NodeId;

Tensor2 pma_forward(const Tensor2& queries, const Tensor2& values, const Tensor2& theta) {
    const std::size_t d = values.cols();
    if (queries.cols() != d) {
        throw ShapeError("pma_forward: queries " + queries.shape_string() + " and values " + values.shape_string() +
                         " differ in width");
    }
    if (theta.rows() != d || theta.cols() != d) {
        throw ShapeError("pma_forward: theta is " + theta.shape_string() + ", expected " + std::to_string(d) + "x" +
                         std::to_string(d));
    }
    if (values.rows() == 0) throw ShapeError("pma_forward: empty value set");
    const Tensor2 keys = matmul(values, theta);
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    Tensor2 out(queries.rows(), d);
    std::vector<double> w(values.rows());
    for (std::size_t i = 0; i < queries.rows(); ++i) {
        double mx = -INFINITY;
        for (std::size_t j = 0; j < values.rows(); ++j) {
            double s = 0.0;
            for (std::size_t c = 0; c < d; ++c) s += static_cast<double>(queries(i, c)) * keys(j, c);
            w[j] = s * scale;
            mx = std::max(mx, w[j]);
        }
        double total = 0.0;
        for (double& v : w) total += (v = std::exp(v - mx));
        for (std::size_t c = 0; c < d; ++c) {
            double acc = 0.0;
            for (std::size_t j = 0; j < values.rows(); ++j) acc += w[j] / total * values(j, c);
            out(i, c) = static_cast<float>(acc);
        }
    }
    return out;
}

Tensor2 build_features_sid(std::span<const std::vector<SemanticId>> sids, std::span<const Tensor2> tables,
                           std::uint64_t hash_size) {
    if (tables.empty()) throw ShapeError("build_features_sid: no embedding tables");
    const std::size_t d = tables[0].cols();
    for (const Tensor2& t : tables) {
        if (t.rows() != hash_size || t.cols() != d) {
            throw ShapeError("build_features_sid: table is " + t.shape_string() + ", expected " +
                             std::to_string(hash_size) + "x" + std::to_string(d));
        }
    }
    Tensor2 out(sids.size(), d);
    for (std::size_t e = 0; e < sids.size(); ++e) {
        if (sids[e].size() != tables.size()) {
            throw ShapeError("build_features_sid: event " + std::to_string(e) + " has " +
                             std::to_string(sids[e].size()) + " grams, expected " + std::to_string(tables.size()));
        }
        for (std::size_t g = 0; g < tables.size(); ++g) {
            const auto row = tables[g].row(sid_hash(sids[e][g], hash_size));
            for (std::size_t c = 0; c < d; ++c) out(e, c) += row[c];
        }
    }
    return out;
}

Tensor2 build_features_side(const Tensor2& side, const Tensor2& omega) {
    if (side.cols() != omega.rows()) {
        throw ShapeError("build_features_side: SIDE vectors have length " + std::to_string(side.cols()) +
                         ", Omega expects " + std::to_string(omega.rows()));
    }
    return matmul(side, omega);
}

EngagementSet generate_engagement(const Tensor2& item_latents, const EngagementConfig& cfg) {
    const std::size_t n = item_latents.rows();
    if (n < 2) throw InvalidArgument("engagement generator needs at least two items");
    if (cfg.min_history < 1 || cfg.min_history > cfg.max_history) {
        throw InvalidArgument("history lengths must satisfy 1 <= min_history <= max_history");
    }
    if (!(cfg.focus >= 0.0f && cfg.focus <= 1.0f)) throw InvalidArgument("focus must lie in [0, 1]");
    const Tensor2 unit = l2_normalize_rows(item_latents);
    std::vector<std::uint32_t> all(n);
    std::iota(all.begin(), all.end(), 0u);
    const std::size_t depth = std::clamp<std::size_t>(cfg.neighborhood, 1, n - 1);
    const NeighborLists near = knn_ground_truth(unit, all, depth);

    std::mt19937_64 rng(cfg.seed);
    std::uniform_int_distribution<std::uint32_t> any(0, static_cast<std::uint32_t>(n - 1));
    std::uniform_int_distribution<std::size_t> length(cfg.min_history, cfg.max_history);
    std::uniform_int_distribution<std::size_t> in_hood(0, depth - 1);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    EngagementSet set;
    set.items = n;
    set.max_history = cfg.max_history;
    set.seed = cfg.seed;
    const std::size_t dim = unit.cols();
    std::vector<double> pref(dim);
    for (std::size_t u = 0; u < cfg.users; ++u) {
        const std::uint32_t anchor = any(rng);
        std::vector<std::uint32_t> history(length(rng));
        for (auto& h : history) h = unif(rng) < cfg.focus ? near[anchor][in_hood(rng)] : any(rng);
        std::fill(pref.begin(), pref.end(), 0.0);
        for (const std::uint32_t h : history) {
            for (std::size_t c = 0; c < dim; ++c) pref[c] += unit(h, c);
        }
        for (double& p : pref) p /= static_cast<double>(history.size());
        for (std::size_t k = 0; k < cfg.candidates_per_user; ++k) {
            Impression imp;
            imp.user = static_cast<std::uint32_t>(u);
            imp.history = history;
            imp.candidate = unif(rng) < 0.5 ? near[anchor][in_hood(rng)] : any(rng);
            double affinity = 0.0;
            for (std::size_t c = 0; c < dim; ++c) affinity += pref[c] * unit(imp.candidate, c);
            imp.probability = 1.0 / (1.0 + std::exp(-(cfg.affinity * affinity + cfg.bias)));
            imp.label = unif(rng) < imp.probability ? 1.0f : 0.0f;
            set.impressions.push_back(std::move(imp));
        }
    }
    return set;
}

std::string format_engagement(const EngagementSet& set) {
    std::ostringstream out;
    out << "#ENGv1 items=" << set.items << " max_history=" << set.max_history << " seed=" << set.seed
        << " impressions=" << set.impressions.size() << '\n';
    char buf[32];
    for (const Impression& imp : set.impressions) {
        std::snprintf(buf, sizeof buf, "%.17g", imp.probability);
        out << imp.user << ' ' << (imp.label == 1.0f ? 1 : 0) << ' ' << buf << ' ' << imp.candidate << ' '
            << imp.history.size();
        for (const std::uint32_t h : imp.history) out << ' ' << h;
        out << '\n';
    }
    return out.str();
}

EngagementSet parse_engagement(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::size_t offset = 0;
    if (!std::getline(in, line) || !line.starts_with("#ENGv1")) throw FormatError("missing '#ENGv1' header", 0);
    EngagementSet set;
    std::size_t expected = 0;
    {
        std::istringstream header(line.substr(6));
        std::string field;
        bool seen[4] = {false, false, false, false};
        while (header >> field) {
            const auto eq = field.find('=');
            if (eq == std::string::npos) throw FormatError("malformed header field '" + field + "'", 0);
            const std::string key = field.substr(0, eq);
            std::uint64_t v = 0;
            try {
                std::size_t used = 0;
                v = std::stoull(field.substr(eq + 1), &used);
                if (used != field.size() - eq - 1) throw std::invalid_argument(field);
            } catch (const std::exception&) {
                throw FormatError("invalid header value '" + field + "'", 0);
            }
            if (key == "items") set.items = v, seen[0] = true;
            else if (key == "max_history") set.max_history = v, seen[1] = true;
            else if (key == "seed") set.seed = v, seen[2] = true;
            else if (key == "impressions") expected = v, seen[3] = true;
            else throw FormatError("unknown header field '" + key + "'", 0);
        }
        if (!(seen[0] && seen[1] && seen[2] && seen[3])) {
            throw FormatError("header needs items, max_history, seed and impressions", 0);
        }
    }
    offset += line.size() + 1;
    while (std::getline(in, line)) {
        const std::size_t at = offset;
        offset += line.size() + 1;
        if (line.empty()) continue;
        std::istringstream row(line);
        Impression imp;
        int label = -1;
        std::size_t len = 0;
        if (!(row >> imp.user >> label >> imp.probability >> imp.candidate >> len) || (label != 0 && label != 1)) {
            throw FormatError("malformed impression record", at);
        }
        imp.label = static_cast<float>(label);
        if (len > set.max_history) throw FormatError("history longer than max_history", at);
        imp.history.resize(len);
        for (auto& h : imp.history) {
            if (!(row >> h)) throw FormatError("history has fewer items than its declared length", at);
            if (h >= set.items) throw FormatError("history item " + std::to_string(h) + " outside the catalogue", at);
        }
        if (imp.candidate >= set.items) throw FormatError("candidate outside the catalogue", at);
        std::string extra;
        if (row >> extra) throw FormatError("trailing tokens in impression record", at);
        set.impressions.push_back(std::move(imp));
    }
    if (set.impressions.size() != expected) {
        throw FormatError("expected " + std::to_string(expected) + " impressions, found " +
                              std::to_string(set.impressions.size()),
                          offset);
    }
    return set;
}

void write_engagement(const std::filesystem::path& path, const EngagementSet& set) {
    io::write_file_atomic(path, format_engagement(set));
}

EngagementSet read_engagement(const std::filesystem::path& path) { return parse_engagement(io::read_file(path)); }

ItemFeatures ItemFeatures::from_sids(const SidFile& file) {
    ItemFeatures f;
    f.scheme = file.scheme;
    f.sids = file.records;
    const std::size_t t = file.grams * file.scheme.ngram();
    f.side = Tensor2(file.records.size(), t);
    for (std::size_t i = 0; i < file.records.size(); ++i) {
        const auto v = side_embed(file.scheme, file.records[i]);
        std::copy(v.begin(), v.end(), f.side.row(i).begin());
    }
    return f;
}

std::string_view feature_path_name(FeaturePath path) {
    switch (path) {
        case FeaturePath::Sid: return "sid";
        case FeaturePath::Side: return "side";
        case FeaturePath::NoHistory: return "no-history";
    }
    return "?";
}

namespace {

std::string table_name(std::size_t g) { return "sid.table." + std::to_string(g); }

NodeId item_nodes(const ToyRankingModel& model, Graph& g, const ItemFeatures& items,
                  std::span<const std::uint32_t> ids) {
    if (model.path == FeaturePath::Sid) {
        NodeId acc{};
        for (std::size_t gi = 0; gi < model.grams; ++gi) {
            std::vector<std::uint32_t> rows(ids.size());
            for (std::size_t i = 0; i < ids.size(); ++i) {
                rows[i] = static_cast<std::uint32_t>(sid_hash(items.sids[ids[i]][gi], model.hash_size));
            }
            const NodeId e = g.gather_rows(g.parameter(table_name(gi)), std::move(rows));
            acc = gi == 0 ? e : g.add(acc, e);
        }
        return acc;
    }
    Tensor2 side(ids.size(), model.side_width);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const auto src = items.side.row(ids[i]);
        std::copy(src.begin(), src.end(), side.row(i).begin());
    }
    return g.matmul(g.constant(std::move(side)), g.parameter("side.omega"));
}

}  // namespace

ToyRankingModel make_ranking_model(FeaturePath path, const ItemFeatures& items, std::size_t dim,
                                   std::uint64_t hash_size, std::size_t max_history, std::uint64_t seed) {
    if (dim == 0) throw InvalidArgument("ranking model width must be at least 1");
    if (items.items() == 0) throw InvalidArgument("ranking model needs item features");
    ToyRankingModel m;
    m.path = path;
    m.dim = dim;
    m.hash_size = hash_size == 0 ? items.scheme.max_value() + 1 : hash_size;
    m.grams = items.grams();
    m.side_width = items.side.cols();
    m.max_history = max_history;
    std::mt19937_64 rng(seed);
    if (path == FeaturePath::Sid) {
        std::normal_distribution<float> normal(0.0f, 0.1f);
        for (std::size_t g = 0; g < m.grams; ++g) {
            Tensor2 table(m.hash_size, dim);
            for (float& v : table.values()) v = normal(rng);
            m.params.add(table_name(g), std::move(table));
        }
    } else {
        m.params.add("side.omega", nn::glorot_uniform(m.side_width, dim, rng));
    }
    if (path != FeaturePath::NoHistory) m.params.add("pma.theta", Tensor2::identity(dim));
    nn::add_linear(m.params, "dense", 1, dim, rng);
    nn::add_linear(m.params, "head", (path == FeaturePath::NoHistory ? 2 : 4) * dim, 1, rng);
    return m;
}

std::size_t feature_param_count(const ToyRankingModel& model) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < model.params.size(); ++i) {
        const std::string& name = model.params.name(i);
        if (name.starts_with("sid.table.") || name == "side.omega") n += model.params.value(i).size();
    }
    return n;
}

NodeId ranking_logits(const ToyRankingModel& model, Graph& g, const ItemFeatures& items,
                      std::span<const Impression> batch) {
    const std::size_t b = batch.size();
    const std::size_t seg = model.max_history;
    std::vector<std::uint32_t> candidates(b);
    Tensor2 dense_in(b, 1);
    for (std::size_t i = 0; i < b; ++i) {
        if (batch[i].candidate >= items.items()) throw InvalidArgument("candidate item outside the catalogue");
        if (batch[i].history.size() > seg) {
            throw InvalidArgument("history of length " + std::to_string(batch[i].history.size()) +
                                  " exceeds the model's maximum " + std::to_string(seg));
        }
        candidates[i] = batch[i].candidate;
        dense_in(i, 0) = static_cast<float>(batch[i].history.size()) / static_cast<float>(seg);
    }
    const NodeId q = item_nodes(model, g, items, candidates);
    g.label(q, "query");
    const NodeId dense = nn::linear(g, "dense", g.constant(std::move(dense_in)));
    NodeId features{};
    if (model.path == FeaturePath::NoHistory) {
        const NodeId parts[] = {q, dense};
        features = g.concat_cols(parts);
    } else {
        std::vector<std::uint32_t> hist(b * seg, 0);
        std::vector<std::uint32_t> lengths(b);
        for (std::size_t i = 0; i < b; ++i) {
            lengths[i] = static_cast<std::uint32_t>(batch[i].history.size());
            for (std::size_t j = 0; j < batch[i].history.size(); ++j) {
                if (batch[i].history[j] >= items.items()) throw InvalidArgument("history item outside the catalogue");
                hist[i * seg + j] = batch[i].history[j];
            }
        }
        const NodeId v = item_nodes(model, g, items, hist);
        const NodeId k = g.matmul(v, g.parameter("pma.theta"));
        const NodeId u = g.segment_attention(q, k, v, std::move(lengths), seg,
                                             1.0f / std::sqrt(static_cast<float>(model.dim)));
        g.label(u, "pma");
        const NodeId parts[] = {u, q, g.mul(u, q), dense};
        features = g.concat_cols(parts);
    }
    const NodeId logits = nn::linear(g, "head", features);
    g.label(logits, "logits");
    return logits;
}

std::vector<double> predict(const ToyRankingModel& model, const ItemFeatures& items,
                            std::span<const Impression> impressions, std::size_t batch_size) {
    std::vector<double> out;
    out.reserve(impressions.size());
    for (std::size_t start = 0; start < impressions.size(); start += batch_size) {
        const auto batch = impressions.subspan(start, std::min(batch_size, impressions.size() - start));
        Graph g(&model.params);
        const NodeId logits = ranking_logits(model, g, items, batch);
        g.forward();
        for (const float z : g.value(logits).values()) out.push_back(1.0 / (1.0 + std::exp(-static_cast<double>(z))));
    }
    return out;
}

const VariantResult& AbReport::variant(FeaturePath path) const {
    for (const auto& v : variants) {
        if (v.path == path) return v;
    }
    throw InvalidArgument("report has no '" + std::string(feature_path_name(path)) + "' variant");
}

namespace {

NEReport evaluate(const std::vector<Impression>& test, const std::vector<double>& p) {
    std::vector<float> labels(test.size());
    for (std::size_t i = 0; i < test.size(); ++i) labels[i] = test[i].label;
    return normalized_entropy(labels, p);
}

}  // namespace

AbReport run_ab(const EngagementSet& data, const ItemFeatures& items, const RankingConfig& cfg,
                std::span<const FeaturePath> variants) {
    if (items.items() != data.items) {
        throw ShapeError("item features cover " + std::to_string(items.items()) + " items, engagement data has " +
                         std::to_string(data.items));
    }
    if (!(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0)) throw InvalidArgument("test fraction must lie in (0, 1)");
    if (cfg.batch_size == 0) throw InvalidArgument("batch size must be at least 1");
    std::uint32_t users = 0;
    for (const auto& imp : data.impressions) users = std::max(users, imp.user + 1);
    const auto cutoff = static_cast<std::uint32_t>(std::floor(users * (1.0 - cfg.test_fraction)));
    std::vector<Impression> train, test;
    for (const auto& imp : data.impressions) (imp.user < cutoff ? train : test).push_back(imp);
    if (train.empty() || test.empty()) throw InvalidArgument("split leaves an empty train or test set");

    AbReport report;
    report.train_impressions = train.size();
    report.test_impressions = test.size();
    {
        std::vector<double> truth(test.size());
        for (std::size_t i = 0; i < test.size(); ++i) truth[i] = test[i].probability;
        report.generator_ne = evaluate(test, truth).ne;
    }
    for (const FeaturePath path : variants) {
        ToyRankingModel model = make_ranking_model(path, items, cfg.dim, cfg.hash_size, data.max_history, cfg.seed);
        report.hash_size = path == FeaturePath::Sid ? model.hash_size : report.hash_size;
        nn::AdamState adam = nn::make_adam_state(model.params, nn::AdamConfig{cfg.learning_rate});
        std::mt19937_64 rng(cfg.seed);
        std::vector<std::size_t> order(train.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        VariantResult result{path, {}, feature_param_count(model), model.params.scalar_count(), {}};
        std::vector<Impression> batch;
        for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
            std::shuffle(order.begin(), order.end(), rng);
            double epoch_loss = 0.0;
            for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
                const std::size_t end = std::min(order.size(), start + cfg.batch_size);
                batch.clear();
                Tensor2 labels(end - start, 1);
                for (std::size_t i = start; i < end; ++i) {
                    batch.push_back(train[order[i]]);
                    labels(i - start, 0) = train[order[i]].label;
                }
                try {
                    Graph g(&model.params);
                    const NodeId logits = ranking_logits(model, g, items, batch);
                    const NodeId loss = g.mean(g.bce_with_logits(logits, g.constant(std::move(labels))));
                    g.forward();
                    const float value = g.value(loss)(0, 0);
                    if (!std::isfinite(value)) throw NumericError("non-finite ranking loss");
                    nn::adam_step(adam, model.params, g.backward(loss));
                    epoch_loss += static_cast<double>(value) * static_cast<double>(batch.size());
                } catch (const NumericError& e) {
                    throw TrainingError(std::string(feature_path_name(path)) + " variant diverged: " + e.what(), epoch,
                                        start / cfg.batch_size);
                }
            }
            result.epoch_loss.push_back(epoch_loss / static_cast<double>(train.size()));
        }
        result.ne = evaluate(test, predict(model, items, test));
        report.variants.push_back(std::move(result));
    }
    return report;
}

std::string format_ab_markdown(const AbReport& report) {
    const VariantResult* sid = nullptr;
    for (const auto& v : report.variants) {
        if (v.path == FeaturePath::Sid) sid = &v;
    }
    std::ostringstream out;
    out << "| Variant | Click NE | NE gain vs SID | Feature params | Total params |\n";
    out << "|---|---|---|---|---|\n";
    char buf[64];
    for (const auto& v : report.variants) {
        out << "| " << feature_path_name(v.path) << " | ";
        std::snprintf(buf, sizeof buf, "%.6f", v.ne.ne);
        out << buf << " | ";
        if (sid) {
            std::snprintf(buf, sizeof buf, "%+.3f%%", 100.0 * (v.ne.ne - sid->ne.ne) / sid->ne.ne);
            out << buf;
        } else {
            out << "n/a";
        }
        out << " | " << v.feature_params << " | " << v.total_params << " |\n";
    }
    std::snprintf(buf, sizeof buf, "%.6f", report.generator_ne);
    out << "\nGenerator NE (true click probabilities): " << buf << "; hash size " << report.hash_size << "; "
        << report.train_impressions << " train / " << report.test_impressions << " test impressions\n";
    return out.str();
}

}  // namespace sidekit
