#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <variant>

#include <json.hpp>

#include "sidekit/binary_io.hpp"
#include "sidekit/checkpoint.hpp"
#include "sidekit/config.hpp"
#include "sidekit/corpus_io.hpp"
#include "sidekit/error.hpp"
#include "sidekit/eval.hpp"
#include "sidekit/fusion.hpp"
#include "sidekit/quant/kmeans.hpp"
#include "sidekit/ranking.hpp"
#include "sidekit/sid_codec.hpp"
#include "sidekit/synthetic.hpp"

namespace sidekit::cli {

namespace {

using nlohmann::json;

const std::vector<std::string> kConfigKeys{"quantizer", "levels", "depth", "groups", "latent",
                                           "ngram", "hidden", "trunk", "head", "epochs",
                                           "batch", "lr", "dropout", "commitment", "codebook",
                                           "kmeans_iters", "seed"};

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

// ---- k-means checkpoints ----

constexpr const char* kVqMeta = "kmeans.layout";

std::string vq_entry(std::size_t g, std::size_t l) { return "kmeans.g" + std::to_string(g) + ".d" + std::to_string(l); }

struct VqModel {
    quant::VqStack stack;
};

void save_vq_model(const std::filesystem::path& path, const quant::VqStack& stack) {
    nn::ParamSet p;
    p.add(kVqMeta, Tensor2::row_vector(std::vector<float>{1.0f, static_cast<float>(stack.groups()),
                                                          static_cast<float>(stack.depth())}));
    for (std::size_t g = 0; g < stack.groups(); ++g) {
        for (std::size_t l = 0; l < stack.depth(); ++l) {
            p.add(vq_entry(g, l), stack.book(g, l).centroids);
        }
    }
    nn::save_checkpoint(path, p);
}

quant::VqStack vq_from_params(const nn::ParamSet& p) {
    const Tensor2& meta = p.value(kVqMeta);
    if (meta.size() != 3 || meta.values()[0] != 1.0f) throw InvalidArgument("unsupported k-means checkpoint metadata");
    const auto groups = static_cast<std::size_t>(meta.values()[1]);
    const auto depth = static_cast<std::size_t>(meta.values()[2]);
    std::vector<quant::KMeansCodebook> books;
    for (std::size_t g = 0; g < groups; ++g) {
        for (std::size_t l = 0; l < depth; ++l) {
            books.push_back({p.value(vq_entry(g, l))});
        }
    }
    return quant::VqStack(groups, depth, std::move(books));
}

using AnyModel = std::variant<FusionModel, VqModel>;

AnyModel load_any_model(const std::filesystem::path& path) {
    nn::ParamSet p = nn::load_checkpoint(path);
    if (p.contains(kVqMeta)) return VqModel{vq_from_params(p)};
    return load_fusion_model(path);
}

std::uint32_t model_base(const AnyModel& m) {
    if (const auto* f = std::get_if<FusionModel>(&m)) return f->spec.quantizer.base();
    return static_cast<std::uint32_t>(std::get<VqModel>(m).stack.codebook_size());
}

std::size_t model_code_length(const AnyModel& m) {
    if (const auto* f = std::get_if<FusionModel>(&m)) return f->spec.quantizer.code_length();
    const auto& s = std::get<VqModel>(m).stack;
    return s.groups() * s.depth();
}

std::vector<quant::CodewordVector> vq_codes(const quant::VqStack& stack, const Tensor2& x) {
    std::vector<quant::CodewordVector> out(x.rows());
    const auto base = static_cast<std::uint32_t>(stack.codebook_size());
    for (std::size_t i = 0; i < x.rows(); ++i) out[i] = {stack.encode(x.row(i)), base};
    return out;
}

/// Sum of the selected codewords over the first `depth_prefix` layers (0: all).
Tensor2 vq_decode(const quant::VqStack& stack, std::span<const quant::CodewordVector> codes,
                  std::size_t depth_prefix) {
    const std::size_t depth = depth_prefix == 0 ? stack.depth() : depth_prefix;
    if (depth > stack.depth()) {
        throw InvalidArgument("depth " + std::to_string(depth) + " exceeds model depth " +
                              std::to_string(stack.depth()));
    }
    const std::size_t width = stack.book(0, 0).dim();
    Tensor2 out(codes.size(), width * stack.groups());
    for (std::size_t i = 0; i < codes.size(); ++i) {
        if (codes[i].size() != stack.groups() * stack.depth()) {
            throw ShapeError("code " + std::to_string(i) + " has " + std::to_string(codes[i].size()) + " entries");
        }
        auto row = out.row(i);
        for (std::size_t l = 0; l < depth; ++l) {
            for (std::size_t g = 0; g < stack.groups(); ++g) {
                const auto& book = stack.book(g, l);
                const std::uint32_t idx = codes[i].levels[l * stack.groups() + g];
                if (idx >= book.k()) throw InvalidArgument("codeword index out of range in code " + std::to_string(i));
                const auto c = book.centroids.row(idx);
                for (std::size_t j = 0; j < width; ++j) row[g * width + j] += c[j];
            }
        }
    }
    return out;
}

quant::VqStack fit_vq(const PipelineConfig& cfg, const Tensor2& x) {
    const std::size_t groups = cfg.quantizer == PipelineQuantizer::Product ? cfg.groups : 1;
    const std::size_t depth = cfg.quantizer == PipelineQuantizer::Residual ? cfg.depth : 1;
    return quant::VqStack::fit(x, cfg.levels, groups, depth, cfg.kmeans_iters, cfg.seed);
}

// ---- inputs ----

std::vector<Tensor2> read_inputs(const std::vector<std::string>& paths) {
    std::vector<Tensor2> out;
    for (const auto& p : paths) {
        out.push_back(io::corpus_read(p));
        if (out.back().rows() != out.front().rows()) {
            throw ShapeError("input '" + p + "' has " + std::to_string(out.back().rows()) + " rows, expected " +
                             std::to_string(out.front().rows()));
        }
    }
    return out;
}

const Tensor2& single_input(const std::vector<Tensor2>& inputs, const PipelineConfig& cfg) {
    if (inputs.size() != 1) {
        throw InvalidArgument(std::string(pipeline_quantizer_name(cfg.quantizer)) + " takes exactly one input, got " +
                              std::to_string(inputs.size()));
    }
    return inputs.front();
}

std::vector<std::size_t> dims_of(const std::vector<Tensor2>& inputs) {
    std::vector<std::size_t> d;
    for (const auto& t : inputs) d.push_back(t.cols());
    return d;
}

/// Trains per the config and returns the model plus per-task cosine loss on the inputs.
struct Trained {
    AnyModel model;
    std::vector<double> task_loss;
    TrainResult history;
};

Trained train_pipeline(const PipelineConfig& cfg, const std::vector<Tensor2>& inputs) {
    cfg.validate();
    if (inputs.empty()) throw InvalidArgument("no inputs");
    if (cfg.uses_fusion()) {
        FusionModel model = make_fusion_model(cfg.fusion_spec(dims_of(inputs)), cfg.seed);
        TrainResult hist = train(model, inputs, cfg.train_config());
        const auto recon = reconstruct(model, inputs);
        std::vector<double> loss;
        for (std::size_t k = 0; k < inputs.size(); ++k) loss.push_back(cosine_recon_loss(inputs[k], recon[k]));
        return {std::move(model), std::move(loss), std::move(hist)};
    }
    const Tensor2 x = l2_normalize_rows(single_input(inputs, cfg));
    quant::VqStack stack = fit_vq(cfg, x);
    const Tensor2 recon = vq_decode(stack, vq_codes(stack, x), 0);
    double loss = cosine_recon_loss(x, recon);
    return {VqModel{std::move(stack)}, {loss}, {}};
}

void save_model(const std::filesystem::path& path, const AnyModel& m) {
    if (const auto* f = std::get_if<FusionModel>(&m)) {
        save_fusion_model(path, *f);
    } else {
        save_vq_model(path, std::get<VqModel>(m).stack);
    }
}

std::vector<quant::CodewordVector> model_codes(const AnyModel& m, const std::vector<Tensor2>& inputs) {
    if (const auto* f = std::get_if<FusionModel>(&m)) return encode_codes(*f, inputs);
    if (inputs.size() != 1) throw InvalidArgument("k-means models take exactly one input");
    return vq_codes(std::get<VqModel>(m).stack, l2_normalize_rows(inputs[0]));
}

// ---- option plumbing ----

struct Overrides {
    std::map<std::string, std::string> values;
    std::map<std::string, CLI::Option*> options;

    void attach(CLI::App* app) {
        for (const auto& key : kConfigKeys) {
            std::string flag = key;
            std::replace(flag.begin(), flag.end(), '_', '-');
            options[key] = app->add_option("--" + flag, values[key], "Override config key '" + key + "'");
        }
    }
    void apply(PipelineConfig& cfg) const {
        for (const auto& [key, opt] : options) {
            if (opt->count() > 0) cfg.set(key, values.at(key));
        }
    }
};

PipelineConfig load_config(const std::string& path, const Overrides& ov) {
    PipelineConfig cfg = path.empty() ? PipelineConfig{} : read_pipeline_config(path);
    ov.apply(cfg);
    cfg.validate();
    return cfg;
}

struct GridAxis {
    std::string key;
    std::vector<std::string> values;
};

GridAxis parse_grid(const std::string& text) {
    const auto eq = text.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == text.size()) {
        throw InvalidArgument("grid '" + text + "' is not of the form key=v1,v2,...");
    }
    GridAxis axis{text.substr(0, eq), {}};
    if (std::find(kConfigKeys.begin(), kConfigKeys.end(), axis.key) == kConfigKeys.end()) {
        throw InvalidArgument("unknown grid key '" + axis.key + "'");
    }
    const bool list_valued = axis.key == "hidden" || axis.key == "trunk" || axis.key == "head";
    std::stringstream ss(text.substr(eq + 1));
    for (std::string v; std::getline(ss, v, list_valued ? ';' : ',');) {
        if (!v.empty() || list_valued) axis.values.push_back(v);
    }
    if (axis.values.empty()) throw InvalidArgument("grid '" + text + "' has no values");
    return axis;
}

// ---- commands ----

struct TrainArgs {
    std::vector<std::string> inputs;
    std::string config;
    std::string out;
    std::string history;
    Overrides ov;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
    const PipelineConfig cfg = load_config(a.config, a.ov);
    const auto inputs = read_inputs(a.inputs);
    const Trained t = train_pipeline(cfg, inputs);
    save_model(a.out, t.model);
    if (!a.history.empty()) {
        if (t.history.history.empty()) throw InvalidArgument("loss history is only recorded for fsq and dpca");
        io::write_file_atomic(a.history, format_loss_history(t.history));
    }
    out << "quantizer " << pipeline_quantizer_name(cfg.quantizer) << ", " << fixed(cfg.bits(), 2) << " bits\n";
    for (std::size_t k = 0; k < t.task_loss.size(); ++k) {
        out << "task " << k << " cosine loss " << fixed(t.task_loss[k], 6) << "\n";
    }
    out << "wrote " << a.out << "\n";
    return 0;
}

struct EncodeArgs {
    std::string model;
    std::vector<std::string> inputs;
    std::size_t ngram = 5;
    std::string out;
};

int cmd_encode(const EncodeArgs& a, std::ostream& out) {
    const AnyModel model = load_any_model(a.model);
    const SidScheme scheme(model_base(model), static_cast<std::uint32_t>(a.ngram));
    const auto inputs = read_inputs(a.inputs);
    const auto codes = model_codes(model, inputs);
    SidFile file{scheme, scheme.grams_for(model_code_length(model)), {}};
    file.records.reserve(codes.size());
    for (const auto& c : codes) file.records.push_back(pack_codeword(scheme, c));
    write_sid_file(a.out, file);
    out << "encoded " << file.records.size() << " items into " << file.grams << " SIDs each (base "
        << scheme.base() << ", " << scheme.ngram() << "-gram)\n";
    return 0;
}

struct DecodeArgs {
    std::string model;
    std::string sids;
    std::size_t depth = 0;
    std::vector<std::string> outs;
};

int cmd_decode(const DecodeArgs& a, std::ostream& out) {
    const AnyModel model = load_any_model(a.model);
    const SidFile file = read_sid_file(a.sids);
    if (file.scheme.base() != model_base(model)) {
        throw InvalidArgument("SID base " + std::to_string(file.scheme.base()) + " does not match model base " +
                              std::to_string(model_base(model)));
    }
    const std::size_t len = model_code_length(model);
    std::vector<quant::CodewordVector> codes;
    codes.reserve(file.records.size());
    for (const auto& r : file.records) codes.push_back(unpack_codeword(file.scheme, r, len));

    std::vector<Tensor2> recon;
    if (const auto* f = std::get_if<FusionModel>(&model)) {
        recon = decode_latents(*f, code_latents(*f, codes, a.depth));
    } else {
        recon.push_back(vq_decode(std::get<VqModel>(model).stack, codes, a.depth));
    }
    if (a.outs.size() != recon.size()) {
        throw InvalidArgument("model reconstructs " + std::to_string(recon.size()) + " signals but " +
                              std::to_string(a.outs.size()) + " --out paths were given");
    }
    for (std::size_t k = 0; k < recon.size(); ++k) io::corpus_write(a.outs[k], recon[k]);
    out << "decoded " << codes.size() << " items into " << recon.size() << " corpora\n";
    return 0;
}

struct EvalReconArgs {
    std::string input;
    std::string recon;
    bool json = false;
};

int cmd_eval_recon(const EvalReconArgs& a, std::ostream& out) {
    const Tensor2 x = io::corpus_read(a.input);
    const Tensor2 xhat = io::corpus_read(a.recon);
    const double loss = cosine_recon_loss(x, xhat);
    if (a.json) {
        out << json{{"rows", x.rows()}, {"cosine_loss", loss}}.dump() << "\n";
    } else {
        out << "cosine loss " << fixed(loss, 6) << " over " << x.rows() << " rows\n";
    }
    return 0;
}

struct EvalRecallArgs {
    std::string corpus;
    std::string candidates;
    std::string sids;
    std::size_t queries = 1000;
    std::size_t truth_depth = 20;
    std::vector<std::size_t> ks{20, 50, 100};
    std::uint64_t seed = 0;
    std::vector<std::size_t> grams;
    bool json = false;
};

SidFile read_sids(const std::string& path, const std::vector<std::size_t>& grams) {
    SidFile f = read_sid_file(path);
    return grams.empty() ? f : select_grams(f, grams);
}

int cmd_eval_recall(const EvalRecallArgs& a, std::ostream& out) {
    if (a.candidates.empty() == a.sids.empty()) throw InvalidArgument("give exactly one of --candidates or --sids");
    const Tensor2 corpus = io::corpus_read(a.corpus);
    Tensor2 space;
    if (!a.candidates.empty()) {
        space = io::corpus_read(a.candidates);
    } else {
        space = ItemFeatures::from_sids(read_sids(a.sids, a.grams)).side;
    }
    if (space.rows() != corpus.rows()) {
        throw ShapeError("candidate space has " + std::to_string(space.rows()) + " rows, corpus has " +
                         std::to_string(corpus.rows()));
    }
    if (corpus.rows() < 2) throw InvalidArgument("recall needs at least two corpus rows");

    std::vector<std::uint32_t> ids(corpus.rows());
    std::iota(ids.begin(), ids.end(), 0u);
    std::mt19937_64 rng(a.seed);
    std::shuffle(ids.begin(), ids.end(), rng);
    ids.resize(std::min(a.queries, ids.size()));
    std::sort(ids.begin(), ids.end());

    const std::size_t max_k = *std::max_element(a.ks.begin(), a.ks.end());
    const auto truth = knn_ground_truth(corpus, ids, a.truth_depth);
    const auto cand = knn_ground_truth(space, ids, max_k);
    const RecallReport r = recall_at_k(truth, cand, a.ks, corpus.rows());

    if (a.json) {
        json j{{"queries", r.queries}, {"corpus_size", r.corpus_size}, {"truth_depth", r.truth_depth}};
        for (std::size_t i = 0; i < r.ks.size(); ++i) {
            j["recall"][std::to_string(r.ks[i])] = r.recall[i];
            j["random"][std::to_string(r.ks[i])] = random_recall(r.ks[i], r.corpus_size);
        }
        out << j.dump() << "\n";
    } else {
        out << "| k | recall | random |\n|---|---|---|\n";
        for (std::size_t i = 0; i < r.ks.size(); ++i) {
            out << "| " << r.ks[i] << " | " << fixed(r.recall[i], 4) << " | "
                << fixed(random_recall(r.ks[i], r.corpus_size), 4) << " |\n";
        }
    }
    return 0;
}

struct EvalNeArgs {
    std::string predictions;
    bool json = false;
};

int cmd_eval_ne(const EvalNeArgs& a, std::ostream& out) {
    const std::string text = io::read_file(a.predictions);
    std::vector<float> labels;
    std::vector<double> preds;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t start = pos;
        auto nl = text.find('\n', pos);
        if (nl == std::string::npos) nl = text.size();
        std::string line = text.substr(pos, nl - pos);
        pos = nl + 1;
        if (const auto h = line.find('#'); h != std::string::npos) line.resize(h);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream ss(line);
        double y = 0.0;
        double p = 0.0;
        std::string rest;
        if (!(ss >> y >> p) || (ss >> rest)) throw FormatError("expected 'label prediction'", start);
        if (y != 0.0 && y != 1.0) throw FormatError("label must be 0 or 1", start);
        labels.push_back(static_cast<float>(y));
        preds.push_back(p);
    }
    const NEReport r = normalized_entropy(labels, preds);
    if (a.json) {
        out << json{{"ne", r.ne}, {"samples", r.samples}, {"prior", r.prior}, {"mean_log_loss", r.mean_log_loss}}.dump()
            << "\n";
    } else {
        char buf[128];
        std::snprintf(buf, sizeof buf, "NE %.9f over %zu samples (prior %.6f)\n", r.ne, r.samples, r.prior);
        out << buf;
    }
    return 0;
}

struct RankAbArgs {
    std::string engagement;
    std::string sids;
    RankingConfig cfg;
    std::vector<std::size_t> grams;
    bool json = false;
};

int cmd_rank_ab(const RankAbArgs& a, std::ostream& out) {
    const EngagementSet data = read_engagement(a.engagement);
    const ItemFeatures items = ItemFeatures::from_sids(read_sids(a.sids, a.grams));
    const FeaturePath variants[] = {FeaturePath::Sid, FeaturePath::Side, FeaturePath::NoHistory};
    const AbReport r = run_ab(data, items, a.cfg, variants);
    if (a.json) {
        json j{{"hash_size", r.hash_size},
               {"train_impressions", r.train_impressions},
               {"test_impressions", r.test_impressions},
               {"generator_ne", r.generator_ne}};
        for (const auto& v : r.variants) {
            j["variants"].push_back({{"variant", std::string(feature_path_name(v.path))},
                                     {"ne", v.ne.ne},
                                     {"prior", v.ne.prior},
                                     {"feature_params", v.feature_params},
                                     {"total_params", v.total_params}});
        }
        out << j.dump(2) << "\n";
    } else {
        out << format_ab_markdown(r);
    }
    return 0;
}

struct SweepArgs {
    std::vector<std::string> inputs;
    std::string config;
    std::vector<std::string> grids;
    Overrides ov;
    bool json = false;
};

int cmd_sweep(const SweepArgs& a, std::ostream& out) {
    PipelineConfig base = a.config.empty() ? PipelineConfig{} : read_pipeline_config(a.config);
    a.ov.apply(base);
    std::vector<GridAxis> axes;
    for (const auto& g : a.grids) axes.push_back(parse_grid(g));
    const auto inputs = read_inputs(a.inputs);

    std::size_t combos = 1;
    for (const auto& ax : axes) combos *= ax.values.size();

    json rows = json::array();
    if (!a.json) {
        out << "| quantizer | L | D | P | m | n | bits | SIDs/item | cosine loss |\n"
               "|---|---|---|---|---|---|---|---|---|\n";
    }
    for (std::size_t c = 0; c < combos; ++c) {
        PipelineConfig cfg = base;
        std::size_t rem = c;
        for (auto ax = axes.rbegin(); ax != axes.rend(); ++ax) {
            cfg.set(ax->key, ax->values[rem % ax->values.size()]);
            rem /= ax->values.size();
        }
        const Trained t = train_pipeline(cfg, inputs);
        const double loss = std::accumulate(t.task_loss.begin(), t.task_loss.end(), 0.0) /
                            static_cast<double>(t.task_loss.size());
        const auto has = [&](PipelineQuantizer k1, PipelineQuantizer k2) {
            return cfg.quantizer == k1 || cfg.quantizer == k2;
        };
        const bool d_on = has(PipelineQuantizer::Dpca, PipelineQuantizer::Residual);
        const bool p_on = has(PipelineQuantizer::Dpca, PipelineQuantizer::Product);
        const std::size_t grams = cfg.sid_scheme().grams_for(cfg.code_length());
        const std::string dash = "-";
        if (a.json) {
            json row{{"quantizer", std::string(pipeline_quantizer_name(cfg.quantizer))},
                     {"L", cfg.levels},
                     {"n", cfg.ngram},
                     {"bits", cfg.bits()},
                     {"sids_per_item", grams},
                     {"cosine_loss", loss},
                     {"task_loss", t.task_loss}};
            row["D"] = d_on ? json(cfg.depth) : json(nullptr);
            row["P"] = p_on ? json(cfg.groups) : json(nullptr);
            row["m"] = cfg.uses_fusion() ? json(cfg.latent) : json(nullptr);
            rows.push_back(row);
        } else {
            out << "| " << pipeline_quantizer_name(cfg.quantizer) << " | " << cfg.levels << " | "
                << (d_on ? std::to_string(cfg.depth) : dash) << " | " << (p_on ? std::to_string(cfg.groups) : dash)
                << " | " << (cfg.uses_fusion() ? std::to_string(cfg.latent) : dash) << " | " << cfg.ngram << " | "
                << fixed(cfg.bits(), 1) << " | " << grams << " | " << fixed(loss, 6) << " |\n";
        }
    }
    if (a.json) out << rows.dump(2) << "\n";
    return 0;
}

struct GenCorpusArgs {
    std::size_t rows = 20000;
    std::size_t dim = 64;
    std::size_t clusters = 64;
    float spread = 0.3f;
    std::size_t signals = 1;
    std::size_t latent_dim = 16;
    std::size_t private_dim = 0;
    float noise = 0.1f;
    std::uint64_t seed = 0;
    std::vector<std::string> outs;
};

int cmd_gen_corpus(const GenCorpusArgs& a, std::ostream& out) {
    if (a.outs.size() != a.signals) {
        throw InvalidArgument(std::to_string(a.signals) + " signals need as many --out paths, got " +
                              std::to_string(a.outs.size()));
    }
    std::vector<Tensor2> data;
    if (a.signals == 1) {
        data.push_back(make_clustered_corpus({a.rows, a.dim, a.clusters, a.spread, a.seed}));
    } else {
        CorrelatedSignalsSpec spec;
        spec.rows = a.rows;
        spec.dims.assign(a.signals, a.dim);
        spec.latent_dim = a.latent_dim;
        spec.private_dim = a.private_dim;
        spec.clusters = a.clusters;
        spec.spread = a.spread;
        spec.noise = a.noise;
        spec.seed = a.seed;
        data = make_correlated_signals(spec);
    }
    for (std::size_t k = 0; k < data.size(); ++k) io::corpus_write(a.outs[k], data[k]);
    out << "wrote " << data.size() << " corpora of " << a.rows << " x " << a.dim << "\n";
    return 0;
}

struct GenEngagementArgs {
    std::string items;
    EngagementConfig cfg;
    std::string out;
};

int cmd_gen_engagement(const GenEngagementArgs& a, std::ostream& out) {
    const Tensor2 items = io::corpus_read(a.items);
    const EngagementSet set = generate_engagement(items, a.cfg);
    write_engagement(a.out, set);
    std::size_t clicks = 0;
    for (const auto& imp : set.impressions) clicks += imp.label > 0.5f ? 1 : 0;
    out << "wrote " << set.impressions.size() << " impressions over " << set.items << " items, click rate "
        << fixed(set.impressions.empty() ? 0.0 : static_cast<double>(clicks) / set.impressions.size(), 4) << "\n";
    return 0;
}

}  // namespace

int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Semantic ID toolkit: train quantizers, encode SIDs, evaluate and run ranking A/B tests", "sidekit"};
    app.require_subcommand(1);

    TrainArgs train_a;
    auto* train_c = app.add_subcommand("train", "Train a quantizer on one or more embedding corpora");
    train_c->add_option("--input", train_a.inputs, "Embedding corpus; repeat once per signal")->required();
    train_c->add_option("--config", train_a.config, "key=value config file");
    train_c->add_option("--out", train_a.out, "Checkpoint path")->required();
    train_c->add_option("--history", train_a.history, "Per-epoch loss CSV");
    train_a.ov.attach(train_c);

    EncodeArgs enc_a;
    auto* enc_c = app.add_subcommand("encode", "Encode corpora into a SID file");
    enc_c->add_option("--model", enc_a.model, "Checkpoint")->required();
    enc_c->add_option("--input", enc_a.inputs, "Embedding corpus; repeat once per signal")->required();
    enc_c->add_option("--ngram", enc_a.ngram, "Codeword digits per SID")->capture_default_str()->check(CLI::PositiveNumber);
    enc_c->add_option("--out", enc_a.out, "SID file")->required();

    DecodeArgs dec_a;
    auto* dec_c = app.add_subcommand("decode", "Reconstruct embeddings from a SID file");
    dec_c->add_option("--model", dec_a.model, "Checkpoint")->required();
    dec_c->add_option("--sids", dec_a.sids, "SID file")->required();
    dec_c->add_option("--depth", dec_a.depth, "Residual depth prefix (0: all)")->capture_default_str();
    dec_c->add_option("--out", dec_a.outs, "Output corpus; repeat once per signal")->required();

    EvalReconArgs er_a;
    auto* er_c = app.add_subcommand("eval-recon", "Cosine reconstruction loss between two corpora");
    er_c->add_option("--input", er_a.input, "Original corpus")->required();
    er_c->add_option("--recon", er_a.recon, "Reconstructed corpus")->required();
    er_c->add_flag("--json", er_a.json, "JSON output");

    EvalRecallArgs rc_a;
    auto* rc_c = app.add_subcommand("eval-recall", "Recall@k of candidate neighbours against exact cosine neighbours");
    rc_c->add_option("--corpus", rc_a.corpus, "Raw embedding corpus (ground truth)")->required();
    rc_c->add_option("--candidates", rc_a.candidates, "Corpus whose neighbours are the candidates");
    rc_c->add_option("--sids", rc_a.sids, "SID file; candidates are neighbours of the table-free SID vectors");
    rc_c->add_option("--queries", rc_a.queries, "Number of sampled queries")->capture_default_str()->check(CLI::PositiveNumber);
    rc_c->add_option("--truth-depth", rc_a.truth_depth, "Ground-truth neighbours per query")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    rc_c->add_option("--ks", rc_a.ks, "Cut-offs")->delimiter(',')->capture_default_str()->check(CLI::PositiveNumber);
    rc_c->add_option("--seed", rc_a.seed, "Query sampling seed")->capture_default_str();
    rc_c->add_option("--grams", rc_a.grams, "Gram positions to keep (default: all)")->delimiter(',');
    rc_c->add_flag("--json", rc_a.json, "JSON output");

    EvalNeArgs ne_a;
    auto* ne_c = app.add_subcommand("eval-ne", "Normalized entropy of 'label prediction' lines");
    ne_c->add_option("--predictions", ne_a.predictions, "Text file")->required();
    ne_c->add_flag("--json", ne_a.json, "JSON output");

    RankAbArgs ab_a;
    auto* ab_c = app.add_subcommand("rank-ab", "Train the toy ranking model with SID, SIDE and no-history features");
    ab_c->add_option("--engagement", ab_a.engagement, "Engagement file")->required();
    ab_c->add_option("--sids", ab_a.sids, "Item SID file")->required();
    ab_c->add_option("--hash-size", ab_a.cfg.hash_size, "SID embedding table rows (0: collision-free)")
        ->capture_default_str();
    ab_c->add_option("--dim", ab_a.cfg.dim, "Embedding width")->capture_default_str()->check(CLI::PositiveNumber);
    ab_c->add_option("--epochs", ab_a.cfg.epochs, "Training epochs")->capture_default_str()->check(CLI::PositiveNumber);
    ab_c->add_option("--batch", ab_a.cfg.batch_size, "Batch size")->capture_default_str()->check(CLI::PositiveNumber);
    ab_c->add_option("--lr", ab_a.cfg.learning_rate, "Adam learning rate")->capture_default_str();
    ab_c->add_option("--test-fraction", ab_a.cfg.test_fraction, "Share of users held out")->capture_default_str();
    ab_c->add_option("--seed", ab_a.cfg.seed, "Seed")->capture_default_str();
    ab_c->add_option("--grams", ab_a.grams, "Gram positions to keep (default: all)")->delimiter(',');
    ab_c->add_flag("--json", ab_a.json, "JSON output");

    SweepArgs sw_a;
    auto* sw_c = app.add_subcommand("sweep", "Train one quantizer per grid point and report bits and loss");
    sw_c->add_option("--input", sw_a.inputs, "Embedding corpus; repeat once per signal")->required();
    sw_c->add_option("--config", sw_a.config, "Base config file");
    sw_c->add_option("--grid", sw_a.grids, "Axis as key=v1,v2 (list-valued keys use ';')");
    sw_c->add_flag("--json", sw_a.json, "JSON output");
    sw_a.ov.attach(sw_c);

    GenCorpusArgs gc_a;
    auto* gc_c = app.add_subcommand("gen-corpus", "Write synthetic clustered corpora");
    gc_c->add_option("--rows", gc_a.rows, "Rows")->capture_default_str();
    gc_c->add_option("--dim", gc_a.dim, "Width")->capture_default_str()->check(CLI::PositiveNumber);
    gc_c->add_option("--clusters", gc_a.clusters, "Planted clusters")->capture_default_str()->check(CLI::PositiveNumber);
    gc_c->add_option("--spread", gc_a.spread, "Within-cluster spread")->capture_default_str();
    gc_c->add_option("--signals", gc_a.signals, "Correlated signals sharing one latent")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    gc_c->add_option("--latent-dim", gc_a.latent_dim, "Shared latent width (multi-signal)")->capture_default_str();
    gc_c->add_option("--private-dim", gc_a.private_dim, "Per-signal private latent width (multi-signal)")
        ->capture_default_str();
    gc_c->add_option("--noise", gc_a.noise, "Per-signal noise (multi-signal)")->capture_default_str();
    gc_c->add_option("--seed", gc_a.seed, "Seed")->capture_default_str();
    gc_c->add_option("--out", gc_a.outs, "Output corpus; repeat once per signal")->required();

    GenEngagementArgs ge_a;
    auto* ge_c = app.add_subcommand("gen-engagement", "Write a synthetic engagement log over an item corpus");
    ge_c->add_option("--items", ge_a.items, "Item embedding corpus")->required();
    ge_c->add_option("--users", ge_a.cfg.users, "Users")->capture_default_str();
    ge_c->add_option("--max-history", ge_a.cfg.max_history, "Longest history")->capture_default_str();
    ge_c->add_option("--min-history", ge_a.cfg.min_history, "Shortest history")->capture_default_str();
    ge_c->add_option("--candidates", ge_a.cfg.candidates_per_user, "Impressions per user")->capture_default_str();
    ge_c->add_option("--neighborhood", ge_a.cfg.neighborhood, "Items around each user's anchor")->capture_default_str();
    ge_c->add_option("--focus", ge_a.cfg.focus, "Share of history from the anchor neighbourhood")->capture_default_str();
    ge_c->add_option("--seed", ge_a.cfg.seed, "Seed")->capture_default_str();
    ge_c->add_option("--out", ge_a.out, "Engagement file")->required();

    std::reverse(args.begin(), args.end());
    try {
        app.parse(args);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        const CLI::App* sub = nullptr;
        for (const auto* s : app.get_subcommands()) sub = s;
        err << (sub != nullptr ? sub->help() : app.help());
        return 2;
    }

    try {
        if (train_c->parsed()) return cmd_train(train_a, out);
        if (enc_c->parsed()) return cmd_encode(enc_a, out);
        if (dec_c->parsed()) return cmd_decode(dec_a, out);
        if (er_c->parsed()) return cmd_eval_recon(er_a, out);
        if (rc_c->parsed()) return cmd_eval_recall(rc_a, out);
        if (ne_c->parsed()) return cmd_eval_ne(ne_a, out);
        if (ab_c->parsed()) return cmd_rank_ab(ab_a, out);
        if (sw_c->parsed()) return cmd_sweep(sw_a, out);
        if (gc_c->parsed()) return cmd_gen_corpus(gc_a, out);
        if (ge_c->parsed()) return cmd_gen_engagement(ge_a, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    err << app.help();
    return 2;
}

}  // namespace sidekit::cli
