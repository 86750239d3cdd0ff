#include "sidekit/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>

#include "sidekit/adam.hpp"
#include "sidekit/checkpoint.hpp"
#include "sidekit/error.hpp"
#include "sidekit/layers.hpp"
#include "sidekit/quant/fsq.hpp"

namespace sidekit {

using nn::Graph;
using nn::NodeId;

std::string_view quantizer_name(QuantizerKind kind) {
    switch (kind) {
        case QuantizerKind::Identity: return "identity";
        case QuantizerKind::Fsq: return "fsq";
        case QuantizerKind::Dpca: return "dpca";
    }
    return "?";
}

std::string_view task_loss_name(TaskLoss loss) {
    switch (loss) {
        case TaskLoss::Cosine: return "cosine";
        case TaskLoss::MeanSquared: return "mse";
        case TaskLoss::CrossEntropy: return "xent";
    }
    return "?";
}

QuantizerKind parse_quantizer_kind(std::string_view text) {
    if (text == "identity") return QuantizerKind::Identity;
    if (text == "fsq") return QuantizerKind::Fsq;
    if (text == "dpca") return QuantizerKind::Dpca;
    throw InvalidArgument("unknown quantizer '" + std::string(text) + "' (expected fsq, dpca or identity)");
}

TaskLoss parse_task_loss(std::string_view text) {
    if (text == "cosine") return TaskLoss::Cosine;
    if (text == "mse") return TaskLoss::MeanSquared;
    if (text == "xent") return TaskLoss::CrossEntropy;
    throw InvalidArgument("unknown task loss '" + std::string(text) + "' (expected cosine, mse or xent)");
}

std::size_t QuantizerSpec::latent_width() const noexcept {
    switch (kind) {
        case QuantizerKind::Identity: return identity_dims;
        case QuantizerKind::Fsq: return fsq_dims;
        case QuantizerKind::Dpca: return groups * group_width;
    }
    return 0;
}

std::size_t QuantizerSpec::code_length() const noexcept {
    switch (kind) {
        case QuantizerKind::Identity: return 0;
        case QuantizerKind::Fsq: return fsq_dims;
        case QuantizerKind::Dpca: return depth * groups;
    }
    return 0;
}

void FusionSpec::validate() const {
    if (signal_dims.empty()) throw InvalidArgument("fusion model needs at least one signal");
    for (std::size_t k = 0; k < signal_dims.size(); ++k) {
        if (signal_dims[k] == 0) throw InvalidArgument("signal " + std::to_string(k) + " has zero width");
    }
    auto no_zero = [](const std::vector<std::size_t>& widths, const char* what) {
        for (std::size_t w : widths) {
            if (w == 0) throw InvalidArgument(std::string(what) + " contains a zero width");
        }
    };
    no_zero(encoder_hidden, "encoder widths");
    no_zero(trunk, "trunk widths");
    no_zero(head_hidden, "head widths");
    if (quantizer.latent_width() == 0) throw InvalidArgument("latent width must be at least 1");
    if (quantizer.kind == QuantizerKind::Fsq && quantizer.levels < 2) throw InvalidArgument("FSQ needs at least 2 levels");
    if (quantizer.kind == QuantizerKind::Dpca && quantizer.depth == 0) throw InvalidArgument("DPCA depth must be at least 1");
    if (!task_weights.empty()) {
        if (task_weights.size() != signal_dims.size()) {
            throw InvalidArgument(std::to_string(task_weights.size()) + " task weights for " +
                                  std::to_string(signal_dims.size()) + " signals");
        }
        float total = 0.0f;
        for (float w : task_weights) {
            if (!(w >= 0.0f) || !std::isfinite(w)) throw InvalidArgument("task weights must be finite and nonnegative");
            total += w;
        }
        if (total <= 0.0f) throw InvalidArgument("task weights must not all be zero");
    }
    if (!task_losses.empty() && task_losses.size() != signal_dims.size()) {
        throw InvalidArgument(std::to_string(task_losses.size()) + " task losses for " +
                              std::to_string(signal_dims.size()) + " signals");
    }
}

float FusionSpec::weight(std::size_t k) const {
    return task_weights.empty() ? 1.0f / static_cast<float>(signal_dims.size()) : task_weights[k];
}

TaskLoss FusionSpec::loss(std::size_t k) const {
    return task_losses.empty() ? TaskLoss::Cosine : task_losses[k];
}

namespace {

std::string enc_prefix(std::size_t k) { return "enc" + std::to_string(k); }
std::string head_prefix(std::size_t k) { return "head" + std::to_string(k); }
std::string dpca_u(std::size_t g, std::size_t d) { return "dpca.g" + std::to_string(g) + ".d" + std::to_string(d) + ".u"; }
std::string dpca_b(std::size_t g, std::size_t d) { return "dpca.g" + std::to_string(g) + ".d" + std::to_string(d) + ".b"; }

nn::MlpSpec encoder_spec(const FusionSpec& spec, std::size_t k) {
    nn::MlpSpec m{enc_prefix(k), {spec.signal_dims[k]}, true};
    m.widths.insert(m.widths.end(), spec.encoder_hidden.begin(), spec.encoder_hidden.end());
    return m;
}

std::size_t encoder_width(const FusionSpec& spec, std::size_t k) {
    return spec.encoder_hidden.empty() ? spec.signal_dims[k] : spec.encoder_hidden.back();
}

nn::MlpSpec trunk_spec(const FusionSpec& spec) {
    nn::MlpSpec m{"trunk", {spec.quantizer.latent_width()}, true};
    m.widths.insert(m.widths.end(), spec.trunk.begin(), spec.trunk.end());
    return m;
}

nn::MlpSpec head_spec(const FusionSpec& spec, std::size_t k) {
    nn::MlpSpec m{head_prefix(k), {spec.trunk.empty() ? spec.quantizer.latent_width() : spec.trunk.back()}, false};
    m.widths.insert(m.widths.end(), spec.head_hidden.begin(), spec.head_hidden.end());
    m.widths.push_back(spec.signal_dims[k]);
    return m;
}

void check_inputs(const FusionSpec& spec, std::span<const Tensor2> inputs) {
    if (inputs.size() != spec.signals()) {
        throw ShapeError("fusion model expects " + std::to_string(spec.signals()) + " signals, got " +
                         std::to_string(inputs.size()));
    }
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        if (inputs[k].cols() != spec.signal_dims[k]) {
            throw ShapeError("signal " + std::to_string(k) + " has width " + std::to_string(inputs[k].cols()) +
                             ", model expects " + std::to_string(spec.signal_dims[k]));
        }
        if (inputs[k].rows() != inputs[0].rows()) {
            throw ShapeError("signal " + std::to_string(k) + " has " + std::to_string(inputs[k].rows()) +
                             " rows, signal 0 has " + std::to_string(inputs[0].rows()));
        }
    }
}

std::vector<Tensor2> normalized(std::span<const Tensor2> inputs) {
    std::vector<Tensor2> out;
    out.reserve(inputs.size());
    for (const Tensor2& x : inputs) out.push_back(l2_normalize_rows(x));
    return out;
}

std::vector<Tensor2> slice_rows(std::span<const Tensor2> corpus, std::span<const std::size_t> rows) {
    std::vector<Tensor2> out;
    for (const Tensor2& x : corpus) {
        Tensor2 b(rows.size(), x.cols());
        for (std::size_t i = 0; i < rows.size(); ++i) std::copy(x.row(rows[i]).begin(), x.row(rows[i]).end(), b.row(i).begin());
        out.push_back(std::move(b));
    }
    return out;
}

/// e_k, concatenation and f. Returns the pre-bound output z.
NodeId fusion_net(const FusionModel& model, Graph& g, std::span<const NodeId> inputs) {
    const FusionSpec& spec = model.spec;
    std::vector<NodeId> encoded;
    for (std::size_t k = 0; k < spec.signals(); ++k) encoded.push_back(nn::mlp(g, encoder_spec(spec, k), inputs[k]));
    const NodeId joined = encoded.size() == 1 ? encoded[0] : g.concat_cols(encoded);
    return nn::linear(g, "fuse", joined);
}

std::vector<quant::CodewordVector> quantize_rows(const FusionModel& model, const Tensor2& z, const Tensor2& h,
                                                 const quant::DpcaStack* stack) {
    const QuantizerSpec& q = model.spec.quantizer;
    std::vector<quant::CodewordVector> codes(z.rows());
    for (std::size_t i = 0; i < z.rows(); ++i) {
        if (q.kind == QuantizerKind::Fsq) {
            codes[i] = quant::fsq_quantize(quant::FsqConfig{q.fsq_dims, q.levels}, z.row(i)).code;
        } else {
            codes[i] = quant::dpca_encode(*stack, h.row(i)).code;
        }
    }
    return codes;
}

}  // namespace

FusionModel make_fusion_model(FusionSpec spec, std::uint64_t seed) {
    spec.validate();
    FusionModel model{std::move(spec), {}};
    const FusionSpec& s = model.spec;
    std::mt19937_64 rng(seed);
    std::size_t fused = 0;
    for (std::size_t k = 0; k < s.signals(); ++k) {
        nn::add_mlp(model.params, encoder_spec(s, k), rng);
        fused += encoder_width(s, k);
    }
    nn::add_linear(model.params, "fuse", fused, s.quantizer.latent_width(), rng);
    if (s.quantizer.kind == QuantizerKind::Dpca) {
        std::normal_distribution<float> normal(0.0f, 1.0f);
        const std::size_t w = s.quantizer.group_width;
        for (std::size_t g = 0; g < s.quantizer.groups; ++g) {
            for (std::size_t d = 0; d < s.quantizer.depth; ++d) {
                Tensor2 u(1, w);
                float n2 = 0.0f;
                for (float& v : u.values()) {
                    v = normal(rng);
                    n2 += v * v;
                }
                const float target = std::pow(0.5f, static_cast<float>(d + 1));
                for (float& v : u.values()) v *= target / std::sqrt(n2);
                model.params.add(dpca_u(g, d), std::move(u));
                model.params.add(dpca_b(g, d), Tensor2(1, w));
            }
        }
    }
    std::uniform_real_distribution<float> jitter(-0.01f, 0.01f);
    const nn::MlpSpec trunk = trunk_spec(s);
    nn::add_mlp(model.params, trunk, rng);
    for (std::size_t i = 0; i + 1 < trunk.widths.size(); ++i) {
        for (float& v : model.params.value("trunk.l" + std::to_string(i) + ".b").values()) v = jitter(rng);
    }
    for (std::size_t k = 0; k < s.signals(); ++k) {
        const nn::MlpSpec head = head_spec(s, k);
        nn::add_mlp(model.params, head, rng);
        auto& bias = model.params.value(head.prefix + ".l" + std::to_string(head.widths.size() - 2) + ".b");
        for (float& v : bias.values()) v = jitter(rng);
    }
    return model;
}

quant::DpcaStack dpca_stack(const FusionModel& model) {
    const QuantizerSpec& q = model.spec.quantizer;
    if (q.kind != QuantizerKind::Dpca) throw InvalidArgument("model quantizer is not DPCA");
    quant::DpcaStack stack(q.depth, q.groups, q.group_width);
    for (std::size_t g = 0; g < q.groups; ++g) {
        for (std::size_t d = 0; d < q.depth; ++d) {
            const auto u = model.params.value(dpca_u(g, d)).values();
            const auto b = model.params.value(dpca_b(g, d)).values();
            std::copy(u.begin(), u.end(), stack.component(g, d).begin());
            std::copy(b.begin(), b.end(), stack.offset(g, d).begin());
        }
    }
    return stack;
}

void set_dpca_stack(FusionModel& model, const quant::DpcaStack& stack) {
    const QuantizerSpec& q = model.spec.quantizer;
    if (q.kind != QuantizerKind::Dpca || stack.depth() != q.depth || stack.groups() != q.groups ||
        stack.group_width() != q.group_width) {
        throw ShapeError("DPCA stack layout does not match the model");
    }
    for (std::size_t g = 0; g < q.groups; ++g) {
        for (std::size_t d = 0; d < q.depth; ++d) {
            const auto u = stack.component(g, d);
            const auto b = stack.offset(g, d);
            std::copy(u.begin(), u.end(), model.params.value(dpca_u(g, d)).values().begin());
            std::copy(b.begin(), b.end(), model.params.value(dpca_b(g, d)).values().begin());
        }
    }
}

std::vector<NodeId> decode_latent(const FusionModel& model, Graph& g, NodeId latent) {
    const NodeId shared = nn::mlp(g, trunk_spec(model.spec), latent);
    std::vector<NodeId> out;
    for (std::size_t k = 0; k < model.spec.signals(); ++k) {
        out.push_back(nn::mlp(g, head_spec(model.spec, k), shared));
        g.label(out.back(), head_prefix(k));
    }
    return out;
}

FusionGraph build_fusion_graph(const FusionModel& model, Graph& g, std::span<const Tensor2> inputs,
                               std::size_t depth_prefix) {
    const FusionSpec& spec = model.spec;
    const QuantizerSpec& q = spec.quantizer;
    check_inputs(spec, inputs);
    FusionGraph fg;
    for (const Tensor2& x : inputs) fg.inputs.push_back(g.constant(x));
    fg.z = fusion_net(model, g, fg.inputs);
    fg.h = q.kind == QuantizerKind::Fsq ? g.tanh(fg.z) : fg.z;
    g.label(fg.h, "h");
    g.forward();

    switch (q.kind) {
        case QuantizerKind::Identity:
            fg.h_hat = fg.h;
            fg.s = fg.h;
            break;
        case QuantizerKind::Fsq: {
            fg.codes = quantize_rows(model, g.value(fg.z), g.value(fg.h), nullptr);
            Tensor2 grid(fg.codes.size(), q.fsq_dims);
            for (std::size_t i = 0; i < fg.codes.size(); ++i) {
                for (std::size_t j = 0; j < q.fsq_dims; ++j) grid(i, j) = quant::fsq_value(fg.codes[i].levels[j], q.levels);
            }
            fg.h_hat = g.constant(std::move(grid));
            break;
        }
        case QuantizerKind::Dpca: {
            const quant::DpcaStack stack = dpca_stack(model);
            fg.codes = quantize_rows(model, g.value(fg.z), g.value(fg.h), &stack);
            const std::size_t depth = depth_prefix == 0 ? q.depth : depth_prefix;
            if (depth > q.depth) throw InvalidArgument("depth prefix exceeds DPCA depth");
            const std::size_t batch = fg.codes.size();
            std::vector<NodeId> groups;
            for (std::size_t gi = 0; gi < q.groups; ++gi) {
                NodeId acc{};
                for (std::size_t d = 0; d < depth; ++d) {
                    Tensor2 digits(batch, 1);
                    for (std::size_t i = 0; i < batch; ++i) {
                        digits(i, 0) = static_cast<float>(quant::ternary_digit(fg.codes[i], stack.digit_index(gi, d)));
                    }
                    const NodeId term = g.add(g.matmul(g.constant(std::move(digits)), g.parameter(dpca_u(gi, d))),
                                              g.parameter(dpca_b(gi, d)));
                    acc = d == 0 ? term : g.add(acc, term);
                }
                groups.push_back(acc);
            }
            fg.h_hat = groups.size() == 1 ? groups[0] : g.concat_cols(groups);
            break;
        }
    }
    if (q.kind != QuantizerKind::Identity) {
        g.label(fg.h_hat, "h_hat");
        fg.s = g.sub(fg.h, g.stop_gradient(g.sub(fg.h, fg.h_hat)));
        g.label(fg.s, "s");
    }
    fg.reconstructions = decode_latent(model, g, fg.s);
    g.forward();
    return fg;
}

FusionOutputs fuse_forward(const FusionModel& model, std::span<const Tensor2> inputs, std::size_t depth_prefix) {
    check_inputs(model.spec, inputs);
    const std::vector<Tensor2> x = normalized(inputs);
    Graph g(&model.params);
    FusionGraph fg = build_fusion_graph(model, g, x, depth_prefix);
    FusionOutputs out{g.value(fg.h), g.value(fg.h_hat), g.value(fg.s), {}, std::move(fg.codes)};
    for (NodeId r : fg.reconstructions) out.reconstructions.push_back(g.value(r));
    return out;
}

void TrainConfig::validate() const {
    if (batch_size == 0) throw InvalidArgument("batch size must be at least 1");
    if (!(learning_rate >= 0.0f)) throw InvalidArgument("learning rate must be nonnegative");
    if (!(commitment >= 0.0f)) throw InvalidArgument("commitment weight must be nonnegative");
    if (!(codebook >= 0.0f)) throw InvalidArgument("codebook weight must be nonnegative");
    if (!(dropout >= 0.0f && dropout <= 1.0f)) throw InvalidArgument("quantizer dropout must lie in [0, 1]");
}

FusionLossNodes add_fusion_loss(const FusionModel& model, Graph& g, const FusionGraph& fg,
                                std::span<const Tensor2> inputs, const TrainConfig& cfg) {
    const FusionSpec& spec = model.spec;
    check_inputs(spec, inputs);
    FusionLossNodes out;
    for (std::size_t k = 0; k < spec.signals(); ++k) {
        const NodeId x = fg.inputs[k];
        const NodeId xhat = fg.reconstructions[k];
        NodeId l{};
        switch (spec.loss(k)) {
            case TaskLoss::Cosine: l = g.scale(g.mean(g.cosine_rows(x, xhat)), -1.0f, 1.0f); break;
            case TaskLoss::MeanSquared: {
                const NodeId diff = g.sub(xhat, x);
                l = g.mean(g.mul(diff, diff));
                break;
            }
            case TaskLoss::CrossEntropy: l = g.mean(g.softmax_cross_entropy(xhat, x)); break;
        }
        g.label(l, "loss." + std::to_string(k));
        out.reconstruction.push_back(l);
        const NodeId weighted = g.scale(l, spec.weight(k));
        out.total = k == 0 ? weighted : g.add(out.total, weighted);
    }
    if (spec.quantizer.kind == QuantizerKind::Dpca) {
        out.has_quantizer_terms = true;
        const NodeId c = g.sub(fg.h, g.stop_gradient(fg.h_hat));
        out.commitment = g.mean(g.row_sum(g.mul(c, c)));
        const NodeId b = g.sub(g.stop_gradient(fg.h), fg.h_hat);
        out.codebook = g.mean(g.row_sum(g.mul(b, b)));
        out.total = g.add(out.total, g.scale(out.commitment, cfg.commitment));
        out.total = g.add(out.total, g.scale(out.codebook, cfg.codebook));
    }
    g.label(out.total, "loss");
    g.forward();
    return out;
}

namespace {

LossBreakdown read_breakdown(const Graph& g, const FusionLossNodes& nodes) {
    LossBreakdown b;
    b.total = g.value(nodes.total)(0, 0);
    for (NodeId r : nodes.reconstruction) b.reconstruction.push_back(g.value(r)(0, 0));
    if (nodes.has_quantizer_terms) {
        b.commitment = g.value(nodes.commitment)(0, 0);
        b.codebook = g.value(nodes.codebook)(0, 0);
    }
    return b;
}

}  // namespace

LossBreakdown fusion_loss(const FusionModel& model, std::span<const Tensor2> inputs, const TrainConfig& cfg) {
    check_inputs(model.spec, inputs);
    const std::vector<Tensor2> x = normalized(inputs);
    Graph g(&model.params);
    const FusionGraph fg = build_fusion_graph(model, g, x);
    return read_breakdown(g, add_fusion_loss(model, g, fg, x, cfg));
}

TrainResult train(FusionModel& model, std::span<const Tensor2> corpus, const TrainConfig& cfg) {
    cfg.validate();
    check_inputs(model.spec, corpus);
    const std::vector<Tensor2> x = normalized(corpus);
    const std::size_t n = x[0].rows();
    if (n == 0) throw InvalidArgument("training corpus is empty");
    const QuantizerSpec& q = model.spec.quantizer;

    std::mt19937_64 rng(cfg.seed);
    nn::AdamState adam = nn::make_adam_state(model.params, nn::AdamConfig{cfg.learning_rate});
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::bernoulli_distribution drop(cfg.dropout);
    std::uniform_int_distribution<std::size_t> pick_depth(1, std::max<std::size_t>(1, q.depth));

    TrainResult result;
    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        LossBreakdown avg;
        avg.reconstruction.assign(model.spec.signals(), 0.0);
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t end = std::min(n, start + cfg.batch_size);
            const auto rows = std::span<const std::size_t>(order).subspan(start, end - start);
            const std::vector<Tensor2> batch = slice_rows(x, rows);
            std::size_t depth = 0;
            if (q.kind == QuantizerKind::Dpca && cfg.dropout > 0.0f && drop(rng)) depth = pick_depth(rng);
            try {
                Graph g(&model.params);
                const FusionGraph fg = build_fusion_graph(model, g, batch, depth);
                const FusionLossNodes nodes = add_fusion_loss(model, g, fg, batch, cfg);
                const LossBreakdown b = read_breakdown(g, nodes);
                if (!std::isfinite(b.total)) throw NumericError("non-finite training loss");
                const nn::Gradients grads = g.backward(nodes.total);
                nn::adam_step(adam, model.params, grads);
                const double share = static_cast<double>(rows.size()) / static_cast<double>(n);
                avg.total += share * b.total;
                for (std::size_t k = 0; k < b.reconstruction.size(); ++k) avg.reconstruction[k] += share * b.reconstruction[k];
                avg.commitment += share * b.commitment;
                avg.codebook += share * b.codebook;
            } catch (const NumericError& e) {
                // Forward and adam_step both fail before touching parameters,
                // so the model still holds the last good step.
                throw TrainingError(std::string("training aborted: ") + e.what(), epoch, step);
            }
            ++step;
        }
        result.history.push_back(std::move(avg));
    }
    return result;
}

std::string format_loss_history(const TrainResult& result) {
    std::ostringstream out;
    out.precision(9);
    out << "epoch,total";
    const std::size_t tasks = result.history.empty() ? 0 : result.history[0].reconstruction.size();
    for (std::size_t k = 0; k < tasks; ++k) out << ",recon" << k;
    out << ",commitment,codebook\n";
    for (std::size_t e = 0; e < result.history.size(); ++e) {
        const LossBreakdown& b = result.history[e];
        out << e << ',' << b.total;
        for (double r : b.reconstruction) out << ',' << r;
        out << ',' << b.commitment << ',' << b.codebook << '\n';
    }
    return out.str();
}

std::vector<quant::CodewordVector> encode_codes(const FusionModel& model, std::span<const Tensor2> corpus,
                                                std::size_t batch_size) {
    check_inputs(model.spec, corpus);
    const QuantizerSpec& q = model.spec.quantizer;
    if (q.kind == QuantizerKind::Identity) throw InvalidArgument("identity quantizer produces no codes");
    if (batch_size == 0) throw InvalidArgument("batch size must be at least 1");
    const std::vector<Tensor2> x = normalized(corpus);
    const std::size_t n = x[0].rows();
    std::optional<quant::DpcaStack> stack;
    if (q.kind == QuantizerKind::Dpca) stack = dpca_stack(model);
    std::vector<quant::CodewordVector> codes;
    codes.reserve(n);
    std::vector<std::size_t> rows;
    for (std::size_t start = 0; start < n; start += batch_size) {
        rows.resize(std::min(n, start + batch_size) - start);
        std::iota(rows.begin(), rows.end(), start);
        const std::vector<Tensor2> batch = slice_rows(x, rows);
        Graph g(&model.params);
        std::vector<NodeId> in;
        for (const Tensor2& b : batch) in.push_back(g.constant(b));
        const NodeId z = fusion_net(model, g, in);
        g.forward();
        auto part = quantize_rows(model, g.value(z), g.value(z), stack ? &*stack : nullptr);
        for (auto& c : part) codes.push_back(std::move(c));
    }
    return codes;
}

SidFile encode_corpus(const FusionModel& model, std::span<const Tensor2> corpus, const SidScheme& scheme,
                      std::size_t batch_size) {
    const QuantizerSpec& q = model.spec.quantizer;
    if (q.kind != QuantizerKind::Identity && scheme.base() != q.base()) {
        throw InvalidArgument("SID base " + std::to_string(scheme.base()) + " does not match quantizer base " +
                              std::to_string(q.base()));
    }
    SidFile file{scheme, scheme.grams_for(q.code_length()), {}};
    for (const auto& code : encode_codes(model, corpus, batch_size)) file.records.push_back(pack_codeword(scheme, code));
    return file;
}

Tensor2 code_latents(const FusionModel& model, std::span<const quant::CodewordVector> codes, std::size_t depth_prefix) {
    const QuantizerSpec& q = model.spec.quantizer;
    Tensor2 out(codes.size(), q.latent_width());
    if (q.kind == QuantizerKind::Identity) throw InvalidArgument("identity quantizer has no codes");
    std::optional<quant::DpcaStack> stack;
    if (q.kind == QuantizerKind::Dpca) stack = dpca_stack(model);
    for (std::size_t i = 0; i < codes.size(); ++i) {
        if (codes[i].size() != q.code_length()) {
            throw ShapeError("code " + std::to_string(i) + " has " + std::to_string(codes[i].size()) +
                             " digits, model expects " + std::to_string(q.code_length()));
        }
        if (q.kind == QuantizerKind::Fsq) {
            for (std::size_t j = 0; j < q.fsq_dims; ++j) {
                if (codes[i].levels[j] >= q.levels) throw InvalidArgument("FSQ level out of range in code " + std::to_string(i));
                out(i, j) = quant::fsq_value(codes[i].levels[j], q.levels);
            }
        } else {
            const auto v = quant::dpca_decode(*stack, codes[i], depth_prefix);
            std::copy(v.begin(), v.end(), out.row(i).begin());
        }
    }
    return out;
}

std::vector<Tensor2> decode_latents(const FusionModel& model, const Tensor2& latents) {
    if (latents.cols() != model.spec.quantizer.latent_width()) {
        throw ShapeError("latents have width " + std::to_string(latents.cols()) + ", model expects " +
                         std::to_string(model.spec.quantizer.latent_width()));
    }
    Graph g(&model.params);
    const auto heads = decode_latent(model, g, g.constant(latents));
    g.forward();
    std::vector<Tensor2> out;
    for (NodeId h : heads) out.push_back(g.value(h));
    return out;
}

std::vector<Tensor2> reconstruct(const FusionModel& model, std::span<const Tensor2> corpus, std::size_t depth_prefix,
                                 std::size_t batch_size) {
    check_inputs(model.spec, corpus);
    const std::size_t n = corpus[0].rows();
    std::vector<Tensor2> out;
    for (std::size_t k = 0; k < model.spec.signals(); ++k) out.emplace_back(n, model.spec.signal_dims[k]);
    std::vector<std::size_t> rows;
    for (std::size_t start = 0; start < n; start += batch_size) {
        rows.resize(std::min(n, start + batch_size) - start);
        std::iota(rows.begin(), rows.end(), start);
        const std::vector<Tensor2> batch = slice_rows(corpus, rows);
        std::vector<Tensor2> part;
        if (model.spec.quantizer.kind == QuantizerKind::Identity) {
            part = fuse_forward(model, batch).reconstructions;
        } else {
            part = decode_latents(model, code_latents(model, encode_codes(model, batch, batch_size), depth_prefix));
        }
        for (std::size_t k = 0; k < part.size(); ++k) {
            for (std::size_t i = 0; i < rows.size(); ++i) {
                std::copy(part[k].row(i).begin(), part[k].row(i).end(), out[k].row(start + i).begin());
            }
        }
    }
    return out;
}

namespace {

constexpr float kSpecVersion = 1.0f;
constexpr const char* kSpecEntry = "meta.fusion_spec";

void put_list(std::vector<float>& out, const std::vector<std::size_t>& v) {
    out.push_back(static_cast<float>(v.size()));
    for (std::size_t x : v) out.push_back(static_cast<float>(x));
}

Tensor2 encode_spec(const FusionSpec& s) {
    std::vector<float> v{kSpecVersion};
    put_list(v, s.signal_dims);
    put_list(v, s.encoder_hidden);
    const QuantizerSpec& q = s.quantizer;
    for (std::size_t x : {static_cast<std::size_t>(q.kind), static_cast<std::size_t>(q.levels), q.fsq_dims, q.depth,
                          q.groups, q.group_width, q.identity_dims}) {
        v.push_back(static_cast<float>(x));
    }
    put_list(v, s.trunk);
    put_list(v, s.head_hidden);
    v.push_back(static_cast<float>(s.task_weights.size()));
    v.insert(v.end(), s.task_weights.begin(), s.task_weights.end());
    v.push_back(static_cast<float>(s.task_losses.size()));
    for (TaskLoss l : s.task_losses) v.push_back(static_cast<float>(l));
    return Tensor2::row_vector(v);
}

FusionSpec decode_spec(const Tensor2& t) {
    const auto v = t.values();
    std::size_t i = 0;
    auto next = [&]() -> float {
        if (i >= v.size()) throw FormatError("truncated fusion spec entry", 0);
        return v[i++];
    };
    auto count = [&]() {
        const float f = next();
        if (!(f >= 0.0f) || f != std::floor(f) || f > 1e7f) throw FormatError("invalid count in fusion spec entry", 0);
        return static_cast<std::size_t>(f);
    };
    auto list = [&]() {
        std::vector<std::size_t> out(count());
        for (auto& x : out) x = count();
        return out;
    };
    if (next() != kSpecVersion) throw FormatError("unsupported fusion spec version", 0);
    FusionSpec s;
    s.signal_dims = list();
    s.encoder_hidden = list();
    const std::size_t kind = count();
    if (kind > 2) throw FormatError("unknown quantizer kind in fusion spec", 0);
    s.quantizer.kind = static_cast<QuantizerKind>(kind);
    s.quantizer.levels = static_cast<std::uint32_t>(count());
    s.quantizer.fsq_dims = count();
    s.quantizer.depth = count();
    s.quantizer.groups = count();
    s.quantizer.group_width = count();
    s.quantizer.identity_dims = count();
    s.trunk = list();
    s.head_hidden = list();
    s.task_weights.resize(count());
    for (float& w : s.task_weights) w = next();
    s.task_losses.resize(count());
    for (TaskLoss& l : s.task_losses) {
        const std::size_t x = count();
        if (x > 2) throw FormatError("unknown task loss in fusion spec", 0);
        l = static_cast<TaskLoss>(x);
    }
    if (i != v.size()) throw FormatError("trailing values in fusion spec entry", 0);
    return s;
}

}  // namespace

void save_fusion_model(const std::filesystem::path& path, const FusionModel& model) {
    nn::ParamSet all = model.params;
    all.add(kSpecEntry, encode_spec(model.spec));
    nn::save_checkpoint(path, all);
}

FusionModel load_fusion_model(const std::filesystem::path& path) {
    const nn::ParamSet all = nn::load_checkpoint(path);
    if (!all.contains(kSpecEntry)) throw FormatError("checkpoint has no '" + std::string(kSpecEntry) + "' entry", 0);
    FusionSpec spec = decode_spec(all.value(kSpecEntry));
    try {
        spec.validate();
    } catch (const InvalidArgument& e) {
        throw FormatError(std::string("invalid fusion spec: ") + e.what(), 0);
    }
    FusionModel model = make_fusion_model(std::move(spec), 0);
    for (std::size_t i = 0; i < model.params.size(); ++i) {
        const std::string& name = model.params.name(i);
        if (!all.contains(name)) throw FormatError("checkpoint is missing parameter '" + name + "'", 0);
        const Tensor2& v = all.value(name);
        Tensor2& dst = model.params.value(i);
        if (v.rows() != dst.rows() || v.cols() != dst.cols()) {
            throw FormatError("parameter '" + name + "' has shape " + v.shape_string() + ", expected " +
                              dst.shape_string(), 0);
        }
        dst = v;
    }
    if (all.size() != model.params.size() + 1) throw FormatError("checkpoint has unexpected extra entries", 0);
    return model;
}

}  // namespace sidekit
