#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "sidekit/graph.hpp"
#include "sidekit/quant/codeword.hpp"
#include "sidekit/quant/dpca.hpp"
#include "sidekit/sid_codec.hpp"
#include "sidekit/tensor.hpp"

namespace sidekit {

enum class QuantizerKind : std::uint8_t { Identity, Fsq, Dpca };
enum class TaskLoss : std::uint8_t { Cosine, MeanSquared, CrossEntropy };

std::string_view quantizer_name(QuantizerKind kind);
std::string_view task_loss_name(TaskLoss loss);
QuantizerKind parse_quantizer_kind(std::string_view text);
TaskLoss parse_task_loss(std::string_view text);

struct QuantizerSpec {
    QuantizerKind kind = QuantizerKind::Dpca;
    std::uint32_t levels = 3;       // FSQ levels per dimension
    std::size_t fsq_dims = 15;      // FSQ latent width
    std::size_t depth = 5;          // DPCA residual depth
    std::size_t groups = 3;         // DPCA product groups
    std::size_t group_width = 5;    // DPCA latent width per group
    std::size_t identity_dims = 15;

    std::size_t latent_width() const noexcept;
    /// Digits per code (0 for the identity quantizer).
    std::size_t code_length() const noexcept;
    std::uint32_t base() const noexcept { return kind == QuantizerKind::Fsq ? levels : 3; }
};

/// Layer layout of a fusion model. Widths list hidden layers only; an empty
/// list makes that block a single linear map (or the identity for the trunk).
struct FusionSpec {
    std::vector<std::size_t> signal_dims;
    std::vector<std::size_t> encoder_hidden{256, 256};
    QuantizerSpec quantizer;
    std::vector<std::size_t> trunk{256};
    std::vector<std::size_t> head_hidden{256};
    std::vector<float> task_weights;    // empty: 1/n each
    std::vector<TaskLoss> task_losses;  // empty: cosine for every task

    std::size_t signals() const noexcept { return signal_dims.size(); }
    /// Throws InvalidArgument describing the first inconsistency.
    void validate() const;
    float weight(std::size_t k) const;
    TaskLoss loss(std::size_t k) const;
};

/// Per-signal encoders e_k, fusion net f, quantizer, shared trunk r and task
/// heads g_k, all held in one parameter set.
///
/// Parameter names: "enc<k>.l<i>", "fuse", "trunk.l<i>", "head<k>.l<i>" for
/// linear layers and "dpca.g<g>.d<d>.u" / ".b" for DPCA components
/// and offsets.
struct FusionModel {
    FusionSpec spec;
    nn::ParamSet params;
};

FusionModel make_fusion_model(FusionSpec spec, std::uint64_t seed);

/// DPCA codebook view of the model's current parameters.
quant::DpcaStack dpca_stack(const FusionModel& model);
void set_dpca_stack(FusionModel& model, const quant::DpcaStack& stack);

/// Nodes of one forward pass built into a caller-owned graph.
struct FusionGraph {
    std::vector<nn::NodeId> inputs;
    nn::NodeId z;  // fusion net output before any bounding
    nn::NodeId h;
    nn::NodeId h_hat;
    nn::NodeId s;  // h - stop_gradient(h - h_hat)
    std::vector<nn::NodeId> reconstructions;
    std::vector<quant::CodewordVector> codes;
};

/// Builds and evaluates e_k, f, the quantizer and the decoders. Inputs are
/// used as given (normalize them first). `depth_prefix` limits DPCA decoding
/// to the first depths (0 means all).
FusionGraph build_fusion_graph(const FusionModel& model, nn::Graph& g, std::span<const Tensor2> inputs,
                               std::size_t depth_prefix = 0);

/// Decoder path r then g_k applied to an arbitrary latent node.
std::vector<nn::NodeId> decode_latent(const FusionModel& model, nn::Graph& g, nn::NodeId latent);

struct FusionOutputs {
    Tensor2 h;
    Tensor2 h_hat;
    Tensor2 s;
    std::vector<Tensor2> reconstructions;
    std::vector<quant::CodewordVector> codes;
};

/// Forward pass on L2-normalized copies of the inputs.
FusionOutputs fuse_forward(const FusionModel& model, std::span<const Tensor2> inputs, std::size_t depth_prefix = 0);

struct TrainConfig {
    std::size_t batch_size = 256;
    std::size_t epochs = 20;
    float learning_rate = 1e-3f;
    float commitment = 0.25f;
    float codebook = 1.0f;
    float dropout = 0.0f;  // probability per batch of decoding from a random depth prefix
    std::uint64_t seed = 0;

    void validate() const;
};

struct LossBreakdown {
    double total = 0.0;
    std::vector<double> reconstruction;  // unweighted, per task
    double commitment = 0.0;             // unweighted
    double codebook = 0.0;               // unweighted
};

struct FusionLossNodes {
    nn::NodeId total;
    std::vector<nn::NodeId> reconstruction;
    nn::NodeId commitment;
    nn::NodeId codebook;
    bool has_quantizer_terms = false;
};

/// Appends sum_k w_k l_k(x_k, xhat_k) + beta * commitment + codebook weight * codebook
/// to a built graph. Commitment and codebook terms exist for DPCA only.
FusionLossNodes add_fusion_loss(const FusionModel& model, nn::Graph& g, const FusionGraph& fg,
                                std::span<const Tensor2> inputs, const TrainConfig& cfg);

/// Loss values for a batch (inputs are normalized first).
LossBreakdown fusion_loss(const FusionModel& model, std::span<const Tensor2> inputs, const TrainConfig& cfg);

struct TrainResult {
    std::vector<LossBreakdown> history;  // one entry per epoch, batch-averaged
};

/// Adam training over the aligned corpus. A non-finite loss or gradient
/// restores the last good parameters and throws TrainingError.
TrainResult train(FusionModel& model, std::span<const Tensor2> corpus, const TrainConfig& cfg);

std::string format_loss_history(const TrainResult& result);

/// Quantizer codes of every row, batched, in input order.
std::vector<quant::CodewordVector> encode_codes(const FusionModel& model, std::span<const Tensor2> corpus,
                                                std::size_t batch_size = 1024);

/// One SID record per row.
SidFile encode_corpus(const FusionModel& model, std::span<const Tensor2> corpus, const SidScheme& scheme,
                      std::size_t batch_size = 1024);

/// Latent implied by codes: FSQ grid values or the DPCA partial sum over the
/// first `depth_prefix` depths (0 means all).
Tensor2 code_latents(const FusionModel& model, std::span<const quant::CodewordVector> codes,
                     std::size_t depth_prefix = 0);

/// Task reconstructions decoded from a batch of latents.
std::vector<Tensor2> decode_latents(const FusionModel& model, const Tensor2& latents);

/// Reconstructions of every task for the corpus, optionally from a DPCA depth prefix.
std::vector<Tensor2> reconstruct(const FusionModel& model, std::span<const Tensor2> corpus,
                                 std::size_t depth_prefix = 0, std::size_t batch_size = 1024);

/// Checkpoint including a "meta.fusion_spec" entry so the spec can be restored.
void save_fusion_model(const std::filesystem::path& path, const FusionModel& model);
FusionModel load_fusion_model(const std::filesystem::path& path);

}  // namespace sidekit
