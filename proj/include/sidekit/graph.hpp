#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sidekit/tensor.hpp"

namespace sidekit::nn {

/// Named, ordered collection of trainable matrices.
class ParamSet {
public:
    std::size_t add(std::string name, Tensor2 value);

    std::size_t size() const noexcept { return values_.size(); }
    bool contains(std::string_view name) const;
    std::size_t index_of(std::string_view name) const;

    const std::string& name(std::size_t i) const { return names_[i]; }
    Tensor2& value(std::size_t i) { return values_[i]; }
    const Tensor2& value(std::size_t i) const { return values_[i]; }
    Tensor2& value(std::string_view name) { return values_[index_of(name)]; }
    const Tensor2& value(std::string_view name) const { return values_[index_of(name)]; }

    /// Total number of scalar parameters.
    std::size_t scalar_count() const;

private:
    std::vector<std::string> names_;
    std::vector<Tensor2> values_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Gradients aligned with a ParamSet; parameters not reached by the loss hold zeros.
struct Gradients {
    std::vector<Tensor2> by_param;

    const Tensor2& operator[](std::size_t i) const { return by_param[i]; }
};

/// Strongly typed handle to a node inside one Graph.
struct NodeId {
    std::uint32_t index = 0;
    friend bool operator==(NodeId, NodeId) = default;
};

enum class OpKind : std::uint8_t {
    Input,
    Constant,
    Parameter,
    MatMul,
    Add,
    Sub,
    Mul,
    Scale,
    Relu,
    Tanh,
    Sigmoid,
    SoftmaxRows,
    ConcatCols,
    SliceCols,
    Sum,
    Mean,
    RowSum,
    Transpose,
    StopGradient,
    GatherRows,
    CosineRows,
    BceWithLogits,
    SoftmaxCrossEntropy,
    SegmentAttention,
};

std::string_view op_name(OpKind kind);

using NamedTensors = std::map<std::string, Tensor2, std::less<>>;

/// Define-by-run computation graph with reverse-mode differentiation.
///
/// Nodes are appended by the builder methods and evaluated lazily by
/// forward(), which only computes nodes added since the previous call. This
/// lets a caller evaluate an encoder, inspect its output, then append more
/// nodes that depend on that value (e.g. a discrete quantizer) and continue.
class Graph {
public:
    explicit Graph(const ParamSet* params = nullptr) : params_(params) {}

    // Leaves.
    NodeId input(std::string name);
    NodeId constant(Tensor2 value);
    NodeId parameter(std::string_view name);

    // Differentiable ops.
    NodeId matmul(NodeId a, NodeId b);
    /// Elementwise sum; `b` may be a 1 x cols row broadcast over the rows of `a`.
    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);
    /// alpha * a + beta
    NodeId scale(NodeId a, float alpha, float beta = 0.0f);
    NodeId relu(NodeId a);
    NodeId tanh(NodeId a);
    NodeId sigmoid(NodeId a);
    NodeId softmax_rows(NodeId a);
    NodeId concat_cols(std::span<const NodeId> parts);
    NodeId slice_cols(NodeId a, std::size_t begin, std::size_t end);
    NodeId sum(NodeId a);
    NodeId mean(NodeId a);
    NodeId row_sum(NodeId a);
    NodeId transpose(NodeId a);
    /// Identity on the forward pass; blocks gradient flow on the backward pass.
    NodeId stop_gradient(NodeId a);
    /// Rows of `table` selected by `indices` (embedding lookup, scatter-add backward).
    NodeId gather_rows(NodeId table, std::vector<std::uint32_t> indices);
    /// Per-row cosine similarity, rows x 1. Zero-norm rows are an error.
    NodeId cosine_rows(NodeId a, NodeId b);
    /// Per-row binary log-loss of logits against {0,1} labels, rows x 1.
    NodeId bce_with_logits(NodeId logits, NodeId labels);
    /// Per-row softmax cross-entropy against target distributions, rows x 1.
    NodeId softmax_cross_entropy(NodeId logits, NodeId targets);
    /// Batched single-query attention pooling. Row i of `queries` attends over
    /// rows [i*segment, i*segment + lengths[i]) of `keys`/`values` with logits
    /// scaled by `logit_scale`. Output is batch x cols(values); an empty segment
    /// pools to zeros.
    NodeId segment_attention(NodeId queries, NodeId keys, NodeId values,
                             std::vector<std::uint32_t> lengths, std::size_t segment,
                             float logit_scale);

    /// Attach a human-readable label used in error messages.
    void label(NodeId node, std::string text);
    void name_output(std::string name, NodeId node);

    /// Bind inputs (merged with earlier bindings) and evaluate pending nodes.
    /// Returns the named outputs.
    NamedTensors forward(const NamedTensors& inputs = {});

    /// Reverse pass from a 1x1 node. Node gradients stay queryable via grad().
    Gradients backward(NodeId loss);

    const Tensor2& value(NodeId node) const;
    const Tensor2& grad(NodeId node) const;
    OpKind kind(NodeId node) const { return nodes_.at(node.index).kind; }
    std::size_t node_count() const noexcept { return nodes_.size(); }

private:
    struct Node {
        OpKind kind;
        std::vector<NodeId> inputs;
        std::string label;
        std::string name;  // input / parameter name
        std::size_t param_index = 0;
        float alpha = 1.0f;
        float beta = 0.0f;
        std::size_t begin = 0;
        std::size_t end = 0;
        std::vector<std::uint32_t> indices;
        Tensor2 value;
        Tensor2 grad;
        Tensor2 aux;  // cached intermediate used by backward
        bool evaluated = false;
    };

    NodeId push(OpKind kind, std::vector<NodeId> inputs);
    Node& node(NodeId id) { return nodes_.at(id.index); }
    const Node& node(NodeId id) const { return nodes_.at(id.index); }
    std::string describe(std::size_t index) const;
    void evaluate(std::size_t index);
    void propagate(std::size_t index);
    Tensor2& grad_slot(NodeId id);

    const ParamSet* params_;
    std::vector<Node> nodes_;
    NamedTensors bindings_;
    std::vector<std::pair<std::string, NodeId>> outputs_;
    bool backward_done_ = false;
};

}  // namespace sidekit::nn
