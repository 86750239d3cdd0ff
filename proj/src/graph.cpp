#include "sidekit/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sidekit/error.hpp"

namespace sidekit::nn {

// ---------------------------------------------------------------------------
// ParamSet

std::size_t ParamSet::add(std::string name, Tensor2 value) {
    if (index_.count(name) != 0) throw InvalidArgument("duplicate parameter name '" + name + "'");
    const std::size_t i = values_.size();
    index_.emplace(name, i);
    names_.push_back(std::move(name));
    values_.push_back(std::move(value));
    return i;
}

bool ParamSet::contains(std::string_view name) const { return index_.count(std::string(name)) != 0; }

std::size_t ParamSet::index_of(std::string_view name) const {
    const auto it = index_.find(std::string(name));
    if (it == index_.end()) throw InvalidArgument("unknown parameter '" + std::string(name) + "'");
    return it->second;
}

std::size_t ParamSet::scalar_count() const {
    std::size_t n = 0;
    for (const auto& v : values_) n += v.size();
    return n;
}

// ---------------------------------------------------------------------------
// Graph construction

std::string_view op_name(OpKind kind) {
    switch (kind) {
        case OpKind::Input: return "input";
        case OpKind::Constant: return "constant";
        case OpKind::Parameter: return "parameter";
        case OpKind::MatMul: return "matmul";
        case OpKind::Add: return "add";
        case OpKind::Sub: return "sub";
        case OpKind::Mul: return "mul";
        case OpKind::Scale: return "scale";
        case OpKind::Relu: return "relu";
        case OpKind::Tanh: return "tanh";
        case OpKind::Sigmoid: return "sigmoid";
        case OpKind::SoftmaxRows: return "softmax-rows";
        case OpKind::ConcatCols: return "concat";
        case OpKind::SliceCols: return "slice";
        case OpKind::Sum: return "sum";
        case OpKind::Mean: return "mean";
        case OpKind::RowSum: return "row-sum";
        case OpKind::Transpose: return "transpose";
        case OpKind::StopGradient: return "stop-gradient";
        case OpKind::GatherRows: return "gather-rows";
        case OpKind::CosineRows: return "cosine-rows";
        case OpKind::BceWithLogits: return "bce-with-logits";
        case OpKind::SoftmaxCrossEntropy: return "softmax-xent";
        case OpKind::SegmentAttention: return "segment-attention";
    }
    return "?";
}

NodeId Graph::push(OpKind kind, std::vector<NodeId> inputs) {
    for (NodeId in : inputs) {
        if (in.index >= nodes_.size()) throw InvalidArgument("graph: input node does not exist");
    }
    Node n;
    n.kind = kind;
    n.inputs = std::move(inputs);
    nodes_.push_back(std::move(n));
    backward_done_ = false;
    return NodeId{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

NodeId Graph::input(std::string name) {
    NodeId id = push(OpKind::Input, {});
    node(id).name = std::move(name);
    return id;
}

NodeId Graph::constant(Tensor2 value) {
    NodeId id = push(OpKind::Constant, {});
    node(id).value = std::move(value);
    return id;
}

NodeId Graph::parameter(std::string_view name) {
    if (params_ == nullptr) throw InvalidArgument("graph has no parameter set");
    const std::size_t index = params_->index_of(name);
    NodeId id = push(OpKind::Parameter, {});
    node(id).name = std::string(name);
    node(id).param_index = index;
    return id;
}

NodeId Graph::matmul(NodeId a, NodeId b) { return push(OpKind::MatMul, {a, b}); }
NodeId Graph::add(NodeId a, NodeId b) { return push(OpKind::Add, {a, b}); }
NodeId Graph::sub(NodeId a, NodeId b) { return push(OpKind::Sub, {a, b}); }
NodeId Graph::mul(NodeId a, NodeId b) { return push(OpKind::Mul, {a, b}); }

NodeId Graph::scale(NodeId a, float alpha, float beta) {
    NodeId id = push(OpKind::Scale, {a});
    node(id).alpha = alpha;
    node(id).beta = beta;
    return id;
}

NodeId Graph::relu(NodeId a) { return push(OpKind::Relu, {a}); }
NodeId Graph::tanh(NodeId a) { return push(OpKind::Tanh, {a}); }
NodeId Graph::sigmoid(NodeId a) { return push(OpKind::Sigmoid, {a}); }
NodeId Graph::softmax_rows(NodeId a) { return push(OpKind::SoftmaxRows, {a}); }

NodeId Graph::concat_cols(std::span<const NodeId> parts) {
    if (parts.empty()) throw InvalidArgument("concat of zero nodes");
    return push(OpKind::ConcatCols, std::vector<NodeId>(parts.begin(), parts.end()));
}

NodeId Graph::slice_cols(NodeId a, std::size_t begin, std::size_t end) {
    if (begin > end) throw InvalidArgument("slice: begin > end");
    NodeId id = push(OpKind::SliceCols, {a});
    node(id).begin = begin;
    node(id).end = end;
    return id;
}

NodeId Graph::sum(NodeId a) { return push(OpKind::Sum, {a}); }
NodeId Graph::mean(NodeId a) { return push(OpKind::Mean, {a}); }
NodeId Graph::row_sum(NodeId a) { return push(OpKind::RowSum, {a}); }
NodeId Graph::transpose(NodeId a) { return push(OpKind::Transpose, {a}); }
NodeId Graph::stop_gradient(NodeId a) { return push(OpKind::StopGradient, {a}); }

NodeId Graph::gather_rows(NodeId table, std::vector<std::uint32_t> indices) {
    NodeId id = push(OpKind::GatherRows, {table});
    node(id).indices = std::move(indices);
    return id;
}

NodeId Graph::cosine_rows(NodeId a, NodeId b) { return push(OpKind::CosineRows, {a, b}); }
NodeId Graph::bce_with_logits(NodeId logits, NodeId labels) {
    return push(OpKind::BceWithLogits, {logits, labels});
}
NodeId Graph::softmax_cross_entropy(NodeId logits, NodeId targets) {
    return push(OpKind::SoftmaxCrossEntropy, {logits, targets});
}

NodeId Graph::segment_attention(NodeId queries, NodeId keys, NodeId values,
                                std::vector<std::uint32_t> lengths, std::size_t segment,
                                float logit_scale) {
    NodeId id = push(OpKind::SegmentAttention, {queries, keys, values});
    node(id).indices = std::move(lengths);
    node(id).begin = segment;
    node(id).alpha = logit_scale;
    return id;
}

void Graph::label(NodeId id, std::string text) { node(id).label = std::move(text); }

void Graph::name_output(std::string name, NodeId id) { outputs_.emplace_back(std::move(name), id); }

std::string Graph::describe(std::size_t index) const {
    const Node& n = nodes_[index];
    std::string s = "node #" + std::to_string(index) + " (" + std::string(op_name(n.kind));
    if (!n.label.empty()) {
        s += " '" + n.label + "'";
    } else if (!n.name.empty()) {
        s += " '" + n.name + "'";
    }
    return s + ")";
}

const Tensor2& Graph::value(NodeId id) const {
    const Node& n = node(id);
    if (!n.evaluated) throw InvalidArgument(describe(id.index) + " has not been evaluated");
    return n.value;
}

const Tensor2& Graph::grad(NodeId id) const {
    if (!backward_done_) throw InvalidArgument("grad requested before backward");
    return node(id).grad;
}

// ---------------------------------------------------------------------------
// Forward

NamedTensors Graph::forward(const NamedTensors& inputs) {
    for (const auto& [name, t] : inputs) bindings_.insert_or_assign(name, t);
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (!nodes_[i].evaluated) evaluate(i);
    }
    NamedTensors out;
    for (const auto& [name, id] : outputs_) out.emplace(name, node(id).value);
    return out;
}

namespace {

void require(bool ok, const std::string& where, const std::string& what) {
    if (!ok) throw ShapeError(where + ": " + what);
}

float sigmoid_scalar(float z) {
    if (z >= 0.0f) return 1.0f / (1.0f + std::exp(-z));
    const float e = std::exp(z);
    return e / (1.0f + e);
}

}  // namespace

void Graph::evaluate(std::size_t index) {
    Node& n = nodes_[index];
    const std::string where = describe(index);
    auto in = [&](std::size_t k) -> const Tensor2& { return nodes_[n.inputs[k].index].value; };

    switch (n.kind) {
        case OpKind::Input: {
            const auto it = bindings_.find(n.name);
            if (it == bindings_.end()) throw InvalidArgument(where + ": input not bound");
            n.value = it->second;
            break;
        }
        case OpKind::Constant:
            break;
        case OpKind::Parameter:
            n.value = params_->value(n.param_index);
            break;
        case OpKind::MatMul: {
            require(in(0).cols() == in(1).rows(), where,
                    "cannot multiply " + in(0).shape_string() + " by " + in(1).shape_string());
            gemm(in(0), false, in(1), false, n.value);
            break;
        }
        case OpKind::Add:
        case OpKind::Sub:
        case OpKind::Mul: {
            const Tensor2& a = in(0);
            const Tensor2& b = in(1);
            const bool same = a.rows() == b.rows() && a.cols() == b.cols();
            const bool broadcast = n.kind == OpKind::Add && b.rows() == 1 && b.cols() == a.cols();
            require(same || broadcast, where,
                    "incompatible shapes " + a.shape_string() + " and " + b.shape_string());
            n.value = Tensor2(a.rows(), a.cols());
            for (std::size_t r = 0; r < a.rows(); ++r) {
                const auto ar = a.row(r);
                const auto br = b.row(same ? r : 0);
                auto out = n.value.row(r);
                for (std::size_t c = 0; c < ar.size(); ++c) {
                    if (n.kind == OpKind::Add) {
                        out[c] = ar[c] + br[c];
                    } else if (n.kind == OpKind::Sub) {
                        out[c] = ar[c] - br[c];
                    } else {
                        out[c] = ar[c] * br[c];
                    }
                }
            }
            break;
        }
        case OpKind::Scale: {
            n.value = in(0);
            for (float& v : n.value.values()) v = n.alpha * v + n.beta;
            break;
        }
        case OpKind::Relu:
        case OpKind::Tanh:
        case OpKind::Sigmoid: {
            n.value = in(0);
            for (float& v : n.value.values()) {
                if (n.kind == OpKind::Relu) {
                    v = v > 0.0f ? v : 0.0f;
                } else if (n.kind == OpKind::Tanh) {
                    v = std::tanh(v);
                } else {
                    v = sigmoid_scalar(v);
                }
            }
            break;
        }
        case OpKind::SoftmaxRows: {
            n.value = in(0);
            for (std::size_t r = 0; r < n.value.rows(); ++r) {
                auto row = n.value.row(r);
                if (row.empty()) continue;
                const float mx = *std::max_element(row.begin(), row.end());
                float total = 0.0f;
                for (float& v : row) {
                    v = std::exp(v - mx);
                    total += v;
                }
                for (float& v : row) v /= total;
            }
            break;
        }
        case OpKind::ConcatCols: {
            std::size_t cols = 0;
            const std::size_t rows = in(0).rows();
            for (std::size_t k = 0; k < n.inputs.size(); ++k) {
                require(in(k).rows() == rows, where, "row counts differ across concatenated parts");
                cols += in(k).cols();
            }
            n.value = Tensor2(rows, cols);
            for (std::size_t r = 0; r < rows; ++r) {
                std::size_t offset = 0;
                for (std::size_t k = 0; k < n.inputs.size(); ++k) {
                    const auto src = in(k).row(r);
                    std::copy(src.begin(), src.end(), n.value.row(r).begin() + offset);
                    offset += src.size();
                }
            }
            break;
        }
        case OpKind::SliceCols: {
            require(n.end <= in(0).cols(), where, "slice end beyond " + in(0).shape_string());
            n.value = Tensor2(in(0).rows(), n.end - n.begin);
            for (std::size_t r = 0; r < in(0).rows(); ++r) {
                const auto src = in(0).row(r);
                std::copy(src.begin() + n.begin, src.begin() + n.end, n.value.row(r).begin());
            }
            break;
        }
        case OpKind::Sum:
        case OpKind::Mean: {
            double total = 0.0;
            for (float v : in(0).values()) total += v;
            if (n.kind == OpKind::Mean) {
                require(in(0).size() > 0, where, "mean of empty tensor");
                total /= static_cast<double>(in(0).size());
            }
            n.value = Tensor2(1, 1, static_cast<float>(total));
            break;
        }
        case OpKind::RowSum: {
            n.value = Tensor2(in(0).rows(), 1);
            for (std::size_t r = 0; r < in(0).rows(); ++r) {
                float total = 0.0f;
                for (float v : in(0).row(r)) total += v;
                n.value(r, 0) = total;
            }
            break;
        }
        case OpKind::Transpose:
            n.value = sidekit::transpose(in(0));
            break;
        case OpKind::StopGradient:
            n.value = in(0);
            break;
        case OpKind::GatherRows: {
            const Tensor2& table = in(0);
            n.value = Tensor2(n.indices.size(), table.cols());
            for (std::size_t i = 0; i < n.indices.size(); ++i) {
                require(n.indices[i] < table.rows(), where,
                        "row index " + std::to_string(n.indices[i]) + " out of range for table " +
                            table.shape_string());
                const auto src = table.row(n.indices[i]);
                std::copy(src.begin(), src.end(), n.value.row(i).begin());
            }
            break;
        }
        case OpKind::CosineRows: {
            const Tensor2& a = in(0);
            const Tensor2& b = in(1);
            require(a.rows() == b.rows() && a.cols() == b.cols(), where,
                    "incompatible shapes " + a.shape_string() + " and " + b.shape_string());
            n.value = Tensor2(a.rows(), 1);
            n.aux = Tensor2(a.rows(), 2);
            for (std::size_t r = 0; r < a.rows(); ++r) {
                const float na = std::sqrt(dot(a.row(r), a.row(r)));
                const float nb = std::sqrt(dot(b.row(r), b.row(r)));
                if (na == 0.0f || nb == 0.0f) {
                    throw NumericError(where + ": zero-norm vector at sample " + std::to_string(r));
                }
                n.aux(r, 0) = na;
                n.aux(r, 1) = nb;
                n.value(r, 0) = dot(a.row(r), b.row(r)) / (na * nb);
            }
            break;
        }
        case OpKind::BceWithLogits: {
            const Tensor2& z = in(0);
            const Tensor2& y = in(1);
            require(z.cols() == 1 && y.rows() == z.rows() && y.cols() == 1, where,
                    "expected matching column vectors, got " + z.shape_string() + " and " +
                        y.shape_string());
            n.value = Tensor2(z.rows(), 1);
            for (std::size_t r = 0; r < z.rows(); ++r) {
                const float zr = z(r, 0);
                n.value(r, 0) = std::max(zr, 0.0f) - zr * y(r, 0) + std::log1p(std::exp(-std::fabs(zr)));
            }
            break;
        }
        case OpKind::SoftmaxCrossEntropy: {
            const Tensor2& z = in(0);
            const Tensor2& t = in(1);
            require(z.rows() == t.rows() && z.cols() == t.cols(), where,
                    "incompatible shapes " + z.shape_string() + " and " + t.shape_string());
            n.value = Tensor2(z.rows(), 1);
            n.aux = Tensor2(z.rows(), z.cols());  // log-probabilities
            for (std::size_t r = 0; r < z.rows(); ++r) {
                const auto zr = z.row(r);
                const float mx = *std::max_element(zr.begin(), zr.end());
                float total = 0.0f;
                for (float v : zr) total += std::exp(v - mx);
                const float lse = mx + std::log(total);
                float loss = 0.0f;
                for (std::size_t c = 0; c < zr.size(); ++c) {
                    n.aux(r, c) = zr[c] - lse;
                    loss -= t(r, c) * n.aux(r, c);
                }
                n.value(r, 0) = loss;
            }
            break;
        }
        case OpKind::SegmentAttention: {
            const Tensor2& q = in(0);
            const Tensor2& k = in(1);
            const Tensor2& v = in(2);
            const std::size_t seg = n.begin;
            const std::size_t batch = q.rows();
            require(n.indices.size() == batch, where, "one length per query row required");
            require(k.rows() == batch * seg && v.rows() == batch * seg, where,
                    "keys/values must have batch*segment rows");
            require(k.cols() == q.cols(), where, "query and key widths differ");
            n.value = Tensor2(batch, v.cols());
            n.aux = Tensor2(batch, seg);
            for (std::size_t b = 0; b < batch; ++b) {
                const std::size_t len = n.indices[b];
                require(len <= seg, where, "segment length exceeds segment size");
                if (len == 0) continue;
                auto weights = n.aux.row(b);
                float mx = -std::numeric_limits<float>::infinity();
                for (std::size_t j = 0; j < len; ++j) {
                    weights[j] = n.alpha * dot(q.row(b), k.row(b * seg + j));
                    mx = std::max(mx, weights[j]);
                }
                float total = 0.0f;
                for (std::size_t j = 0; j < len; ++j) {
                    weights[j] = std::exp(weights[j] - mx);
                    total += weights[j];
                }
                auto out = n.value.row(b);
                for (std::size_t j = 0; j < len; ++j) {
                    weights[j] /= total;
                    const auto vr = v.row(b * seg + j);
                    for (std::size_t c = 0; c < out.size(); ++c) out[c] += weights[j] * vr[c];
                }
            }
            break;
        }
    }

    const std::size_t bad = first_non_finite(n.value);
    if (bad < n.value.size()) {
        const std::size_t row = n.value.cols() == 0 ? 0 : bad / n.value.cols();
        throw NumericError(where + ": non-finite value at batch index " + std::to_string(row));
    }
    n.evaluated = true;
}

// ---------------------------------------------------------------------------
// Backward

Tensor2& Graph::grad_slot(NodeId id) {
    Node& n = node(id);
    if (n.grad.rows() != n.value.rows() || n.grad.cols() != n.value.cols()) {
        n.grad = Tensor2(n.value.rows(), n.value.cols());
    }
    return n.grad;
}

Gradients Graph::backward(NodeId loss) {
    for (const Node& n : nodes_) {
        if (!n.evaluated) throw InvalidArgument("backward before forward: " + describe(&n - nodes_.data()));
    }
    const Tensor2& lv = node(loss).value;
    if (lv.rows() != 1 || lv.cols() != 1) {
        throw ShapeError("backward: loss " + describe(loss.index) + " is " + lv.shape_string() +
                         ", expected 1x1");
    }
    for (Node& n : nodes_) n.grad = Tensor2(n.value.rows(), n.value.cols());
    node(loss).grad(0, 0) = 1.0f;
    for (std::size_t i = loss.index + 1; i-- > 0;) propagate(i);

    Gradients g;
    if (params_ != nullptr) {
        g.by_param.reserve(params_->size());
        for (std::size_t p = 0; p < params_->size(); ++p) {
            g.by_param.emplace_back(params_->value(p).rows(), params_->value(p).cols());
        }
        for (const Node& n : nodes_) {
            if (n.kind != OpKind::Parameter) continue;
            auto dst = g.by_param[n.param_index].values();
            const auto src = n.grad.values();
            for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
        }
    }
    backward_done_ = true;
    return g;
}

void Graph::propagate(std::size_t index) {
    Node& n = nodes_[index];
    const Tensor2& g = n.grad;
    auto in = [&](std::size_t k) -> const Tensor2& { return nodes_[n.inputs[k].index].value; };
    auto gin = [&](std::size_t k) -> Tensor2& { return grad_slot(n.inputs[k]); };

    switch (n.kind) {
        case OpKind::Input:
        case OpKind::Constant:
        case OpKind::Parameter:
        case OpKind::StopGradient:
            break;
        case OpKind::MatMul:
            gemm(g, false, in(1), true, gin(0), true);
            gemm(in(0), true, g, false, gin(1), true);
            break;
        case OpKind::Add:
        case OpKind::Sub: {
            const float sign = n.kind == OpKind::Add ? 1.0f : -1.0f;
            Tensor2& ga = gin(0);
            for (std::size_t j = 0; j < g.size(); ++j) ga.values()[j] += g.values()[j];
            Tensor2& gb = gin(1);
            const bool broadcast = in(1).rows() != in(0).rows();
            for (std::size_t r = 0; r < g.rows(); ++r) {
                auto dst = gb.row(broadcast ? 0 : r);
                const auto src = g.row(r);
                for (std::size_t c = 0; c < src.size(); ++c) dst[c] += sign * src[c];
            }
            break;
        }
        case OpKind::Mul: {
            Tensor2& ga = gin(0);
            Tensor2& gb = gin(1);
            const auto a = in(0).values();
            const auto b = in(1).values();
            for (std::size_t j = 0; j < g.size(); ++j) {
                ga.values()[j] += g.values()[j] * b[j];
                gb.values()[j] += g.values()[j] * a[j];
            }
            break;
        }
        case OpKind::Scale: {
            Tensor2& ga = gin(0);
            for (std::size_t j = 0; j < g.size(); ++j) ga.values()[j] += n.alpha * g.values()[j];
            break;
        }
        case OpKind::Relu:
        case OpKind::Tanh:
        case OpKind::Sigmoid: {
            Tensor2& ga = gin(0);
            const auto x = in(0).values();
            const auto y = n.value.values();
            for (std::size_t j = 0; j < g.size(); ++j) {
                float d;
                if (n.kind == OpKind::Relu) {
                    d = x[j] > 0.0f ? 1.0f : 0.0f;
                } else if (n.kind == OpKind::Tanh) {
                    d = 1.0f - y[j] * y[j];
                } else {
                    d = y[j] * (1.0f - y[j]);
                }
                ga.values()[j] += g.values()[j] * d;
            }
            break;
        }
        case OpKind::SoftmaxRows: {
            Tensor2& ga = gin(0);
            for (std::size_t r = 0; r < g.rows(); ++r) {
                const auto y = n.value.row(r);
                const auto gr = g.row(r);
                const float inner = dot(y, gr);
                auto dst = ga.row(r);
                for (std::size_t c = 0; c < y.size(); ++c) dst[c] += y[c] * (gr[c] - inner);
            }
            break;
        }
        case OpKind::ConcatCols: {
            std::size_t offset = 0;
            for (std::size_t k = 0; k < n.inputs.size(); ++k) {
                Tensor2& gk = gin(k);
                const std::size_t w = in(k).cols();
                for (std::size_t r = 0; r < g.rows(); ++r) {
                    const auto src = g.row(r);
                    auto dst = gk.row(r);
                    for (std::size_t c = 0; c < w; ++c) dst[c] += src[offset + c];
                }
                offset += w;
            }
            break;
        }
        case OpKind::SliceCols: {
            Tensor2& ga = gin(0);
            for (std::size_t r = 0; r < g.rows(); ++r) {
                const auto src = g.row(r);
                auto dst = ga.row(r);
                for (std::size_t c = 0; c < src.size(); ++c) dst[n.begin + c] += src[c];
            }
            break;
        }
        case OpKind::Sum:
        case OpKind::Mean: {
            Tensor2& ga = gin(0);
            float d = g(0, 0);
            if (n.kind == OpKind::Mean) d /= static_cast<float>(ga.size());
            for (float& v : ga.values()) v += d;
            break;
        }
        case OpKind::RowSum: {
            Tensor2& ga = gin(0);
            for (std::size_t r = 0; r < ga.rows(); ++r) {
                for (float& v : ga.row(r)) v += g(r, 0);
            }
            break;
        }
        case OpKind::Transpose: {
            Tensor2& ga = gin(0);
            for (std::size_t r = 0; r < g.rows(); ++r) {
                for (std::size_t c = 0; c < g.cols(); ++c) ga(c, r) += g(r, c);
            }
            break;
        }
        case OpKind::GatherRows: {
            Tensor2& gt = gin(0);
            for (std::size_t i = 0; i < n.indices.size(); ++i) {
                auto dst = gt.row(n.indices[i]);
                const auto src = g.row(i);
                for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
            }
            break;
        }
        case OpKind::CosineRows: {
            Tensor2& ga = gin(0);
            Tensor2& gb = gin(1);
            for (std::size_t r = 0; r < g.rows(); ++r) {
                const float na = n.aux(r, 0);
                const float nb = n.aux(r, 1);
                const float cosv = n.value(r, 0);
                const float gr = g(r, 0);
                const auto a = in(0).row(r);
                const auto b = in(1).row(r);
                auto da = ga.row(r);
                auto db = gb.row(r);
                for (std::size_t c = 0; c < a.size(); ++c) {
                    da[c] += gr * (b[c] / (na * nb) - cosv * a[c] / (na * na));
                    db[c] += gr * (a[c] / (na * nb) - cosv * b[c] / (nb * nb));
                }
            }
            break;
        }
        case OpKind::BceWithLogits: {
            Tensor2& gz = gin(0);
            Tensor2& gy = gin(1);
            for (std::size_t r = 0; r < g.rows(); ++r) {
                const float z = in(0)(r, 0);
                gz(r, 0) += g(r, 0) * (sigmoid_scalar(z) - in(1)(r, 0));
                gy(r, 0) -= g(r, 0) * z;
            }
            break;
        }
        case OpKind::SoftmaxCrossEntropy: {
            Tensor2& gz = gin(0);
            Tensor2& gt = gin(1);
            for (std::size_t r = 0; r < g.rows(); ++r) {
                float mass = 0.0f;
                for (float t : in(1).row(r)) mass += t;
                for (std::size_t c = 0; c < in(0).cols(); ++c) {
                    const float logp = n.aux(r, c);
                    gz(r, c) += g(r, 0) * (std::exp(logp) * mass - in(1)(r, c));
                    gt(r, c) -= g(r, 0) * logp;
                }
            }
            break;
        }
        case OpKind::SegmentAttention: {
            const Tensor2& q = in(0);
            const Tensor2& k = in(1);
            const Tensor2& v = in(2);
            Tensor2& gq = gin(0);
            Tensor2& gk = gin(1);
            Tensor2& gv = gin(2);
            const std::size_t seg = n.begin;
            std::vector<float> dweight(seg);
            for (std::size_t b = 0; b < q.rows(); ++b) {
                const std::size_t len = n.indices[b];
                if (len == 0) continue;
                const auto weights = n.aux.row(b);
                const auto gu = g.row(b);
                float inner = 0.0f;
                for (std::size_t j = 0; j < len; ++j) {
                    const std::size_t row = b * seg + j;
                    auto dv = gv.row(row);
                    for (std::size_t c = 0; c < gu.size(); ++c) dv[c] += weights[j] * gu[c];
                    dweight[j] = dot(gu, v.row(row));
                    inner += weights[j] * dweight[j];
                }
                for (std::size_t j = 0; j < len; ++j) {
                    const std::size_t row = b * seg + j;
                    const float dlogit = weights[j] * (dweight[j] - inner) * n.alpha;
                    auto dq = gq.row(b);
                    auto dk = gk.row(row);
                    const auto kr = k.row(row);
                    const auto qr = q.row(b);
                    for (std::size_t c = 0; c < qr.size(); ++c) {
                        dq[c] += dlogit * kr[c];
                        dk[c] += dlogit * qr[c];
                    }
                }
            }
            break;
        }
    }
}

}  // namespace sidekit::nn
