#pragma once

// One finite-difference case per differentiable graph op, shared by the unit
// tests and the acceptance suite. Every case reduces the op output to a scalar
// through a fixed random projection so all output entries get distinct weights.

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "gradcheck.hpp"

namespace sidekit::testing {

struct OpCase {
    std::string name;
    nn::ParamSet params;
    LossBuilder build;
};

inline nn::NodeId projected_sum(nn::Graph& g, nn::NodeId out, const std::shared_ptr<Tensor2>& weights) {
    return g.sum(g.mul(out, g.constant(*weights)));
}

inline std::vector<OpCase> make_op_cases(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<OpCase> cases;
    auto proj = [&](std::size_t r, std::size_t c) {
        return std::make_shared<Tensor2>(random_tensor(r, c, rng));
    };
    auto unary = [&](std::string name, auto op, Tensor2 x, std::size_t out_cols = 0,
                     std::size_t out_rows = 0) {
        OpCase c{std::move(name), {}, {}};
        const std::size_t r = out_rows == 0 ? x.rows() : out_rows, k = out_cols == 0 ? x.cols() : out_cols;
        c.params.add("x", std::move(x));
        auto w = proj(r, k);
        c.build = [op, w](nn::Graph& g) { return projected_sum(g, op(g, g.parameter("x")), w); };
        cases.push_back(std::move(c));
    };
    auto binary = [&](std::string name, auto op, Tensor2 a, Tensor2 b, std::size_t out_r,
                      std::size_t out_c) {
        OpCase c{std::move(name), {}, {}};
        c.params.add("a", std::move(a));
        c.params.add("b", std::move(b));
        auto w = proj(out_r, out_c);
        c.build = [op, w](nn::Graph& g) {
            return projected_sum(g, op(g, g.parameter("a"), g.parameter("b")), w);
        };
        cases.push_back(std::move(c));
    };

    binary("matmul", [](nn::Graph& g, nn::NodeId a, nn::NodeId b) { return g.matmul(a, b); },
           random_tensor(4, 4, rng), random_tensor(4, 4, rng), 4, 4);
    binary("add", [](nn::Graph& g, nn::NodeId a, nn::NodeId b) { return g.add(a, b); },
           random_tensor(4, 4, rng), random_tensor(4, 4, rng), 4, 4);
    binary("add-broadcast", [](nn::Graph& g, nn::NodeId a, nn::NodeId b) { return g.add(a, b); },
           random_tensor(4, 4, rng), random_tensor(1, 4, rng), 4, 4);
    binary("sub", [](nn::Graph& g, nn::NodeId a, nn::NodeId b) { return g.sub(a, b); },
           random_tensor(4, 4, rng), random_tensor(4, 4, rng), 4, 4);
    binary("mul", [](nn::Graph& g, nn::NodeId a, nn::NodeId b) { return g.mul(a, b); },
           random_tensor(4, 4, rng), random_tensor(4, 4, rng), 4, 4);
    unary("scale", [](nn::Graph& g, nn::NodeId x) { return g.scale(x, -1.7f, 0.3f); },
          random_tensor(4, 4, rng));
    unary("relu", [](nn::Graph& g, nn::NodeId x) { return g.relu(x); }, random_away_from_zero(4, 4, rng));
    unary("tanh", [](nn::Graph& g, nn::NodeId x) { return g.tanh(x); }, random_tensor(4, 4, rng, -2.0f, 2.0f));
    unary("sigmoid", [](nn::Graph& g, nn::NodeId x) { return g.sigmoid(x); },
          random_tensor(4, 4, rng, -3.0f, 3.0f));
    unary("softmax-rows", [](nn::Graph& g, nn::NodeId x) { return g.softmax_rows(x); },
          random_tensor(4, 4, rng, -2.0f, 2.0f));
    binary("concat",
           [](nn::Graph& g, nn::NodeId a, nn::NodeId b) {
               const nn::NodeId parts[] = {a, b, a};
               return g.concat_cols(parts);
           },
           random_tensor(4, 4, rng), random_tensor(4, 2, rng), 4, 10);
    unary("slice", [](nn::Graph& g, nn::NodeId x) { return g.slice_cols(x, 1, 3); }, random_tensor(4, 4, rng), 2);
    // Reductions feed a nonlinearity so the gradient is not trivially constant.
    unary("sum", [](nn::Graph& g, nn::NodeId x) { return g.tanh(g.sum(x)); },
          random_tensor(4, 4, rng, -0.3f, 0.3f), 1, 1);
    unary("mean", [](nn::Graph& g, nn::NodeId x) { return g.tanh(g.scale(g.mean(x), 3.0f)); },
          random_tensor(4, 4, rng), 1, 1);
    {
        OpCase c{"row-sum", {}, {}};
        c.params.add("x", random_tensor(4, 4, rng));
        auto w = proj(4, 1);
        c.build = [w](nn::Graph& g) { return projected_sum(g, g.tanh(g.row_sum(g.parameter("x"))), w); };
        cases.push_back(std::move(c));
    }
    {
        OpCase c{"transpose", {}, {}};
        c.params.add("x", random_tensor(4, 3, rng));
        auto w = proj(3, 4);
        c.build = [w](nn::Graph& g) { return projected_sum(g, g.transpose(g.parameter("x")), w); };
        cases.push_back(std::move(c));
    }
    {
        OpCase c{"gather-rows", {}, {}};
        c.params.add("x", random_tensor(4, 4, rng));
        auto w = proj(6, 4);
        c.build = [w](nn::Graph& g) {
            return projected_sum(g, g.gather_rows(g.parameter("x"), {3, 0, 3, 1, 1, 2}), w);
        };
        cases.push_back(std::move(c));
    }
    binary("cosine-rows", [](nn::Graph& g, nn::NodeId a, nn::NodeId b) { return g.cosine_rows(a, b); },
           random_tensor(4, 4, rng), random_tensor(4, 4, rng), 4, 1);
    {
        OpCase c{"bce-with-logits", {}, {}};
        c.params.add("z", random_tensor(4, 1, rng, -3.0f, 3.0f));
        c.params.add("y", random_tensor(4, 1, rng, 0.0f, 1.0f));
        auto w = proj(4, 1);
        c.build = [w](nn::Graph& g) {
            return projected_sum(g, g.bce_with_logits(g.parameter("z"), g.parameter("y")), w);
        };
        cases.push_back(std::move(c));
    }
    {
        OpCase c{"softmax-xent", {}, {}};
        c.params.add("z", random_tensor(4, 4, rng, -2.0f, 2.0f));
        c.params.add("t", random_tensor(4, 4, rng, 0.0f, 1.0f));
        auto w = proj(4, 1);
        c.build = [w](nn::Graph& g) {
            return projected_sum(g, g.softmax_cross_entropy(g.parameter("z"), g.parameter("t")), w);
        };
        cases.push_back(std::move(c));
    }
    {
        OpCase c{"segment-attention", {}, {}};
        c.params.add("q", random_tensor(2, 4, rng));
        c.params.add("k", random_tensor(6, 4, rng));
        c.params.add("v", random_tensor(6, 4, rng));
        auto w = proj(2, 4);
        c.build = [w](nn::Graph& g) {
            return projected_sum(
                g, g.segment_attention(g.parameter("q"), g.parameter("k"), g.parameter("v"), {3, 2}, 3, 0.5f), w);
        };
        cases.push_back(std::move(c));
    }
    return cases;
}

}  // namespace sidekit::testing
