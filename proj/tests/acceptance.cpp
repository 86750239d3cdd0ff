// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance            run all criteria
//   acceptance 5 8        run a subset
//   acceptance -v ...     also print the report tables

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cli.hpp"
#include "sidekit/corpus_io.hpp"
#include "sidekit/eval.hpp"
#include "sidekit/fusion.hpp"
#include "sidekit/quant/dpca.hpp"
#include "sidekit/quant/structured.hpp"
#include "sidekit/ranking.hpp"
#include "sidekit/sid_codec.hpp"
#include "sidekit/synthetic.hpp"
#include "support/gradcheck.hpp"
#include "support/instances.hpp"
#include "support/op_cases.hpp"
#include "support/oracles.hpp"

using namespace sidekit;

namespace {

bool verbose = false;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- 1: codec exactness ----

Outcome codec_exactness() {
    const auto t0 = std::chrono::steady_clock::now();
    std::size_t checked = 0;
    std::size_t failures = 0;

    for (std::uint32_t n = 1; n <= 6; ++n) {
        const SidScheme scheme(3, n);
        std::uint64_t total = 1;
        for (std::uint32_t k = 0; k < n; ++k) total *= 3;
        std::set<std::uint64_t> seen;
        std::vector<int> digits(n);
        for (std::uint64_t idx = 0; idx < total; ++idx) {
            std::uint64_t rest = idx;
            for (std::uint32_t k = 0; k < n; ++k) {
                digits[k] = static_cast<int>(rest % 3) - 1;
                rest /= 3;
            }
            const SemanticId s = pack(scheme, digits);
            const bool ok = s.value <= scheme.max_value() && s.value % 3 == 0 && unpack(scheme, s) == digits &&
                            seen.insert(s.value).second;
            failures += ok ? 0 : 1;
            ++checked;
        }
        failures += seen.size() == scheme.cardinality() ? 0 : 1;
    }

    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 10000; ++trial) {
        const auto base = std::uniform_int_distribution<std::uint32_t>(2, 64)(rng);
        const auto n = std::uniform_int_distribution<std::uint32_t>(1, 4)(rng);
        const auto offset = std::uniform_int_distribution<std::uint32_t>(0, base - 1)(rng);
        const SidScheme scheme(base, n, offset);
        std::vector<int> digits(n);
        // Independent oracle: s = sum_k L^k (offset + c_k), k = 1..n.
        std::uint64_t expect = 0;
        std::uint64_t power = base;
        for (std::uint32_t k = 0; k < n; ++k) {
            digits[k] = std::uniform_int_distribution<int>(scheme.min_digit(), scheme.max_digit())(rng);
            expect += power * static_cast<std::uint64_t>(digits[k] + static_cast<int>(offset));
            power *= base;
        }
        const SemanticId s = pack(scheme, digits);
        failures += (s.value == expect && unpack(scheme, s) == digits) ? 0 : 1;
        ++checked;
    }

    const double secs = seconds_since(t0);
    return {failures == 0 && secs < 1.0, std::to_string(checked) + " round trips, " + std::to_string(failures) +
                                              " failures, " + fmt("%.3f s (limit 1 s)", secs)};
}

// ---- 2: quantizer oracle equivalence ----

Outcome quantizer_oracles() {
    std::size_t agree = 0;
    const std::size_t instances = 1000;
    for (std::uint64_t seed = 0; seed < instances; ++seed) {
        const auto inst = testing::make_line_instance(seed);
        const auto code = quant::structured_assign(inst.codebook, inst.x);
        const auto brute = testing::brute_force_line_codeword(inst.codebook, inst.x);
        agree += (code.line == brute.line && code.level == brute.level) ? 1 : 0;
    }

    std::mt19937_64 rng(99);
    std::size_t bitwise = 0;
    const std::size_t stacks = 200;
    for (std::size_t trial = 0; trial < stacks; ++trial) {
        const std::size_t depth = 1 + trial % 8, groups = 1 + trial % 4, width = 1 + trial % 6;
        quant::DpcaStack s(depth, groups, width);
        std::normal_distribution<float> normal(0.0f, 1.0f);
        for (std::size_t g = 0; g < groups; ++g) {
            for (std::size_t d = 0; d < depth; ++d) {
                for (float& v : s.component(g, d)) v = normal(rng);
                for (float& v : s.offset(g, d)) v = 0.1f * normal(rng);
            }
        }
        std::vector<int> digits(depth * groups);
        quant::CodewordVector code{std::vector<std::uint32_t>(depth * groups), 3};
        for (std::size_t i = 0; i < digits.size(); ++i) {
            digits[i] = std::uniform_int_distribution<int>(-1, 1)(rng);
            code.levels[i] = static_cast<std::uint32_t>(digits[i] + 1);
        }
        bitwise += quant::dpca_decode(s, code) == testing::naive_dpca_sum(s, digits) ? 1 : 0;
    }
    return {agree == instances && bitwise == stacks,
            "structured_assign " + std::to_string(agree) + "/" + std::to_string(instances) +
                " agree with exhaustive search; dpca_decode bitwise " + std::to_string(bitwise) + "/" +
                std::to_string(stacks)};
}

// ---- 3: gradients ----

FusionSpec tiny_spec(QuantizerKind kind) {
    FusionSpec s;
    s.signal_dims = {5, 4};
    s.encoder_hidden = {6};
    s.trunk = {6};
    s.head_hidden = {6};
    s.quantizer.kind = kind;
    s.quantizer.fsq_dims = 4;
    s.quantizer.depth = 2;
    s.quantizer.groups = 2;
    s.quantizer.group_width = 2;
    return s;
}

Outcome gradient_correctness() {
    double worst = 0.0;
    std::string worst_case;
    std::size_t cases = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        for (auto& c : testing::make_op_cases(seed)) {
            const auto r = testing::gradcheck(c.params, c.build);
            ++cases;
            if (r.worst_relative_error > worst) {
                worst = r.worst_relative_error;
                worst_case = c.name + " (seed " + std::to_string(seed) + ")";
            }
        }
    }

    std::size_t st_ok = 0;
    std::size_t st_total = 0;
    for (QuantizerKind kind : {QuantizerKind::Fsq, QuantizerKind::Dpca}) {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            FusionModel m = make_fusion_model(tiny_spec(kind), seed);
            std::mt19937_64 rng(seed);
            std::vector<Tensor2> x{l2_normalize_rows(testing::random_tensor(8, 5, rng)),
                                   l2_normalize_rows(testing::random_tensor(8, 4, rng))};
            TrainConfig cfg;
            cfg.commitment = 0.0f;
            cfg.codebook = 0.0f;
            nn::Graph g(&m.params);
            const FusionGraph fg = build_fusion_graph(m, g, x);
            const FusionLossNodes loss = add_fusion_loss(m, g, fg, x, cfg);
            g.backward(loss.total);
            const Tensor2& gs = g.grad(fg.s);
            const bool nonzero = std::any_of(gs.values().begin(), gs.values().end(), [](float v) { return v != 0.0f; });
            st_ok += (g.grad(fg.h) == gs && nonzero) ? 1 : 0;
            ++st_total;
        }
    }
    return {worst <= 1e-2 && st_ok == st_total,
            std::to_string(cases) + " op checks over 100 seeds, worst rel. err " + fmt("%.2e", worst) + " at " +
                worst_case + " (limit 1e-2); straight-through identity " + std::to_string(st_ok) + "/" +
                std::to_string(st_total)};
}

// ---- 4: metric fidelity ----

Outcome metric_fidelity() {
    const float y[] = {1.0f, 0.0f};
    const double p[] = {0.8, 0.2};
    const double ne = normalized_entropy(y, p).ne;
    const double expect = std::log(0.8) / std::log(0.5);

    std::mt19937_64 rng(4);
    std::vector<float> labels(10000);
    for (float& l : labels) l = std::bernoulli_distribution(0.3)(rng) ? 1.0f : 0.0f;
    const double prior = std::accumulate(labels.begin(), labels.end(), 0.0) / labels.size();
    const std::vector<double> constant(labels.size(), prior);
    const double ne_prior = normalized_entropy(labels, constant).ne;

    const bool ok = std::abs(ne - expect) <= 1e-9 && std::abs(ne_prior - 1.0) <= 1e-9;
    return {ok, "NE(y=(1,0), p=(0.8,0.2)) = " + fmt("%.12f", ne) + " vs ln0.8/ln0.5 = " + fmt("%.12f", expect) +
                    "; constant prior NE = " + fmt("%.12f", ne_prior) + " (tol 1e-9)"};
}

// ---- 5: SIDE retrieval efficacy ----

FusionSpec one_to_one(QuantizerKind kind, std::vector<std::size_t> dims) {
    FusionSpec s;
    s.signal_dims = std::move(dims);
    s.encoder_hidden = {128};
    s.trunk = {128};
    s.head_hidden = {128};
    s.quantizer.kind = kind;
    s.quantizer.levels = 3;
    s.quantizer.fsq_dims = 15;
    s.quantizer.depth = 5;
    s.quantizer.groups = 3;
    s.quantizer.group_width = 5;
    return s;
}

TrainConfig fusion_train(std::size_t epochs, std::uint64_t seed) {
    TrainConfig t;
    t.epochs = epochs;
    t.batch_size = 256;
    t.learning_rate = 2e-3f;
    t.seed = seed;
    return t;
}

Outcome side_efficacy() {
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t rows = 20000;
    const Tensor2 corpus = make_clustered_corpus({rows, 64, 64, 0.3f, 5});
    std::vector<std::uint32_t> ids(rows);
    std::iota(ids.begin(), ids.end(), 0u);
    std::mt19937_64 rng(5);
    std::shuffle(ids.begin(), ids.end(), rng);
    ids.resize(1000);
    std::sort(ids.begin(), ids.end());
    const NeighborLists truth = knn_ground_truth(corpus, ids, 20);
    const std::size_t ks[] = {20, 50, 100};
    const double threshold = 20.0 * random_recall(100, rows);

    bool ok = true;
    std::string detail;
    const std::vector<Tensor2> inputs{corpus};
    for (QuantizerKind kind : {QuantizerKind::Dpca, QuantizerKind::Fsq}) {
        FusionModel m = make_fusion_model(one_to_one(kind, {64}), 5);
        train(m, inputs, fusion_train(12, 5));
        const SidFile sids = encode_corpus(m, inputs, SidScheme(3, 5));
        const Tensor2 side = ItemFeatures::from_sids(sids).side;
        const RecallReport r = recall_at_k(truth, knn_ground_truth(side, ids, 100), ks, rows);
        const RecallReport rr = recall_at_k(truth, knn_ground_truth(reconstruct(m, inputs)[0], ids, 100), ks, rows);
        const bool monotone = r.recall[0] <= r.recall[1] && r.recall[1] <= r.recall[2] &&
                              rr.recall[0] <= rr.recall[1] && rr.recall[1] <= rr.recall[2];
        ok = ok && monotone && r.recall[2] >= threshold;
        detail += std::string(quantizer_name(kind)) + " R@20/50/100 = " + fmt("%.4f", r.recall[0]) + "/" +
                  fmt("%.4f", r.recall[1]) + "/" + fmt("%.4f", r.recall[2]) + " (decoded R@100 " + fmt("%.4f", rr.recall[2]) + ")" +
                  (monotone ? "" : " NOT monotone") + "; ";
        if (verbose) {
            std::cout << "    " << quantizer_name(kind) << " " << m.spec.quantizer.code_length() << " ternary digits ("
                      << fmt("%.1f", m.spec.quantizer.code_length() * std::log2(3.0)) << " bits)\n";
        }
    }
    const double secs = seconds_since(t0);
    ok = ok && secs < 600.0;
    return {ok, detail + "need R@100 >= " + fmt("%.4f", threshold) + " (20x random); " + fmt("%.0f s", secs)};
}

// ---- 6: fusion degradation direction ----

Outcome fusion_degradation() {
    CorrelatedSignalsSpec spec;
    spec.rows = 8000;
    spec.dims = {64, 64};
    spec.latent_dim = 16;
    spec.private_dim = 8;
    spec.clusters = 32;
    spec.seed = 6;
    const std::vector<Tensor2> signals = make_correlated_signals(spec);
    const std::size_t epochs = 160;

    bool ok = true;
    std::ostringstream table;
    table << "    | Quantizer | Task | 1:1 loss | Fused loss | Δ%age |\n    |---|---|---|---|---|\n";
    std::string detail;
    // Relative drop of the reconstruction loss over the last five epochs.
    double worst_tail = 0.0;
    auto tail = [&](const TrainResult& r) {
        auto recon = [](const LossBreakdown& b) {
            return std::accumulate(b.reconstruction.begin(), b.reconstruction.end(), 0.0);
        };
        const auto& h = r.history;
        const double before = recon(h[h.size() - 6]);
        worst_tail = std::max(worst_tail, (before - recon(h.back())) / before);
        if (verbose) std::cout << "    tail " << fmt("%.4f", before) << " -> " << fmt("%.4f", recon(h.back())) << "\n";
    };
    for (QuantizerKind kind : {QuantizerKind::Dpca, QuantizerKind::Fsq}) {
        FusionModel fused = make_fusion_model(one_to_one(kind, {64, 64}), 6);
        tail(train(fused, signals, fusion_train(epochs, 6)));
        const auto fused_recon = reconstruct(fused, signals);
        for (std::size_t k = 0; k < signals.size(); ++k) {
            const std::vector<Tensor2> alone{signals[k]};
            FusionModel iso = make_fusion_model(one_to_one(kind, {64}), 6);
            tail(train(iso, alone, fusion_train(epochs, 6)));
            const double iso_loss = cosine_recon_loss(signals[k], reconstruct(iso, alone)[0]);
            const double fused_loss = cosine_recon_loss(signals[k], fused_recon[k]);
            const double delta = 100.0 * (fused_loss - iso_loss) / iso_loss;
            ok = ok && fused_loss >= iso_loss;
            table << "    | " << quantizer_name(kind) << " | " << k << " | " << fmt("%.5f", iso_loss) << " | "
                  << fmt("%.5f", fused_loss) << " | " << fmt("%+.2f%%", delta) << " |\n";
            detail += std::string(quantizer_name(kind)) + " task " + std::to_string(k) + " " + fmt("%+.2f%%", delta) +
                      "; ";
        }
    }
    if (verbose) std::cout << table.str();
    return {ok, detail + "need every Δ >= 0; worst loss drop over the last 5 epochs " + fmt("%.2f%%", 100.0 * worst_tail)};
}

// ---- 7: depth-prefix trend ----

Outcome depth_prefix_trend() {
    const Tensor2 all = make_clustered_corpus({10000, 32, 32, 0.3f, 7});
    const std::size_t split = 8000;
    Tensor2 corpus(split, all.cols());
    Tensor2 eval(all.rows() - split, all.cols());
    std::copy(all.data(), all.data() + corpus.size(), corpus.data());
    std::copy(all.data() + corpus.size(), all.data() + all.size(), eval.data());
    FusionSpec spec = one_to_one(QuantizerKind::Dpca, {32});
    spec.quantizer.depth = 8;
    spec.quantizer.groups = 2;
    spec.quantizer.group_width = 4;
    FusionModel m = make_fusion_model(spec, 7);
    TrainConfig cfg = fusion_train(20, 7);
    cfg.dropout = 0.5f;
    train(m, std::vector<Tensor2>{corpus}, cfg);

    std::vector<double> err;
    const std::vector<Tensor2> inputs{eval};
    for (std::size_t d = 1; d <= 8; ++d) err.push_back(cosine_recon_loss(eval, reconstruct(m, inputs, d)[0]));
    bool ok = true;
    std::string detail = "err@1..8 =";
    for (std::size_t d = 0; d < err.size(); ++d) {
        detail += " " + fmt("%.4f", err[d]);
        if (d > 0 && err[d] > 1.02 * err[d - 1]) ok = false;
    }
    return {ok, detail + "; need err[d+1] <= 1.02 err[d]"};
}

// ---- 8: ranking A/B ----

struct RankingWorld {
    Tensor2 items;
    ItemFeatures features;
    EngagementSet data;
};

RankingWorld make_world(std::uint64_t seed) {
    RankingWorld w;
    w.items = make_clustered_corpus({1000, 16, 40, 0.1f, seed});
    FusionSpec fs;
    fs.signal_dims = {16};
    fs.encoder_hidden = {};
    fs.trunk = {};
    fs.head_hidden = {};
    fs.quantizer.kind = QuantizerKind::Dpca;
    fs.quantizer.depth = 4;
    fs.quantizer.groups = 4;
    fs.quantizer.group_width = 4;
    FusionModel fm = make_fusion_model(fs, seed);
    TrainConfig tc;
    tc.epochs = 60;
    tc.batch_size = 128;
    tc.learning_rate = 3e-3f;
    tc.seed = seed;
    const std::vector<Tensor2> corpus{w.items};
    train(fm, corpus, tc);
    w.features = ItemFeatures::from_sids(encode_corpus(fm, corpus, SidScheme(3, 8)));
    EngagementConfig ec;
    ec.users = 20000;
    ec.seed = seed;
    w.data = generate_engagement(w.items, ec);
    return w;
}

Outcome ranking_ab() {
    std::size_t side_wins = 0;
    std::size_t close = 0;
    double worst_gap = 0.0;
    double worst_ratio = 1e300;
    std::uint64_t cardinality = 0;
    const FeaturePath both[] = {FeaturePath::Sid, FeaturePath::Side};
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const RankingWorld w = make_world(seed);
        cardinality = w.features.scheme.cardinality();
        RankingConfig rc;
        rc.seed = seed;
        rc.hash_size = 64;
        const AbReport heavy = run_ab(w.data, w.features, rc, both);
        rc.hash_size = 0;
        const AbReport clean = run_ab(w.data, w.features, rc, both);

        const double sid_h = heavy.variant(FeaturePath::Sid).ne.ne;
        const double side_h = heavy.variant(FeaturePath::Side).ne.ne;
        side_wins += side_h <= sid_h ? 1 : 0;
        const double sid_c = clean.variant(FeaturePath::Sid).ne.ne;
        const double side_c = clean.variant(FeaturePath::Side).ne.ne;
        const double gap = std::abs(side_c - sid_c) / sid_c;
        close += gap < 0.005 ? 1 : 0;
        worst_gap = std::max(worst_gap, gap);
        const double ratio = static_cast<double>(clean.variant(FeaturePath::Sid).feature_params) /
                             static_cast<double>(clean.variant(FeaturePath::Side).feature_params);
        worst_ratio = std::min(worst_ratio, ratio);
        if (verbose) {
            std::cout << "    seed " << seed << ": hash 64 SID " << fmt("%.5f", sid_h) << " SIDE " << fmt("%.5f", side_h)
                      << "; collision-free SID " << fmt("%.5f", sid_c) << " SIDE " << fmt("%.5f", side_c) << " (gap "
                      << fmt("%.3f%%", 100.0 * gap) << ")\n";
            if (seed == 0) {
                std::istringstream table(format_ab_markdown(clean));
                for (std::string line; std::getline(table, line);) std::cout << "    " << line << "\n";
            }
        }
    }
    const bool ok = cardinality >= 4096 && side_wins >= 4 && close == 5 && worst_ratio >= 100.0;
    return {ok, "SID cardinality " + std::to_string(cardinality) + "; hash 64: SIDE <= SID in " +
                    std::to_string(side_wins) + "/5 seeds (need 4); collision-free: within 0.5% in " +
                    std::to_string(close) + "/5 (worst " + fmt("%.3f%%", 100.0 * worst_gap) +
                    "); feature params SID/SIDE >= " + fmt("%.0fx", worst_ratio) + " (need 100x)"};
}

// ---- 9: A/A determinism ----

Outcome aa_determinism() {
    namespace fs = std::filesystem;
    std::random_device rd;
    const fs::path dir = fs::temp_directory_path() / ("sidekit_aa_" + std::to_string(rd()));
    fs::create_directories(dir);
    auto p = [&](const char* name) { return (dir / name).string(); };
    auto run = [](std::vector<std::string> args, std::string* out = nullptr) {
        std::ostringstream o, e;
        const int code = cli::run_cli(std::move(args), o, e);
        if (out != nullptr) *out = o.str();
        if (code != 0) std::cerr << e.str();
        return code;
    };

    bool ok = run({"gen-corpus", "--rows", "600", "--dim", "16", "--clusters", "20", "--spread", "0.1", "--seed", "9",
                   "--out", p("items.bin")}) == 0 &&
              run({"train", "--input", p("items.bin"), "--quantizer", "dpca", "--depth", "4", "--groups", "4",
                   "--latent", "16", "--hidden", "none", "--trunk", "none", "--head", "none", "--epochs", "20",
                   "--out", p("q.ckpt")}) == 0 &&
              run({"encode", "--model", p("q.ckpt"), "--input", p("items.bin"), "--ngram", "8", "--out",
                   p("items.sid")}) == 0 &&
              run({"gen-engagement", "--items", p("items.bin"), "--users", "3000", "--seed", "9", "--out",
                   p("log.eng")}) == 0;
    std::string a, b;
    const std::vector<std::string> ab{"rank-ab", "--engagement", p("log.eng"), "--sids", p("items.sid"),
                                      "--hash-size", "64", "--epochs", "3", "--seed", "9", "--json"};
    ok = ok && run(ab, &a) == 0 && run(ab, &b) == 0;
    std::string detail = "pipeline failed";
    if (ok) {
        const auto ja = nlohmann::json::parse(a);
        const auto jb = nlohmann::json::parse(b);
        std::size_t same = 0;
        for (std::size_t i = 0; i < ja["variants"].size(); ++i) {
            same += ja["variants"][i]["ne"].get<double>() == jb["variants"][i]["ne"].get<double>() ? 1 : 0;
        }
        ok = same == ja["variants"].size() && a == b;
        detail = std::to_string(same) + "/" + std::to_string(ja["variants"].size()) +
                 " variant NEs bitwise identical across two rank-ab runs";
    }
    std::error_code ec;
    fs::remove_all(dir, ec);
    return {ok, detail};
}

struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> all{
        {1, "codec exactness", codec_exactness},
        {2, "quantizer oracle equivalence", quantizer_oracles},
        {3, "gradient correctness", gradient_correctness},
        {4, "metric fidelity", metric_fidelity},
        {5, "SIDE retrieval efficacy", side_efficacy},
        {6, "fusion degradation direction", fusion_degradation},
        {7, "depth-prefix trend", depth_prefix_trend},
        {8, "ranking A/B property", ranking_ab},
        {9, "A/A determinism", aa_determinism},
    };
    std::set<int> wanted;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "-v" || arg == "--verbose") {
            verbose = true;
        } else {
            wanted.insert(std::stoi(arg));
        }
    }

    bool all_pass = true;
    for (const auto& c : all) {
        if (!wanted.empty() && wanted.count(c.id) == 0) continue;
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        all_pass = all_pass && o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << " " << c.id << " " << c.name << ": " << o.detail << std::endl;
    }
    return all_pass ? 0 : 1;
}
