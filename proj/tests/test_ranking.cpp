#include "doctest.h"

#include <cmath>
#include <random>

#include "sidekit/error.hpp"
#include "sidekit/fusion.hpp"
#include "sidekit/ranking.hpp"
#include "sidekit/synthetic.hpp"
#include "support/gradcheck.hpp"

using namespace sidekit;

namespace {

// Textbook attention with explicit score matrix and softmax.
Tensor2 naive_pma(const Tensor2& q, const Tensor2& v, const Tensor2& theta) {
    const std::size_t d = v.cols();
    Tensor2 k(v.rows(), d);
    for (std::size_t i = 0; i < v.rows(); ++i)
        for (std::size_t c = 0; c < d; ++c)
            for (std::size_t e = 0; e < d; ++e) k(i, c) += v(i, e) * theta(e, c);
    Tensor2 out(q.rows(), d);
    for (std::size_t i = 0; i < q.rows(); ++i) {
        std::vector<double> s(v.rows());
        double z = 0.0;
        for (std::size_t j = 0; j < v.rows(); ++j) {
            double dot = 0.0;
            for (std::size_t c = 0; c < d; ++c) dot += double(q(i, c)) * k(j, c);
            s[j] = std::exp(dot / std::sqrt(double(d)));
            z += s[j];
        }
        for (std::size_t c = 0; c < d; ++c) {
            double acc = 0.0;
            for (std::size_t j = 0; j < v.rows(); ++j) acc += s[j] / z * v(j, c);
            out(i, c) = float(acc);
        }
    }
    return out;
}

struct Fixture {
    Tensor2 latents;
    ItemFeatures items;
    EngagementSet data;
};

Fixture make_fixture(std::uint64_t seed, std::size_t users = 1500) {
    Fixture f;
    f.latents = make_clustered_corpus({200, 8, 10, 0.1f, seed});
    FusionSpec fs;
    fs.signal_dims = {8};
    fs.encoder_hidden = {};
    fs.trunk = {};
    fs.head_hidden = {};
    fs.quantizer.kind = QuantizerKind::Dpca;
    fs.quantizer.depth = 3;
    fs.quantizer.groups = 2;
    fs.quantizer.group_width = 4;
    FusionModel m = make_fusion_model(fs, seed);
    TrainConfig tc;
    tc.epochs = 30;
    tc.batch_size = 50;
    tc.learning_rate = 3e-3f;
    const std::vector<Tensor2> corpus{f.latents};
    train(m, corpus, tc);
    f.items = ItemFeatures::from_sids(encode_corpus(m, corpus, SidScheme(3, 3)));
    EngagementConfig ec;
    ec.users = users;
    ec.max_history = 12;
    ec.min_history = 4;
    ec.neighborhood = 20;
    ec.seed = seed;
    f.data = generate_engagement(f.latents, ec);
    return f;
}

}  // namespace

TEST_CASE("pma examples") {
    const Tensor2 theta = Tensor2::identity(3);
    const Tensor2 same = Tensor2::from_rows({{1, 2, 3}, {1, 2, 3}, {1, 2, 3}});
    const Tensor2 q = Tensor2::from_rows({{0.3f, -1, 2}, {5, 0, 0}});
    const Tensor2 u = pma_forward(q, same, theta);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t c = 0; c < 3; ++c) CHECK(u(i, c) == doctest::Approx(same(0, c)));

    const Tensor2 v = Tensor2::from_rows({{1, 0, 0}, {2, 0, 0}, {6, 0, 0}});
    const Tensor2 ortho = Tensor2::from_rows({{0, 1, 0}});
    const Tensor2 mean = pma_forward(ortho, v, theta);
    CHECK(mean(0, 0) == doctest::Approx(3.0));

    CHECK_THROWS_AS(pma_forward(Tensor2(1, 2), v, theta), ShapeError);
    CHECK_THROWS_AS(pma_forward(ortho, v, Tensor2::identity(2)), ShapeError);
}

TEST_CASE("pma matches the naive implementation and the graph op") {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 50; ++trial) {
        const Tensor2 q = testing::random_tensor(2, 4, rng);
        const Tensor2 v = testing::random_tensor(3, 4, rng);
        const Tensor2 theta = testing::random_tensor(4, 4, rng);
        const Tensor2 u = pma_forward(q, v, theta);
        const Tensor2 ref = naive_pma(q, v, theta);
        for (std::size_t i = 0; i < u.size(); ++i) CHECK(u.values()[i] == doctest::Approx(ref.values()[i]).epsilon(1e-5));

        // Graph segment attention with each query owning a copy of V.
        Tensor2 vv(6, 4);
        for (std::size_t s = 0; s < 2; ++s)
            for (std::size_t j = 0; j < 3; ++j) std::copy(v.row(j).begin(), v.row(j).end(), vv.row(s * 3 + j).begin());
        nn::Graph g;
        const nn::NodeId vn = g.constant(vv);
        const nn::NodeId out = g.segment_attention(g.constant(q), g.matmul(vn, g.constant(theta)), vn, {3, 3}, 3, 0.5f);
        g.forward();
        for (std::size_t i = 0; i < u.size(); ++i) CHECK(g.value(out).values()[i] == doctest::Approx(u.values()[i]).epsilon(1e-4));
    }
}

TEST_CASE("pma is invariant to permuting the history set") {
    std::mt19937_64 rng(2);
    const Tensor2 q = testing::random_tensor(3, 5, rng);
    const Tensor2 v = testing::random_tensor(7, 5, rng);
    const Tensor2 theta = testing::random_tensor(5, 5, rng);
    std::vector<std::size_t> perm{3, 0, 6, 1, 5, 2, 4};
    Tensor2 pv(7, 5);
    for (std::size_t j = 0; j < 7; ++j) std::copy(v.row(perm[j]).begin(), v.row(perm[j]).end(), pv.row(j).begin());
    const Tensor2 a = pma_forward(q, v, theta);
    const Tensor2 b = pma_forward(q, pv, theta);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.values()[i] == doctest::Approx(b.values()[i]).epsilon(1e-5));
}

TEST_CASE("build_features_sid") {
    const SidScheme scheme(3, 2);
    std::vector<std::vector<SemanticId>> sids{{{0}}, {{24}}, {{9}}, {{3}}};
    SUBCASE("one-row table shares everything") {
        const std::vector<Tensor2> tables{Tensor2::from_rows({{0.5f, -1.0f}})};
        const Tensor2 f = build_features_sid(sids, tables, 1);
        for (std::size_t e = 0; e < 4; ++e) CHECK(f.row(e)[1] == -1.0f);
    }
    SUBCASE("large tables are injective, congruent sids collide") {
        std::mt19937_64 rng(3);
        const std::vector<Tensor2> tables{testing::random_tensor(25, 3, rng)};
        const Tensor2 f = build_features_sid(sids, tables, 25);
        for (std::size_t a = 0; a < 4; ++a)
            for (std::size_t b = a + 1; b < 4; ++b) CHECK(std::vector<float>(f.row(a).begin(), f.row(a).end()) !=
                                                          std::vector<float>(f.row(b).begin(), f.row(b).end()));
        const std::vector<Tensor2> small{testing::random_tensor(6, 3, rng)};
        const Tensor2 g = build_features_sid(sids, small, 6);  // 24 = 0 (mod 6), 9 = 3 (mod 6)
        CHECK(std::vector<float>(g.row(0).begin(), g.row(0).end()) == std::vector<float>(g.row(1).begin(), g.row(1).end()));
        CHECK(std::vector<float>(g.row(2).begin(), g.row(2).end()) == std::vector<float>(g.row(3).begin(), g.row(3).end()));
    }
    SUBCASE("grams are summed") {
        std::vector<std::vector<SemanticId>> two{{{3}, {6}}};
        const std::vector<Tensor2> tables{Tensor2(10, 1, 1.0f), Tensor2(10, 1, 2.0f)};
        CHECK(build_features_sid(two, tables, 10)(0, 0) == 3.0f);
        CHECK_THROWS_AS(build_features_sid(sids, tables, 10), ShapeError);
    }
}

TEST_CASE("build_features_side") {
    std::mt19937_64 rng(4);
    const Tensor2 side = testing::random_tensor(5, 6, rng);
    const Tensor2 zero = build_features_side(side, Tensor2(6, 4));
    for (float v : zero.values()) CHECK(v == 0.0f);
    CHECK(build_features_side(side, Tensor2::identity(6)) == side);
    CHECK_THROWS_AS(build_features_side(side, Tensor2(5, 4)), ShapeError);
}

TEST_CASE("parameter census") {
    SidFile sid_file{SidScheme(64, 3), 1, {{{64}}}};
    const ItemFeatures sid_items = ItemFeatures::from_sids(sid_file);
    const ToyRankingModel sid = make_ranking_model(FeaturePath::Sid, sid_items, 16, 262144, 8, 0);
    CHECK(feature_param_count(sid) == 4194304);

    SidFile side_file{SidScheme(3, 3), 15, {std::vector<SemanticId>(15, SemanticId{39})}};
    const ItemFeatures side_items = ItemFeatures::from_sids(side_file);
    CHECK(side_items.side.cols() == 45);
    const ToyRankingModel side = make_ranking_model(FeaturePath::Side, side_items, 16, 0, 8, 0);
    CHECK(feature_param_count(side) == 720);
    CHECK(side.params.size() == 6);  // omega, theta, dense.w/b, head.w/b
}

TEST_CASE("engagement generation") {
    const Tensor2 latents = make_clustered_corpus({100, 6, 5, 0.2f, 5});
    EngagementConfig cfg;
    cfg.users = 50;
    cfg.max_history = 10;
    cfg.min_history = 3;
    cfg.neighborhood = 10;
    cfg.seed = 5;
    const EngagementSet a = generate_engagement(latents, cfg);
    const EngagementSet b = generate_engagement(latents, cfg);
    CHECK(a.impressions.size() == 200);
    CHECK(format_engagement(a) == format_engagement(b));
    for (const auto& imp : a.impressions) {
        CHECK((imp.label == 0.0f || imp.label == 1.0f));
        CHECK(imp.history.size() >= 3);
        CHECK(imp.history.size() <= 10);
        CHECK(imp.probability > 0.0);
        CHECK(imp.probability < 1.0);
    }
    const EngagementSet back = parse_engagement(format_engagement(a));
    REQUIRE(back.impressions.size() == a.impressions.size());
    for (std::size_t i = 0; i < a.impressions.size(); ++i) {
        CHECK(back.impressions[i].history == a.impressions[i].history);
        CHECK(back.impressions[i].candidate == a.impressions[i].candidate);
        CHECK(back.impressions[i].label == a.impressions[i].label);
        CHECK(back.impressions[i].probability == a.impressions[i].probability);
    }
    CHECK_THROWS_AS(parse_engagement("#ENGv1 items=3 max_history=2 seed=0 impressions=1\n0 1 0.5 7 0\n"), FormatError);
    CHECK_THROWS_AS(parse_engagement("#ENGv1 items=3 max_history=2 seed=0 impressions=2\n0 1 0.5 1 0\n"), FormatError);
    CHECK_THROWS_AS(parse_engagement("#ENGv1 items=3 max_history=2 seed=0 impressions=1\n0 1 0.5 1 3 0 1 2\n"), FormatError);
    CHECK_NOTHROW(parse_engagement("#ENGv1 items=3 max_history=2 seed=0 impressions=1\n0 1 0.5 1 2 0 2\n"));
}

TEST_CASE("run_ab is deterministic and history helps") {
    const Fixture f = make_fixture(6);
    RankingConfig cfg;
    cfg.epochs = 4;
    cfg.seed = 6;
    const std::vector<FeaturePath> variants{FeaturePath::Sid, FeaturePath::Side, FeaturePath::NoHistory};
    const AbReport a = run_ab(f.data, f.items, cfg, variants);
    const AbReport b = run_ab(f.data, f.items, cfg, variants);
    for (std::size_t i = 0; i < 3; ++i) CHECK(a.variants[i].ne.ne == b.variants[i].ne.ne);
    const double none = a.variant(FeaturePath::NoHistory).ne.ne;
    CHECK(a.variant(FeaturePath::Sid).ne.ne < none);
    CHECK(a.variant(FeaturePath::Side).ne.ne < none);
    CHECK(a.generator_ne < a.variant(FeaturePath::Side).ne.ne);
    CHECK(a.variant(FeaturePath::Sid).feature_params > a.variant(FeaturePath::Side).feature_params);
    const std::string table = format_ab_markdown(a);
    CHECK(table.find("| side |") != std::string::npos);
    CHECK(table.find("+0.000%") != std::string::npos);
}

TEST_CASE("ranking inputs are validated") {
    const Fixture f = make_fixture(7, 20);
    RankingConfig cfg;
    cfg.epochs = 1;
    const std::vector<FeaturePath> v{FeaturePath::Side};
    ItemFeatures fewer = f.items;
    fewer.sids.pop_back();
    CHECK_THROWS_AS(run_ab(f.data, fewer, cfg, v), ShapeError);
    cfg.test_fraction = 1.0;
    CHECK_THROWS_AS(run_ab(f.data, f.items, cfg, v), InvalidArgument);
    const ToyRankingModel m = make_ranking_model(FeaturePath::Side, f.items, 8, 0, 4, 0);
    CHECK_THROWS_AS(predict(m, f.items, f.data.impressions), InvalidArgument);
}
