#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ck/attention.hpp"
#include "ck/ops.hpp"
#include "testutil.hpp"

using namespace ck;

namespace {

AttentionBlock zero_block(AttentionMode mode, int c, int r = 4) {
    std::mt19937_64 rng(1);
    auto b = AttentionBlock::create(mode, c, r, rng);
    for (auto& t : {b.w1, b.w2, b.w1_s, b.w2_s}) {
        if (t) t->data.assign(t->data.size(), 0.0);
    }
    return b;
}

// dense hand-rolled evaluation of the channel branch
std::vector<double> ref_channel_scores(const Tensor& x, const AttentionBlock& b) {
    const int c = static_cast<int>(x.shape[0]);
    const int hw = static_cast<int>(x.shape[1] * x.shape[2]);
    const int cr = c / b.reduction;
    std::vector<double> pooled(static_cast<std::size_t>(c), 0.0);
    for (int i = 0; i < c; ++i) {
        for (int j = 0; j < hw; ++j) pooled[static_cast<std::size_t>(i)] += x.data[static_cast<std::size_t>(i * hw + j)];
        pooled[static_cast<std::size_t>(i)] /= hw;
    }
    std::vector<double> hidden(static_cast<std::size_t>(cr), 0.0);
    for (int j = 0; j < cr; ++j) {
        double s = 0.0;
        for (int i = 0; i < c; ++i) s += pooled[static_cast<std::size_t>(i)] * b.w1->data[static_cast<std::size_t>(i * cr + j)];
        hidden[static_cast<std::size_t>(j)] = s > 0.0 ? s : 0.0;
    }
    std::vector<double> scores(static_cast<std::size_t>(c), 0.0);
    for (int i = 0; i < c; ++i) {
        double s = 0.0;
        for (int j = 0; j < cr; ++j) s += hidden[static_cast<std::size_t>(j)] * b.w2->data[static_cast<std::size_t>(j * c + i)];
        scores[static_cast<std::size_t>(i)] = 1.0 / (1.0 + std::exp(-s));
    }
    return scores;
}

}  // namespace

TEST_CASE("channel_score: zero weights give 0.5; identical channels are symmetric") {
    std::mt19937_64 rng(3);
    auto x = oracle::random_tensor({4, 3, 3}, rng);
    auto zb = zero_block(AttentionMode::channel, 4);
    auto scores = channel_score(x, zb);
    for (double v : scores->data) CHECK(v == doctest::Approx(0.5).epsilon(1e-15));

    // identical channels: all scores equal whenever the MLP treats channels
    // symmetrically (weights shared across channels); with per-channel
    // weights the real symmetry is permutation equivariance, checked below
    std::mt19937_64 rng2(4);
    auto sym = AttentionBlock::create(AttentionMode::channel, 4, 2, rng2);
    for (int j = 0; j < 2; ++j) {
        for (int i = 1; i < 4; ++i) sym.w1->data[static_cast<std::size_t>(i * 2 + j)] = sym.w1->data[static_cast<std::size_t>(j)];
    }
    for (int j = 0; j < 2; ++j) {
        for (int i = 1; i < 4; ++i) sym.w2->data[static_cast<std::size_t>(j * 4 + i)] = sym.w2->data[static_cast<std::size_t>(j * 4)];
    }
    auto plane = oracle::random_tensor({1, 3, 3}, rng2);
    std::vector<double> rep;
    for (int i = 0; i < 4; ++i) rep.insert(rep.end(), plane->data.begin(), plane->data.end());
    auto same = make_tensor({4, 3, 3}, rep);
    auto s = channel_score(same, sym);
    for (double v : s->data) CHECK(v == doctest::Approx(s->data[0]).epsilon(1e-12));
}

TEST_CASE("channel_score is equivariant under a channel permutation") {
    // permuting input channels together with W1 rows and W2 columns permutes
    // the scores the same way
    std::mt19937_64 rng(5);
    auto block = AttentionBlock::create(AttentionMode::channel, 4, 2, rng);
    auto x = oracle::random_tensor({4, 3, 3}, rng);
    const int perm[4] = {2, 0, 3, 1};

    AttentionBlock pb = block;
    pb.w1 = make_tensor({4, 2}, std::vector<double>(8, 0.0));
    pb.w2 = make_tensor({2, 4}, std::vector<double>(8, 0.0));
    auto px = zeros({4, 3, 3});
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 2; ++j) {
            pb.w1->data[static_cast<std::size_t>(i * 2 + j)] =
                block.w1->data[static_cast<std::size_t>(perm[i] * 2 + j)];
            pb.w2->data[static_cast<std::size_t>(j * 4 + i)] =
                block.w2->data[static_cast<std::size_t>(j * 4 + perm[i])];
        }
        for (int p = 0; p < 9; ++p) {
            px->data[static_cast<std::size_t>(i * 9 + p)] =
                x->data[static_cast<std::size_t>(perm[i] * 9 + p)];
        }
    }
    auto base = channel_score(x, block);
    auto permuted = channel_score(px, pb);
    for (int i = 0; i < 4; ++i) {
        CHECK(permuted->data[static_cast<std::size_t>(i)] ==
              doctest::Approx(base->data[static_cast<std::size_t>(perm[i])]).epsilon(1e-12));
    }
}

TEST_CASE("channel_score matches the dense matrix-arithmetic oracle") {
    std::mt19937_64 rng(7);
    auto block = AttentionBlock::create(AttentionMode::channel, 4, 2, rng);
    auto x = oracle::random_tensor({4, 5, 5}, rng);
    auto got = channel_score(x, block);
    auto want = ref_channel_scores(*x, block);
    for (std::size_t i = 0; i < want.size(); ++i) {
        CHECK(got->data[i] == doctest::Approx(want[i]).epsilon(1e-12));
    }
    // channel mismatch
    auto bad = oracle::random_tensor({6, 5, 5}, rng);
    CHECK_THROWS_AS(channel_score(bad, block), ShapeError);
}

TEST_CASE("apply_channel_attention identity, annihilation, and elementwise oracle") {
    std::mt19937_64 rng(11);
    auto x = oracle::random_tensor({3, 4, 4}, rng);
    auto ones = full({3}, 1.0);
    auto same = apply_channel_attention(x, ones);
    for (std::size_t i = 0; i < x->data.size(); ++i) CHECK(same->data[i] == x->data[i]);

    auto zeroed = apply_channel_attention(x, zeros({3}));
    for (double v : zeroed->data) CHECK(v == 0.0);

    auto scores = oracle::random_tensor({3}, rng, 0.0, 1.0);
    auto out = apply_channel_attention(x, scores);
    for (int c = 0; c < 3; ++c) {
        for (int j = 0; j < 16; ++j) {
            CHECK(out->data[static_cast<std::size_t>(c * 16 + j)] ==
                  x->data[static_cast<std::size_t>(c * 16 + j)] * scores->data[static_cast<std::size_t>(c)]);
        }
    }
    CHECK_THROWS_AS(apply_channel_attention(x, full({4}, 1.0)), ShapeError);
}

TEST_CASE("spatial_score: zero weights, constant input, per-position oracle") {
    auto zb = zero_block(AttentionMode::spatial, 4);
    std::mt19937_64 rng(13);
    auto x = oracle::random_tensor({4, 3, 3}, rng);
    auto s = spatial_score(x, zb);
    CHECK(s->shape == std::vector<std::int64_t>{3, 3});
    for (double v : s->data) CHECK(v == doctest::Approx(0.5).epsilon(1e-15));

    auto block = AttentionBlock::create(AttentionMode::spatial, 2, 2, rng);
    auto constant = full({2, 3, 3}, 0.7);
    auto cs = spatial_score(constant, block);
    for (double v : cs->data) CHECK(v == doctest::Approx(cs->data[0]).epsilon(1e-12));

    // per-position dense oracle on a 2x3x3 input
    auto y = oracle::random_tensor({2, 3, 3}, rng);
    auto got = spatial_score(y, block);
    const int c = 2, cr = 1;
    for (int pos = 0; pos < 9; ++pos) {
        std::vector<double> v(static_cast<std::size_t>(c));
        for (int i = 0; i < c; ++i) v[static_cast<std::size_t>(i)] = y->data[static_cast<std::size_t>(i * 9 + pos)];
        std::vector<double> hidden(static_cast<std::size_t>(cr), 0.0);
        for (int j = 0; j < cr; ++j) {
            double acc = 0.0;
            for (int i = 0; i < c; ++i) acc += v[static_cast<std::size_t>(i)] * block.w1_s->data[static_cast<std::size_t>(i * cr + j)];
            hidden[static_cast<std::size_t>(j)] = acc > 0.0 ? acc : 0.0;
        }
        double logit = 0.0;
        for (int j = 0; j < cr; ++j) logit += hidden[static_cast<std::size_t>(j)] * block.w2_s->data[static_cast<std::size_t>(j)];
        const double want = 1.0 / (1.0 + std::exp(-logit));
        CHECK(got->data[static_cast<std::size_t>(pos)] == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("cbam zero-weight composition gives exactly a quarter of the input") {
    std::mt19937_64 rng(17);
    auto x = oracle::random_tensor({4, 5, 5}, rng);
    auto zb = zero_block(AttentionMode::cbam, 4);
    auto y = cbam_forward(x, zb);
    REQUIRE(y->shape == x->shape);
    for (std::size_t i = 0; i < x->data.size(); ++i) {
        CHECK(y->data[i] == doctest::Approx(0.25 * x->data[i]).epsilon(1e-15));
    }
    auto zero_in = zeros({4, 5, 5});
    auto zy = cbam_forward(zero_in, zb);
    for (double v : zy->data) CHECK(v == 0.0);
}

TEST_CASE("cbam equals the composition of its two stage oracles") {
    std::mt19937_64 rng(19);
    auto block = AttentionBlock::create(AttentionMode::cbam, 4, 2, rng);
    auto x = oracle::random_tensor({4, 5, 5}, rng);
    auto got = cbam_forward(x, block);

    auto gated = apply_channel_attention(x, channel_score(x, block));
    auto want = apply_spatial_attention(gated, spatial_score(gated, block));
    for (std::size_t i = 0; i < want->data.size(); ++i) CHECK(got->data[i] == want->data[i]);
}

TEST_CASE("sam and bam zero-weight closed forms and shape preservation") {
    std::mt19937_64 rng(23);
    auto x = oracle::random_tensor({4, 3, 5}, rng);

    auto sam0 = zero_block(AttentionMode::sam, 4);
    auto sy = sam_forward(x, sam0);
    REQUIRE(sy->shape == x->shape);
    for (std::size_t i = 0; i < x->data.size(); ++i) {
        CHECK(sy->data[i] == doctest::Approx(0.5 * x->data[i]).epsilon(1e-15));
    }

    auto bam0 = zero_block(AttentionMode::bam, 4);
    auto by = bam_forward(x, bam0);
    REQUIRE(by->shape == x->shape);
    for (std::size_t i = 0; i < x->data.size(); ++i) {
        CHECK(by->data[i] == doctest::Approx(1.25 * x->data[i]).epsilon(1e-15));
    }

    // random-weight case vs stage composition
    auto bam = AttentionBlock::create(AttentionMode::bam, 4, 4, rng);
    auto got = bam_forward(x, bam);
    auto channel_gated = apply_channel_attention(x, channel_score(x, bam));
    auto both = apply_spatial_attention(channel_gated, spatial_score(x, bam));
    for (std::size_t i = 0; i < x->data.size(); ++i) {
        CHECK(got->data[i] == x->data[i] + both->data[i]);
    }
}

TEST_CASE("gate range keeps |Y| <= |x| for cbam and sam on random inputs") {
    std::mt19937_64 rng(29);
    for (int trial = 0; trial < 20; ++trial) {
        auto block = AttentionBlock::create(AttentionMode::cbam, 8, 4, rng);
        auto x = oracle::random_tensor({8, 4, 4}, rng, -3.0, 3.0);
        auto y = cbam_forward(x, block);
        for (std::size_t i = 0; i < x->data.size(); ++i) {
            CHECK(std::fabs(y->data[i]) <= std::fabs(x->data[i]));
        }
        auto scores = channel_score(x, block);
        for (double v : scores->data) {
            CHECK(v > 0.0);
            CHECK(v < 1.0);
        }
    }
}

TEST_CASE("monotone gating: boosting a channel does not lower its score") {
    // positive inputs and positive first-layer weights make the pooled
    // channel statistic feed monotonically into the gate
    std::mt19937_64 rng(31);
    auto block = AttentionBlock::create(AttentionMode::channel, 4, 2, rng);
    for (auto& v : block.w1->data) v = std::fabs(v);
    for (auto& v : block.w2->data) v = std::fabs(v);
    auto x = oracle::random_tensor({4, 3, 3}, rng, 0.1, 1.0);
    auto base = channel_score(x, block);
    auto boosted_x = make_tensor(x->shape, x->data);
    for (int j = 0; j < 9; ++j) boosted_x->data[static_cast<std::size_t>(j)] *= 2.0;  // channel 0
    auto boosted = channel_score(boosted_x, block);
    CHECK(boosted->data[0] >= base->data[0]);
}

TEST_CASE("attention mode round-trip and C % r enforcement") {
    for (const char* name : {"none", "channel", "spatial", "cbam", "sam", "bam"}) {
        CHECK(to_string(attention_mode_from_string(name)) == name);
    }
    CHECK_THROWS_AS(attention_mode_from_string("senet"), ParamError);
    std::mt19937_64 rng(1);
    CHECK_THROWS_AS(AttentionBlock::create(AttentionMode::cbam, 6, 4, rng), ParamError);
}

TEST_CASE("cbam_forward gradient matches finite differences end to end") {
    std::mt19937_64 rng(37);
    const double tol = 1e-4;
    for (int point = 0; point < 10; ++point) {
        auto block = AttentionBlock::create(AttentionMode::cbam, 4, 2, rng);
        auto x = oracle::random_tensor({4, 3, 3}, rng, -1.0, 1.0, true);
        std::vector<TensorPtr> params = {x, block.w1, block.w2, block.w1_s, block.w2_s};
        CHECK(oracle::fd_max_rel_err(params, [&] { return sum(cbam_forward(x, block)); }) < tol);
    }
}
