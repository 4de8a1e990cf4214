#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ck/losses.hpp"
#include "ck/ops.hpp"
#include "testutil.hpp"

using namespace ck;

TEST_CASE("softmax_with_temperature: symmetry, worked value, high-T limit") {
    auto c = full({3}, 4.2);
    for (double t : {0.5, 1.0, 7.0}) {
        auto out = softmax_with_temperature(c, t);
        for (double v : out->data) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    }

    auto logits = make_tensor({2}, {2.0, 0.0});
    auto out = softmax_with_temperature(logits, 2.0);
    CHECK(out->data[0] == doctest::Approx(0.7311).epsilon(1e-4));
    CHECK(out->data[1] == doctest::Approx(0.2689).epsilon(1e-4));

    // infinite-temperature limit: the deviation from uniform decays as
    // (max spread)/(K*T), so 1e6 leaves ~1.3e-6 and 1e7 is safely inside 1e-6
    auto wide = make_tensor({3}, {5.0, 1.0, -3.0});
    auto flat = softmax_with_temperature(wide, 1e6);
    for (double v : flat->data) CHECK(std::fabs(v - 1.0 / 3.0) < 1.5e-6);
    auto flatter = softmax_with_temperature(wide, 1e7);
    for (double v : flatter->data) CHECK(std::fabs(v - 1.0 / 3.0) < 1e-6);

    CHECK_THROWS_AS(softmax_with_temperature(logits, 0.0), ParamError);
    CHECK_THROWS_AS(softmax_with_temperature(logits, -1.0), ParamError);
}

TEST_CASE("softmax sums to one and keeps the argmax for any temperature") {
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 200; ++trial) {
        const int k = 2 + static_cast<int>(rng() % 6);
        auto logits = oracle::random_tensor({k}, rng, -8.0, 8.0);
        const double temps[] = {0.05, 0.5, 1.0, 3.0, 40.0};
        std::size_t argmax_logits = 0;
        for (std::size_t i = 1; i < logits->data.size(); ++i) {
            if (logits->data[i] > logits->data[argmax_logits]) argmax_logits = i;
        }
        for (double t : temps) {
            auto out = softmax_with_temperature(logits, t);
            double s = 0.0;
            std::size_t argmax_out = 0;
            for (std::size_t i = 0; i < out->data.size(); ++i) {
                s += out->data[i];
                if (out->data[i] > out->data[argmax_out]) argmax_out = i;
            }
            CHECK(std::fabs(s - 1.0) < 1e-12);
            CHECK(argmax_out == argmax_logits);
        }
    }
}

TEST_CASE("kl_divergence worked values and domain errors") {
    auto p = make_tensor({2}, {0.5, 0.5});
    CHECK(kl_divergence(p, p)->item() == doctest::Approx(0.0));

    auto q = make_tensor({2}, {0.25, 0.75});
    CHECK(kl_divergence(p, q)->item() == doctest::Approx(0.1438).epsilon(1e-4));

    auto onehot = make_tensor({2}, {1.0, 0.0});
    auto uniform = make_tensor({2}, {0.5, 0.5});
    CHECK(kl_divergence(onehot, uniform)->item() == doctest::Approx(std::log(2.0)).epsilon(1e-9));

    auto qzero = make_tensor({2}, {0.0, 1.0});
    CHECK_THROWS_AS(kl_divergence(p, qzero), DomainError);
    // 0*ln(0/q) = 0: support shrinking on the p side is fine
    CHECK(kl_divergence(qzero, q)->item() == doctest::Approx(std::log(1.0 / 0.75)).epsilon(1e-9));

    auto not_prob = make_tensor({2}, {0.9, 0.3});
    CHECK_THROWS_AS(kl_divergence(not_prob, q), DomainError);
}

TEST_CASE("kl_divergence is nonnegative and zero iff p == q") {
    std::mt19937_64 rng(43);
    for (int trial = 0; trial < 300; ++trial) {
        const int k = 2 + static_cast<int>(rng() % 5);
        auto lp = oracle::random_tensor({k}, rng, -3.0, 3.0);
        auto lq = oracle::random_tensor({k}, rng, -3.0, 3.0);
        auto p = softmax_with_temperature(lp, 1.0);
        auto q = softmax_with_temperature(lq, 1.0);
        const double kl = kl_divergence(p, q)->item();
        CHECK(kl >= 0.0);
        CHECK(kl_divergence(p, p)->item() < 1e-12);
        bool same = true;
        for (std::size_t i = 0; i < p->data.size(); ++i) {
            if (p->data[i] != q->data[i]) same = false;
        }
        if (!same) CHECK(kl > 0.0);
    }
}

TEST_CASE("cross_entropy worked values") {
    auto onehot = make_tensor({3}, {0.0, 1.0, 0.0});
    CHECK(cross_entropy(onehot, onehot)->item() == doctest::Approx(0.0));

    auto pred = make_tensor({2}, {0.5, 0.5});
    auto target = make_tensor({2}, {1.0, 0.0});
    CHECK(cross_entropy(pred, target)->item() == doctest::Approx(std::log(2.0)).epsilon(1e-6));

    auto pred2 = make_tensor({2}, {0.9, 0.1});
    auto smoothed = label_smooth(0, 2, 0.1);
    CHECK(cross_entropy(pred2, smoothed)->item() ==
          doctest::Approx(-(0.95 * std::log(0.9) + 0.05 * std::log(0.1))).epsilon(1e-6));

    auto zero_pred = make_tensor({2}, {0.0, 1.0});
    CHECK_THROWS_AS(cross_entropy(zero_pred, target), DomainError);
}

TEST_CASE("label_smooth worked values") {
    auto a = label_smooth(1, 3, 0.0);
    CHECK(a.distribution == std::vector<double>{0.0, 1.0, 0.0});

    auto b = label_smooth(2, 4, 0.1);
    CHECK(b.distribution[0] == doctest::Approx(0.025));
    CHECK(b.distribution[1] == doctest::Approx(0.025));
    CHECK(b.distribution[2] == doctest::Approx(0.925));
    CHECK(b.distribution[3] == doctest::Approx(0.025));

    auto c = label_smooth(0, 2, 0.5);
    CHECK(c.distribution[0] == doctest::Approx(0.75));
    CHECK(c.distribution[1] == doctest::Approx(0.25));

    CHECK_THROWS_AS(label_smooth(0, 2, 1.0), ParamError);
    CHECK_THROWS_AS(label_smooth(2, 2, 0.1), ParamError);
    CHECK_THROWS_AS(label_smooth(-1, 2, 0.1), ParamError);
    CHECK_THROWS_AS(label_smooth(0, 1, 0.1), ParamError);
}

TEST_CASE("SmoothedLabel invariants over randomized parameters") {
    std::mt19937_64 rng(47);
    for (int trial = 0; trial < 500; ++trial) {
        const int k = 2 + static_cast<int>(rng() % 9);
        const int y = static_cast<int>(rng() % static_cast<std::uint64_t>(k));
        std::uniform_real_distribution<double> adist(0.0, 0.999);
        const double alpha = adist(rng);
        auto s = label_smooth(y, k, alpha);

        double total = 0.0;
        for (double v : s.distribution) total += v;
        CHECK(std::fabs(total - 1.0) < 1e-12);

        if (alpha > 0.0) {
            double mn = s.distribution[0];
            for (double v : s.distribution) mn = std::min(mn, v);
            CHECK(mn == alpha / k);  // exact by construction
        }
        std::size_t argmax = 0;
        for (std::size_t i = 0; i < s.distribution.size(); ++i) {
            if (s.distribution[i] > s.distribution[argmax]) argmax = i;
        }
        CHECK(static_cast<int>(argmax) == y);
    }
}

TEST_CASE("loss gradients match finite differences through softmax routes") {
    std::mt19937_64 rng(53);
    const double tol = 1e-4;
    for (int point = 0; point < 10; ++point) {
        auto lp = oracle::random_tensor({4}, rng, -2.0, 2.0, true);
        auto lq = oracle::random_tensor({4}, rng, -2.0, 2.0, true);
        // KL through both arguments
        CHECK(oracle::fd_max_rel_err({lp, lq}, [&] {
                  auto p = softmax_with_temperature(lp, 2.0);
                  auto q = softmax_with_temperature(lq, 2.0);
                  return kl_divergence(p, q);
              }) < tol);
        // CE through the prediction
        auto target = label_smooth(1, 4, 0.2);
        CHECK(oracle::fd_max_rel_err({lq}, [&] {
                  return cross_entropy(softmax_with_temperature(lq, 1.0), target);
              }) < tol);
    }
}
