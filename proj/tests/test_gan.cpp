#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "ck/gan.hpp"
#include "ck/ops.hpp"
#include "testutil.hpp"

using namespace ck;
namespace fs = std::filesystem;

TEST_CASE("chance-level discriminator pays exactly 2 ln 2 per pair") {
    GanPair gan = gan_init(2, 3, 4, 2, 1);
    for (auto& t : gan.discriminator_params()) t->data.assign(t->data.size(), 0.0);
    std::mt19937_64 rng(5);
    auto real = oracle::random_tensor({1, 4}, rng, 0.0, 1.0);
    auto fake = oracle::random_tensor({1, 4}, rng, 0.0, 1.0);
    CHECK(gan_d_loss(gan, real, fake)->item() ==
          doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("zero-weight generator emits constant 0.5 images") {
    GanPair gan = gan_init(16, 32, 3 * 64 * 64, 2, 1);
    for (auto& t : gan.generator_params()) t->data.assign(t->data.size(), 0.0);
    std::mt19937_64 rng(7);
    auto img = gan_generate_image(gan, rng);
    REQUIRE(img->shape == std::vector<std::int64_t>{3, 64, 64});
    for (double v : img->data) CHECK(v == 0.5);
}

TEST_CASE("generator outputs stay strictly inside (0,1)") {
    std::mt19937_64 rng(9);
    GanPair gan = gan_init(4, 8, 16, 2, 3);
    for (int i = 0; i < 20; ++i) {
        auto out = generator_forward(gan, sample_latent(gan, rng));
        for (double v : out->data) {
            CHECK(v > 0.0);
            CHECK(v < 1.0);
        }
    }
}

TEST_CASE("both GAN losses pass finite differences on a 4-pixel toy instance") {
    std::mt19937_64 rng(11);
    const double tol = 1e-4;
    for (int point = 0; point < 10; ++point) {
        GanPair gan = gan_init(2, 3, 4, 2, rng());
        auto real = oracle::random_tensor({1, 4}, rng, 0.05, 0.95);
        auto fake = oracle::random_tensor({1, 4}, rng, 0.05, 0.95);
        auto z = sample_latent(gan, rng);

        CHECK(oracle::fd_max_rel_err(gan.discriminator_params(),
                                     [&] { return gan_d_loss(gan, real, fake); }) < tol);
        std::vector<TensorPtr> all = gan.generator_params();
        for (auto& p : gan.discriminator_params()) all.push_back(p);
        CHECK(oracle::fd_max_rel_err(all, [&] { return gan_g_loss(gan, z); }) < tol);
    }
}

TEST_CASE("gan_train rejects tiny real sets and logs finite losses") {
    GanPair gan = gan_init(2, 3, 4, 2, 1);
    std::mt19937_64 rng(13);
    std::vector<TensorPtr> few = {oracle::random_tensor({1, 4}, rng, 0.0, 1.0)};
    CHECK_THROWS_AS(gan_train(gan, few, 1, 1, 0.1, 1), ParamError);

    std::vector<TensorPtr> reals;
    for (int i = 0; i < 16; ++i) reals.push_back(oracle::random_tensor({1, 4}, rng, 0.2, 0.8));
    auto log = gan_train(gan, reals, 10, 8, 0.05, 2);
    CHECK(log.d_loss.size() == 20);  // 2 batches x 10 epochs
    for (double v : log.d_loss) CHECK(std::isfinite(v));
    for (double v : log.g_loss) CHECK(std::isfinite(v));
}

TEST_CASE("gan training is seed-deterministic") {
    std::mt19937_64 rng(17);
    std::vector<TensorPtr> reals;
    for (int i = 0; i < 16; ++i) reals.push_back(oracle::random_tensor({1, 4}, rng, 0.2, 0.8));
    auto run = [&](std::uint64_t seed) {
        GanPair gan = gan_init(2, 3, 4, 2, 21);
        gan_train(gan, reals, 5, 8, 0.05, seed);
        return gan;
    };
    GanPair a = run(3), b = run(3), c = run(4);
    for (std::size_t i = 0; i < a.g_w1->data.size(); ++i) {
        CHECK(a.g_w1->data[i] == b.g_w1->data[i]);
    }
    bool differs = false;
    for (std::size_t i = 0; i < a.g_w1->data.size(); ++i) {
        if (a.g_w1->data[i] != c.g_w1->data[i]) differs = true;
    }
    CHECK(differs);
}

TEST_CASE("augment appends exactly k flagged samples of the target class") {
    Dataset ds = generate_dataset(12, {0.0, 0.0, 1.0}, 3);
    const std::size_t before = ds.samples.size();
    GanPair gan = gan_init(16, 32, 3 * 64 * 64, 2, 1);

    augment(ds, gan, 0, 2, 5);
    CHECK(ds.samples.size() == before);  // only the audit log grows
    CHECK(ds.augment_log.size() == 1);

    augment(ds, gan, 50, 2, 5);
    REQUIRE(ds.samples.size() == before + 50);
    int flagged = 0;
    for (const auto& s : ds.samples) {
        if (s.synthetic) {
            ++flagged;
            CHECK(s.label == 2);
            CHECK_FALSE(s.test_split);
            for (double v : s.image->data) {
                CHECK(v > 0.0);
                CHECK(v < 1.0);
            }
        }
    }
    CHECK(flagged == 50);
    CHECK_THROWS_AS(augment(ds, gan, -1, 2, 5), ParamError);
    CHECK_THROWS_AS(augment(ds, gan, 1, 0, 5), ConfigError);  // class mismatch
}

TEST_CASE("gan checkpoint round-trip") {
    const auto dir = fs::temp_directory_path() / "ck_test_gan";
    fs::remove_all(dir);
    GanPair gan = gan_init(4, 8, 16, 2, 77);
    save_gan(dir.string(), gan);
    GanPair back = load_gan(dir.string());
    CHECK(back.latent_dim == 4);
    CHECK(back.target_class == 2);
    for (std::size_t i = 0; i < gan.g_w2->data.size(); ++i) {
        CHECK(back.g_w2->data[i] == gan.g_w2->data[i]);
    }
    fs::remove_all(dir);
    CHECK_THROWS_AS(load_gan(dir.string()), ConfigError);
}
