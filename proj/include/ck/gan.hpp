#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ck/synthdata.hpp"
#include "ck/tensor.hpp"

namespace ck {

// Two-layer MLP generator (latent -> sigmoid image) and discriminator
// (image -> real-score logit), trained with the non-saturating losses
// L_D = -ln D(x) - ln(1 - D(G(z))) and L_G = -ln D(G(z)).
struct GanPair {
    int latent_dim = 16;
    int hidden = 32;
    int out_dim = 3 * kImageSize * kImageSize;
    int target_class = 2;
    std::uint64_t seed = 1;

    TensorPtr g_w1, g_b1, g_w2, g_b2;
    TensorPtr d_w1, d_b1, d_w2, d_b2;

    std::vector<TensorPtr> generator_params() const;
    std::vector<TensorPtr> discriminator_params() const;
};

GanPair gan_init(int latent_dim, int hidden, int out_dim, int target_class, std::uint64_t seed);

// z: [1, latent] -> image logits through sigmoid: [1, out_dim] in (0,1).
TensorPtr generator_forward(const GanPair& gan, const TensorPtr& z);

// x: [1, out_dim] -> logit [1,1]; D(x) = sigmoid of this.
TensorPtr discriminator_logit(const GanPair& gan, const TensorPtr& x);

struct GanLog {
    std::vector<double> d_loss;  // per optimization step
    std::vector<double> g_loss;
};

// -ln D(x) - ln(1 - D(G(z))) for one real/fake pair, via stable softplus.
TensorPtr gan_d_loss(const GanPair& gan, const TensorPtr& real_flat, const TensorPtr& fake_flat);

// -ln D(G(z)) for one latent draw.
TensorPtr gan_g_loss(const GanPair& gan, const TensorPtr& z);

// Alternating D/G steps over the real set; throws TrainError naming the step
// on a non-finite loss. Requires at least 16 real samples.
GanLog gan_train(GanPair& gan, const std::vector<TensorPtr>& real_flat, int epochs, int batch,
                 double lr, std::uint64_t seed);

TensorPtr sample_latent(const GanPair& gan, std::mt19937_64& rng);

// Generates one [3,64,64] image.
TensorPtr gan_generate_image(const GanPair& gan, std::mt19937_64& rng);

// Appends k generated, synthetic-flagged samples of the GAN's target class
// to the dataset's train split.
void augment(Dataset& ds, const GanPair& gan, int k, int target_class, std::uint64_t seed);

void save_gan(const std::string& dir, const GanPair& gan);
GanPair load_gan(const std::string& dir);

// Flattens a [3,H,W] image to the GAN's [1, out_dim] layout.
TensorPtr flatten_image(const Tensor& image);

}  // namespace ck
