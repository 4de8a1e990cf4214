#include "ck/gan.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "ck/ops.hpp"
#include "ck/serialize.hpp"

namespace fs = std::filesystem;

namespace ck {

namespace {

TensorPtr init_mat(std::int64_t rows, std::int64_t cols, std::mt19937_64& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(rows));
    std::uniform_real_distribution<double> dist(-bound, bound);
    std::vector<double> v(static_cast<std::size_t>(rows * cols));
    for (auto& x : v) x = dist(rng);
    return make_tensor({rows, cols}, std::move(v), true);
}

TensorPtr init_zero_row(std::int64_t cols) {
    return make_tensor({1, cols}, std::vector<double>(static_cast<std::size_t>(cols), 0.0), true);
}

void sgd(const std::vector<TensorPtr>& params, double lr) {
    for (const auto& p : params) {
        if (p->grad.size() != p->data.size()) continue;
        for (std::size_t i = 0; i < p->data.size(); ++i) p->data[i] -= lr * p->grad[i];
    }
}

void zero(const std::vector<TensorPtr>& params) {
    for (const auto& p : params) p->zero_grad();
}

}  // namespace

std::vector<TensorPtr> GanPair::generator_params() const {
    return {g_w1, g_b1, g_w2, g_b2};
}

std::vector<TensorPtr> GanPair::discriminator_params() const {
    return {d_w1, d_b1, d_w2, d_b2};
}

GanPair gan_init(int latent_dim, int hidden, int out_dim, int target_class, std::uint64_t seed) {
    if (latent_dim < 1 || hidden < 1 || out_dim < 1) {
        throw ParamError("gan_init: dimensions must be positive");
    }
    GanPair g;
    g.latent_dim = latent_dim;
    g.hidden = hidden;
    g.out_dim = out_dim;
    g.target_class = target_class;
    g.seed = seed;
    std::mt19937_64 rng(seed);
    g.g_w1 = init_mat(latent_dim, hidden, rng);
    g.g_b1 = init_zero_row(hidden);
    g.g_w2 = init_mat(hidden, out_dim, rng);
    g.g_b2 = init_zero_row(out_dim);
    g.d_w1 = init_mat(out_dim, hidden, rng);
    g.d_b1 = init_zero_row(hidden);
    g.d_w2 = init_mat(hidden, 1, rng);
    g.d_b2 = init_zero_row(1);
    return g;
}

TensorPtr generator_forward(const GanPair& gan, const TensorPtr& z) {
    auto h = relu(add(matmul(z, gan.g_w1), gan.g_b1));
    return sigmoid(add(matmul(h, gan.g_w2), gan.g_b2));
}

TensorPtr discriminator_logit(const GanPair& gan, const TensorPtr& x) {
    auto h = relu(add(matmul(x, gan.d_w1), gan.d_b1));
    return add(matmul(h, gan.d_w2), gan.d_b2);
}

TensorPtr sample_latent(const GanPair& gan, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, 1.0);
    std::vector<double> v(static_cast<std::size_t>(gan.latent_dim));
    for (auto& x : v) x = dist(rng);
    return make_tensor({1, gan.latent_dim}, std::move(v));
}

TensorPtr gan_generate_image(const GanPair& gan, std::mt19937_64& rng) {
    NoGradGuard ng;
    auto flat = generator_forward(gan, sample_latent(gan, rng));
    const int s = kImageSize;
    if (gan.out_dim != 3 * s * s) {
        throw ConfigError("gan_generate_image: generator output is not a 3x64x64 image");
    }
    return make_tensor({3, s, s}, flat->data);
}

TensorPtr flatten_image(const Tensor& image) {
    return make_tensor({1, static_cast<std::int64_t>(image.data.size())}, image.data);
}

TensorPtr gan_d_loss(const GanPair& gan, const TensorPtr& real_flat, const TensorPtr& fake_flat) {
    auto term_real = softplus(scale(discriminator_logit(gan, real_flat), -1.0));
    auto term_fake = softplus(discriminator_logit(gan, fake_flat));
    return reshape(add(term_real, term_fake), {1});
}

TensorPtr gan_g_loss(const GanPair& gan, const TensorPtr& z) {
    auto img = generator_forward(gan, z);
    return reshape(softplus(scale(discriminator_logit(gan, img), -1.0)), {1});
}

GanLog gan_train(GanPair& gan, const std::vector<TensorPtr>& real_flat, int epochs, int batch,
                 double lr, std::uint64_t seed) {
    if (real_flat.size() < 16) {
        throw ParamError("gan_train: need at least 16 real samples, got " +
                         std::to_string(real_flat.size()));
    }
    if (batch < 1 || epochs < 0 || !(lr > 0.0)) {
        throw ParamError("gan_train: invalid batch/epochs/lr");
    }
    std::mt19937_64 rng(seed);
    GanLog log;
    auto gen_params = gan.generator_params();
    auto disc_params = gan.discriminator_params();
    std::vector<std::size_t> order(real_flat.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    int step = 0;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start + batch <= order.size(); start += batch) {
            // discriminator step: fakes are detached
            std::vector<TensorPtr> fakes;
            {
                NoGradGuard ng;
                for (int i = 0; i < batch; ++i) {
                    fakes.push_back(generator_forward(gan, sample_latent(gan, rng)));
                }
            }
            Tape d_tape;
            double d_loss_val = 0.0;
            {
                Tape::Scope scope(d_tape);
                TensorPtr loss;
                for (int i = 0; i < batch; ++i) {
                    const auto& real = real_flat[order[start + static_cast<std::size_t>(i)]];
                    auto pair_loss = gan_d_loss(gan, real, fakes[static_cast<std::size_t>(i)]);
                    loss = loss ? add(loss, pair_loss) : pair_loss;
                }
                loss = scale(loss, 1.0 / batch);
                d_loss_val = loss->item();
                if (!std::isfinite(d_loss_val)) {
                    throw TrainError("gan_train: non-finite discriminator loss at step " +
                                     std::to_string(step));
                }
                zero(disc_params);
                d_tape.backward(loss);
                sgd(disc_params, lr);
            }

            // generator step: loss flows through a frozen discriminator
            Tape g_tape;
            double g_loss_val = 0.0;
            {
                Tape::Scope scope(g_tape);
                TensorPtr loss;
                for (int i = 0; i < batch; ++i) {
                    auto term = gan_g_loss(gan, sample_latent(gan, rng));
                    loss = loss ? add(loss, term) : term;
                }
                loss = scale(loss, 1.0 / batch);
                g_loss_val = loss->item();
                if (!std::isfinite(g_loss_val)) {
                    throw TrainError("gan_train: non-finite generator loss at step " +
                                     std::to_string(step));
                }
                zero(gen_params);
                zero(disc_params);
                g_tape.backward(loss);
                sgd(gen_params, lr);
                zero(disc_params);  // discriminator stays frozen in this step
            }

            log.d_loss.push_back(d_loss_val);
            log.g_loss.push_back(g_loss_val);
            ++step;
        }
    }
    return log;
}

void augment(Dataset& ds, const GanPair& gan, int k, int target_class, std::uint64_t seed) {
    if (k < 0) throw ParamError("augment: k must be nonnegative");
    if (target_class != gan.target_class) {
        throw ConfigError("augment: GAN was trained for class " + std::to_string(gan.target_class) +
                          ", requested class " + std::to_string(target_class));
    }
    std::mt19937_64 rng(seed);
    for (int i = 0; i < k; ++i) {
        Sample s;
        s.image = gan_generate_image(gan, rng);
        s.label = target_class;
        s.synthetic = true;
        s.seed = seed;
        s.test_split = false;
        ds.samples.push_back(std::move(s));
    }
    ds.augment_log.push_back({{"k", k}, {"class", target_class}, {"seed", seed}});
}

void save_gan(const std::string& dir, const GanPair& gan) {
    fs::create_directories(dir);
    nlohmann::json meta = {{"format", "compresskit-gan"},
                           {"latent_dim", gan.latent_dim},
                           {"hidden", gan.hidden},
                           {"out_dim", gan.out_dim},
                           {"target_class", gan.target_class},
                           {"seed", gan.seed}};
    std::ofstream os(fs::path(dir) / "gan.json");
    if (!os) throw DataError("save_gan: cannot write " + dir);
    os << meta.dump(2) << "\n";
    std::vector<TensorPtr> tensors = {gan.g_w1, gan.g_b1, gan.g_w2, gan.g_b2,
                                      gan.d_w1, gan.d_b1, gan.d_w2, gan.d_b2};
    save_tensors((fs::path(dir) / "params.ckt").string(), tensors);
}

GanPair load_gan(const std::string& dir) {
    std::ifstream is(fs::path(dir) / "gan.json");
    if (!is) throw ConfigError("load_gan: missing gan.json in " + dir);
    nlohmann::json meta;
    is >> meta;
    if (meta.value("format", "") != "compresskit-gan") {
        throw DataError("load_gan: unrecognized format in " + dir);
    }
    GanPair g = gan_init(meta.at("latent_dim").get<int>(), meta.at("hidden").get<int>(),
                         meta.at("out_dim").get<int>(), meta.at("target_class").get<int>(),
                         meta.value("seed", 1ULL));
    auto tensors = load_tensors((fs::path(dir) / "params.ckt").string());
    std::vector<TensorPtr> dst = {g.g_w1, g.g_b1, g.g_w2, g.g_b2, g.d_w1, g.d_b1, g.d_w2, g.d_b2};
    if (tensors.size() != dst.size()) throw DataError("load_gan: wrong tensor count in " + dir);
    for (std::size_t i = 0; i < dst.size(); ++i) {
        if (tensors[i]->shape != dst[i]->shape) throw DataError("load_gan: tensor shape mismatch");
        dst[i]->data = tensors[i]->data;
    }
    return g;
}

}  // namespace ck
