#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "ck/detection.hpp"
#include "ck/tensor.hpp"

namespace ck {

inline constexpr int kImageSize = 64;

struct Blemish {
    double cx = 0.0;
    double cy = 0.0;
    double rx = 2.0;  // semi-axes, >= 2 px
    double ry = 2.0;
    double darkness = 0.3;  // multiplicative factor inside the ellipse
};

// Everything needed to re-render one scene; the label is a pure function of
// these fields.
struct SceneParams {
    std::uint64_t seed = 0;
    double hue = 0.5;  // < 0.4 reads as unripe
    double fruit_cx = 32.0;
    double fruit_cy = 32.0;
    double fruit_radius = 23.0;
    std::vector<Blemish> blemishes;
    double noise_amp = 0.02;
};

// unripe = 0, ripe = 1, defective = 2 (any blemish wins over hue).
int label_from_params(const SceneParams& params);

// Deterministic scene draw for a target class.
SceneParams make_scene(int target_class, std::uint64_t scene_seed);

// Analytic blemish bounding boxes (exact, in pixels, class 0 = damage).
std::vector<Detection> boxes_from_params(const SceneParams& params);

TensorPtr render_scene(const SceneParams& params);

struct Sample {
    TensorPtr image;  // [3,64,64] in [0,1]
    int label = 0;
    std::vector<Detection> boxes;
    bool synthetic = false;  // true for GAN-generated samples
    std::uint64_t seed = 0;
    bool test_split = false;
};

struct Dataset {
    int image_size = kImageSize;
    std::uint64_t seed = 0;
    std::array<double, 3> balance = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    std::vector<Sample> samples;
    nlohmann::json augment_log = nlohmann::json::array();

    std::vector<const Sample*> train() const;
    std::vector<const Sample*> test() const;
};

// Quota class allocation from the balance vector, seeded shuffle, 75/25
// train/test split by shuffled index position (every fourth goes to test).
Dataset generate_dataset(int n, const std::array<double, 3>& balance, std::uint64_t seed);

// On-disk layout: img_%05d.ppm (binary P6) plus manifest.json.
void save_dataset(const std::string& dir, const Dataset& ds, bool force = false);
Dataset load_dataset(const std::string& dir);

void write_ppm(const std::string& path, const Tensor& image);
TensorPtr read_ppm(const std::string& path);

// Burns a 1-px rectangle outline into an image (used for annotation output).
void draw_box_outline(Tensor& image, const Box& box, double r, double g, double b);

}  // namespace ck
