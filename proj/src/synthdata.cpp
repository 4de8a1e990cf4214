#include "ck/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

namespace fs = std::filesystem;

namespace ck {

int label_from_params(const SceneParams& params) {
    if (!params.blemishes.empty()) return 2;
    return params.hue < 0.4 ? 0 : 1;
}

namespace {

constexpr double kCellPx = 8.0;  // detector grid pitch the generator respects

bool blemish_placement_ok(const SceneParams& params, const Blemish& b) {
    // fully inside the fruit disk
    const double d = std::hypot(b.cx - params.fruit_cx, b.cy - params.fruit_cy);
    if (d + std::hypot(b.rx, b.ry) + 0.5 > params.fruit_radius) return false;
    // distinct detector cells and a minimum center distance
    for (const auto& other : params.blemishes) {
        if (std::hypot(b.cx - other.cx, b.cy - other.cy) < 10.0) return false;
        if (static_cast<int>(b.cx / kCellPx) == static_cast<int>(other.cx / kCellPx) &&
            static_cast<int>(b.cy / kCellPx) == static_cast<int>(other.cy / kCellPx)) {
            return false;
        }
    }
    return true;
}

}  // namespace

SceneParams make_scene(int target_class, std::uint64_t scene_seed) {
    if (target_class < 0 || target_class > 2) {
        throw ParamError("make_scene: class must be 0, 1, or 2");
    }
    std::mt19937_64 rng(scene_seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);

    SceneParams p;
    p.seed = scene_seed;
    p.fruit_cx = 32.0 + (u01(rng) * 4.0 - 2.0);
    p.fruit_cy = 32.0 + (u01(rng) * 4.0 - 2.0);
    p.fruit_radius = 20.0 + u01(rng) * 6.0;
    switch (target_class) {
        case 0: p.hue = 0.05 + u01(rng) * 0.33; break;   // < 0.4
        case 1: p.hue = 0.42 + u01(rng) * 0.53; break;   // >= 0.4, no blemishes
        default: p.hue = 0.05 + u01(rng) * 0.90; break;  // any hue, blemished
    }
    p.noise_amp = 0.005 + u01(rng) * 0.025;

    if (target_class == 2) {
        const int want = 1 + static_cast<int>(u01(rng) * 3.0);  // 1..3
        for (int i = 0; i < want; ++i) {
            for (int attempt = 0; attempt < 100; ++attempt) {
                Blemish b;
                b.rx = 4.0 + u01(rng) * 5.0;
                b.ry = 4.0 + u01(rng) * 5.0;
                const double theta = u01(rng) * 2.0 * M_PI;
                const double reach = p.fruit_radius - std::hypot(b.rx, b.ry) - 1.0;
                const double dist = u01(rng) * std::max(0.0, reach);
                b.cx = p.fruit_cx + dist * std::cos(theta);
                b.cy = p.fruit_cy + dist * std::sin(theta);
                b.darkness = 0.05 + u01(rng) * 0.25;
                if (blemish_placement_ok(p, b)) {
                    p.blemishes.push_back(b);
                    break;
                }
            }
        }
        if (p.blemishes.empty()) {
            // guaranteed fallback: center blemish always fits
            p.blemishes.push_back({p.fruit_cx, p.fruit_cy, 3.0, 3.0, 0.3});
        }
    }
    return p;
}

std::vector<Detection> boxes_from_params(const SceneParams& params) {
    std::vector<Detection> out;
    for (const auto& b : params.blemishes) {
        out.push_back({0, {b.cx - b.rx, b.cy - b.ry, b.cx + b.rx, b.cy + b.ry}, 1.0});
    }
    return out;
}

TensorPtr render_scene(const SceneParams& params) {
    const int s = kImageSize;
    std::vector<double> img(static_cast<std::size_t>(3 * s * s));
    std::mt19937_64 noise_rng(params.seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> noise(-params.noise_amp, params.noise_amp);

    // unripe green blends toward ripe red as the hue rises
    const double t = params.hue;
    const double base[3] = {0.20 + t * 0.62, 0.70 - t * 0.58, 0.22 - t * 0.14};
    const double background[3] = {0.50, 0.50, 0.50};

    const double r2_max = params.fruit_radius * params.fruit_radius;
    for (int y = 0; y < s; ++y) {
        for (int x = 0; x < s; ++x) {
            const double px = x + 0.5, py = y + 0.5;
            const double dx = px - params.fruit_cx, dy = py - params.fruit_cy;
            const double r2 = dx * dx + dy * dy;
            double color[3];
            if (r2 <= r2_max) {
                const double shade = 1.0 - 0.25 * r2 / r2_max;
                for (int c = 0; c < 3; ++c) color[c] = base[c] * shade;
                for (const auto& b : params.blemishes) {
                    const double ex = (px - b.cx) / b.rx, ey = (py - b.cy) / b.ry;
                    if (ex * ex + ey * ey <= 1.0) {
                        for (int c = 0; c < 3; ++c) color[c] *= b.darkness;
                    }
                }
            } else {
                for (int c = 0; c < 3; ++c) color[c] = background[c];
            }
            for (int c = 0; c < 3; ++c) {
                const double v = color[c] + noise(noise_rng);
                img[static_cast<std::size_t>((c * s + y) * s + x)] = std::clamp(v, 0.0, 1.0);
            }
        }
    }
    return make_tensor({3, s, s}, std::move(img));
}

std::vector<const Sample*> Dataset::train() const {
    std::vector<const Sample*> out;
    for (const auto& s : samples) {
        if (!s.test_split) out.push_back(&s);
    }
    return out;
}

std::vector<const Sample*> Dataset::test() const {
    std::vector<const Sample*> out;
    for (const auto& s : samples) {
        if (s.test_split) out.push_back(&s);
    }
    return out;
}

Dataset generate_dataset(int n, const std::array<double, 3>& balance, std::uint64_t seed) {
    if (n < 1) throw ParamError("generate_dataset: n must be >= 1");
    double bsum = 0.0;
    for (double b : balance) {
        if (b < 0.0) throw ParamError("generate_dataset: balance entries must be nonnegative");
        bsum += b;
    }
    if (std::fabs(bsum - 1.0) > 1e-6) {
        throw ParamError("generate_dataset: balance sums to " + std::to_string(bsum) +
                         ", expected 1");
    }

    // largest-remainder quota allocation
    std::array<int, 3> counts{};
    std::array<double, 3> rem{};
    int assigned = 0;
    for (int c = 0; c < 3; ++c) {
        const double exact = balance[static_cast<std::size_t>(c)] * n;
        counts[static_cast<std::size_t>(c)] = static_cast<int>(std::floor(exact));
        rem[static_cast<std::size_t>(c)] = exact - std::floor(exact);
        assigned += counts[static_cast<std::size_t>(c)];
    }
    while (assigned < n) {
        int best = 0;
        for (int c = 1; c < 3; ++c) {
            if (rem[static_cast<std::size_t>(c)] > rem[static_cast<std::size_t>(best)]) best = c;
        }
        ++counts[static_cast<std::size_t>(best)];
        rem[static_cast<std::size_t>(best)] = -1.0;
        ++assigned;
    }

    std::vector<int> classes;
    classes.reserve(static_cast<std::size_t>(n));
    for (int c = 0; c < 3; ++c) {
        classes.insert(classes.end(), static_cast<std::size_t>(counts[static_cast<std::size_t>(c)]),
                       c);
    }
    std::mt19937_64 rng(seed);
    std::shuffle(classes.begin(), classes.end(), rng);

    Dataset ds;
    ds.seed = seed;
    ds.balance = balance;
    for (int i = 0; i < n; ++i) {
        const std::uint64_t scene_seed = rng();
        const int cls = classes[static_cast<std::size_t>(i)];
        SceneParams p = make_scene(cls, scene_seed);
        Sample s;
        s.image = render_scene(p);
        s.label = label_from_params(p);
        s.boxes = boxes_from_params(p);
        s.seed = scene_seed;
        s.synthetic = false;
        ds.samples.push_back(std::move(s));
    }

    // 75/25 split by position in a seeded shuffle of the indices
    std::vector<int> order(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    std::shuffle(order.begin(), order.end(), rng);
    for (int pos = 0; pos < n; ++pos) {
        if (pos % 4 == 3) ds.samples[static_cast<std::size_t>(order[static_cast<std::size_t>(pos)])].test_split = true;
    }
    return ds;
}

void write_ppm(const std::string& path, const Tensor& image) {
    if (image.shape.size() != 3 || image.shape[0] != 3) {
        throw DataError("write_ppm: expected [3,H,W] image, got " + shape_str(image.shape));
    }
    const std::int64_t h = image.shape[1], w = image.shape[2];
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("write_ppm: cannot open " + path);
    os << "P6\n" << w << " " << h << "\n255\n";
    std::vector<unsigned char> row(static_cast<std::size_t>(w * 3));
    for (std::int64_t y = 0; y < h; ++y) {
        for (std::int64_t x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                const double v = image.data[static_cast<std::size_t>((c * h + y) * w + x)];
                row[static_cast<std::size_t>(x * 3 + c)] =
                    static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
            }
        }
        os.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    if (!os) throw DataError("write_ppm: write failed for " + path);
}

TensorPtr read_ppm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("read_ppm: cannot open " + path);
    std::string magic;
    is >> magic;
    if (magic != "P6") throw DataError("read_ppm: not a binary P6 pixmap: " + path);
    long w = 0, h = 0, maxval = 0;
    is >> w >> h >> maxval;
    if (w <= 0 || h <= 0 || maxval != 255) throw DataError("read_ppm: bad header in " + path);
    is.get();  // single whitespace after maxval
    std::vector<unsigned char> raw(static_cast<std::size_t>(w * h * 3));
    is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!is) throw DataError("read_ppm: truncated pixel data in " + path);
    std::vector<double> img(raw.size());
    for (long y = 0; y < h; ++y) {
        for (long x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                img[static_cast<std::size_t>((c * h + y) * w + x)] =
                    raw[static_cast<std::size_t>((y * w + x) * 3 + c)] / 255.0;
            }
        }
    }
    return make_tensor({3, h, w}, std::move(img));
}

void draw_box_outline(Tensor& image, const Box& box, double r, double g, double b) {
    const std::int64_t h = image.shape[1], w = image.shape[2];
    const auto x0 = static_cast<std::int64_t>(std::clamp(std::floor(box.x_min), 0.0, double(w - 1)));
    const auto x1 = static_cast<std::int64_t>(std::clamp(std::ceil(box.x_max) - 1, 0.0, double(w - 1)));
    const auto y0 = static_cast<std::int64_t>(std::clamp(std::floor(box.y_min), 0.0, double(h - 1)));
    const auto y1 = static_cast<std::int64_t>(std::clamp(std::ceil(box.y_max) - 1, 0.0, double(h - 1)));
    auto put = [&](std::int64_t x, std::int64_t y) {
        image.data[static_cast<std::size_t>((0 * h + y) * w + x)] = r;
        image.data[static_cast<std::size_t>((1 * h + y) * w + x)] = g;
        image.data[static_cast<std::size_t>((2 * h + y) * w + x)] = b;
    };
    for (std::int64_t x = x0; x <= x1; ++x) {
        put(x, y0);
        put(x, y1);
    }
    for (std::int64_t y = y0; y <= y1; ++y) {
        put(x0, y);
        put(x1, y);
    }
}

namespace {

nlohmann::json box_to_json(const Detection& d) {
    return {{"class", d.class_id},
            {"x_min", d.box.x_min},
            {"y_min", d.box.y_min},
            {"x_max", d.box.x_max},
            {"y_max", d.box.y_max}};
}

Detection box_from_json(const nlohmann::json& j) {
    Detection d;
    d.class_id = j.value("class", 0);
    d.box = {j.at("x_min").get<double>(), j.at("y_min").get<double>(),
             j.at("x_max").get<double>(), j.at("y_max").get<double>()};
    d.score = 1.0;
    return d;
}

}  // namespace

void save_dataset(const std::string& dir, const Dataset& ds, bool force) {
    fs::path root(dir);
    if (fs::exists(root) && !fs::is_empty(root) && !force) {
        throw DataError("save_dataset: output directory " + dir +
                        " is not empty (use force to overwrite)");
    }
    fs::create_directories(root);

    nlohmann::json manifest;
    manifest["format"] = "compresskit-dataset";
    manifest["image_size"] = ds.image_size;
    manifest["seed"] = ds.seed;
    manifest["balance"] = ds.balance;
    manifest["n"] = ds.samples.size();
    manifest["augment_log"] = ds.augment_log;
    nlohmann::json samples = nlohmann::json::array();
    char name[32];
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        const auto& s = ds.samples[i];
        std::snprintf(name, sizeof(name), "img_%05zu.ppm", i);
        write_ppm((root / name).string(), *s.image);
        nlohmann::json boxes = nlohmann::json::array();
        for (const auto& b : s.boxes) boxes.push_back(box_to_json(b));
        samples.push_back({{"file", name},
                           {"class", s.label},
                           {"split", s.test_split ? "test" : "train"},
                           {"synthetic", s.synthetic},
                           {"scene_seed", s.seed},
                           {"boxes", boxes}});
    }
    manifest["samples"] = samples;
    std::ofstream os(root / "manifest.json");
    if (!os) throw DataError("save_dataset: cannot write manifest in " + dir);
    os << manifest.dump(2) << "\n";
}

Dataset load_dataset(const std::string& dir) {
    fs::path root(dir);
    std::ifstream is(root / "manifest.json");
    if (!is) throw DataError("load_dataset: missing manifest.json in " + dir);
    nlohmann::json manifest;
    is >> manifest;
    if (manifest.value("format", "") != "compresskit-dataset") {
        throw DataError("load_dataset: unrecognized manifest format in " + dir);
    }
    Dataset ds;
    ds.image_size = manifest.value("image_size", kImageSize);
    ds.seed = manifest.value("seed", 0ULL);
    if (manifest.contains("balance")) {
        auto b = manifest["balance"];
        for (int c = 0; c < 3; ++c) ds.balance[static_cast<std::size_t>(c)] = b.at(c).get<double>();
    }
    ds.augment_log = manifest.value("augment_log", nlohmann::json::array());
    for (const auto& sj : manifest.at("samples")) {
        Sample s;
        s.image = read_ppm((root / sj.at("file").get<std::string>()).string());
        s.label = sj.at("class").get<int>();
        s.test_split = sj.value("split", "train") == "test";
        s.synthetic = sj.value("synthetic", false);
        s.seed = sj.value("scene_seed", 0ULL);
        for (const auto& bj : sj.value("boxes", nlohmann::json::array())) {
            s.boxes.push_back(box_from_json(bj));
        }
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

}  // namespace ck
