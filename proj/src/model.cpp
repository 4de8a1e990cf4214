#include "ck/model.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "ck/metrics.hpp"
#include "ck/ops.hpp"
#include "ck/serialize.hpp"

namespace fs = std::filesystem;

namespace ck {

void ModelSpec::validate() const {
    if (input_channels < 1 || input_size < 8) {
        throw ConfigError("model spec: input must be at least 8x8 with one channel");
    }
    if (stem_channels < 1) throw ConfigError("model spec: stem channels must be positive");
    if (stages.empty()) throw ConfigError("model spec: stage list is empty");
    for (const auto& s : stages) {
        if (s.channels < 1 || s.blocks < 1 || (s.stride != 1 && s.stride != 2)) {
            throw ConfigError("model spec: invalid stage (channels/blocks positive, stride 1 or 2)");
        }
        if (attention != AttentionMode::none && s.channels % attention_reduction != 0) {
            throw ConfigError("model spec: stage channels " + std::to_string(s.channels) +
                              " not divisible by attention reduction " +
                              std::to_string(attention_reduction));
        }
    }
    if (attention != AttentionMode::none && stem_channels % attention_reduction != 0) {
        throw ConfigError("model spec: stem channels not divisible by attention reduction");
    }
    if (head.classes < 1) throw ConfigError("model spec: head needs at least one class");
    if (head.type == HeadSpec::Type::detector) {
        if (head.grid < 1 || head.boxes < 1) {
            throw ConfigError("model spec: detector grid/boxes must be positive");
        }
        if (feature_map_size() != head.grid) {
            throw ConfigError("model spec: stage strides yield a " +
                              std::to_string(feature_map_size()) + "x" +
                              std::to_string(feature_map_size()) + " map but the detector grid is " +
                              std::to_string(head.grid));
        }
        if (!(anchor_px > 0.0)) throw ConfigError("model spec: anchor must be positive");
    }
}

int ModelSpec::feature_map_size() const {
    int s = (input_size + 2 - 3) / 2 + 1;  // stem conv, stride 2, pad 1
    s /= 2;                                // stem max pool
    for (const auto& st : stages) {
        if (st.stride == 2) s = (s + 2 - 3) / 2 + 1;
    }
    return s;
}

int ModelSpec::feature_channels() const {
    return stages.empty() ? stem_channels : stages.back().channels;
}

namespace {

std::int64_t attention_param_count(AttentionMode mode, int c, int r) {
    const std::int64_t cr = c / r;
    std::int64_t n = 0;
    const bool channel_branch =
        mode == AttentionMode::channel || mode == AttentionMode::cbam || mode == AttentionMode::bam;
    const bool spatial_branch = mode == AttentionMode::spatial || mode == AttentionMode::sam ||
                                mode == AttentionMode::cbam || mode == AttentionMode::bam;
    if (channel_branch) n += static_cast<std::int64_t>(c) * cr + cr * static_cast<std::int64_t>(c);
    if (spatial_branch) n += static_cast<std::int64_t>(c) * cr + cr;
    return n;
}

}  // namespace

std::int64_t ModelSpec::parameter_count() const {
    std::int64_t n = static_cast<std::int64_t>(input_channels) * stem_channels * 9 + stem_channels;
    int in_c = stem_channels;
    for (const auto& st : stages) {
        for (int b = 0; b < st.blocks; ++b) {
            const int stride = b == 0 ? st.stride : 1;
            const std::int64_t ci = in_c, co = st.channels;
            n += ci * co * 9 + co;  // conv1
            n += co * co * 9 + co;  // conv2
            if (stride != 1 || ci != co) n += ci * co + co;  // projection shortcut
            n += attention_param_count(attention, st.channels, attention_reduction);
            in_c = st.channels;
        }
    }
    const std::int64_t cf = feature_channels();
    if (head.type == HeadSpec::Type::classifier) {
        n += cf * head.classes + head.classes;
    } else {
        const std::int64_t d = static_cast<std::int64_t>(head.boxes) * 5 + head.classes;
        n += cf * d + d;
    }
    return n;
}

ModelSpec ModelSpec::teacher_classifier(int classes, AttentionMode attention) {
    ModelSpec s;
    s.stem_channels = 16;
    s.stages = {{16, 2, 1}, {32, 2, 2}, {64, 2, 2}};
    s.attention = attention;
    s.head.type = HeadSpec::Type::classifier;
    s.head.classes = classes;
    return s;
}

ModelSpec ModelSpec::student_classifier(int classes, AttentionMode attention) {
    ModelSpec s;
    s.stem_channels = 8;
    s.stages = {{8, 1, 1}, {16, 1, 2}, {32, 1, 2}};
    s.attention = attention;
    s.head.type = HeadSpec::Type::classifier;
    s.head.classes = classes;
    return s;
}

ModelSpec ModelSpec::teacher_detector(int classes, AttentionMode attention) {
    ModelSpec s;
    s.stem_channels = 16;
    s.stages = {{16, 2, 1}, {32, 2, 2}, {64, 2, 1}};
    s.attention = attention;
    s.head.type = HeadSpec::Type::detector;
    s.head.classes = classes;
    s.head.grid = 8;
    s.head.boxes = 1;
    return s;
}

ModelSpec ModelSpec::student_detector(int classes, AttentionMode attention) {
    ModelSpec s;
    s.stem_channels = 8;
    s.stages = {{8, 1, 1}, {16, 1, 2}, {32, 1, 1}};
    s.attention = attention;
    s.head.type = HeadSpec::Type::detector;
    s.head.classes = classes;
    s.head.grid = 8;
    s.head.boxes = 1;
    return s;
}

nlohmann::json model_spec_to_json(const ModelSpec& spec) {
    nlohmann::json stages = nlohmann::json::array();
    for (const auto& s : spec.stages) {
        stages.push_back({{"channels", s.channels}, {"blocks", s.blocks}, {"stride", s.stride}});
    }
    nlohmann::json head;
    if (spec.head.type == HeadSpec::Type::classifier) {
        head = {{"type", "classifier"}, {"classes", spec.head.classes}};
    } else {
        head = {{"type", "detector"},
                {"classes", spec.head.classes},
                {"grid", spec.head.grid},
                {"boxes", spec.head.boxes}};
    }
    return {{"input_channels", spec.input_channels},
            {"input_size", spec.input_size},
            {"stem_channels", spec.stem_channels},
            {"stages", stages},
            {"attention", to_string(spec.attention)},
            {"attention_reduction", spec.attention_reduction},
            {"anchor_px", spec.anchor_px},
            {"head", head}};
}

ModelSpec model_spec_from_json(const nlohmann::json& j) {
    ModelSpec spec;
    spec.input_channels = j.value("input_channels", 3);
    spec.input_size = j.value("input_size", 64);
    spec.stem_channels = j.value("stem_channels", 16);
    spec.stages.clear();
    if (!j.contains("stages")) throw ConfigError("model spec: missing 'stages'");
    for (const auto& s : j.at("stages")) {
        spec.stages.push_back({s.value("channels", 0), s.value("blocks", 1), s.value("stride", 1)});
    }
    spec.attention = attention_mode_from_string(j.value("attention", "none"));
    spec.attention_reduction = j.value("attention_reduction", 4);
    spec.anchor_px = j.value("anchor_px", 8.0);
    const auto& h = j.at("head");
    const std::string type = h.value("type", "classifier");
    if (type == "classifier") {
        spec.head.type = HeadSpec::Type::classifier;
    } else if (type == "detector") {
        spec.head.type = HeadSpec::Type::detector;
        spec.head.grid = h.value("grid", 8);
        spec.head.boxes = h.value("boxes", 1);
    } else {
        throw ConfigError("model spec: unknown head type '" + type + "'");
    }
    spec.head.classes = h.value("classes", 3);
    spec.validate();
    return spec;
}

namespace {

TensorPtr init_conv(std::int64_t co, std::int64_t ci, std::int64_t k, std::mt19937_64& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(ci * k * k));
    std::uniform_real_distribution<double> dist(-bound, bound);
    std::vector<double> v(static_cast<std::size_t>(co * ci * k * k));
    for (auto& x : v) x = dist(rng);
    return make_tensor({co, ci, k, k}, std::move(v), true);
}

TensorPtr init_linear(std::int64_t in, std::int64_t out, std::mt19937_64& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    std::vector<double> v(static_cast<std::size_t>(in * out));
    for (auto& x : v) x = dist(rng);
    return make_tensor({in, out}, std::move(v), true);
}

TensorPtr zero_bias(std::int64_t n) {
    return make_tensor({n}, std::vector<double>(static_cast<std::size_t>(n), 0.0), true);
}

TensorPtr bias_add(const TensorPtr& x, const TensorPtr& b) {
    return broadcast_add(x, b);
}

TensorPtr block_forward(const ResidualBlock& blk, const TensorPtr& x) {
    auto h = relu(bias_add(conv2d(x, blk.conv1.w, blk.conv1.stride, blk.conv1.padding), blk.conv1.b));
    if (blk.attention) h = attention_forward(h, *blk.attention);
    h = bias_add(conv2d(h, blk.conv2.w, blk.conv2.stride, blk.conv2.padding), blk.conv2.b);
    TensorPtr shortcut = x;
    if (blk.proj) {
        shortcut = bias_add(conv2d(x, blk.proj->w, blk.proj->stride, 0), blk.proj->b);
    }
    return relu(add(h, shortcut));
}

}  // namespace

Model build(const ModelSpec& spec, std::uint64_t seed) {
    spec.validate();
    Model m;
    m.spec = spec;
    std::mt19937_64 rng(seed);

    m.stem.w = init_conv(spec.stem_channels, spec.input_channels, 3, rng);
    m.stem.b = zero_bias(spec.stem_channels);
    m.stem.stride = 2;
    m.stem.padding = 1;

    int in_c = spec.stem_channels;
    for (const auto& st : spec.stages) {
        std::vector<ResidualBlock> blocks;
        for (int b = 0; b < st.blocks; ++b) {
            const int stride = b == 0 ? st.stride : 1;
            ResidualBlock blk;
            blk.conv1 = {init_conv(st.channels, in_c, 3, rng), zero_bias(st.channels), stride, 1};
            blk.conv2 = {init_conv(st.channels, st.channels, 3, rng), zero_bias(st.channels), 1, 1};
            if (stride != 1 || in_c != st.channels) {
                blk.proj = ConvLayer{init_conv(st.channels, in_c, 1, rng), zero_bias(st.channels),
                                     stride, 0};
            }
            if (spec.attention != AttentionMode::none) {
                blk.attention = AttentionBlock::create(spec.attention, st.channels,
                                                       spec.attention_reduction, rng);
            }
            blocks.push_back(std::move(blk));
            in_c = st.channels;
        }
        m.stages.push_back(std::move(blocks));
    }

    const std::int64_t cf = spec.feature_channels();
    if (spec.head.type == HeadSpec::Type::classifier) {
        m.fc.w = init_linear(cf, spec.head.classes, rng);
        m.fc.b = zero_bias(spec.head.classes);
    } else {
        const std::int64_t d = static_cast<std::int64_t>(spec.head.boxes) * 5 + spec.head.classes;
        m.head.w = init_conv(d, cf, 1, rng);
        // a near-zero grid at the start keeps the objectness terms of the
        // detection loss in their well-conditioned region
        for (auto& v : m.head.w->data) v *= 0.1;
        m.head.b = zero_bias(d);
        m.head.stride = 1;
        m.head.padding = 0;
    }
    return m;
}

std::vector<std::pair<std::string, TensorPtr>> Model::named_params() const {
    std::vector<std::pair<std::string, TensorPtr>> out;
    out.emplace_back("stem.w", stem.w);
    out.emplace_back("stem.b", stem.b);
    for (std::size_t s = 0; s < stages.size(); ++s) {
        for (std::size_t b = 0; b < stages[s].size(); ++b) {
            const auto& blk = stages[s][b];
            const std::string p = "s" + std::to_string(s) + ".b" + std::to_string(b);
            out.emplace_back(p + ".conv1.w", blk.conv1.w);
            out.emplace_back(p + ".conv1.b", blk.conv1.b);
            out.emplace_back(p + ".conv2.w", blk.conv2.w);
            out.emplace_back(p + ".conv2.b", blk.conv2.b);
            if (blk.proj) {
                out.emplace_back(p + ".proj.w", blk.proj->w);
                out.emplace_back(p + ".proj.b", blk.proj->b);
            }
            if (blk.attention) {
                for (auto& np : blk.attention->named_params(p + ".attn")) out.push_back(np);
            }
        }
    }
    if (spec.head.type == HeadSpec::Type::classifier) {
        out.emplace_back("fc.w", fc.w);
        out.emplace_back("fc.b", fc.b);
    } else {
        out.emplace_back("head.w", head.w);
        out.emplace_back("head.b", head.b);
    }
    return out;
}

std::vector<TensorPtr> Model::params() const {
    std::vector<TensorPtr> out;
    for (auto& [name, t] : named_params()) out.push_back(t);
    return out;
}

std::int64_t Model::parameter_count() const {
    std::int64_t n = 0;
    for (const auto& t : params()) n += t->size();
    return n;
}

Model clone_model(const Model& m) {
    Model c = build(m.spec, 0);
    auto src = m.params();
    auto dst = c.params();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i]->data = src[i]->data;
    return c;
}

TensorPtr forward_features(const Model& m, const TensorPtr& image) {
    if (image->shape.size() != 3 || image->shape[0] != m.spec.input_channels ||
        image->shape[1] != m.spec.input_size || image->shape[2] != m.spec.input_size) {
        throw ShapeError("forward: image " + shape_str(image->shape) + " does not match spec [" +
                         std::to_string(m.spec.input_channels) + "x" +
                         std::to_string(m.spec.input_size) + "x" +
                         std::to_string(m.spec.input_size) + "]");
    }
    auto h = max_pool2(relu(bias_add(conv2d(image, m.stem.w, m.stem.stride, m.stem.padding),
                                     m.stem.b)));
    for (const auto& stage : m.stages) {
        for (const auto& blk : stage) h = block_forward(blk, h);
    }
    return h;
}

TensorPtr forward_classify(const Model& m, const TensorPtr& image) {
    if (m.spec.head.type != HeadSpec::Type::classifier) {
        throw ConfigError("forward_classify: model has a detector head");
    }
    auto feats = global_avg_pool(forward_features(m, image));
    auto logits = bias_add(matmul(reshape(feats, {1, m.spec.feature_channels()}), m.fc.w), m.fc.b);
    return reshape(logits, {m.spec.head.classes});
}

TensorPtr forward_grid(const Model& m, const TensorPtr& image) {
    if (m.spec.head.type != HeadSpec::Type::detector) {
        throw ConfigError("forward_grid: model has a classifier head");
    }
    auto feats = forward_features(m, image);
    return bias_add(conv2d(feats, m.head.w, 1, 0), m.head.b);
}

namespace {

double sigmoid_scalar(double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace

std::vector<Detection> decode_grid(const ModelSpec& spec, const Tensor& grid,
                                   double score_threshold) {
    const int g = spec.head.grid, nb = spec.head.boxes, k = spec.head.classes;
    const std::int64_t d = static_cast<std::int64_t>(nb) * 5 + k;
    if (grid.shape.size() != 3 || grid.shape[0] != d || grid.shape[1] != g || grid.shape[2] != g) {
        throw ShapeError("decode_grid: grid " + shape_str(grid.shape) + " does not match head");
    }
    const double cell_px = static_cast<double>(spec.input_size) / g;
    auto at = [&](std::int64_t ch, int r, int c) {
        return grid.data[static_cast<std::size_t>((ch * g + r) * g + c)];
    };
    std::vector<Detection> dets;
    for (int r = 0; r < g; ++r) {
        for (int c = 0; c < g; ++c) {
            // class distribution shared by the cell's boxes
            std::vector<double> cls(static_cast<std::size_t>(k));
            double mx = -1e308;
            for (int j = 0; j < k; ++j) mx = std::max(mx, at(nb * 5 + j, r, c));
            double denom = 0.0;
            for (int j = 0; j < k; ++j) {
                cls[static_cast<std::size_t>(j)] = std::exp(at(nb * 5 + j, r, c) - mx);
                denom += cls[static_cast<std::size_t>(j)];
            }
            int best_class = 0;
            double best_p = 0.0;
            for (int j = 0; j < k; ++j) {
                const double p = cls[static_cast<std::size_t>(j)] / denom;
                if (p > best_p) {
                    best_p = p;
                    best_class = j;
                }
            }
            for (int b = 0; b < nb; ++b) {
                const double obj = sigmoid_scalar(at(b * 5 + 4, r, c));
                const double score = obj * best_p;
                if (score < score_threshold) continue;
                const double cx = (c + sigmoid_scalar(at(b * 5 + 0, r, c))) * cell_px;
                const double cy = (r + sigmoid_scalar(at(b * 5 + 1, r, c))) * cell_px;
                const double bw = spec.anchor_px * std::exp(at(b * 5 + 2, r, c));
                const double bh = spec.anchor_px * std::exp(at(b * 5 + 3, r, c));
                dets.push_back({best_class,
                                {cx - bw / 2.0, cy - bh / 2.0, cx + bw / 2.0, cy + bh / 2.0},
                                score});
            }
        }
    }
    return dets;
}

std::vector<Detection> nms(std::vector<Detection> detections, double iou_threshold) {
    std::stable_sort(detections.begin(), detections.end(),
                     [](const Detection& a, const Detection& b) { return a.score > b.score; });
    std::vector<Detection> kept;
    for (const auto& d : detections) {
        bool suppressed = false;
        for (const auto& kpt : kept) {
            if (kpt.class_id == d.class_id && iou(kpt.box, d.box) > iou_threshold) {
                suppressed = true;
                break;
            }
        }
        if (!suppressed) kept.push_back(d);
    }
    return kept;
}

std::vector<Detection> forward_detect(const Model& m, const TensorPtr& image,
                                      double score_threshold, double nms_iou) {
    if (m.spec.head.type != HeadSpec::Type::detector) {
        throw ConfigError("forward_detect: model has a classifier head");
    }
    NoGradGuard ng;
    auto grid = forward_grid(m, image);
    return nms(decode_grid(m.spec, *grid, score_threshold), nms_iou);
}

TensorPtr detect_loss(const TensorPtr& grid, const std::vector<Detection>& ground_truth,
                      const ModelSpec& spec) {
    const int g = spec.head.grid, nb = spec.head.boxes, k = spec.head.classes;
    const std::int64_t d = static_cast<std::int64_t>(nb) * 5 + k;
    if (grid->shape.size() != 3 || grid->shape[0] != d || grid->shape[1] != g ||
        grid->shape[2] != g) {
        throw ShapeError("detect_loss: grid " + shape_str(grid->shape) + " does not match head");
    }
    const double size = spec.input_size;
    const double cell_px = size / g;

    // cell -> ground-truth index by center containment; at most one per cell
    std::vector<int> cell_gt(static_cast<std::size_t>(g * g), -1);
    for (std::size_t i = 0; i < ground_truth.size(); ++i) {
        const auto& gt = ground_truth[i];
        if (!gt.box.valid() || gt.box.x_min < 0 || gt.box.y_min < 0 || gt.box.x_max > size ||
            gt.box.y_max > size) {
            throw DataError("detect_loss: ground-truth box outside the image");
        }
        if (gt.class_id < 0 || gt.class_id >= k) {
            throw DataError("detect_loss: ground-truth class out of range");
        }
        const double cx = 0.5 * (gt.box.x_min + gt.box.x_max);
        const double cy = 0.5 * (gt.box.y_min + gt.box.y_max);
        const int col = std::min(g - 1, static_cast<int>(cx / cell_px));
        const int row = std::min(g - 1, static_cast<int>(cy / cell_px));
        auto& slot = cell_gt[static_cast<std::size_t>(row * g + col)];
        if (slot != -1) throw DataError("detect_loss: two ground-truth centers share a cell");
        slot = static_cast<int>(i);
    }

    auto idx = [&](std::int64_t ch, int r, int c) {
        return static_cast<std::size_t>((ch * g + r) * g + c);
    };
    auto dgrid = std::make_shared<std::vector<double>>(grid->data.size(), 0.0);
    double loss = 0.0;

    for (int r = 0; r < g; ++r) {
        for (int c = 0; c < g; ++c) {
            const int gi = cell_gt[static_cast<std::size_t>(r * g + c)];
            for (int b = 0; b < nb; ++b) {
                const bool matched = gi >= 0 && b == 0;
                const std::size_t oi = idx(b * 5 + 4, r, c);
                const double so = sigmoid_scalar(grid->data[oi]);
                const double obj_target = matched ? 1.0 : 0.0;
                loss += (so - obj_target) * (so - obj_target);
                (*dgrid)[oi] += 2.0 * (so - obj_target) * so * (1.0 - so);
                if (!matched) continue;

                const auto& gt = ground_truth[static_cast<std::size_t>(gi)];
                const double cx = 0.5 * (gt.box.x_min + gt.box.x_max);
                const double cy = 0.5 * (gt.box.y_min + gt.box.y_max);
                const double ox = cx / cell_px - c;
                const double oy = cy / cell_px - r;
                const double tw = std::log((gt.box.x_max - gt.box.x_min) / spec.anchor_px);
                const double th = std::log((gt.box.y_max - gt.box.y_min) / spec.anchor_px);

                const std::size_t xi = idx(b * 5 + 0, r, c), yi = idx(b * 5 + 1, r, c);
                const std::size_t wi = idx(b * 5 + 2, r, c), hi = idx(b * 5 + 3, r, c);
                const double sx = sigmoid_scalar(grid->data[xi]);
                const double sy = sigmoid_scalar(grid->data[yi]);
                loss += (sx - ox) * (sx - ox) + (sy - oy) * (sy - oy);
                (*dgrid)[xi] += 2.0 * (sx - ox) * sx * (1.0 - sx);
                (*dgrid)[yi] += 2.0 * (sy - oy) * sy * (1.0 - sy);
                loss += (grid->data[wi] - tw) * (grid->data[wi] - tw) +
                        (grid->data[hi] - th) * (grid->data[hi] - th);
                (*dgrid)[wi] += 2.0 * (grid->data[wi] - tw);
                (*dgrid)[hi] += 2.0 * (grid->data[hi] - th);
            }
            if (gi >= 0) {
                // cross-entropy on the cell's class distribution
                const auto& gt = ground_truth[static_cast<std::size_t>(gi)];
                double mx = -1e308;
                for (int j = 0; j < k; ++j) mx = std::max(mx, grid->data[idx(nb * 5 + j, r, c)]);
                double denom = 0.0;
                for (int j = 0; j < k; ++j) denom += std::exp(grid->data[idx(nb * 5 + j, r, c)] - mx);
                for (int j = 0; j < k; ++j) {
                    const std::size_t ci = idx(nb * 5 + j, r, c);
                    const double p = std::exp(grid->data[ci] - mx) / denom;
                    if (j == gt.class_id) loss -= std::log(p);
                    (*dgrid)[ci] += p - (j == gt.class_id ? 1.0 : 0.0);
                }
            }
        }
    }

    auto out = scalar_tensor(loss);
    Tape* tp = Tape::active();
    if (tp && tracked(grid)) {
        mark_output(out);
        grid->ensure_grad();
        tp->record([grid, out, dgrid] {
            const double gscale = out->grad[0];
            for (std::size_t i = 0; i < dgrid->size(); ++i) grid->grad[i] += gscale * (*dgrid)[i];
        });
    }
    return out;
}

void save_checkpoint(const std::string& dir, const Model& m, const nlohmann::json& extra) {
    fs::create_directories(dir);
    auto named = m.named_params();
    nlohmann::json meta;
    meta["format"] = "compresskit-checkpoint";
    meta["version"] = 1;
    meta["spec"] = model_spec_to_json(m.spec);
    nlohmann::json names = nlohmann::json::array();
    std::vector<TensorPtr> tensors;
    for (auto& [name, t] : named) {
        names.push_back(name);
        tensors.push_back(t);
    }
    meta["params"] = names;
    for (auto it = extra.begin(); it != extra.end(); ++it) meta[it.key()] = it.value();
    std::ofstream os(fs::path(dir) / "model.json");
    if (!os) throw DataError("save_checkpoint: cannot write " + dir);
    os << meta.dump(2) << "\n";
    save_tensors((fs::path(dir) / "params.ckt").string(), tensors);
}

nlohmann::json checkpoint_meta(const std::string& dir) {
    std::ifstream is(fs::path(dir) / "model.json");
    if (!is) throw ConfigError("checkpoint: missing model.json in " + dir);
    nlohmann::json meta;
    is >> meta;
    return meta;
}

Model load_checkpoint(const std::string& dir) {
    auto meta = checkpoint_meta(dir);
    if (meta.value("format", "") != "compresskit-checkpoint") {
        throw DataError("checkpoint: unrecognized format in " + dir);
    }
    Model m = build(model_spec_from_json(meta.at("spec")), 0);
    auto named = m.named_params();
    auto tensors = load_tensors((fs::path(dir) / "params.ckt").string());
    if (tensors.size() != named.size()) {
        throw DataError("checkpoint: expected " + std::to_string(named.size()) + " tensors, got " +
                        std::to_string(tensors.size()));
    }
    for (std::size_t i = 0; i < named.size(); ++i) {
        if (tensors[i]->shape != named[i].second->shape) {
            throw DataError("checkpoint: shape mismatch for parameter " + named[i].first);
        }
        named[i].second->data = tensors[i]->data;
    }
    return m;
}

}  // namespace ck
