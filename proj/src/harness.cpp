#include "ck/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <thread>

#include "ck/gan.hpp"
#include "ck/losses.hpp"
#include "ck/metrics.hpp"
#include "ck/pipeline.hpp"
#include "ck/serialize.hpp"

namespace fs = std::filesystem;

namespace ck {

namespace {

void check_keys(const nlohmann::json& j, const std::vector<std::string>& allowed,
                const std::string& context) {
    if (!j.is_object()) throw ConfigError("config: section '" + context + "' must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end()) {
            throw ConfigError("config: unknown key '" + it.key() + "' in " + context);
        }
    }
}

void check_spec_keys(const nlohmann::json& j, const std::string& context) {
    check_keys(j,
               {"input_channels", "input_size", "stem_channels", "stages", "attention",
                "attention_reduction", "anchor_px", "head"},
               context);
    if (j.contains("stages")) {
        for (const auto& s : j.at("stages")) check_keys(s, {"channels", "blocks", "stride"}, context + ".stages[]");
    }
    if (j.contains("head")) check_keys(j.at("head"), {"type", "classes", "grid", "boxes"}, context + ".head");
}

std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

double parse_fraction(const std::string& tok) {
    const auto slash = tok.find('/');
    if (slash == std::string::npos) return std::stod(tok);
    const double num = std::stod(tok.substr(0, slash));
    const double den = std::stod(tok.substr(slash + 1));
    if (den == 0.0) throw ParamError("balance: division by zero in '" + tok + "'");
    return num / den;
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot write " + path.string());
    os << text;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
    write_text(path, j.dump(2) + "\n");
}

int guarded(const char* what, const std::function<void()>& fn) {
    try {
        fn();
        return 0;
    } catch (const std::exception& e) {
        std::cerr << what << ": error: " << e.what() << "\n";
        return 1;
    }
}

TensorPtr random_image(const ModelSpec& spec, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::vector<double> v(static_cast<std::size_t>(spec.input_channels) * spec.input_size *
                          spec.input_size);
    for (auto& x : v) x = u01(rng);
    return make_tensor({spec.input_channels, spec.input_size, spec.input_size}, std::move(v));
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double bench_model_fps(const Model& m, const EvalConfig& eval_cfg, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto image = random_image(m.spec, rng);
    const bool classify = m.spec.head.type == HeadSpec::Type::classifier;
    auto forward = [&] {
        NoGradGuard ng;
        if (classify) {
            forward_classify(m, image);
        } else {
            forward_grid(m, image);
        }
    };
    return bench_fps(forward, eval_cfg.fps_iters, eval_cfg.fps_warmup, 1, 5).fps;
}

nlohmann::json classifier_metrics_json(const Model& m, const std::vector<const Sample*>& samples) {
    std::vector<int> labels;
    labels.reserve(samples.size());
    for (const auto* s : samples) labels.push_back(s->label);
    auto preds = predict_classes(m, samples);
    auto rep = multiclass_report(preds, labels, m.spec.head.classes);
    nlohmann::json per_class = nlohmann::json::array();
    for (const auto& c : rep.per_class) {
        per_class.push_back({{"precision", c.precision},
                             {"recall", c.recall},
                             {"accuracy", c.accuracy},
                             {"f1", c.f1},
                             {"precision_defined", c.precision_defined},
                             {"recall_defined", c.recall_defined},
                             {"f1_defined", c.f1_defined}});
    }
    return {{"precision", rep.macro_precision}, {"recall", rep.macro_recall},
            {"f1", rep.macro_f1},               {"accuracy", rep.top1_accuracy},
            {"macro_accuracy", rep.macro_accuracy}, {"per_class", per_class}};
}

}  // namespace

std::array<double, 3> parse_balance(const std::string& s) {
    std::array<double, 3> out{};
    std::size_t pos = 0;
    for (int i = 0; i < 3; ++i) {
        const auto comma = s.find(',', pos);
        const bool last = i == 2;
        if ((comma == std::string::npos) != last) {
            throw ParamError("balance: expected three comma-separated values, got '" + s + "'");
        }
        const std::string tok = s.substr(pos, last ? std::string::npos : comma - pos);
        out[static_cast<std::size_t>(i)] = parse_fraction(tok);
        pos = comma + 1;
    }
    return out;
}

RunConfig parse_run_config(const nlohmann::json& j) {
    check_keys(j, {"data", "model", "train", "prune", "distill", "eval", "ablation"}, "root");
    RunConfig cfg;

    if (j.contains("data")) {
        const auto& d = j.at("data");
        check_keys(d, {"path", "n", "balance", "seed"}, "data");
        cfg.data.path = d.value("path", std::string());
        cfg.data.n = d.value("n", cfg.data.n);
        if (d.contains("balance")) {
            const auto& b = d.at("balance");
            if (!b.is_array() || b.size() != 3) {
                throw ConfigError("config: data.balance must be an array of three numbers");
            }
            for (int c = 0; c < 3; ++c) cfg.data.balance[static_cast<std::size_t>(c)] = b.at(c).get<double>();
        }
        cfg.data.seed = d.value("seed", cfg.data.seed);
    }

    if (j.contains("model")) {
        const auto& m = j.at("model");
        check_keys(m, {"teacher", "student", "attention"}, "model");
        if (m.contains("teacher")) {
            check_spec_keys(m.at("teacher"), "model.teacher");
            cfg.teacher = model_spec_from_json(m.at("teacher"));
        }
        if (m.contains("student")) {
            check_spec_keys(m.at("student"), "model.student");
            cfg.student = model_spec_from_json(m.at("student"));
        }
        if (m.contains("attention")) {
            const auto mode = attention_mode_from_string(m.at("attention").get<std::string>());
            cfg.teacher.attention = mode;
            cfg.student.attention = mode;
        }
    }

    if (j.contains("train")) {
        const auto& t = j.at("train");
        check_keys(t, {"epochs", "lr", "batch", "alpha_smooth", "seed", "lr_decay"}, "train");
        cfg.train.epochs = t.value("epochs", cfg.train.epochs);
        cfg.train.lr = t.value("lr", cfg.train.lr);
        cfg.train.batch = t.value("batch", cfg.train.batch);
        cfg.train.alpha_smooth = t.value("alpha_smooth", cfg.train.alpha_smooth);
        cfg.train.seed = t.value("seed", cfg.train.seed);
        if (t.contains("lr_decay")) {
            const auto& d = t.at("lr_decay");
            check_keys(d, {"fraction", "period"}, "train.lr_decay");
            cfg.train.lr_decay_fraction = d.value("fraction", cfg.train.lr_decay_fraction);
            cfg.train.lr_decay_period = d.value("period", cfg.train.lr_decay_period);
        }
        cfg.train.validate();
    }

    cfg.prune.strategy = PruneStrategy::magnitude;
    cfg.prune.sparsity = 0.5;
    if (j.contains("prune")) {
        const auto& p = j.at("prune");
        check_keys(p, {"strategy", "threshold", "sparsity", "l1", "seed", "finetune_epochs"},
                   "prune");
        cfg.prune.strategy = prune_strategy_from_string(p.value("strategy", "magnitude"));
        if (p.contains("threshold") && p.contains("sparsity")) {
            throw ConfigError("config: prune.threshold and prune.sparsity are mutually exclusive");
        }
        if (p.contains("threshold")) {
            cfg.prune.threshold = p.at("threshold").get<double>();
            cfg.prune.sparsity = -1.0;
        } else if (p.contains("sparsity")) {
            cfg.prune.sparsity = p.at("sparsity").get<double>();
        }
        cfg.prune.l1 = p.value("l1", cfg.prune.l1);
        cfg.prune.seed = p.value("seed", cfg.prune.seed);
        cfg.prune.finetune_epochs = p.value("finetune_epochs", cfg.prune.finetune_epochs);
    }
    cfg.prune.validate();

    if (j.contains("distill")) {
        const auto& d = j.at("distill");
        check_keys(d, {"temperature", "alpha", "blend", "epochs", "lr"}, "distill");
        cfg.distill.temperature = d.value("temperature", cfg.distill.temperature);
        cfg.distill.alpha = d.value("alpha", cfg.distill.alpha);
        cfg.distill.blend = d.value("blend", cfg.distill.blend);
        cfg.distill.epochs = d.value("epochs", cfg.distill.epochs);
        cfg.distill.lr = d.value("lr", cfg.distill.lr);
        cfg.distill.validate();
    }

    if (j.contains("eval")) {
        const auto& e = j.at("eval");
        check_keys(e, {"iou_threshold", "score_threshold", "fps_iters", "fps_warmup", "annotate"},
                   "eval");
        cfg.eval.iou_threshold = e.value("iou_threshold", cfg.eval.iou_threshold);
        cfg.eval.score_threshold = e.value("score_threshold", cfg.eval.score_threshold);
        cfg.eval.fps_iters = e.value("fps_iters", cfg.eval.fps_iters);
        cfg.eval.fps_warmup = e.value("fps_warmup", cfg.eval.fps_warmup);
        cfg.eval.annotate = e.value("annotate", cfg.eval.annotate);
    }

    if (j.contains("ablation")) {
        const auto& a = j.at("ablation");
        check_keys(a, {"seeds"}, "ablation");
        if (a.contains("seeds")) {
            cfg.ablation_seeds.clear();
            for (const auto& s : a.at("seeds")) cfg.ablation_seeds.push_back(s.get<std::uint64_t>());
            if (cfg.ablation_seeds.empty()) throw ConfigError("config: ablation.seeds is empty");
        }
    }
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("config: cannot open " + path);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config: " + path + " is not valid JSON: " + e.what());
    }
    return parse_run_config(j);
}

nlohmann::json resolved_config_json(const RunConfig& cfg) {
    return {{"data",
             {{"path", cfg.data.path},
              {"n", cfg.data.n},
              {"balance", cfg.data.balance},
              {"seed", cfg.data.seed}}},
            {"model",
             {{"teacher", model_spec_to_json(cfg.teacher)},
              {"student", model_spec_to_json(cfg.student)}}},
            {"train",
             {{"epochs", cfg.train.epochs},
              {"lr", cfg.train.lr},
              {"batch", cfg.train.batch},
              {"alpha_smooth", cfg.train.alpha_smooth},
              {"seed", cfg.train.seed},
              {"lr_decay",
               {{"fraction", cfg.train.lr_decay_fraction}, {"period", cfg.train.lr_decay_period}}}}},
            {"prune",
             {{"strategy", to_string(cfg.prune.strategy)},
              {"threshold", cfg.prune.threshold},
              {"sparsity", cfg.prune.sparsity},
              {"l1", cfg.prune.l1},
              {"seed", cfg.prune.seed},
              {"finetune_epochs", cfg.prune.finetune_epochs}}},
            {"distill",
             {{"temperature", cfg.distill.temperature},
              {"alpha", cfg.distill.alpha},
              {"blend", cfg.distill.blend},
              {"epochs", cfg.distill.epochs},
              {"lr", cfg.distill.lr}}},
            {"eval",
             {{"iou_threshold", cfg.eval.iou_threshold},
              {"score_threshold", cfg.eval.score_threshold},
              {"fps_iters", cfg.eval.fps_iters},
              {"fps_warmup", cfg.eval.fps_warmup},
              {"annotate", cfg.eval.annotate}}},
            {"ablation", {{"seeds", cfg.ablation_seeds}}}};
}

std::string config_hash(const nlohmann::json& resolved) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(resolved.dump())));
    return buf;
}

DetRow evaluate_detector(const Model& m, const std::vector<const Sample*>& samples,
                         const EvalConfig& eval_cfg) {
    if (m.spec.head.type != HeadSpec::Type::detector) {
        throw ConfigError("evaluate_detector: model has a classifier head");
    }
    const double floor_threshold = std::min(0.05, eval_cfg.score_threshold);
    std::vector<std::vector<Detection>> preds, gts;
    for (const auto* s : samples) {
        preds.push_back(forward_detect(m, s->image, floor_threshold, eval_cfg.iou_threshold));
        gts.push_back(s->boxes);
    }
    std::vector<ApResult> aps;
    ConfusionCounts counts;
    for (int c = 0; c < m.spec.head.classes; ++c) {
        aps.push_back(average_precision(preds, gts, c, eval_cfg.iou_threshold));
        const auto cc = detection_counts(preds, gts, c, eval_cfg.iou_threshold,
                                         eval_cfg.score_threshold);
        counts.tp += cc.tp;
        counts.fp += cc.fp;
        counts.fn += cc.fn;
    }
    DetRow row;
    const auto cm = classification_metrics(counts);
    row.precision = cm.precision;
    row.recall = cm.recall;
    row.map = mean_average_precision(aps);
    return row;
}

namespace {

nlohmann::json detector_metrics_json(const Model& m, const std::vector<const Sample*>& samples,
                                     const EvalConfig& eval_cfg) {
    const DetRow row = evaluate_detector(m, samples, eval_cfg);
    return {{"precision", row.precision}, {"recall", row.recall}, {"map", row.map}};
}

std::string metrics_csv_header() {
    return "model,split,precision,recall,f1,accuracy,map\n";
}

std::string metrics_csv_row(const std::string& model, const std::string& split,
                            const nlohmann::json& metrics) {
    auto get = [&](const char* key) {
        return metrics.contains(key) ? format_double(metrics.at(key).get<double>()) : "";
    };
    return model + "," + split + "," + get("precision") + "," + get("recall") + "," + get("f1") +
           "," + get("accuracy") + "," + get("map") + "\n";
}

nlohmann::json split_metrics(const Model& m, const Dataset& ds, const EvalConfig& eval_cfg,
                             bool test_split) {
    auto samples = test_split ? ds.test() : ds.train();
    if (m.spec.head.type == HeadSpec::Type::classifier) {
        return classifier_metrics_json(m, samples);
    }
    return detector_metrics_json(m, samples, eval_cfg);
}

Dataset require_dataset(const std::string& path) {
    if (path.empty()) throw ConfigError("config: data.path must point at a dataset directory");
    if (!fs::exists(fs::path(path) / "manifest.json")) {
        throw ConfigError("dataset not found at " + path);
    }
    return load_dataset(path);
}

int env_threads() {
    const char* v = std::getenv("COMPRESSKIT_THREADS");
    if (!v) return 1;
    const int n = std::atoi(v);
    return n < 1 ? 1 : n;
}

// Runs `work(i)` for i in [0,n) over the configured fan-out.
void parallel_for_units(std::size_t n, const std::function<void(std::size_t)>& work) {
    const int threads = std::min<int>(env_threads(), static_cast<int>(n));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) work(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (;;) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= n) break;
                    work(i);
                }
            } catch (...) {
                errors[static_cast<std::size_t>(t)] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace

int cmd_gen_data(int n, const std::string& balance, std::uint64_t seed, const std::string& out,
                 bool force) {
    return guarded("gen-data", [&] {
        const auto bal = parse_balance(balance);
        Dataset ds = generate_dataset(n, bal, seed);
        save_dataset(out, ds, force);
        std::array<int, 3> counts{};
        int train_n = 0, test_n = 0;
        for (const auto& s : ds.samples) {
            ++counts[static_cast<std::size_t>(s.label)];
            if (s.test_split)
                ++test_n;
            else
                ++train_n;
        }
        std::cout << "dataset: " << ds.samples.size() << " samples (" << train_n << " train / "
                  << test_n << " test), classes " << counts[0] << "/" << counts[1] << "/"
                  << counts[2] << ", seed " << seed << "\n"
                  << "wrote " << out << "\n";
    });
}

int cmd_train(const std::string& config_path, const std::string& out) {
    return guarded("train", [&] {
        const RunConfig cfg = load_run_config(config_path);
        const auto resolved = resolved_config_json(cfg);
        const std::string hash = config_hash(resolved);
        Dataset ds = require_dataset(cfg.data.path);
        fs::create_directories(out);
        write_json(fs::path(out) / "config.resolved.json", resolved);

        Model model = build(cfg.teacher, cfg.train.seed);
        const auto t0 = std::chrono::steady_clock::now();
        std::vector<EpochLog> logs;
        if (model.spec.head.type == HeadSpec::Type::classifier) {
            logs = train_classifier(model, ds.train(), cfg.train);
        } else {
            logs = train_detector(model, ds.train(), cfg.train);
        }
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        std::string loss_csv = "epoch,mean_loss,lr\n";
        for (const auto& l : logs) {
            loss_csv += std::to_string(l.epoch) + "," + format_double(l.mean_loss) + "," +
                        format_double(l.lr) + "\n";
        }
        write_text(fs::path(out) / "loss.csv", loss_csv);

        auto train_metrics = split_metrics(model, ds, cfg.eval, false);
        auto test_metrics = split_metrics(model, ds, cfg.eval, true);
        const double fps = bench_model_fps(model, cfg.eval, cfg.train.seed);

        save_checkpoint((fs::path(out) / "checkpoint").string(), model,
                        {{"config_hash", hash}, {"data_seed", ds.seed}});

        nlohmann::json report = {
            {"command", "train"},
            {"config_hash", hash},
            {"seed", cfg.train.seed},
            {"wall_clock_s", wall},
            {"epochs", cfg.train.epochs},
            {"model", {{"params", model.parameter_count()},
                       {"sparsity", model_sparsity(model.params())}}},
            {"metrics", {{"train", train_metrics}, {"test", test_metrics}}},
            {"fps", fps}};
        write_json(fs::path(out) / "report.json", report);

        std::string csv = metrics_csv_header();
        csv += metrics_csv_row("model", "train", train_metrics);
        csv += metrics_csv_row("model", "test", test_metrics);
        write_text(fs::path(out) / "metrics.csv", csv);
        std::cout << "train: done in " << format_double(wall) << "s, test metrics "
                  << test_metrics.dump() << "\n";
    });
}

int cmd_train_gan(const std::string& data_dir, int target_class, int epochs, int batch, double lr,
                  std::uint64_t seed, const std::string& out) {
    return guarded("train-gan", [&] {
        Dataset ds = require_dataset(data_dir);
        std::vector<TensorPtr> reals;
        for (const auto* s : ds.train()) {
            if (s->label == target_class && !s->synthetic) reals.push_back(flatten_image(*s->image));
        }
        GanPair gan = gan_init(16, 32, 3 * kImageSize * kImageSize, target_class, seed);
        GanLog log = gan_train(gan, reals, epochs, batch, lr, seed);
        fs::create_directories(out);
        save_gan(out, gan);
        std::string csv = "step,d_loss,g_loss\n";
        for (std::size_t i = 0; i < log.d_loss.size(); ++i) {
            csv += std::to_string(i) + "," + format_double(log.d_loss[i]) + "," +
                   format_double(log.g_loss[i]) + "\n";
        }
        write_text(fs::path(out) / "gan_loss.csv", csv);
        std::cout << "train-gan: " << log.d_loss.size() << " steps on " << reals.size()
                  << " real samples, wrote " << out << "\n";
    });
}

int cmd_augment(const std::string& data_dir, const std::string& gan_dir, int k,
                std::uint64_t seed) {
    return guarded("augment", [&] {
        Dataset ds = require_dataset(data_dir);
        GanPair gan = load_gan(gan_dir);
        augment(ds, gan, k, gan.target_class, seed);
        save_dataset(data_dir, ds, /*force=*/true);
        std::cout << "augment: appended " << k << " synthetic class-" << gan.target_class
                  << " samples to " << data_dir << "\n";
    });
}

int cmd_compress(const std::string& config_path, const std::string& teacher_checkpoint,
                 const std::string& out) {
    return guarded("compress", [&] {
        const RunConfig cfg = load_run_config(config_path);
        const auto resolved = resolved_config_json(cfg);
        const std::string hash = config_hash(resolved);
        if (!fs::exists(fs::path(teacher_checkpoint) / "model.json")) {
            throw ConfigError("teacher checkpoint not found at " + teacher_checkpoint);
        }
        Model teacher = load_checkpoint(teacher_checkpoint);
        Dataset ds = require_dataset(cfg.data.path);
        fs::create_directories(out);
        write_json(fs::path(out) / "config.resolved.json", resolved);

        ModelSpec student_spec = cfg.student;
        student_spec.head = teacher.spec.head;  // heads must agree
        student_spec.input_size = teacher.spec.input_size;
        student_spec.input_channels = teacher.spec.input_channels;

        const auto t0 = std::chrono::steady_clock::now();
        PipelineResult pr = distillation_pruning_pipeline(teacher, student_spec, cfg.prune,
                                                          cfg.distill, ds, cfg.train);
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        auto teacher_test = split_metrics(teacher, ds, cfg.eval, true);
        auto student_test = split_metrics(pr.student, ds, cfg.eval, true);
        const double teacher_fps = bench_model_fps(teacher, cfg.eval, cfg.train.seed);
        const double student_fps = bench_model_fps(pr.student, cfg.eval, cfg.train.seed);

        save_checkpoint((fs::path(out) / "checkpoint").string(), pr.student,
                        {{"config_hash", hash}, {"data_seed", ds.seed}});
        std::string loss_csv = "epoch,mean_loss,lr\n";
        for (const auto& l : pr.distill_log) {
            loss_csv += std::to_string(l.epoch) + "," + format_double(l.mean_loss) + "," +
                        format_double(l.lr) + "\n";
        }
        write_text(fs::path(out) / "loss.csv", loss_csv);

        nlohmann::json report = {
            {"command", "compress"},
            {"config_hash", hash},
            {"seed", cfg.train.seed},
            {"wall_clock_s", wall},
            {"prune", {{"strategy", to_string(cfg.prune.strategy)},
                       {"threshold", pr.prune_threshold},
                       {"teacher_sparsity", pr.teacher_sparsity}}},
            {"teacher", {{"params", pr.teacher_params}, {"fps", teacher_fps},
                         {"metrics", teacher_test}}},
            {"student", {{"params", pr.student_params}, {"fps", student_fps},
                         {"metrics", student_test},
                         {"param_ratio", static_cast<double>(pr.student_params) /
                                             static_cast<double>(pr.teacher_params)}}}};
        write_json(fs::path(out) / "report.json", report);

        std::string csv = metrics_csv_header();
        csv += metrics_csv_row("teacher", "test", teacher_test);
        csv += metrics_csv_row("student", "test", student_test);
        write_text(fs::path(out) / "metrics.csv", csv);
        std::cout << "compress: student " << pr.student_params << " params vs teacher "
                  << pr.teacher_params << ", student fps " << format_double(student_fps)
                  << " vs teacher " << format_double(teacher_fps) << "\n";
    });
}

int cmd_eval(const std::string& checkpoint, const std::string& data_dir, const std::string& out,
             int annotate, bool oracle) {
    return guarded("eval", [&] {
        Model model = load_checkpoint(checkpoint);
        Dataset ds = require_dataset(data_dir);
        const auto meta = checkpoint_meta(checkpoint);
        if (meta.contains("data_seed") && meta.at("data_seed").get<std::uint64_t>() != ds.seed) {
            std::cerr << "eval: warning: dataset seed " << ds.seed
                      << " differs from the checkpoint's training dataset seed "
                      << meta.at("data_seed").get<std::uint64_t>() << "; proceeding\n";
        }
        fs::create_directories(out);
        EvalConfig eval_cfg;

        nlohmann::json train_metrics, test_metrics;
        if (oracle) {
            // ground truth injected as predictions: validates metric plumbing
            if (model.spec.head.type == HeadSpec::Type::classifier) {
                auto perfect = [&](bool test_split) {
                    std::vector<int> labels;
                    for (const auto* s : test_split ? ds.test() : ds.train()) {
                        labels.push_back(s->label);
                    }
                    auto rep = multiclass_report(labels, labels, model.spec.head.classes);
                    return nlohmann::json{{"precision", rep.macro_precision},
                                          {"recall", rep.macro_recall},
                                          {"f1", rep.macro_f1},
                                          {"accuracy", rep.top1_accuracy}};
                };
                train_metrics = perfect(false);
                test_metrics = perfect(true);
            } else {
                auto perfect = [&](bool test_split) {
                    std::vector<std::vector<Detection>> preds, gts;
                    for (const auto* s : test_split ? ds.test() : ds.train()) {
                        preds.push_back(s->boxes);
                        gts.push_back(s->boxes);
                    }
                    std::vector<ApResult> aps;
                    ConfusionCounts counts;
                    for (int c = 0; c < model.spec.head.classes; ++c) {
                        aps.push_back(average_precision(preds, gts, c, eval_cfg.iou_threshold));
                        auto cc = detection_counts(preds, gts, c, eval_cfg.iou_threshold, 0.5);
                        counts.tp += cc.tp;
                        counts.fp += cc.fp;
                        counts.fn += cc.fn;
                    }
                    auto cm = classification_metrics(counts);
                    return nlohmann::json{{"precision", cm.precision},
                                          {"recall", cm.recall},
                                          {"map", mean_average_precision(aps)}};
                };
                train_metrics = perfect(false);
                test_metrics = perfect(true);
            }
        } else {
            train_metrics = split_metrics(model, ds, eval_cfg, false);
            test_metrics = split_metrics(model, ds, eval_cfg, true);
        }

        if (model.spec.head.type == HeadSpec::Type::detector && annotate > 0) {
            auto tests = ds.test();
            char name[32];
            const int n = std::min<int>(annotate, static_cast<int>(tests.size()));
            for (int i = 0; i < n; ++i) {
                auto dets = forward_detect(model, tests[static_cast<std::size_t>(i)]->image,
                                           eval_cfg.score_threshold, eval_cfg.iou_threshold);
                Tensor copy = *tests[static_cast<std::size_t>(i)]->image;
                for (const auto& d : dets) draw_box_outline(copy, d.box, 1.0, 0.0, 0.0);
                std::snprintf(name, sizeof(name), "ann_%05d.ppm", i);
                write_ppm((fs::path(out) / name).string(), copy);
            }
        }

        nlohmann::json report = {{"command", "eval"},
                                 {"checkpoint", checkpoint},
                                 {"oracle", oracle},
                                 {"metrics", {{"train", train_metrics}, {"test", test_metrics}}}};
        write_json(fs::path(out) / "report.json", report);
        std::string csv = metrics_csv_header();
        csv += metrics_csv_row("model", "train", train_metrics);
        csv += metrics_csv_row("model", "test", test_metrics);
        write_text(fs::path(out) / "metrics.csv", csv);
        std::cout << "eval: test metrics " << test_metrics.dump() << "\n";
    });
}

int cmd_bench_fps(const std::string& checkpoint, int iters, int warmup, int batch,
                  std::uint64_t seed, const std::string& out) {
    return guarded("bench-fps", [&] {
        Model model = load_checkpoint(checkpoint);
        EvalConfig eval_cfg;
        eval_cfg.fps_iters = iters;
        eval_cfg.fps_warmup = warmup;
        std::mt19937_64 rng(seed);
        auto image = random_image(model.spec, rng);
        const bool classify = model.spec.head.type == HeadSpec::Type::classifier;
        auto forward = [&] {
            NoGradGuard ng;
            for (int i = 0; i < batch; ++i) {
                if (classify) {
                    forward_classify(model, image);
                } else {
                    forward_grid(model, image);
                }
            }
        };
        const FpsResult res = bench_fps(forward, iters, warmup, batch, 5);
        std::cout << "bench-fps: " << format_double(res.fps) << " frames/s (median of "
                  << res.repetitions.size() << ")\n";
        if (!out.empty()) {
            fs::create_directories(out);
            write_json(fs::path(out) / "fps.json",
                       {{"fps", res.fps}, {"repetitions", res.repetitions}, {"iters", iters},
                        {"warmup", warmup}, {"batch", batch}});
        }
    });
}

namespace {

struct AblationCell {
    std::string row;
    std::uint64_t seed;
    DetRow metrics;
};

void write_ablation_tables(const std::string& out, const std::vector<std::string>& rows,
                           const std::vector<AblationCell>& cells,
                           const std::vector<std::uint64_t>& seeds, const std::string& title) {
    std::string cells_csv = "model,seed,precision,recall,map\n";
    for (const auto& row : rows) {
        for (auto seed : seeds) {
            for (const auto& c : cells) {
                if (c.row == row && c.seed == seed) {
                    cells_csv += row + "," + std::to_string(seed) + "," +
                                 format_double(c.metrics.precision) + "," +
                                 format_double(c.metrics.recall) + "," +
                                 format_double(c.metrics.map) + "\n";
                }
            }
        }
    }
    write_text(fs::path(out) / "cells.csv", cells_csv);

    std::string table_csv = "model,precision,recall,map\n";
    std::string table_md = "# " + title + "\n\n| Model | Precision | Recall | mAP |\n";
    table_md += "| --- | --- | --- | --- |\n";
    char pct[64];
    for (const auto& row : rows) {
        std::vector<double> p, r, m;
        for (const auto& c : cells) {
            if (c.row == row) {
                p.push_back(c.metrics.precision);
                r.push_back(c.metrics.recall);
                m.push_back(c.metrics.map);
            }
        }
        const double mp = median_of(p), mr = median_of(r), mm = median_of(m);
        table_csv += row + "," + format_double(mp) + "," + format_double(mr) + "," +
                     format_double(mm) + "\n";
        std::snprintf(pct, sizeof(pct), "| %s | %.1f | %.1f | %.1f |\n", row.c_str(), mp * 100.0,
                      mr * 100.0, mm * 100.0);
        table_md += pct;
    }
    write_text(fs::path(out) / "table.csv", table_csv);
    write_text(fs::path(out) / "table.md", table_md);
}

}  // namespace

int cmd_ablation(const std::string& study, const std::string& config_path,
                 const std::string& out) {
    return guarded("ablation", [&] {
        if (study != "pruning" && study != "attention") {
            throw ParamError("ablation: study must be 'pruning' or 'attention', got '" + study +
                             "'");
        }
        const RunConfig cfg = load_run_config(config_path);
        const auto resolved = resolved_config_json(cfg);
        const std::string hash = config_hash(resolved);
        if (cfg.teacher.head.type != HeadSpec::Type::detector ||
            cfg.student.head.type != HeadSpec::Type::detector) {
            throw ConfigError("ablation: both model specs must use detector heads");
        }
        fs::create_directories(out);
        write_json(fs::path(out) / "config.resolved.json", resolved);

        Dataset ds;
        if (!cfg.data.path.empty()) {
            ds = require_dataset(cfg.data.path);
        } else {
            ds = generate_dataset(cfg.data.n, cfg.data.balance, cfg.data.seed);
            save_dataset((fs::path(out) / "dataset").string(), ds, /*force=*/true);
        }
        auto train_set = ds.train();
        auto test_set = ds.test();

        const auto t0 = std::chrono::steady_clock::now();
        std::vector<AblationCell> cells;
        std::vector<std::string> rows;

        if (study == "pruning") {
            rows = {"No pruning", "Random pruning", "Sparse pruning", "Distillation pruning"};
            std::vector<std::vector<AblationCell>> per_seed(cfg.ablation_seeds.size());
            parallel_for_units(cfg.ablation_seeds.size(), [&](std::size_t i) {
                const std::uint64_t seed = cfg.ablation_seeds[i];
                TrainConfig tc = cfg.train;
                tc.seed = seed;

                Model base = build(cfg.teacher, seed);
                train_detector(base, train_set, tc);
                per_seed[i].push_back({"No pruning", seed, evaluate_detector(base, test_set, cfg.eval)});

                Model random_pruned = clone_model(base);
                prune_model_random(random_pruned.params(),
                                   cfg.prune.sparsity >= 0.0 ? cfg.prune.sparsity : 0.5, seed);
                per_seed[i].push_back(
                    {"Random pruning", seed, evaluate_detector(random_pruned, test_set, cfg.eval)});

                Model sparse_pruned = clone_model(base);
                PruneConfig sparse_cfg = cfg.prune;
                sparse_cfg.strategy = PruneStrategy::sparse;
                apply_prune_strategy(sparse_pruned, train_set, sparse_cfg, tc);
                per_seed[i].push_back(
                    {"Sparse pruning", seed, evaluate_detector(sparse_pruned, test_set, cfg.eval)});

                PruneConfig mag_cfg = cfg.prune;
                mag_cfg.strategy = PruneStrategy::magnitude;
                PipelineResult pr = distillation_pruning_pipeline(base, cfg.student, mag_cfg,
                                                                  cfg.distill, ds, tc);
                per_seed[i].push_back({"Distillation pruning", seed,
                                       evaluate_detector(pr.student, test_set, cfg.eval)});
            });
            for (auto& v : per_seed) {
                for (auto& c : v) cells.push_back(std::move(c));
            }
        } else {
            rows = {"CBAM", "SAM", "BAM"};
            const std::vector<AttentionMode> modes = {AttentionMode::cbam, AttentionMode::sam,
                                                      AttentionMode::bam};
            struct Unit {
                std::size_t mode_idx;
                std::uint64_t seed;
            };
            std::vector<Unit> units;
            for (std::size_t mi = 0; mi < modes.size(); ++mi) {
                for (auto seed : cfg.ablation_seeds) units.push_back({mi, seed});
            }
            std::vector<AblationCell> unit_cells(units.size());
            parallel_for_units(units.size(), [&](std::size_t i) {
                const Unit& u = units[i];
                ModelSpec spec = cfg.teacher;
                spec.attention = modes[u.mode_idx];
                TrainConfig tc = cfg.train;
                tc.seed = u.seed;
                Model model = build(spec, u.seed);
                train_detector(model, train_set, tc);
                unit_cells[i] = {rows[u.mode_idx], u.seed,
                                 evaluate_detector(model, test_set, cfg.eval)};
            });
            cells = std::move(unit_cells);
        }

        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        write_ablation_tables(out, rows, cells, cfg.ablation_seeds,
                              study == "pruning" ? "Pruning strategy ablation"
                                                 : "Attention module ablation");
        write_json(fs::path(out) / "report.json",
                   {{"command", "ablation"},
                    {"study", study},
                    {"config_hash", hash},
                    {"seeds", cfg.ablation_seeds},
                    {"wall_clock_s", wall}});
        std::cout << "ablation(" << study << "): " << cells.size() << " cells in "
                  << format_double(wall) << "s, tables in " << out << "\n";
    });
}

}  // namespace ck
