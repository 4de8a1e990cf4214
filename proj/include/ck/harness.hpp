#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "ck/distill.hpp"
#include "ck/model.hpp"
#include "ck/pruning.hpp"
#include "ck/train.hpp"

namespace ck {

struct DataConfig {
    std::string path;  // existing dataset directory (required by train/compress)
    int n = 800;
    std::array<double, 3> balance = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    std::uint64_t seed = 1;
};

struct EvalConfig {
    double iou_threshold = 0.5;
    double score_threshold = 0.5;
    int fps_iters = 30;
    int fps_warmup = 5;
    int annotate = 0;
};

// Whole-run configuration; parsed from JSON with unknown-key rejection and
// every defaulted field echoed back into the resolved document.
struct RunConfig {
    DataConfig data;
    ModelSpec teacher = ModelSpec::teacher_classifier();
    ModelSpec student = ModelSpec::student_classifier();
    TrainConfig train;
    PruneConfig prune;
    DistillConfig distill;
    EvalConfig eval;
    std::vector<std::uint64_t> ablation_seeds = {1, 2, 3, 4, 5};
};

RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);
nlohmann::json resolved_config_json(const RunConfig& cfg);
std::string config_hash(const nlohmann::json& resolved);

// "1,0,0" or "1/3,1/3,1/3" -> balance vector (must sum to 1).
std::array<double, 3> parse_balance(const std::string& s);

// Detection-table cell: the three columns of the ablation tables.
struct DetRow {
    double precision = 0.0;
    double recall = 0.0;
    double map = 0.0;
};

DetRow evaluate_detector(const Model& m, const std::vector<const Sample*>& samples,
                         const EvalConfig& eval_cfg);

// CLI command entry points. Each returns a process exit code: 0 iff every
// declared postcondition holds.
int cmd_gen_data(int n, const std::string& balance, std::uint64_t seed, const std::string& out,
                 bool force);
int cmd_train(const std::string& config_path, const std::string& out);
int cmd_train_gan(const std::string& data_dir, int target_class, int epochs, int batch, double lr,
                  std::uint64_t seed, const std::string& out);
int cmd_augment(const std::string& data_dir, const std::string& gan_dir, int k,
                std::uint64_t seed);
int cmd_compress(const std::string& config_path, const std::string& teacher_checkpoint,
                 const std::string& out);
int cmd_eval(const std::string& checkpoint, const std::string& data_dir, const std::string& out,
             int annotate, bool oracle);
int cmd_bench_fps(const std::string& checkpoint, int iters, int warmup, int batch,
                  std::uint64_t seed, const std::string& out);
int cmd_ablation(const std::string& study, const std::string& config_path, const std::string& out);

}  // namespace ck
