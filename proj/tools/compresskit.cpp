#include <CLI11.hpp>

#include <cstdint>
#include <string>

#include "ck/harness.hpp"

int main(int argc, char** argv) {
    CLI::App app{"compresskit: train, compress, and evaluate fruit-grading models"};
    app.require_subcommand(1);

    // gen-data
    std::string out, config, balance = "1/3,1/3,1/3";
    int n = 800;
    std::uint64_t seed = 1;
    bool force = false;
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
    gen->add_option("--n", n, "number of samples");
    gen->add_option("--balance", balance, "class balance, e.g. 1/3,1/3,1/3");
    gen->add_option("--seed", seed, "generation seed");
    gen->add_option("--out", out, "output directory")->required();
    gen->add_flag("--force", force, "overwrite a non-empty output directory");

    // train
    auto* train = app.add_subcommand("train", "train a model from a config");
    train->add_option("--config", config, "run config JSON")->required();
    train->add_option("--out", out, "output directory")->required();

    // train-gan
    std::string data_dir, gan_dir;
    int target_class = 2, epochs = 120, batch = 16;
    double lr = 0.05;
    auto* tgan = app.add_subcommand("train-gan", "train the augmentation GAN");
    tgan->add_option("--data", data_dir, "dataset directory")->required();
    tgan->add_option("--class", target_class, "target class (default 2 = defective)");
    tgan->add_option("--epochs", epochs, "training epochs over the real set");
    tgan->add_option("--batch", batch, "batch size");
    tgan->add_option("--lr", lr, "learning rate");
    tgan->add_option("--seed", seed, "seed");
    tgan->add_option("--out", out, "output directory")->required();

    // augment
    int k = 200;
    auto* aug = app.add_subcommand("augment", "append GAN samples to a dataset");
    aug->add_option("--data", data_dir, "dataset directory (modified in place)")->required();
    aug->add_option("--gan", gan_dir, "GAN checkpoint directory")->required();
    aug->add_option("--k", k, "number of samples to append");
    aug->add_option("--seed", seed, "sampling seed");

    // compress
    std::string teacher;
    auto* comp = app.add_subcommand("compress", "prune + distill a teacher checkpoint");
    comp->add_option("--config", config, "run config JSON")->required();
    comp->add_option("--teacher", teacher, "teacher checkpoint directory")->required();
    comp->add_option("--out", out, "output directory")->required();

    // eval
    std::string checkpoint;
    int annotate = 0;
    bool oracle = false;
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    ev->add_option("--checkpoint", checkpoint, "checkpoint directory")->required();
    ev->add_option("--data", data_dir, "dataset directory")->required();
    ev->add_option("--out", out, "output directory")->required();
    ev->add_option("--annotate", annotate, "write up to N annotated test images");
    ev->add_flag("--oracle", oracle, "inject ground truth as predictions (plumbing check)");

    // bench-fps
    int iters = 50, warmup = 5, bench_batch = 1;
    auto* bench = app.add_subcommand("bench-fps", "measure inference throughput");
    bench->add_option("--checkpoint", checkpoint, "checkpoint directory")->required();
    bench->add_option("--iters", iters, "timed iterations");
    bench->add_option("--warmup", warmup, "untimed warmup iterations");
    bench->add_option("--batch", bench_batch, "frames per iteration");
    bench->add_option("--seed", seed, "input seed");
    bench->add_option("--out", out, "optional output directory");

    // ablation
    std::string study;
    auto* abl = app.add_subcommand("ablation", "run a pruning or attention study");
    abl->add_option("--study", study, "pruning | attention")->required();
    abl->add_option("--config", config, "run config JSON")->required();
    abl->add_option("--out", out, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    if (gen->parsed()) return ck::cmd_gen_data(n, balance, seed, out, force);
    if (train->parsed()) return ck::cmd_train(config, out);
    if (tgan->parsed()) return ck::cmd_train_gan(data_dir, target_class, epochs, batch, lr, seed, out);
    if (aug->parsed()) return ck::cmd_augment(data_dir, gan_dir, k, seed);
    if (comp->parsed()) return ck::cmd_compress(config, teacher, out);
    if (ev->parsed()) return ck::cmd_eval(checkpoint, data_dir, out, annotate, oracle);
    if (bench->parsed()) return ck::cmd_bench_fps(checkpoint, iters, warmup, bench_batch, seed, out);
    if (abl->parsed()) return ck::cmd_ablation(study, config, out);
    return 1;
}
