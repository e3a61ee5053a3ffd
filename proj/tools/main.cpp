#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "gridident/pipeline.hpp"

using namespace gridident;

namespace {

AppConfig load_cfg(const std::string& path, int64_t seed_override) {
    AppConfig cfg = load_config(path);
    if (seed_override >= 0) {
        cfg.seed = static_cast<uint64_t>(seed_override);
        cfg.training.seed = cfg.seed;
    }
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"System identification of coupled power networks with graph neural ODEs"};
    app.require_subcommand(1);

    std::string config_path, out, traj_dir, data_dir, model_kind, ckpt, report, dataset_path;
    std::string truth = "noisy", scenario;
    double fraction = -1.0;
    int64_t seed_override = -1;

    auto* sim = app.add_subcommand("simulate", "Generate excitation and simulate trajectories");
    sim->add_option("--config", config_path, "Config JSON")->required();
    sim->add_option("--out", out, "Output directory")->required();
    sim->add_option("--seed", seed_override, "Master seed override");

    auto* ds = app.add_subcommand("dataset", "Slice trajectories into datasets D1-D4");
    ds->add_option("--config", config_path, "Config JSON")->required();
    ds->add_option("--traj", traj_dir, "Directory with traj_<k>.csv")->required();
    ds->add_option("--out", out, "Output directory")->required();
    ds->add_option("--seed", seed_override, "Master seed override");

    auto* tr = app.add_subcommand("train", "Train a model with early stopping");
    tr->add_option("--config", config_path, "Config JSON")->required();
    tr->add_option("--data", data_dir, "Directory with d1.gnds/d2.gnds")->required();
    tr->add_option("--model", model_kind, "mpg | monolith");
    tr->add_option("--out", ckpt, "Checkpoint output path")->required();
    tr->add_option("--report", report, "Training report CSV path");
    tr->add_option("--seed", seed_override, "Master seed override");

    auto* sw = app.add_subcommand("sweep", "Deterministic hyperparameter sweep");
    sw->add_option("--config", config_path, "Config JSON")->required();
    sw->add_option("--data", data_dir, "Directory with d1..d3.gnds")->required();
    sw->add_option("--out", out, "Output directory")->required();
    sw->add_option("--seed", seed_override, "Master seed override");

    auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
    ev->add_option("--ckpt", ckpt, "Checkpoint path")->required();
    ev->add_option("--data", dataset_path, "Dataset (.gnds) path")->required();
    ev->add_option("--out", out, "Output directory")->required();
    ev->add_option("--truth", truth, "noisy | clean")->check(CLI::IsMember({"noisy", "clean"}));

    auto* tf = app.add_subcommand("transfer", "Topology-change transfer experiment");
    tf->add_option("--config", config_path, "Config JSON")->required();
    tf->add_option("--ckpt", ckpt, "Checkpoint trained on the original system")->required();
    tf->add_option("--scenario", scenario, "Scenario name override");
    tf->add_option("--data", data_dir, "Directory with the original d4.gnds")->required();
    tf->add_option("--fraction", fraction, "Retraining data fraction");
    tf->add_option("--out", out, "Output directory")->required();
    tf->add_option("--seed", seed_override, "Master seed override");

    auto* gc = app.add_subcommand("gradcheck", "Run the gradient-check suite");
    (void)gc;

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (sim->parsed()) {
            pipeline::cmd_simulate(load_cfg(config_path, seed_override), out);
        } else if (ds->parsed()) {
            pipeline::cmd_dataset(load_cfg(config_path, seed_override), traj_dir, out);
        } else if (tr->parsed()) {
            pipeline::cmd_train(load_cfg(config_path, seed_override), data_dir, model_kind, ckpt,
                                report);
        } else if (sw->parsed()) {
            pipeline::cmd_sweep(load_cfg(config_path, seed_override), data_dir, out);
        } else if (ev->parsed()) {
            pipeline::cmd_eval(ckpt, dataset_path, out,
                               truth == "clean" ? TruthSource::clean_trajectory
                                                : TruthSource::noisy_targets);
        } else if (tf->parsed()) {
            AppConfig cfg = load_cfg(config_path, seed_override);
            if (!scenario.empty()) cfg.transfer.scenario = scenario;
            double frac = fraction > 0.0 ? fraction : cfg.transfer.fraction;
            pipeline::cmd_transfer(cfg, ckpt, data_dir, frac, out);
        } else if (gc->parsed()) {
            auto rep = pipeline::run_gradcheck_suite(true);
            std::printf("gradcheck: layers %.3e, rk4 %.3e, full model %.3e -> %s\n",
                        rep.layer_max, rep.rk4_max, rep.full_model_max,
                        rep.pass() ? "pass" : "FAIL");
            return rep.pass() ? 0 : 3;
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const ShapeError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numeric failure: %s\n", e.what());
        return 3;
    } catch (const IoError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
