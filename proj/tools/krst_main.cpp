#include <chrono>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "krst/trainer.hpp"

namespace {

krst::RunConfig load_run_config(const std::string& path) {
    krst::RunConfig rc;
    if (path.empty()) return rc;
    std::ifstream f(path);
    if (!f) throw krst::ConfigError("cannot open config " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw krst::ConfigError(path + ": " + e.what());
    }
    from_json(j, rc);
    return rc;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"keyword-aware relative spatio-temporal graph network"};
    app.require_subcommand(1);

    std::string config_path, preset, out, data, split = "test", ckpt, sample;
    uint64_t seed = 0;
    std::vector<std::string> ablations = {"word_attention", "object_attention", "relative",
                                          "absolute", "disentangle"};

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "run config JSON");
        cmd->add_option("--preset", preset, "desk or paper")
            ->check(CLI::IsMember({"desk", "paper"}));
        cmd->add_option("--seed", seed, "seed override");
        cmd->add_option("--out", out, "output directory");
        return cmd;
    };

    CLI::App* cmd_gen = add_common(app.add_subcommand("gen", "generate a synthetic dataset"));
    std::string task_name;
    cmd_gen->add_option("--task", task_name,
                        "frame_relpos | transition | action_count | multichoice_relation");

    CLI::App* cmd_train = add_common(app.add_subcommand("train", "train a model"));
    cmd_train->add_option("--data", data, "dataset directory");

    CLI::App* cmd_eval = app.add_subcommand("eval", "evaluate a checkpoint on a split");
    cmd_eval->add_option("--checkpoint", ckpt, "checkpoint path")->required();
    cmd_eval->add_option("--data", data, "dataset directory")->required();
    cmd_eval->add_option("--split", split, "train | val | test");
    cmd_eval->add_option("--out", out, "output directory");

    CLI::App* cmd_ablate = add_common(app.add_subcommand("ablate", "run the ablation table"));
    cmd_ablate->add_option("--data", data, "dataset directory");
    cmd_ablate->add_option("--ablations", ablations, "variants to disable")->delimiter(',');

    CLI::App* cmd_gradcheck =
        app.add_subcommand("gradcheck", "finite-difference audit of the full pipeline");
    cmd_gradcheck->add_option("--out", out, "scratch directory for tiny fixtures");

    CLI::App* cmd_dump = app.add_subcommand("dump-attn", "attention trace for one sample");
    cmd_dump->add_option("--checkpoint", ckpt, "checkpoint path")->required();
    cmd_dump->add_option("--data", data, "dataset directory")->required();
    cmd_dump->add_option("--split", split, "train | val | test");
    cmd_dump->add_option("--id", sample, "sample id")->required();
    cmd_dump->add_option("--out", out, "also write the trace under this directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (cmd_gen->parsed()) {
            krst::RunConfig rc = load_run_config(config_path);
            if (!preset.empty()) {
                rc.preset = preset;
                apply_preset(rc);
            }
            if (cmd_gen->count("--seed")) rc.gen.seed = seed;
            if (!task_name.empty()) rc.gen.task = krst::task_from_string(task_name);
            std::string dir = out.empty() ? rc.data_dir : out;
            auto t0 = std::chrono::steady_clock::now();
            krst::generate_dataset(rc.gen, dir);
            std::cout << "wrote dataset " << dir << " (task " << task_to_string(rc.gen.task)
                      << ", " << rc.gen.n_train << "/" << rc.gen.n_val << "/" << rc.gen.n_test
                      << " samples, " << seconds_since(t0) << "s)\n";
        } else if (cmd_train->parsed()) {
            krst::RunConfig rc = load_run_config(config_path);
            if (!preset.empty()) {
                rc.preset = preset;
                apply_preset(rc);
            }
            if (cmd_train->count("--seed")) rc.seed = seed;
            if (!data.empty()) rc.data_dir = data;
            if (!out.empty()) rc.out_dir = out;
            auto t0 = std::chrono::steady_clock::now();
            krst::TrainResult res = krst::train_run(rc);
            krst::DatasetInfo info = krst::load_dataset_info(rc.data_dir);
            std::cout << "trained " << res.epochs_run << " epochs, train_loss "
                      << res.train_loss << ", val " << res.val.metric(info.task) << " ("
                      << seconds_since(t0) << "s)\n";
        } else if (cmd_eval->parsed()) {
            krst::KrstModel model = krst::load_run_checkpoint(ckpt);
            krst::LoadedSplit ls = krst::load_split_inputs(data, split);
            krst::EvalResult ev = krst::evaluate_split(model, ls);
            krst::Task task = model.config().task;
            nlohmann::json mj{{"task", task_to_string(task)},
                              {"split", split},
                              {"checkpoint", ckpt}};
            mj.update(ev.summary(task));
            if (!out.empty()) {
                std::filesystem::create_directories(out);
                std::ofstream mf(out + "/metrics.json", std::ios::trunc);
                mf << mj.dump(2) << "\n";
                std::ofstream pf(out + "/predictions.jsonl", std::ios::trunc);
                for (const auto& row : ev.per_sample) pf << row.dump() << "\n";
                if (!mf || !pf) throw krst::DataError("cannot write outputs under " + out);
            }
            std::cout << mj.dump(2) << "\n";
        } else if (cmd_ablate->parsed()) {
            krst::RunConfig rc = load_run_config(config_path);
            if (!preset.empty()) {
                rc.preset = preset;
                apply_preset(rc);
            }
            if (cmd_ablate->count("--seed")) rc.seed = seed;
            if (!data.empty()) rc.data_dir = data;
            if (!out.empty()) rc.out_dir = out;
            nlohmann::json table = krst::run_ablation(rc, ablations);
            std::cout << table.dump(2) << "\n";
        } else if (cmd_gradcheck->parsed()) {
            std::string dir = out.empty() ? "gradcheck_work" : out;
            auto reports = krst::gradcheck_pipeline(dir);
            bool all_pass = true;
            for (const auto& r : reports) {
                std::cout << r.name << ": worst_rel_err " << r.result.max_rel_err << " ("
                          << r.result.worst_param << "[" << r.result.worst_index << "]), "
                          << r.result.coords_checked << " coords, " << r.result.rejected
                          << " tie-adjacent rejected, threshold " << r.threshold << " -> "
                          << (r.pass ? "pass" : "FAIL") << "\n";
                all_pass = all_pass && r.pass;
            }
            if (!all_pass) throw krst::NumericError("gradcheck: threshold exceeded");
        } else if (cmd_dump->parsed()) {
            nlohmann::json trace = krst::dump_attn(ckpt, data, split, sample);
            if (!out.empty()) {
                std::filesystem::create_directories(out);
                std::ofstream f(out + "/attn_" + sample + ".json", std::ios::trunc);
                f << trace.dump(2) << "\n";
                if (!f) throw krst::DataError("cannot write trace under " + out);
            }
            std::cout << trace.dump(2) << "\n";
        }
    } catch (const krst::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const krst::DimError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const krst::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const krst::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
