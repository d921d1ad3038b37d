#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "krst/data.hpp"
#include "krst/gradcheck.hpp"

namespace krst {

// One experiment: dataset location, model switches, optimization schedule.
// The "paper" preset pins the published hyperparameters; explicit config
// fields and CLI flags override them afterwards.
struct RunConfig {
    std::string preset = "desk";
    std::string data_dir = "data";
    std::string out_dir = "run";
    GenParams gen;  // consumed by the gen subcommand

    long C = 64;    // model width; must equal the dataset feature width
    long C_w = 64;  // question encoding width (even)
    GraphConfig graph;
    double dropout = 0.0;
    bool two_stream = true;
    bool word_attention = true;
    bool object_attention = true;

    long epochs = 30;
    long batch_size = 0;  // 0: 16 on desk, 64 multichoice / 128 otherwise on paper
    double lr = 1e-3;
    uint64_t seed = 0;
    // > 0: stop once val accuracy >= this (count: val mse <= this).
    double early_stop = 0.0;

    void validate() const;
    long resolve_batch(Task task) const;
};

void apply_preset(RunConfig& rc);
void to_json(nlohmann::json& j, const RunConfig& rc);
void from_json(const nlohmann::json& j, RunConfig& rc);

// Derives the model wiring from a run config and the generated dataset.
ModelConfig model_config_from(const RunConfig& rc, const DatasetInfo& info);

struct LoadedSplit {
    std::vector<Sample> samples;
    std::vector<ModelInput> inputs;
};

LoadedSplit load_split_inputs(const std::string& data_dir, const std::string& split);

struct EvalResult {
    long n = 0;
    double accuracy = 0.0;
    double mse = 0.0;       // rounded-clamped predictions, count task
    double mean_loss = 0.0;
    nlohmann::json per_sample = nlohmann::json::array();  // {id, pred, target}

    double metric(Task task) const;  // accuracy, or mse for count
    nlohmann::json summary(Task task) const;
};

EvalResult evaluate_split(const KrstModel& model, const LoadedSplit& split);

struct TrainResult {
    long epochs_run = 0;
    double train_loss = 0.0;  // mean over the last completed epoch
    EvalResult val;
};

// Shuffled mini-batch Adam on the task loss. Writes checkpoint.bin,
// train_log.jsonl and metrics.json under rc.out_dir. Deterministic given
// (dataset seed, rc.seed).
TrainResult train_run(const RunConfig& rc);

void save_run_checkpoint(const KrstModel& model, const RunConfig& rc, const std::string& path);

// Rebuilds the model stored in a checkpoint; rc_out receives the stored run
// config when non-null.
KrstModel load_run_checkpoint(const std::string& path, RunConfig* rc_out = nullptr);

// Trains the full model plus one variant per ablation name with the shared
// seed, evaluates each on the test split, writes <out_dir>/ablation.json and
// returns the table. Names: word_attention, object_attention, relative,
// absolute, disentangle.
nlohmann::json run_ablation(const RunConfig& base, const std::vector<std::string>& names);

struct GradcheckReport {
    std::string name;
    GradCheckResult result;
    double threshold = 1e-4;
    bool pass = false;
};

// Finite-difference audit of the full pipeline, one tiny dataset per answer
// head, plus a quadratic sanity target. work_dir receives the generated
// fixtures.
std::vector<GradcheckReport> gradcheck_pipeline(const std::string& work_dir);

// Attention/neighbor trace of one sample under a trained checkpoint.
nlohmann::json dump_attn(const std::string& checkpoint_path, const std::string& data_dir,
                         const std::string& split, const std::string& sample_id);

}  // namespace krst
