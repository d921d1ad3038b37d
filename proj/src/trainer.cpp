#include "krst/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "krst/rng.hpp"

namespace krst {

void RunConfig::validate() const {
    if (preset != "desk" && preset != "paper")
        throw ConfigError("run: preset must be desk or paper");
    if (C < 1) throw ConfigError("run: C must be >= 1");
    if (C_w < 2 || C_w % 2 != 0) throw ConfigError("run: C_w must be even and >= 2");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("run: dropout must be in [0,1)");
    if (epochs < 0) throw ConfigError("run: epochs must be >= 0");
    if (batch_size < 0) throw ConfigError("run: batch_size must be >= 0");
    if (!(lr > 0.0)) throw ConfigError("run: lr must be > 0");
    graph.validate();
}

long RunConfig::resolve_batch(Task task) const {
    if (batch_size > 0) return batch_size;
    if (preset == "paper") return task_is_multichoice(task) ? 64 : 128;
    return 16;
}

void apply_preset(RunConfig& rc) {
    if (rc.preset == "paper") {
        rc.C = 512;
        rc.C_w = 512;
        rc.dropout = 0.3;
        rc.lr = 1e-4;
        rc.epochs = 30;
        rc.batch_size = 0;
        rc.graph = GraphConfig{};  // H=2, alpha 0.6 / 0.8
        rc.gen.T = 20;
        rc.gen.K = 10;
        rc.gen.C = 512;
        return;
    }
    // desk: CPU-minutes scale. Complete per-frame graphs (K is tiny) and no
    // dropout keep the relation tasks inside the 30-epoch budget.
    rc.C = 64;
    rc.C_w = 64;
    rc.dropout = 0.0;
    rc.lr = 1e-3;
    rc.epochs = 30;
    rc.batch_size = 16;
    rc.graph = GraphConfig{};
    rc.graph.alpha_spatial = 1.0;
    rc.gen.T = 4;
    rc.gen.K = 4;
    rc.gen.C = 64;
}

void to_json(nlohmann::json& j, const RunConfig& rc) {
    nlohmann::json gj;
    to_json(gj, rc.gen);
    nlohmann::json graphj;
    to_json(graphj, rc.graph);
    j = nlohmann::json{{"preset", rc.preset},
                       {"data_dir", rc.data_dir},
                       {"out_dir", rc.out_dir},
                       {"gen", gj},
                       {"C", rc.C},
                       {"C_w", rc.C_w},
                       {"graph", graphj},
                       {"dropout", rc.dropout},
                       {"two_stream", rc.two_stream},
                       {"word_attention", rc.word_attention},
                       {"object_attention", rc.object_attention},
                       {"epochs", rc.epochs},
                       {"batch_size", rc.batch_size},
                       {"lr", rc.lr},
                       {"seed", rc.seed},
                       {"early_stop", rc.early_stop}};
}

void from_json(const nlohmann::json& j, RunConfig& rc) {
    rc.preset = j.value("preset", rc.preset);
    apply_preset(rc);
    rc.data_dir = j.value("data_dir", rc.data_dir);
    rc.out_dir = j.value("out_dir", rc.out_dir);
    if (j.contains("gen")) from_json(j["gen"], rc.gen);
    rc.C = j.value("C", rc.C);
    rc.C_w = j.value("C_w", rc.C_w);
    if (j.contains("graph")) from_json(j["graph"], rc.graph);
    rc.dropout = j.value("dropout", rc.dropout);
    rc.two_stream = j.value("two_stream", rc.two_stream);
    rc.word_attention = j.value("word_attention", rc.word_attention);
    rc.object_attention = j.value("object_attention", rc.object_attention);
    rc.epochs = j.value("epochs", rc.epochs);
    rc.batch_size = j.value("batch_size", rc.batch_size);
    rc.lr = j.value("lr", rc.lr);
    rc.seed = j.value("seed", rc.seed);
    rc.early_stop = j.value("early_stop", rc.early_stop);
}

ModelConfig model_config_from(const RunConfig& rc, const DatasetInfo& info) {
    if (rc.C != info.C)
        throw DataError("run: model width C=" + std::to_string(rc.C) +
                        " must match dataset feature width " + std::to_string(info.C));
    ModelConfig mc;
    mc.C = rc.C;
    mc.C_s = info.C;
    mc.C_o = rc.C;
    mc.C_w = rc.C_w;
    mc.vocab_size = static_cast<long>(info.vocab.size());
    mc.answer_vocab = static_cast<long>(info.answers.size());
    mc.M = info.M;
    mc.count_min = info.count_min;
    mc.count_max = info.count_max;
    mc.task = info.task;
    mc.graph = rc.graph;
    mc.dropout = rc.dropout;
    mc.two_stream = rc.two_stream;
    mc.word_attention = rc.word_attention;
    mc.object_attention = rc.object_attention;
    mc.validate();
    return mc;
}

LoadedSplit load_split_inputs(const std::string& data_dir, const std::string& split) {
    LoadedSplit out;
    out.samples = load_split(data_dir, split);
    out.inputs.reserve(out.samples.size());
    for (const Sample& s : out.samples) out.inputs.push_back(load_input(data_dir, split, s));
    return out;
}

double EvalResult::metric(Task task) const { return task_is_count(task) ? mse : accuracy; }

nlohmann::json EvalResult::summary(Task task) const {
    nlohmann::json j{{"n", n},
                     {"accuracy", accuracy},
                     {"mean_loss", mean_loss},
                     {"metric", metric(task)}};
    if (task_is_count(task)) j["mse"] = mse;
    return j;
}

EvalResult evaluate_split(const KrstModel& model, const LoadedSplit& split) {
    EvalResult ev;
    ev.n = static_cast<long>(split.samples.size());
    if (ev.n == 0) throw DataError("evaluate: empty split");
    NoGradGuard guard;
    std::mt19937_64 rng(0);  // unused: dropout is off outside training
    double correct = 0.0, se = 0.0, loss_sum = 0.0;
    for (size_t i = 0; i < split.samples.size(); ++i) {
        ForwardOut out = model.forward(split.inputs[i], false, rng);
        long target = split.samples[i].answer;
        long pred = model.predict(out);
        loss_sum += model.loss(out, target).item();
        if (pred == target) correct += 1.0;
        double d = static_cast<double>(pred - target);
        se += d * d;
        ev.per_sample.push_back(nlohmann::json{
            {"id", split.samples[i].id}, {"pred", pred}, {"target", target}});
    }
    ev.accuracy = correct / static_cast<double>(ev.n);
    ev.mse = se / static_cast<double>(ev.n);
    ev.mean_loss = loss_sum / static_cast<double>(ev.n);
    return ev;
}

namespace {

bool early_stop_hit(const RunConfig& rc, Task task, const EvalResult& ev) {
    if (!(rc.early_stop > 0.0)) return false;
    if (task_is_count(task)) return ev.mse <= rc.early_stop;
    return ev.accuracy >= rc.early_stop;
}

}  // namespace

TrainResult train_run(const RunConfig& rc) {
    rc.validate();
    DatasetInfo info = load_dataset_info(rc.data_dir);
    ModelConfig mc = model_config_from(rc, info);
    LoadedSplit train = load_split_inputs(rc.data_dir, "train");
    LoadedSplit val = load_split_inputs(rc.data_dir, "val");

    KrstModel model(mc);
    model.init_params(mix_seed(rc.seed, 11));
    AdamState adam;
    adam.lr = rc.lr;
    long batch = rc.resolve_batch(info.task);
    long n = static_cast<long>(train.samples.size());

    std::filesystem::create_directories(rc.out_dir);
    std::ofstream log(rc.out_dir + "/train_log.jsonl", std::ios::trunc);
    if (!log) throw DataError("cannot write " + rc.out_dir + "/train_log.jsonl");

    TrainResult res;
    std::vector<long> order(n);
    std::iota(order.begin(), order.end(), 0L);
    for (long epoch = 0; epoch < rc.epochs; ++epoch) {
        std::mt19937_64 shuffle_rng(mix_seed(rc.seed, 1000 + epoch));
        std::mt19937_64 drop_rng(mix_seed(rc.seed, 5000 + epoch));
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        double loss_sum = 0.0;
        for (long start = 0; start < n; start += batch) {
            long stop = std::min(n, start + batch);
            model.params().zero_grads();
            for (long b = start; b < stop; ++b) {
                long idx = order[b];
                ForwardOut out = model.forward(train.inputs[idx], true, drop_rng);
                Tensor loss = model.loss(out, train.samples[idx].answer);
                double v = loss.item();
                if (!std::isfinite(v)) throw NumericError("train: non-finite loss");
                loss.backward();
                loss_sum += v;
            }
            model.params().scale_grads(1.0 / static_cast<double>(stop - start));
            adam_step(model.params(), adam);
        }

        res.train_loss = loss_sum / static_cast<double>(n);
        res.val = evaluate_split(model, val);
        res.epochs_run = epoch + 1;
        log << nlohmann::json{{"epoch", epoch},
                              {"train_loss", res.train_loss},
                              {"val_metric", res.val.metric(info.task)},
                              {"val_loss", res.val.mean_loss}}
                   .dump()
            << "\n";
        if (early_stop_hit(rc, info.task, res.val)) break;
    }
    if (rc.epochs == 0) res.val = evaluate_split(model, val);
    if (!log) throw DataError("short write to " + rc.out_dir + "/train_log.jsonl");

    save_run_checkpoint(model, rc, rc.out_dir + "/checkpoint.bin");
    nlohmann::json mj{{"task", task_to_string(info.task)},
                      {"epochs_run", res.epochs_run},
                      {"train_loss", res.train_loss},
                      {"val", res.val.summary(info.task)}};
    std::ofstream mf(rc.out_dir + "/metrics.json", std::ios::trunc);
    mf << mj.dump(2) << "\n";
    if (!mf) throw DataError("cannot write " + rc.out_dir + "/metrics.json");
    return res;
}

void save_run_checkpoint(const KrstModel& model, const RunConfig& rc, const std::string& path) {
    RunConfig clean = rc;  // paths are environment, not hyperparameters
    clean.data_dir.clear();
    clean.out_dir.clear();
    nlohmann::json mc_j, rc_j;
    to_json(mc_j, model.config());
    to_json(rc_j, clean);
    nlohmann::json blob{{"model", mc_j}, {"run", rc_j}};
    save_checkpoint(model.params(), path, blob.dump());
}

KrstModel load_run_checkpoint(const std::string& path, RunConfig* rc_out) {
    nlohmann::json blob;
    try {
        blob = nlohmann::json::parse(read_checkpoint_config(path));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path + ": bad checkpoint config: " + e.what());
    }
    if (!blob.contains("model")) throw DataError(path + ": checkpoint lacks a model config");
    ModelConfig mc;
    from_json(blob["model"], mc);
    if (rc_out && blob.contains("run")) from_json(blob["run"], *rc_out);
    KrstModel model(mc);
    model.init_params(0);
    load_checkpoint(model.params(), path);
    return model;
}

nlohmann::json run_ablation(const RunConfig& base, const std::vector<std::string>& names) {
    for (const std::string& name : names) {
        if (name != "word_attention" && name != "object_attention" && name != "relative" &&
            name != "absolute" && name != "disentangle")
            throw ConfigError("ablate: unknown ablation '" + name + "'");
    }
    DatasetInfo info = load_dataset_info(base.data_dir);
    LoadedSplit test = load_split_inputs(base.data_dir, "test");

    auto variant_config = [&](const std::string& name) {
        RunConfig rc = base;
        rc.out_dir = base.out_dir + "/" + name;
        if (name == "word_attention") rc.word_attention = false;
        if (name == "object_attention") rc.object_attention = false;
        if (name == "relative") rc.graph.relative_enabled = false;
        if (name == "absolute") rc.graph.absolute_enabled = false;
        if (name == "disentangle") rc.graph.disentangled = false;
        return rc;
    };

    nlohmann::json rows = nlohmann::json::array();
    std::vector<std::string> labels = {"full"};
    labels.insert(labels.end(), names.begin(), names.end());
    for (const std::string& label : labels) {
        RunConfig rc = label == "full" ? base : variant_config(label);
        if (label == "full") rc.out_dir = base.out_dir + "/full";
        TrainResult tr = train_run(rc);
        KrstModel model = load_run_checkpoint(rc.out_dir + "/checkpoint.bin");
        EvalResult ev = evaluate_split(model, test);
        rows.push_back(nlohmann::json{{"variant", label},
                                      {"epochs_run", tr.epochs_run},
                                      {"train_loss", tr.train_loss},
                                      {"val_metric", tr.val.metric(info.task)},
                                      {"test_metric", ev.metric(info.task)}});
    }

    nlohmann::json table{{"task", task_to_string(info.task)},
                         {"metric", task_is_count(info.task) ? "mse" : "accuracy"},
                         {"seed", base.seed},
                         {"rows", rows}};
    std::filesystem::create_directories(base.out_dir);
    std::ofstream f(base.out_dir + "/ablation.json", std::ios::trunc);
    f << table.dump(2) << "\n";
    if (!f) throw DataError("cannot write " + base.out_dir + "/ablation.json");
    return table;
}

std::vector<GradcheckReport> gradcheck_pipeline(const std::string& work_dir) {
    std::vector<GradcheckReport> reports;

    {
        GradcheckReport rep;
        rep.name = "quadratic";
        rep.threshold = 1e-9;
        ParamStore store;
        store.create_raw("w", {2, 3}, {0.4, -0.7, 1.3, 0.2, -1.1, 0.8});
        auto loss_fn = [&store] { return reduce_all(mul(store.get("w"), store.get("w")), Reduce::Sum); };
        rep.result = finite_diff_check(loss_fn, store, 1e-6, 6, 1);
        rep.pass = rep.result.max_rel_err < rep.threshold;
        reports.push_back(rep);
    }

    const Task tasks[] = {Task::FrameRelpos, Task::ActionCount, Task::MultichoiceRelation};
    for (Task task : tasks) {
        GenParams gp;
        gp.task = task;
        gp.T = 2;
        gp.K = 3;
        gp.C = 8;
        gp.n_categories = 5;
        gp.M = 2;
        gp.noise = 0.02;
        gp.n_train = 1;
        gp.n_val = 1;
        gp.n_test = 1;
        gp.seed = 17;
        std::string dir = work_dir + "/" + task_to_string(task);
        generate_dataset(gp, dir);

        RunConfig rc;
        rc.C = 8;
        rc.C_w = 8;
        rc.dropout = 0.0;
        rc.data_dir = dir;
        DatasetInfo info = load_dataset_info(dir);
        ModelConfig mc = model_config_from(rc, info);
        LoadedSplit split = load_split_inputs(dir, "train");

        KrstModel model(mc);
        model.init_params(mix_seed(3, static_cast<uint64_t>(task)));
        const ModelInput& input = split.inputs[0];
        long target = split.samples[0].answer;
        auto loss_fn = [&] {
            std::mt19937_64 rng(0);  // unused: evaluation mode
            return model.loss(model.forward(input, false, rng), target);
        };

        GradcheckReport rep;
        rep.name = task_to_string(task);
        rep.result = finite_diff_check(loss_fn, model.params(), 1e-4, 150, 99);
        rep.pass = rep.result.max_rel_err < rep.threshold;
        reports.push_back(rep);
    }
    return reports;
}

namespace {

nlohmann::json neighbor_records(const GraphTrace& trace, const GraphConfig& cfg, long T, long K) {
    nlohmann::json spatial = nlohmann::json::array();
    if (cfg.disentangled) {
        for (long t = 0; t < static_cast<long>(trace.spatial_frames.size()); ++t) {
            const NeighborIndex& nbrs = trace.spatial_frames[t];
            for (long k = 0; k < static_cast<long>(nbrs.idx.size()); ++k) {
                nlohmann::json lst = nlohmann::json::array();
                for (size_t j = 0; j < nbrs.idx[k].size(); ++j)
                    lst.push_back(nlohmann::json{{"frame", t},
                                                 {"object", nbrs.idx[k][j]},
                                                 {"distance", std::sqrt(nbrs.dist2[k][j])}});
                spatial.push_back(
                    nlohmann::json{{"frame", t}, {"object", k}, {"neighbors", lst}});
            }
        }
    } else if (!trace.spatial_frames.empty()) {
        const NeighborIndex& nbrs = trace.spatial_frames[0];  // joint graph over all nodes
        for (long i = 0; i < static_cast<long>(nbrs.idx.size()); ++i) {
            nlohmann::json lst = nlohmann::json::array();
            for (size_t j = 0; j < nbrs.idx[i].size(); ++j) {
                long g = nbrs.idx[i][j];
                lst.push_back(nlohmann::json{{"frame", g / K},
                                             {"object", g % K},
                                             {"distance", std::sqrt(nbrs.dist2[i][j])}});
            }
            spatial.push_back(
                nlohmann::json{{"frame", i / K}, {"object", i % K}, {"neighbors", lst}});
        }
    }

    nlohmann::json temporal = nlohmann::json::array();
    for (long t = 0; t < static_cast<long>(trace.temporal.idx.size()); ++t) {
        nlohmann::json lst = nlohmann::json::array();
        for (size_t j = 0; j < trace.temporal.idx[t].size(); ++j)
            lst.push_back(nlohmann::json{{"frame", trace.temporal.idx[t][j]},
                                         {"distance", std::sqrt(trace.temporal.dist2[t][j])}});
        temporal.push_back(nlohmann::json{{"frame", t}, {"neighbors", lst}});
    }
    (void)T;
    return nlohmann::json{{"spatial", spatial}, {"temporal", temporal}};
}

}  // namespace

nlohmann::json dump_attn(const std::string& checkpoint_path, const std::string& data_dir,
                         const std::string& split, const std::string& sample_id) {
    KrstModel model = load_run_checkpoint(checkpoint_path);
    std::vector<Sample> samples = load_split(data_dir, split);
    const Sample* found = nullptr;
    for (const Sample& s : samples)
        if (s.id == sample_id) {
            found = &s;
            break;
        }
    if (!found) throw DataError("dump-attn: unknown sample id '" + sample_id + "'");

    ModelInput input = load_input(data_dir, split, *found);
    NoGradGuard guard;
    std::mt19937_64 rng(0);
    AttnTrace trace;
    ForwardOut out = model.forward(input, false, rng, &trace);

    long T = input.app.T, K = input.app.K;
    nlohmann::json scores = nlohmann::json::array();
    if (!trace.object_scores.empty()) {
        for (long t = 0; t < T; ++t) {
            nlohmann::json row = nlohmann::json::array();
            for (long k = 0; k < K; ++k) row.push_back(trace.object_scores[t * K + k]);
            scores.push_back(row);
        }
    }
    return nlohmann::json{{"id", found->id},
                          {"split", split},
                          {"pred", model.predict(out)},
                          {"word_weights", trace.word_weights},
                          {"object_scores", scores},
                          {"neighbors",
                           neighbor_records(trace.graph, model.config().graph, T, K)}};
}

}  // namespace krst
