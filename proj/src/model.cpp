#include "krst/model.hpp"

#include "krst/lstm.hpp"

namespace krst {

Task task_from_string(const std::string& s) {
    if (s == "frame_relpos") return Task::FrameRelpos;
    if (s == "transition") return Task::Transition;
    if (s == "action_count") return Task::ActionCount;
    if (s == "multichoice_relation") return Task::MultichoiceRelation;
    throw ConfigError("unknown task '" + s + "'");
}

std::string task_to_string(Task t) {
    switch (t) {
        case Task::FrameRelpos: return "frame_relpos";
        case Task::Transition: return "transition";
        case Task::ActionCount: return "action_count";
        default: return "multichoice_relation";
    }
}

bool task_is_multichoice(Task t) { return t == Task::MultichoiceRelation; }
bool task_is_count(Task t) { return t == Task::ActionCount; }

void ModelConfig::validate() const {
    graph.validate();
    if (C < 1 || C_s < 1 || C_o < 1 || C_w < 1 || embed_dim < 1)
        throw ConfigError("model: widths must be >= 1");
    if (C != C_o)
        throw ConfigError("model: C must equal C_o so graph layers compose");
    if (C_w % 2 != 0)
        throw ConfigError("model: C_w must be even to split across LSTM directions");
    if (vocab_size < 1) throw ConfigError("model: vocab_size must be >= 1");
    if (task_is_multichoice(task) && M < 2)
        throw ConfigError("model: multichoice needs M >= 2");
    if (!task_is_multichoice(task) && !task_is_count(task) && answer_vocab < 1)
        throw ConfigError("model: open-ended task needs an answer vocabulary");
    if (task_is_count(task) && count_min > count_max)
        throw ConfigError("model: empty count range");
    if (dropout < 0.0 || dropout >= 1.0)
        throw ConfigError("model: dropout must lie in [0,1)");
}

void to_json(nlohmann::json& j, const GraphConfig& g) {
    j = nlohmann::json{{"alpha_spatial", g.alpha_spatial},
                       {"alpha_temporal", g.alpha_temporal},
                       {"H", g.H},
                       {"pooling_spatial", pooling_to_string(g.pooling_spatial)},
                       {"pooling_aggregation", pooling_to_string(g.pooling_aggregation)},
                       {"pooling_temporal", pooling_to_string(g.pooling_temporal)},
                       {"relative", g.relative_enabled},
                       {"absolute", g.absolute_enabled},
                       {"disentangled", g.disentangled}};
}

void from_json(const nlohmann::json& j, GraphConfig& g) {
    g.alpha_spatial = j.value("alpha_spatial", g.alpha_spatial);
    g.alpha_temporal = j.value("alpha_temporal", g.alpha_temporal);
    g.H = j.value("H", g.H);
    if (j.contains("pooling_spatial"))
        g.pooling_spatial = pooling_from_string(j["pooling_spatial"].get<std::string>());
    if (j.contains("pooling_aggregation"))
        g.pooling_aggregation = pooling_from_string(j["pooling_aggregation"].get<std::string>());
    if (j.contains("pooling_temporal"))
        g.pooling_temporal = pooling_from_string(j["pooling_temporal"].get<std::string>());
    g.relative_enabled = j.value("relative", g.relative_enabled);
    g.absolute_enabled = j.value("absolute", g.absolute_enabled);
    g.disentangled = j.value("disentangled", g.disentangled);
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
    j = nlohmann::json{{"C", c.C},
                       {"C_s", c.C_s},
                       {"C_o", c.C_o},
                       {"C_w", c.C_w},
                       {"embed_dim", c.embed_dim},
                       {"vocab_size", c.vocab_size},
                       {"answer_vocab", c.answer_vocab},
                       {"M", c.M},
                       {"count_min", c.count_min},
                       {"count_max", c.count_max},
                       {"task", task_to_string(c.task)},
                       {"graph", c.graph},
                       {"dropout", c.dropout},
                       {"two_stream", c.two_stream},
                       {"word_attention", c.word_attention},
                       {"object_attention", c.object_attention}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
    c.C = j.value("C", c.C);
    c.C_s = j.value("C_s", c.C_s);
    c.C_o = j.value("C_o", c.C_o);
    c.C_w = j.value("C_w", c.C_w);
    c.embed_dim = j.value("embed_dim", c.embed_dim);
    c.vocab_size = j.value("vocab_size", c.vocab_size);
    c.answer_vocab = j.value("answer_vocab", c.answer_vocab);
    c.M = j.value("M", c.M);
    c.count_min = j.value("count_min", c.count_min);
    c.count_max = j.value("count_max", c.count_max);
    if (j.contains("task")) c.task = task_from_string(j["task"].get<std::string>());
    if (j.contains("graph")) from_json(j["graph"], c.graph);
    c.dropout = j.value("dropout", c.dropout);
    c.two_stream = j.value("two_stream", c.two_stream);
    c.word_attention = j.value("word_attention", c.word_attention);
    c.object_attention = j.value("object_attention", c.object_attention);
}

KrstModel::KrstModel(ModelConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

namespace {
Tensor zeros_param(ParamStore& store, const std::string& name, Shape shape) {
    return store.create_raw(name, shape, std::vector<double>(shape_numel(shape), 0.0));
}

// Effective fan for weight matrices: uniform(-1/sqrt(n/3), ..) has unit rms
// gain per matmul, so feature magnitudes survive the depth of the pipeline.
long fan(long n) { return std::max<long>(1, n / 3); }
}  // namespace

void KrstModel::init_params(uint64_t seed) {
    std::mt19937_64 rng(seed);
    const long C = cfg_.C, Cs = cfg_.C_s, Co = cfg_.C_o, Cw = cfg_.C_w, D = cfg_.embed_dim;
    const long h = std::max<long>(1, Cw / 2);

    store_.create("embed.table", {cfg_.vocab_size, D}, 1, rng);  // unit-scale word vectors
    make_bilstm_params(store_, "question", D, Cw / 2, rng);

    std::vector<std::string> streams = {"app"};
    if (cfg_.two_stream) streams.push_back("mot");
    for (const std::string& s : streams) {
        store_.create(s + ".W_o", {C, Cs + 6}, fan(Cs + 6), rng);
        // The video feature I keeps the raw stream width, so the fused input
        // is C + C_s wide.
        store_.create(s + ".obj.W1", {Co, C + Cs}, fan(C + Cs), rng);
        zeros_param(store_, s + ".obj.b1", {1, Co});
        store_.create(s + ".obj.W2", {Co, Co}, fan(Co), rng);
        zeros_param(store_, s + ".obj.b2", {1, Co});

        if (cfg_.object_attention) {
            if (cfg_.word_attention) {
                store_.create(s + ".kw.W1", {Cw, Cw}, fan(Cw), rng);
                zeros_param(store_, s + ".kw.b1", {1, Cw});
                store_.create(s + ".kw.W2", {1, Cw}, fan(Cw), rng);
                zeros_param(store_, s + ".kw.b2", {1, 1});
            } else {
                store_.create(s + ".kw.W_p", {D, Cw}, fan(Cw), rng);
            }
            store_.create(s + ".kw.W_q", {Co, D}, fan(D), rng);
        }

        for (long l = 0; l < cfg_.graph.H; ++l) {
            std::string sp = s + ".graph.s" + std::to_string(l);
            if (cfg_.graph.absolute_enabled) store_.create(sp + ".W_a", {C, Co}, fan(Co), rng);
            if (cfg_.graph.relative_enabled) store_.create(sp + ".W_r", {C, Co}, fan(Co), rng);
            if (cfg_.graph.disentangled) {
                std::string tp = s + ".graph.t" + std::to_string(l);
                if (cfg_.graph.absolute_enabled)
                    store_.create(tp + ".W_a", {C, C}, fan(C), rng);
                if (cfg_.graph.relative_enabled)
                    store_.create(tp + ".W_r", {C, C}, fan(C), rng);
            }
        }

        for (const char* branch : {".bil_s", ".bil_t"}) {
            store_.create(s + branch + ".U", {C, h}, fan(C), rng);
            store_.create(s + branch + ".V", {Cw, h}, fan(Cw), rng);
            store_.create(s + branch + ".P", {h, Cw}, fan(h), rng);
        }

        store_.create(s + ".fuse.W_h", {Cw, Cw}, fan(Cw), rng);
        store_.create(s + ".fuse.W_g", {Cw, Cw}, fan(Cw), rng);
        zeros_param(store_, s + ".fuse.b_a", {1, Cw});
        store_.create(s + ".fuse.w_v", {1, Cw}, fan(Cw), rng);
        store_.create(s + ".fuse.W_z", {Cw, Cw}, fan(Cw), rng);
        zeros_param(store_, s + ".fuse.b_z", {1, Cw});
    }

    if (cfg_.two_stream) {
        store_.create("merge.W", {Cw, Cw}, fan(Cw), rng);
        zeros_param(store_, "merge.b", {1, Cw});
    }

    if (task_is_multichoice(cfg_.task)) {
        store_.create("head.score.W", {1, Cw}, fan(Cw), rng);
        zeros_param(store_, "head.score.b", {1, 1});
    } else if (task_is_count(cfg_.task)) {
        store_.create("head.count.W", {1, Cw}, fan(Cw), rng);
        zeros_param(store_, "head.count.b", {1, 1});
    } else {
        store_.create("head.cls.W1", {Cw, Cw}, fan(Cw), rng);
        zeros_param(store_, "head.cls.b1", {1, Cw});
        store_.create("head.cls.W2", {cfg_.answer_vocab, Cw}, fan(Cw), rng);
        zeros_param(store_, "head.cls.b2", {1, cfg_.answer_vocab});
    }
}

GraphLayers KrstModel::graph_layers(const std::string& prefix) const {
    GraphLayers layers;
    for (long l = 0; l < cfg_.graph.H; ++l) {
        GraphLayerParams sp;
        std::string sname = prefix + ".graph.s" + std::to_string(l);
        if (cfg_.graph.absolute_enabled) sp.W_a = store_.get(sname + ".W_a");
        if (cfg_.graph.relative_enabled) sp.W_r = store_.get(sname + ".W_r");
        layers.spatial.push_back(sp);
        if (cfg_.graph.disentangled) {
            GraphLayerParams tp;
            std::string tname = prefix + ".graph.t" + std::to_string(l);
            if (cfg_.graph.absolute_enabled) tp.W_a = store_.get(tname + ".W_a");
            if (cfg_.graph.relative_enabled) tp.W_r = store_.get(tname + ".W_r");
            layers.temporal.push_back(tp);
        }
    }
    return layers;
}

Tensor KrstModel::video_nodes(const std::string& prefix, const ObjectFeatureBank& bank,
                              bool training, std::mt19937_64& rng) const {
    Tensor O = project_objects(bank.O_s, bank.O_p, store_.get(prefix + ".W_o"));
    Tensor O_hat =
        fuse_video_object(O, bank.I, bank.K, store_.get(prefix + ".obj.W1"),
                          store_.get(prefix + ".obj.b1"), store_.get(prefix + ".obj.W2"),
                          store_.get(prefix + ".obj.b2"));
    return dropout(O_hat, cfg_.dropout, training, rng);
}

Tensor KrstModel::stream_z(const std::string& prefix, const Tensor& O_hat, long K,
                           const QuestionEncoding& q, bool training, std::mt19937_64& rng,
                           AttnTrace* trace) const {
    Tensor V;
    if (cfg_.object_attention) {
        Tensor E_hat;
        if (cfg_.word_attention) {
            WordAttentionOut wa =
                word_attention(q.Q_w, q.E, store_.get(prefix + ".kw.W1"),
                               store_.get(prefix + ".kw.b1"), store_.get(prefix + ".kw.W2"),
                               store_.get(prefix + ".kw.b2"));
            E_hat = wa.E_hat;
            if (trace) trace->word_weights = wa.A_w.value();
        } else {
            E_hat = matmul_nt(q.Q_s, store_.get(prefix + ".kw.W_p"));
        }
        Tensor A_o = object_attention(O_hat, E_hat, store_.get(prefix + ".kw.W_q"));
        if (trace) trace->object_scores = A_o.value();
        V = augment_nodes(O_hat, A_o);
    } else {
        V = O_hat;
    }

    GraphOut g = run_graphs(V, K, graph_layers(prefix), cfg_.graph,
                            trace ? &trace->graph : nullptr);

    BilinearParams bs{store_.get(prefix + ".bil_s.U"), store_.get(prefix + ".bil_s.V"),
                      store_.get(prefix + ".bil_s.P")};
    BilinearParams bt{store_.get(prefix + ".bil_t.U"), store_.get(prefix + ".bil_t.V"),
                      store_.get(prefix + ".bil_t.P")};
    Tensor sp = bilinear_attend(g.S, q.Q_w, bs);
    Tensor tp = bilinear_attend(g.Tt, q.Q_w, bt);

    FuseParams fp{store_.get(prefix + ".fuse.W_h"), store_.get(prefix + ".fuse.W_g"),
                  store_.get(prefix + ".fuse.b_a"), store_.get(prefix + ".fuse.w_v"),
                  store_.get(prefix + ".fuse.W_z"), store_.get(prefix + ".fuse.b_z")};
    Tensor z = fuse(sp, tp, q.Q_s, fp);
    return dropout(z, cfg_.dropout, training, rng);
}

Tensor KrstModel::answer_vector(const std::vector<long>& tokens, const Tensor& O_app,
                                const Tensor& O_mot, long K, bool training,
                                std::mt19937_64& rng, AttnTrace* trace) const {
    BiLstmParams lstm = bind_bilstm_params(store_, "question", cfg_.C_w / 2);
    QuestionEncoding q = encode_question(tokens, store_.get("embed.table"), lstm);
    Tensor z_app = stream_z("app", O_app, K, q, training, rng, trace);
    if (!cfg_.two_stream) return z_app;
    Tensor z_mot = stream_z("mot", O_mot, K, q, training, rng, nullptr);
    return merge_streams(z_app, z_mot, store_.get("merge.W"), store_.get("merge.b"));
}

ForwardOut KrstModel::forward(const ModelInput& in, bool training, std::mt19937_64& rng,
                              AttnTrace* trace) const {
    validate_bank(in.app);
    if (cfg_.two_stream) {
        validate_bank(in.mot);
        check_stream_pair(in.app, in.mot);
    }
    long K = in.app.K;
    Tensor O_app = video_nodes("app", in.app, training, rng);
    Tensor O_mot;
    if (cfg_.two_stream) O_mot = video_nodes("mot", in.mot, training, rng);

    ForwardOut out;
    if (task_is_multichoice(cfg_.task)) {
        if (static_cast<long>(in.candidates.size()) != cfg_.M)
            throw DataError("forward: expected " + std::to_string(cfg_.M) + " candidates, got " +
                            std::to_string(in.candidates.size()));
        std::vector<Tensor> scores;
        scores.reserve(cfg_.M);
        for (long m = 0; m < cfg_.M; ++m) {
            std::vector<long> tokens = in.question;
            tokens.insert(tokens.end(), in.candidates[m].begin(), in.candidates[m].end());
            Tensor z = answer_vector(tokens, O_app, O_mot, K, training, rng,
                                     m == 0 ? trace : nullptr);
            scores.push_back(affine(z, store_.get("head.score.W"), store_.get("head.score.b")));
        }
        out.scores = vstack(scores);
    } else if (task_is_count(cfg_.task)) {
        Tensor z = answer_vector(in.question, O_app, O_mot, K, training, rng, trace);
        out.pred = regress_count(z, store_.get("head.count.W"), store_.get("head.count.b"));
    } else {
        Tensor z = answer_vector(in.question, O_app, O_mot, K, training, rng, trace);
        Tensor logits = mlp2(z, store_.get("head.cls.W1"), store_.get("head.cls.b1"),
                             store_.get("head.cls.W2"), store_.get("head.cls.b2"));
        out.log_probs = log_softmax(logits, 1);
    }
    return out;
}

Tensor KrstModel::loss(const ForwardOut& out, long target) const {
    if (task_is_multichoice(cfg_.task)) return hinge_loss(out.scores, target);
    if (task_is_count(cfg_.task)) {
        if (target < cfg_.count_min || target > cfg_.count_max)
            throw DataError("loss: count target " + std::to_string(target) + " outside range");
        return mse_loss(out.pred, static_cast<double>(target));
    }
    if (target < 0 || target >= out.log_probs.cols())
        throw DataError("loss: label " + std::to_string(target) + " outside answer vocabulary");
    return scale(element(out.log_probs, 0, target), -1.0);
}

long KrstModel::predict(const ForwardOut& out) const {
    if (task_is_count(cfg_.task))
        return round_count(out.pred.at(0, 0), cfg_.count_min, cfg_.count_max);
    const Tensor& t = task_is_multichoice(cfg_.task) ? out.scores : out.log_probs;
    const std::vector<double>& v = t.value();
    long best = 0;
    for (size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = static_cast<long>(i);
    return best;
}

}  // namespace krst
