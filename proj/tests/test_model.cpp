#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "krst/model.hpp"
#include "krst/rng.hpp"

using namespace krst;

namespace {

ModelConfig small_config(Task task) {
    ModelConfig c;
    c.C = 8;
    c.C_s = 5;
    c.C_o = 8;
    c.C_w = 6;
    c.embed_dim = 7;
    c.vocab_size = 9;
    c.answer_vocab = 4;
    c.M = 3;
    c.count_min = 0;
    c.count_max = 5;
    c.task = task;
    c.graph.alpha_spatial = 1.0;
    c.graph.alpha_temporal = 1.0;
    c.dropout = 0.0;
    return c;
}

ObjectFeatureBank make_bank(const std::string& stream, long T, long K, long Cs, uint64_t seed) {
    std::mt19937_64 rng(seed);
    ObjectFeatureBank b;
    b.stream = stream;
    b.T = T;
    b.K = K;
    b.I = Tensor::from_data({T, Cs}, uniform_vector(rng, T * Cs, -1.0, 1.0));
    b.O_s = Tensor::from_data({T * K, Cs}, uniform_vector(rng, T * K * Cs, -1.0, 1.0));
    std::vector<double> boxes;
    std::uniform_real_distribution<double> u(0.05, 0.45);
    for (long r = 0; r < T * K; ++r) {
        double x1 = u(rng), y1 = u(rng), w = u(rng), h = u(rng);
        boxes.insert(boxes.end(), {x1, y1, x1 + w, y1 + h, w, h});
    }
    b.O_p = Tensor::from_data({T * K, 6}, boxes);
    return b;
}

ModelInput make_input(const ModelConfig& cfg, long T, long K, uint64_t seed) {
    ModelInput in;
    in.app = make_bank("appearance", T, K, cfg.C_s, seed);
    in.mot = make_bank("motion", T, K, cfg.C_s, seed + 1);
    in.question = {1, 4, 2, 7};
    if (task_is_multichoice(cfg.task))
        for (long m = 0; m < cfg.M; ++m) in.candidates.push_back({3, static_cast<long>(m)});
    return in;
}

// The full registration inventory for one stream prefix.
void stream_names(std::set<std::string>& s, const std::string& p, const ModelConfig& cfg) {
    s.insert({p + ".W_o", p + ".obj.W1", p + ".obj.b1", p + ".obj.W2", p + ".obj.b2"});
    if (cfg.object_attention) {
        if (cfg.word_attention)
            s.insert({p + ".kw.W1", p + ".kw.b1", p + ".kw.W2", p + ".kw.b2"});
        else
            s.insert(p + ".kw.W_p");
        s.insert(p + ".kw.W_q");
    }
    for (long l = 0; l < cfg.graph.H; ++l) {
        std::string sp = p + ".graph.s" + std::to_string(l);
        std::string tp = p + ".graph.t" + std::to_string(l);
        if (cfg.graph.absolute_enabled) s.insert(sp + ".W_a");
        if (cfg.graph.relative_enabled) s.insert(sp + ".W_r");
        if (cfg.graph.disentangled) {
            if (cfg.graph.absolute_enabled) s.insert(tp + ".W_a");
            if (cfg.graph.relative_enabled) s.insert(tp + ".W_r");
        }
    }
    for (std::string b : {".bil_s", ".bil_t"})
        s.insert({p + b + ".U", p + b + ".V", p + b + ".P"});
    s.insert({p + ".fuse.W_h", p + ".fuse.W_g", p + ".fuse.b_a", p + ".fuse.w_v", p + ".fuse.W_z",
              p + ".fuse.b_z"});
}

std::set<std::string> expected_names(const ModelConfig& cfg) {
    std::set<std::string> s = {"embed.table"};
    for (std::string d : {"question.fwd", "question.bwd"})
        s.insert({d + ".W_ih", d + ".W_hh", d + ".b"});
    stream_names(s, "app", cfg);
    if (cfg.two_stream) {
        stream_names(s, "mot", cfg);
        s.insert({"merge.W", "merge.b"});
    }
    if (task_is_multichoice(cfg.task))
        s.insert({"head.score.W", "head.score.b"});
    else if (task_is_count(cfg.task))
        s.insert({"head.count.W", "head.count.b"});
    else
        s.insert({"head.cls.W1", "head.cls.b1", "head.cls.W2", "head.cls.b2"});
    return s;
}

std::set<std::string> actual_names(const KrstModel& m) {
    std::vector<std::string> v = m.params().names();
    return {v.begin(), v.end()};
}

}  // namespace

TEST_CASE("every enabled switch registers exactly its parameters") {
    for (Task task : {Task::FrameRelpos, Task::Transition, Task::ActionCount,
                      Task::MultichoiceRelation}) {
        ModelConfig cfg = small_config(task);
        KrstModel m(cfg);
        m.init_params(3);
        CHECK(actual_names(m) == expected_names(cfg));
    }

    ModelConfig nw = small_config(Task::FrameRelpos);
    nw.word_attention = false;
    KrstModel mw(nw);
    mw.init_params(3);
    CHECK(actual_names(mw) == expected_names(nw));
    CHECK(mw.params().contains("app.kw.W_p"));
    CHECK_FALSE(mw.params().contains("app.kw.W1"));

    ModelConfig no = small_config(Task::FrameRelpos);
    no.object_attention = false;
    KrstModel mo(no);
    mo.init_params(3);
    CHECK(actual_names(mo) == expected_names(no));
    CHECK_FALSE(mo.params().contains("app.kw.W_q"));

    ModelConfig ns = small_config(Task::FrameRelpos);
    ns.two_stream = false;
    KrstModel ms(ns);
    ms.init_params(3);
    CHECK(actual_names(ms) == expected_names(ns));
    CHECK_FALSE(ms.params().contains("merge.W"));

    ModelConfig nh = small_config(Task::FrameRelpos);
    nh.graph.disentangled = false;
    KrstModel mh(nh);
    mh.init_params(3);
    CHECK(actual_names(mh) == expected_names(nh));
    CHECK_FALSE(mh.params().contains("app.graph.t0.W_a"));

    ModelConfig nr = small_config(Task::FrameRelpos);
    nr.graph.relative_enabled = false;
    KrstModel mr(nr);
    mr.init_params(3);
    CHECK(actual_names(mr) == expected_names(nr));
    CHECK_FALSE(mr.params().contains("app.graph.s0.W_r"));
}

TEST_CASE("config validation refuses incoherent widths and switches") {
    ModelConfig c = small_config(Task::FrameRelpos);
    CHECK_NOTHROW(c.validate());
    c.C_o = 7;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small_config(Task::FrameRelpos);
    c.C_w = 5;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small_config(Task::FrameRelpos);
    c.dropout = 1.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small_config(Task::FrameRelpos);
    c.answer_vocab = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small_config(Task::ActionCount);
    c.count_min = 6;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small_config(Task::MultichoiceRelation);
    c.M = 1;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("forward emits the task-specific output shapes") {
    const long T = 3, K = 2;
    std::mt19937_64 rng(5);

    ModelConfig oc = small_config(Task::FrameRelpos);
    KrstModel open(oc);
    open.init_params(11);
    ModelInput oin = make_input(oc, T, K, 21);
    ForwardOut oout = open.forward(oin, false, rng);
    REQUIRE(oout.log_probs.rows() == 1);
    REQUIRE(oout.log_probs.cols() == oc.answer_vocab);
    double psum = 0.0;
    for (long a = 0; a < oc.answer_vocab; ++a) psum += std::exp(oout.log_probs.at(0, a));
    CHECK(psum == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(open.loss(oout, 2).item() == doctest::Approx(-oout.log_probs.at(0, 2)));
    CHECK_THROWS_AS(open.loss(oout, 4), DataError);

    ModelConfig cc = small_config(Task::ActionCount);
    KrstModel count(cc);
    count.init_params(11);
    ModelInput cin = make_input(cc, T, K, 22);
    ForwardOut cout_ = count.forward(cin, false, rng);
    REQUIRE(cout_.pred.rows() == 1);
    REQUIRE(cout_.pred.cols() == 1);
    double raw = cout_.pred.at(0, 0);
    long rounded = count.predict(cout_);
    CHECK(rounded >= cc.count_min);
    CHECK(rounded <= cc.count_max);
    if (raw > cc.count_min && raw < cc.count_max)
        CHECK(rounded == std::llround(raw));
    CHECK_THROWS_AS(count.loss(cout_, 9), DataError);

    ModelConfig mc = small_config(Task::MultichoiceRelation);
    KrstModel multi(mc);
    multi.init_params(11);
    ModelInput min = make_input(mc, T, K, 23);
    ForwardOut mout = multi.forward(min, false, rng);
    REQUIRE(mout.scores.rows() == mc.M);
    REQUIRE(mout.scores.cols() == 1);
    min.candidates.pop_back();
    CHECK_THROWS_AS(multi.forward(min, false, rng), DataError);
}

TEST_CASE("same seed, same parameters, same forward values") {
    ModelConfig cfg = small_config(Task::FrameRelpos);
    KrstModel a(cfg), b(cfg);
    a.init_params(77);
    b.init_params(77);
    for (const auto& [name, t] : a.params()) {
        Tensor other = b.params().get(name);
        REQUIRE(t.numel() == other.numel());
        for (long i = 0; i < t.numel(); ++i) CHECK(t.value()[i] == other.value()[i]);
    }

    ModelInput in = make_input(cfg, 2, 3, 31);
    std::mt19937_64 r1(1), r2(2);
    ForwardOut o1 = a.forward(in, false, r1);
    ForwardOut o2 = b.forward(in, false, r2);
    for (long i = 0; i < o1.log_probs.numel(); ++i)
        CHECK(o1.log_probs.value()[i] == o2.log_probs.value()[i]);

    KrstModel c(cfg);
    c.init_params(78);
    bool all_same = true;
    for (const auto& [name, t] : a.params()) {
        Tensor other = c.params().get(name);
        for (long i = 0; i < t.numel(); ++i) all_same &= t.value()[i] == other.value()[i];
    }
    CHECK_FALSE(all_same);
}

TEST_CASE("dropout only acts in training mode") {
    ModelConfig cfg = small_config(Task::FrameRelpos);
    cfg.dropout = 0.5;
    KrstModel m(cfg);
    m.init_params(13);
    ModelInput in = make_input(cfg, 2, 2, 41);

    std::mt19937_64 e1(9), e2(10);
    ForwardOut a = m.forward(in, false, e1);
    ForwardOut b = m.forward(in, false, e2);
    for (long i = 0; i < a.log_probs.numel(); ++i)
        CHECK(a.log_probs.value()[i] == b.log_probs.value()[i]);

    std::mt19937_64 t1(9), t2(10);
    Tensor la = m.loss(m.forward(in, true, t1), 0);
    Tensor lb = m.loss(m.forward(in, true, t2), 0);
    CHECK(la.item() != lb.item());
}

TEST_CASE("backward reaches every registered parameter") {
    ModelConfig cfg = small_config(Task::FrameRelpos);
    KrstModel m(cfg);
    m.init_params(17);
    ModelInput in = make_input(cfg, 2, 3, 51);
    std::mt19937_64 rng(3);
    m.params().zero_grads();
    Tensor loss = m.loss(m.forward(in, true, rng), 1);
    loss.backward();
    for (const auto& [name, t] : m.params()) {
        INFO(name);
        CHECK(t.has_grad());
    }
}

TEST_CASE("single-stream models ignore the motion bank entirely") {
    ModelConfig cfg = small_config(Task::FrameRelpos);
    cfg.two_stream = false;
    KrstModel m(cfg);
    m.init_params(19);
    ModelInput in = make_input(cfg, 2, 2, 61);
    in.mot = ObjectFeatureBank{};  // undefined tensors; must never be touched
    std::mt19937_64 rng(4);
    ForwardOut out = m.forward(in, false, rng);
    CHECK(out.log_probs.cols() == cfg.answer_vocab);
}

TEST_CASE("prediction takes the first best index and the trace is coherent") {
    ModelConfig cfg = small_config(Task::FrameRelpos);
    KrstModel m(cfg);
    m.init_params(23);
    const long T = 3, K = 2;
    ModelInput in = make_input(cfg, T, K, 71);
    std::mt19937_64 rng(6);
    AttnTrace trace;
    ForwardOut out = m.forward(in, false, rng, &trace);
    long pred = m.predict(out);
    for (long a = 0; a < cfg.answer_vocab; ++a)
        CHECK(out.log_probs.at(0, a) <= out.log_probs.at(0, pred));

    REQUIRE(trace.word_weights.size() == in.question.size());
    double wsum = 0.0;
    for (double w : trace.word_weights) {
        CHECK(w > 0.0);
        wsum += w;
    }
    CHECK(wsum == doctest::Approx(1.0).epsilon(1e-9));
    REQUIRE(trace.object_scores.size() == static_cast<size_t>(T * K));
    for (double s : trace.object_scores) {
        CHECK(s > 0.0);
        CHECK(s < 1.0);
    }
    CHECK(trace.graph.spatial_frames.size() == static_cast<size_t>(T));
    CHECK(trace.graph.temporal.k == cfg.graph.k_temporal(T));
}
