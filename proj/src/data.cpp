#include "krst/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include "krst/rng.hpp"

namespace krst {

namespace {

const std::vector<std::string> kTemplateWords = {"where", "is", "from",  "in",    "what",
                                                 "did",   "become", "how", "many", "times",
                                                 "does",  "bounce", "which", "true"};
const std::vector<std::string> kRelationWords = {"left", "right", "above", "below"};

struct Vocab {
    std::vector<std::string> words;
    std::map<std::string, long> index;

    void add(const std::string& w) {
        if (index.count(w)) return;
        index[w] = static_cast<long>(words.size());
        words.push_back(w);
    }
    long id(const std::string& w) const {
        auto it = index.find(w);
        if (it == index.end()) throw DataError("vocabulary is missing word '" + w + "'");
        return it->second;
    }
};

std::string cat_word(long c) { return "cat" + std::to_string(c); }
std::string frame_word(long t) { return "f" + std::to_string(t); }

Vocab build_vocab(const GenParams& p) {
    Vocab v;
    for (const std::string& w : kTemplateWords) v.add(w);
    for (const std::string& w : kRelationWords) v.add(w);
    for (long t = 0; t < p.T; ++t) v.add(frame_word(t));
    for (long c = 0; c < p.n_categories; ++c) v.add(cat_word(c));
    return v;
}

std::vector<std::string> answer_words(const GenParams& p) {
    switch (p.task) {
        case Task::FrameRelpos: return kRelationWords;
        case Task::Transition: {
            std::vector<std::string> out;
            for (long c = 0; c < p.n_categories; ++c) out.push_back(cat_word(c));
            return out;
        }
        default: return {};
    }
}

double uni(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

long pick(std::mt19937_64& rng, long n) {
    return static_cast<long>(std::uniform_int_distribution<long>(0, n - 1)(rng));
}

// K non-overlapping-ish boxes inside the central region, leaving margin for
// the global translation.
std::vector<SceneObject> place_objects(std::mt19937_64& rng, long K,
                                       const std::vector<long>& cats) {
    std::vector<SceneObject> objs(K);
    for (long k = 0; k < K; ++k) {
        SceneObject& o = objs[k];
        o.category = cats[k];
        o.w = uni(rng, 0.04, 0.10);
        o.h = uni(rng, 0.04, 0.10);
        for (int attempt = 0; attempt < 200; ++attempt) {
            o.cx = uni(rng, 0.30, 0.70);
            o.cy = uni(rng, 0.30, 0.70);
            bool clear = true;
            for (long j = 0; j < k; ++j) {
                double dx = o.cx - objs[j].cx, dy = o.cy - objs[j].cy;
                if (dx * dx + dy * dy < 0.12 * 0.12) clear = false;
            }
            if (clear) break;
        }
    }
    return objs;
}

std::vector<long> distinct_categories(std::mt19937_64& rng, long K, long n_categories) {
    std::vector<long> all(n_categories);
    for (long c = 0; c < n_categories; ++c) all[c] = c;
    std::shuffle(all.begin(), all.end(), rng);
    all.resize(K);
    return all;
}

// Relation questions always refer to categories 0 and 1 (the anchor pair);
// the remaining slots draw distinct distractor categories. A fixed anchor
// pair keeps the question distribution narrow enough that relation tasks
// are learnable from a small sample budget.
std::vector<long> anchored_categories(std::mt19937_64& rng, long K, long n_categories) {
    std::vector<long> rest(n_categories - 2);
    for (long c = 0; c + 2 < n_categories; ++c) rest[c] = c + 2;
    std::shuffle(rest.begin(), rest.end(), rng);
    std::vector<long> cats = {0, 1};
    cats.insert(cats.end(), rest.begin(), rest.begin() + (K - 2));
    std::shuffle(cats.begin(), cats.end(), rng);
    return cats;
}

// Small per-frame positional jitter so frames are not carbon copies. The
// amplitude stays below the question-pair margins, so asked relations hold
// in every frame.
Scene jittered_scene(std::mt19937_64& rng, const std::vector<SceneObject>& base, long T) {
    Scene scene;
    scene.frames.resize(T);
    for (long t = 0; t < T; ++t) {
        scene.frames[t] = base;
        for (SceneObject& o : scene.frames[t]) {
            o.cx += uni(rng, -0.005, 0.005);
            o.cy += uni(rng, -0.005, 0.005);
        }
    }
    return scene;
}

// Shifts every box by one global offset, keeping all boxes inside [0.02,
// 0.98]. Relative geometry, and therefore every answer, is unchanged.
void translate_scene(std::mt19937_64& rng, Scene& scene) {
    double min_x = 1.0, max_x = 0.0, min_y = 1.0, max_y = 0.0;
    for (const auto& frame : scene.frames)
        for (const SceneObject& o : frame) {
            min_x = std::min(min_x, o.cx - o.w / 2);
            max_x = std::max(max_x, o.cx + o.w / 2);
            min_y = std::min(min_y, o.cy - o.h / 2);
            max_y = std::max(max_y, o.cy + o.h / 2);
        }
    double ox = uni(rng, 0.02 - min_x, 0.98 - max_x);
    double oy = uni(rng, 0.02 - min_y, 0.98 - max_y);
    for (auto& frame : scene.frames)
        for (SceneObject& o : frame) {
            o.cx += ox;
            o.cy += oy;
        }
}

long find_by_category(const std::vector<SceneObject>& frame, long cat) {
    for (size_t k = 0; k < frame.size(); ++k)
        if (frame[k].category == cat) return static_cast<long>(k);
    return -1;
}

struct Builders {
    const GenParams& p;
    const Vocab& vocab;

    Sample relpos(std::mt19937_64& rng) const {
        Sample s;
        for (int attempt = 0;; ++attempt) {
            std::vector<long> cats = anchored_categories(rng, p.K, p.n_categories);
            s.scene = jittered_scene(rng, place_objects(rng, p.K, cats), p.T);
            long t = pick(rng, p.T);
            const auto& frame = s.scene.frames[t];
            const SceneObject& oa = frame[find_by_category(frame, 0)];
            const SceneObject& ob = frame[find_by_category(frame, 1)];
            double adx = std::fabs(oa.cx - ob.cx), ady = std::fabs(oa.cy - ob.cy);
            if ((std::max(adx, ady) >= 0.12 && std::fabs(adx - ady) >= 0.08) ||
                attempt >= 500) {
                s.q.cat_a = oa.category;
                s.q.cat_b = ob.category;
                s.q.frame = t;
                break;
            }
        }
        translate_scene(rng, s.scene);
        s.answer = oracle_relpos(s.scene, s.q.cat_a, s.q.cat_b, s.q.frame);
        s.tokens = {vocab.id("where"), vocab.id("is"),  vocab.id(cat_word(s.q.cat_a)),
                    vocab.id("from"),  vocab.id(cat_word(s.q.cat_b)), vocab.id("in"),
                    vocab.id(frame_word(s.q.frame))};
        return s;
    }

    Sample multichoice(std::mt19937_64& rng) const {
        Sample base = relpos(rng);
        Sample s;
        s.scene = base.scene;
        s.q = base.q;
        long t = s.q.frame;
        s.tokens = {vocab.id("which"), vocab.id("is"), vocab.id("true"), vocab.id("in"),
                    vocab.id(frame_word(t))};

        auto statement = [&](long ca, long rel, long cb) {
            return std::vector<long>{vocab.id(cat_word(ca)), vocab.id(kRelationWords[rel]),
                                     vocab.id(cat_word(cb))};
        };
        long true_rel = oracle_relpos(s.scene, s.q.cat_a, s.q.cat_b, t);

        // Distractor statements stay on the anchor pair (both orders), so
        // every candidate is settled by the same pairwise geometry.
        std::vector<std::vector<long>> pool;  // false (cat_a, rel, cat_b) triples
        const auto& frame = s.scene.frames[t];
        long ia = find_by_category(frame, 0);
        long ib = find_by_category(frame, 1);
        for (auto [a, b] : {std::pair<long, long>{ia, ib}, {ib, ia}}) {
            long actual = relation_between(frame[a], frame[b]);
            for (long rel = 0; rel < 4; ++rel)
                if (rel != actual)
                    pool.push_back({frame[a].category, rel, frame[b].category});
        }
        std::shuffle(pool.begin(), pool.end(), rng);
        if (static_cast<long>(pool.size()) < p.M - 1)
            throw ConfigError("multichoice: M exceeds the candidate statement pool");

        long correct = pick(rng, p.M);
        s.answer = correct;
        long used = 0;
        for (long m = 0; m < p.M; ++m) {
            if (m == correct) {
                s.candidates.push_back(statement(s.q.cat_a, true_rel, s.q.cat_b));
            } else {
                const auto& d = pool[used++];
                s.candidates.push_back(statement(d[0], d[1], d[2]));
            }
        }
        return s;
    }

    Sample transition(std::mt19937_64& rng) const {
        Sample s;
        std::vector<long> cats = distinct_categories(rng, p.K, p.n_categories);
        s.scene = jittered_scene(rng, place_objects(rng, p.K, cats), p.T);

        long obj = pick(rng, p.K);
        long c1 = s.scene.frames[0][obj].category;
        std::vector<long> unused;
        for (long c = 0; c < p.n_categories; ++c)
            if (std::find(cats.begin(), cats.end(), c) == cats.end()) unused.push_back(c);
        long c2 = unused[pick(rng, static_cast<long>(unused.size()))];
        long t_swap = 1 + pick(rng, p.T - 1);
        for (long t = t_swap; t < p.T; ++t) s.scene.frames[t][obj].category = c2;

        translate_scene(rng, s.scene);
        s.q.cat_a = c1;
        s.answer = oracle_transition(s.scene, c1);
        s.tokens = {vocab.id("what"), vocab.id("did"), vocab.id(cat_word(c1)),
                    vocab.id("become")};
        return s;
    }

    Sample count(std::mt19937_64& rng) const {
        Sample s;
        std::vector<long> cats = distinct_categories(rng, p.K, p.n_categories);
        std::vector<SceneObject> base = place_objects(rng, p.K, cats);

        long n_flips = pick(rng, p.T);  // 0 .. T-1
        std::vector<long> slots(p.T - 1);
        for (long i = 0; i < p.T - 1; ++i) slots[i] = i + 1;
        std::shuffle(slots.begin(), slots.end(), rng);
        std::vector<bool> flip_at(p.T, false);
        for (long i = 0; i < n_flips; ++i) flip_at[slots[i]] = true;

        double speed = uni(rng, 0.25, 0.5);
        double sign = pick(rng, 2) == 0 ? 1.0 : -1.0;
        double vy = uni(rng, -0.03, 0.03);
        const double dt = 0.05;

        s.scene.frames.resize(p.T);
        double cx = base[0].cx, cy = base[0].cy;
        for (long t = 0; t < p.T; ++t) {
            s.scene.frames[t] = base;
            if (t > 0 && flip_at[t]) sign = -sign;
            SceneObject& o = s.scene.frames[t][0];
            o.cx = cx;
            o.cy = cy;
            o.vx = speed * sign;
            o.vy = vy;
            cx += o.vx * dt;
            cy += o.vy * dt;
        }

        translate_scene(rng, s.scene);
        s.q.cat_a = base[0].category;
        s.answer = oracle_count(s.scene);
        s.tokens = {vocab.id("how"),  vocab.id("many"),
                    vocab.id("times"), vocab.id("does"),
                    vocab.id(cat_word(s.q.cat_a)), vocab.id("bounce")};
        return s;
    }

    Sample build(std::mt19937_64& rng) const {
        switch (p.task) {
            case Task::FrameRelpos: return relpos(rng);
            case Task::Transition: return transition(rng);
            case Task::ActionCount: return count(rng);
            default: return multichoice(rng);
        }
    }
};

nlohmann::json scene_to_json(const Scene& scene) {
    nlohmann::json frames = nlohmann::json::array();
    for (const auto& frame : scene.frames) {
        nlohmann::json fj = nlohmann::json::array();
        for (const SceneObject& o : frame)
            fj.push_back({o.category, o.cx, o.cy, o.w, o.h, o.vx, o.vy});
        frames.push_back(fj);
    }
    return frames;
}

Scene scene_from_json(const nlohmann::json& j) {
    Scene scene;
    for (const auto& fj : j) {
        std::vector<SceneObject> frame;
        for (const auto& oj : fj) {
            SceneObject o;
            o.category = oj.at(0).get<long>();
            o.cx = oj.at(1).get<double>();
            o.cy = oj.at(2).get<double>();
            o.w = oj.at(3).get<double>();
            o.h = oj.at(4).get<double>();
            o.vx = oj.at(5).get<double>();
            o.vy = oj.at(6).get<double>();
            frame.push_back(o);
        }
        scene.frames.push_back(std::move(frame));
    }
    return scene;
}

}  // namespace

void GenParams::validate() const {
    if (T < 1 || K < 1) throw ConfigError("gen: T and K must be >= 1");
    if (C < 4) throw ConfigError("gen: feature width must be >= 4");
    if (n_categories < K) throw ConfigError("gen: need at least K categories");
    if (task == Task::Transition && n_categories <= K)
        throw ConfigError("gen: transition needs a spare category, raise n_categories");
    if ((task == Task::FrameRelpos || task == Task::MultichoiceRelation) && K < 2)
        throw ConfigError("gen: relation tasks need K >= 2");
    if ((task == Task::Transition || task == Task::ActionCount) && T < 2)
        throw ConfigError("gen: temporal tasks need T >= 2");
    if (task == Task::MultichoiceRelation && (M < 2 || M > 7))
        throw ConfigError("gen: M must lie in [2, 7], one true statement plus up to six false");
    if (noise < 0.0) throw ConfigError("gen: noise must be >= 0");
    if (n_train < 1 || n_val < 1 || n_test < 1)
        throw ConfigError("gen: split sizes must be >= 1");
}

void to_json(nlohmann::json& j, const GenParams& g) {
    j = nlohmann::json{{"task", task_to_string(g.task)},
                       {"T", g.T},
                       {"K", g.K},
                       {"C", g.C},
                       {"n_categories", g.n_categories},
                       {"M", g.M},
                       {"noise", g.noise},
                       {"n_train", g.n_train},
                       {"n_val", g.n_val},
                       {"n_test", g.n_test},
                       {"seed", g.seed}};
}

void from_json(const nlohmann::json& j, GenParams& g) {
    if (j.contains("task")) g.task = task_from_string(j["task"].get<std::string>());
    g.T = j.value("T", g.T);
    g.K = j.value("K", g.K);
    g.C = j.value("C", g.C);
    g.n_categories = j.value("n_categories", g.n_categories);
    g.M = j.value("M", g.M);
    g.noise = j.value("noise", g.noise);
    g.n_train = j.value("n_train", g.n_train);
    g.n_val = j.value("n_val", g.n_val);
    g.n_test = j.value("n_test", g.n_test);
    g.seed = j.value("seed", g.seed);
}

Codebooks make_codebooks(uint64_t seed, long n_categories, long C) {
    std::mt19937_64 rng(mix_seed(seed, 0xC0DEB00CULL));
    Codebooks books;
    // Prototypes kept small so box geometry stays visible next to category
    // identity in feature-space distances.
    books.app = Tensor::from_data({n_categories, C},
                                  uniform_vector(rng, n_categories * C, -0.35, 0.35));
    books.mot = Tensor::from_data({C, 4}, uniform_vector(rng, C * 4, -1.0, 1.0));
    books.time = Tensor::from_data({1, C}, uniform_vector(rng, C, -1.0, 1.0));
    return books;
}

std::pair<ObjectFeatureBank, ObjectFeatureBank> realize_features(const Scene& scene,
                                                                 const Codebooks& books,
                                                                 double noise,
                                                                 uint64_t noise_seed) {
    long T = static_cast<long>(scene.frames.size());
    if (T == 0) throw DataError("realize_features: empty scene");
    long K = static_cast<long>(scene.frames[0].size());
    long C = books.app.cols();
    std::mt19937_64 rng(noise_seed);

    std::vector<double> app_os, mot_os, op, app_i, mot_i;
    app_os.reserve(T * K * C);
    mot_os.reserve(T * K * C);
    op.reserve(T * K * 6);

    for (long t = 0; t < T; ++t) {
        if (static_cast<long>(scene.frames[t].size()) != K)
            throw DataError("realize_features: ragged frame " + std::to_string(t));
        for (long k = 0; k < K; ++k) {
            const SceneObject& o = scene.frames[t][k];
            if (o.category < 0 || o.category >= books.app.rows())
                throw DataError("realize_features: category " + std::to_string(o.category) +
                                " outside codebook");
            for (long c = 0; c < C; ++c)
                app_os.push_back(books.app.at(o.category, c) + uni(rng, -noise, noise));
            double vvec[4] = {o.vx, o.vy, std::fabs(o.vx), std::fabs(o.vy)};
            for (long c = 0; c < C; ++c) {
                double acc = 0.0;
                for (long jj = 0; jj < 4; ++jj) acc += books.mot.at(c, jj) * vvec[jj];
                mot_os.push_back(acc + uni(rng, -noise, noise));
            }
            double x1 = o.cx - o.w / 2, y1 = o.cy - o.h / 2;
            double x2 = o.cx + o.w / 2, y2 = o.cy + o.h / 2;
            op.insert(op.end(), {x1, y1, x2, y2, x2 - x1, y2 - y1});
        }
    }

    double tau_den = T > 1 ? static_cast<double>(T - 1) : 1.0;
    for (long t = 0; t < T; ++t) {
        double tau = static_cast<double>(t) / tau_den;
        for (long c = 0; c < C; ++c) {
            double mean = 0.0;
            for (long k = 0; k < K; ++k) mean += app_os[(t * K + k) * C + c];
            app_i.push_back(mean / static_cast<double>(K) + tau * books.time.at(0, c) +
                            uni(rng, -noise, noise));
        }
        for (long c = 0; c < C; ++c) {
            double mean = 0.0;
            for (long k = 0; k < K; ++k) mean += mot_os[(t * K + k) * C + c];
            mot_i.push_back(mean / static_cast<double>(K) + tau * books.time.at(0, c) +
                            uni(rng, -noise, noise));
        }
    }

    ObjectFeatureBank app;
    app.stream = "appearance";
    app.T = T;
    app.K = K;
    app.I = Tensor::from_data({T, C}, std::move(app_i));
    app.O_s = Tensor::from_data({T * K, C}, std::move(app_os));
    app.O_p = Tensor::from_data({T * K, 6}, op);

    ObjectFeatureBank mot;
    mot.stream = "motion";
    mot.T = T;
    mot.K = K;
    mot.I = Tensor::from_data({T, C}, std::move(mot_i));
    mot.O_s = Tensor::from_data({T * K, C}, std::move(mot_os));
    mot.O_p = Tensor::from_data({T * K, 6}, std::move(op));
    return {app, mot};
}

long relation_between(const SceneObject& a, const SceneObject& b) {
    double dx = a.cx - b.cx, dy = a.cy - b.cy;
    if (std::fabs(dx) >= std::fabs(dy)) return dx < 0 ? 0 : 1;
    return dy < 0 ? 2 : 3;
}

bool relation_holds(const Scene& scene, long frame, long cat_a, long rel, long cat_b) {
    if (frame < 0 || frame >= static_cast<long>(scene.frames.size())) return false;
    long a = find_by_category(scene.frames[frame], cat_a);
    long b = find_by_category(scene.frames[frame], cat_b);
    if (a < 0 || b < 0 || a == b) return false;
    return relation_between(scene.frames[frame][a], scene.frames[frame][b]) == rel;
}

long oracle_relpos(const Scene& scene, long cat_a, long cat_b, long frame) {
    if (frame < 0 || frame >= static_cast<long>(scene.frames.size()))
        throw DataError("oracle_relpos: frame out of range");
    long a = find_by_category(scene.frames[frame], cat_a);
    long b = find_by_category(scene.frames[frame], cat_b);
    if (a < 0 || b < 0) throw DataError("oracle_relpos: category missing from frame");
    return relation_between(scene.frames[frame][a], scene.frames[frame][b]);
}

long oracle_transition(const Scene& scene, long cat_first) {
    long obj = find_by_category(scene.frames.front(), cat_first);
    if (obj < 0) throw DataError("oracle_transition: category missing from first frame");
    return scene.frames.back()[obj].category;
}

long oracle_count(const Scene& scene) {
    long flips = 0;
    for (size_t t = 0; t + 1 < scene.frames.size(); ++t) {
        double a = scene.frames[t][0].vx, b = scene.frames[t + 1][0].vx;
        if (a * b < 0.0) ++flips;
    }
    return flips;
}

namespace {

std::string sample_id(const std::string& split, long i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s_%06ld", split.c_str(), i);
    return buf;
}

nlohmann::json sample_to_json(const Sample& s) {
    nlohmann::json j;
    j["id"] = s.id;
    j["tokens"] = s.tokens;
    j["answer"] = s.answer;
    if (!s.candidates.empty()) j["candidates"] = s.candidates;
    j["q"] = {{"cat_a", s.q.cat_a}, {"cat_b", s.q.cat_b}, {"frame", s.q.frame}};
    j["scene"] = scene_to_json(s.scene);
    j["features"] = s.feature_dir;
    return j;
}

Sample sample_from_json(const nlohmann::json& j) {
    Sample s;
    s.id = j.at("id").get<std::string>();
    s.tokens = j.at("tokens").get<std::vector<long>>();
    s.answer = j.at("answer").get<long>();
    if (j.contains("candidates"))
        s.candidates = j.at("candidates").get<std::vector<std::vector<long>>>();
    s.q.cat_a = j.at("q").at("cat_a").get<long>();
    s.q.cat_b = j.at("q").at("cat_b").get<long>();
    s.q.frame = j.at("q").at("frame").get<long>();
    s.scene = scene_from_json(j.at("scene"));
    s.feature_dir = j.at("features").get<std::string>();
    return s;
}

}  // namespace

void generate_dataset(const GenParams& params, const std::string& out_dir) {
    params.validate();
    Vocab vocab = build_vocab(params);
    Codebooks books = make_codebooks(params.seed, params.n_categories, params.C);

    std::filesystem::create_directories(out_dir);
    {
        nlohmann::json vj;
        vj["tokens"] = vocab.words;
        vj["answers"] = answer_words(params);
        std::ofstream f(out_dir + "/vocab.json", std::ios::trunc);
        f << vj.dump(2) << "\n";
        if (!f) throw DataError("cannot write " + out_dir + "/vocab.json");
    }
    {
        nlohmann::json dj;
        to_json(dj, params);
        dj["count_min"] = 0;
        dj["count_max"] = params.task == Task::ActionCount ? params.T - 1 : 0;
        std::ofstream f(out_dir + "/dataset.json", std::ios::trunc);
        f << dj.dump(2) << "\n";
        if (!f) throw DataError("cannot write " + out_dir + "/dataset.json");
    }

    Builders builders{params, vocab};
    const std::vector<std::pair<std::string, long>> splits = {
        {"train", params.n_train}, {"val", params.n_val}, {"test", params.n_test}};
    for (size_t si = 0; si < splits.size(); ++si) {
        const std::string& split = splits[si].first;
        long n = splits[si].second;
        uint64_t split_seed = mix_seed(params.seed, si + 1);
        std::string dir = out_dir + "/" + split;
        std::filesystem::create_directories(dir);
        std::ofstream out(dir + "/samples.jsonl", std::ios::trunc);
        if (!out) throw DataError("cannot write " + dir + "/samples.jsonl");
        for (long i = 0; i < n; ++i) {
            uint64_t sample_seed = mix_seed(split_seed, static_cast<uint64_t>(i));
            std::mt19937_64 rng(sample_seed);
            Sample s = builders.build(rng);
            s.id = sample_id(split, i);
            s.feature_dir = "features/" + s.id;
            auto [app, mot] =
                realize_features(s.scene, books, params.noise, mix_seed(sample_seed, 77));
            save_feature_bank(dir + "/" + s.feature_dir + "/app", app);
            save_feature_bank(dir + "/" + s.feature_dir + "/mot", mot);
            out << sample_to_json(s).dump() << "\n";
        }
        if (!out) throw DataError("short write to " + dir + "/samples.jsonl");
    }
}

DatasetInfo load_dataset_info(const std::string& dir) {
    auto parse = [](const std::string& path) {
        std::ifstream f(path);
        if (!f) throw DataError("cannot open " + path);
        try {
            nlohmann::json j;
            f >> j;
            return j;
        } catch (const nlohmann::json::exception& e) {
            throw DataError(path + ": " + e.what());
        }
    };
    nlohmann::json dj = parse(dir + "/dataset.json");
    nlohmann::json vj = parse(dir + "/vocab.json");
    DatasetInfo info;
    GenParams g;
    from_json(dj, g);
    info.task = g.task;
    info.T = g.T;
    info.K = g.K;
    info.C = g.C;
    info.M = g.M;
    info.n_categories = g.n_categories;
    info.noise = g.noise;
    info.seed = g.seed;
    info.count_min = dj.value("count_min", 0L);
    info.count_max = dj.value("count_max", 0L);
    info.vocab = vj.at("tokens").get<std::vector<std::string>>();
    info.answers = vj.at("answers").get<std::vector<std::string>>();
    return info;
}

std::vector<Sample> load_split(const std::string& dir, const std::string& split) {
    std::string path = dir + "/" + split + "/samples.jsonl";
    std::ifstream f(path);
    if (!f) throw DataError("cannot open " + path);
    std::vector<Sample> out;
    std::string line;
    long lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            out.push_back(sample_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

ModelInput load_input(const std::string& dir, const std::string& split, const Sample& sample) {
    ModelInput in;
    std::string base = dir + "/" + split + "/" + sample.feature_dir;
    in.app = load_feature_bank(base + "/app");
    in.mot = load_feature_bank(base + "/mot");
    in.question = sample.tokens;
    in.candidates = sample.candidates;
    return in;
}

}  // namespace krst
