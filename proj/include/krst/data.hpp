#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "krst/model.hpp"

namespace krst {

// One object state in one frame. Coordinates are box centers in [0,1].
struct SceneObject {
    long category = 0;
    double cx = 0, cy = 0, w = 0, h = 0;
    double vx = 0, vy = 0;
};

struct Scene {
    std::vector<std::vector<SceneObject>> frames;  // T frames of K objects
};

// Question parameters kept alongside the token sequence so ground truth can
// be recomputed from the scene.
struct QuestionSpec {
    long cat_a = -1;
    long cat_b = -1;
    long frame = -1;
};

struct Sample {
    std::string id;
    Scene scene;
    std::vector<long> tokens;
    long answer = -1;  // label index / correct candidate slot / count
    std::vector<std::vector<long>> candidates;
    QuestionSpec q;
    std::string feature_dir;  // relative to the split directory
};

struct GenParams {
    Task task = Task::FrameRelpos;
    long T = 4;
    long K = 4;
    long C = 64;    // video feature width; also used for object semantics
    long n_categories = 6;
    long M = 5;
    double noise = 0.02;
    long n_train = 2000;
    long n_val = 200;
    long n_test = 500;
    uint64_t seed = 0;

    void validate() const;
};

void to_json(nlohmann::json& j, const GenParams& g);
void from_json(const nlohmann::json& j, GenParams& g);

struct DatasetInfo {
    Task task = Task::FrameRelpos;
    long T = 0, K = 0, C = 0, M = 0;
    long n_categories = 0;
    long count_min = 0, count_max = 0;
    double noise = 0.0;
    uint64_t seed = 0;
    std::vector<std::string> vocab;    // token id -> word
    std::vector<std::string> answers;  // label -> word (open-ended tasks)
};

// Fixed random directions shared by every split of one dataset.
struct Codebooks {
    Tensor app;   // n_categories x C category prototypes
    Tensor mot;   // C x 4 velocity projection
    Tensor time;  // 1 x C frame-position ramp
};

Codebooks make_codebooks(uint64_t seed, long n_categories, long C);

// Deterministic features for a scene: appearance encodes category + box,
// motion encodes velocity, I carries the frame mean plus the time ramp.
std::pair<ObjectFeatureBank, ObjectFeatureBank> realize_features(const Scene& scene,
                                                                 const Codebooks& books,
                                                                 double noise,
                                                                 uint64_t noise_seed);

// Ground-truth recomputation, independent of the stored answers.
// Relation labels: 0 left, 1 right, 2 above, 3 below (dominant axis rule).
long relation_between(const SceneObject& a, const SceneObject& b);
bool relation_holds(const Scene& scene, long frame, long cat_a, long rel, long cat_b);
long oracle_relpos(const Scene& scene, long cat_a, long cat_b, long frame);
long oracle_transition(const Scene& scene, long cat_first);
long oracle_count(const Scene& scene);

// Writes vocab.json, dataset.json, and per split samples.jsonl plus feature
// directories. Fully determined by params.
void generate_dataset(const GenParams& params, const std::string& out_dir);

DatasetInfo load_dataset_info(const std::string& dir);
std::vector<Sample> load_split(const std::string& dir, const std::string& split);

// Loads the two feature banks of one sample.
ModelInput load_input(const std::string& dir, const std::string& split, const Sample& sample);

}  // namespace krst
