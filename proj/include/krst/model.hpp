#pragma once

#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "krst/adam.hpp"
#include "krst/encoder.hpp"
#include "krst/fusion.hpp"
#include "krst/graph.hpp"
#include "krst/keyword.hpp"

namespace krst {

enum class Task { FrameRelpos, Transition, ActionCount, MultichoiceRelation };

Task task_from_string(const std::string& s);
std::string task_to_string(Task t);
bool task_is_multichoice(Task t);
bool task_is_count(Task t);

struct ModelConfig {
    long C = 64;    // video / object width after projection
    long C_s = 64;  // raw object semantic width
    long C_o = 64;  // node width entering the graphs (must equal C)
    long C_w = 64;  // question width (even; split across LSTM directions)
    long embed_dim = 300;
    long vocab_size = 0;
    long answer_vocab = 0;  // open-ended head width
    long M = 5;             // multichoice candidate count
    long count_min = 0;
    long count_max = 10;
    Task task = Task::FrameRelpos;
    GraphConfig graph;
    double dropout = 0.0;
    bool two_stream = true;
    bool word_attention = true;
    bool object_attention = true;

    void validate() const;
};

void to_json(nlohmann::json& j, const GraphConfig& g);
void from_json(const nlohmann::json& j, GraphConfig& g);
void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

struct ModelInput {
    ObjectFeatureBank app;
    ObjectFeatureBank mot;                       // ignored when single-stream
    std::vector<long> question;                  // token ids
    std::vector<std::vector<long>> candidates;   // multichoice answer suffixes
};

struct ForwardOut {
    Tensor scores;     // M x 1, multichoice
    Tensor log_probs;  // 1 x answer_vocab, open-ended
    Tensor pred;       // 1 x 1, count
};

// Attention snapshot of the appearance stream, for dumps.
struct AttnTrace {
    std::vector<double> word_weights;
    std::vector<double> object_scores;  // empty when object attention is off
    GraphTrace graph;
};

class KrstModel {
public:
    explicit KrstModel(ModelConfig cfg);

    // Registers and initializes every parameter the config enables.
    void init_params(uint64_t seed);

    ParamStore& params() { return store_; }
    const ParamStore& params() const { return store_; }
    const ModelConfig& config() const { return cfg_; }

    ForwardOut forward(const ModelInput& in, bool training, std::mt19937_64& rng,
                       AttnTrace* trace = nullptr) const;

    // target: candidate index / answer label / integer count by task.
    Tensor loss(const ForwardOut& out, long target) const;

    // argmax prediction (lowest index wins ties); count returns the
    // rounded-clamped integer.
    long predict(const ForwardOut& out) const;

private:
    Tensor video_nodes(const std::string& prefix, const ObjectFeatureBank& bank, bool training,
                       std::mt19937_64& rng) const;
    Tensor stream_z(const std::string& prefix, const Tensor& O_hat, long K,
                    const QuestionEncoding& q, bool training, std::mt19937_64& rng,
                    AttnTrace* trace) const;
    Tensor answer_vector(const std::vector<long>& tokens, const Tensor& O_app, const Tensor& O_mot,
                         long K, bool training, std::mt19937_64& rng, AttnTrace* trace) const;
    GraphLayers graph_layers(const std::string& prefix) const;

    ModelConfig cfg_;
    ParamStore store_;
};

}  // namespace krst
