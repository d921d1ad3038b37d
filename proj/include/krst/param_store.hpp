#pragma once

#include <map>
#include <random>
#include <string>

#include "krst/tensor.hpp"

namespace krst {

// Named trainable parameters. The map keeps names lexicographically ordered,
// which fixes the iteration order for the optimizer and the checkpoint
// layout.
class ParamStore {
public:
    // Registers a fresh parameter initialized uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)).
    Tensor create(const std::string& name, Shape shape, long fan_in, std::mt19937_64& rng);
    // Registers a parameter with explicit contents.
    Tensor create_raw(const std::string& name, Shape shape, std::vector<double> data);
    Tensor get(const std::string& name) const;
    bool contains(const std::string& name) const { return params_.count(name) > 0; }
    size_t size() const { return params_.size(); }
    long total_elements() const;

    void zero_grads();
    // Divides every populated gradient by n (mini-batch averaging).
    void scale_grads(double factor);

    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

    std::vector<std::string> names() const;

private:
    std::map<std::string, Tensor> params_;
};

// Checkpoint container: parameter payload plus an arbitrary JSON config
// blob that travels with it (serialized inside the manifest).
void save_checkpoint(const ParamStore& store, const std::string& path,
                     const std::string& config_json = "{}");
// Loads into an already-built store; every name and shape must match.
std::string load_checkpoint(ParamStore& store, const std::string& path);
// Reads only the manifest's config blob.
std::string read_checkpoint_config(const std::string& path);

}  // namespace krst
