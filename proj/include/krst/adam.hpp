#pragma once

#include <map>

#include "krst/param_store.hpp"

namespace krst {

// Adam with bias correction. Moment buffers are keyed by parameter name and
// allocated on first use; the step counter is shared across parameters.
struct AdamState {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    long step = 0;
    std::map<std::string, std::vector<double>> m;
    std::map<std::string, std::vector<double>> v;
};

// One update over every parameter in the store. All gradients must be
// populated; they are cleared afterwards.
void adam_step(ParamStore& store, AdamState& state);

}  // namespace krst
