#include "krst/adam.hpp"

#include <cmath>

namespace krst {

void adam_step(ParamStore& store, AdamState& state) {
    for (const auto& [name, t] : store)
        if (!t.has_grad()) throw Error("adam_step: gradient missing for parameter " + name);

    state.step += 1;
    double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));

    for (const auto& [name, t] : store) {
        auto& value = t.impl()->value;
        const auto& grad = t.impl()->grad;
        auto& m = state.m[name];
        auto& v = state.v[name];
        if (m.size() != value.size()) m.assign(value.size(), 0.0);
        if (v.size() != value.size()) v.assign(value.size(), 0.0);
        for (size_t i = 0; i < value.size(); ++i) {
            double g = grad[i];
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
            double mhat = m[i] / bc1;
            double vhat = v[i] / bc2;
            value[i] -= state.lr * mhat / (std::sqrt(vhat) + state.epsilon);
        }
    }
    store.zero_grads();
}

}  // namespace krst
