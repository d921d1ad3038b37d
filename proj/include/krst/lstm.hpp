#pragma once

#include "krst/ops.hpp"
#include "krst/param_store.hpp"

namespace krst {

// Gate layout inside the stacked weights is [input, forget, cell, output].
struct LstmParams {
    Tensor W_ih;  // 4h × input
    Tensor W_hh;  // 4h × h
    Tensor b;     // 1 × 4h, forget block initialized to 1
    long hidden = 0;
};

struct BiLstmParams {
    LstmParams fwd;
    LstmParams bwd;
    long out_width() const { return fwd.hidden + bwd.hidden; }
};

// Registers the four weight tensors under <prefix>.{fwd,bwd}.{W_ih,W_hh,b}.
BiLstmParams make_bilstm_params(ParamStore& store, const std::string& prefix, long input,
                                long hidden_per_dir, std::mt19937_64& rng);
// Rebinds existing parameters (for models reconstructed from a checkpoint).
BiLstmParams bind_bilstm_params(const ParamStore& store, const std::string& prefix,
                                long hidden_per_dir);

struct BiLstmOut {
    Tensor Q_w;  // L × 2h, per-step [forward, backward] hidden states
    Tensor Q_s;  // 1 × 2h, [final forward, final backward] hidden states
};

BiLstmOut bilstm_encode(const Tensor& E, const BiLstmParams& params);

}  // namespace krst
