#pragma once

#include "krst/ops.hpp"

namespace krst {

struct BilinearParams {
    Tensor U;  // C x h
    Tensor V;  // C_w x h
    Tensor P;  // h x C_w
};

// Low-rank bilinear attention that projects node features into the
// question-word space: logits (X*U)*(Q_w*V)^T, softmax over nodes per word,
// output row l mixes the projected nodes X*U*P by that word's weights.
Tensor bilinear_attend(const Tensor& X, const Tensor& Q_w, const BilinearParams& p);

struct FuseParams {
    Tensor W_h;  // C_w x C_w, row transform
    Tensor W_g;  // C_w x C_w, query transform
    Tensor b_a;  // 1 x C_w
    Tensor w_v;  // 1 x C_w, scoring vector
    Tensor W_z;  // C_w x C_w, output affine
    Tensor b_z;  // 1 x C_w
};

// Additive attention over the stacked spatial/temporal rows with Q_s as the
// query, then affine + ReLU down to one row.
Tensor fuse(const Tensor& spatial_proj, const Tensor& temporal_proj, const Tensor& Q_s,
            const FuseParams& p);

// Elementwise sum of the two stream vectors followed by affine + ReLU.
Tensor merge_streams(const Tensor& z_app, const Tensor& z_motion, const Tensor& W_m,
                     const Tensor& b_m);

// Sum over wrong candidates of max(0, 1 - (s_correct - s_wrong)).
Tensor hinge_loss(const Tensor& scores, long correct_index);

// Two affine layers with ReLU, then log-softmax; loss is -log p[label].
struct OpenEndedOut {
    Tensor log_probs;  // 1 x vocab
    Tensor loss;
};
OpenEndedOut classify_openended(const Tensor& z, const Tensor& W1, const Tensor& b1,
                                const Tensor& W2, const Tensor& b2, long label);

Tensor regress_count(const Tensor& z, const Tensor& W, const Tensor& b);
Tensor mse_loss(const Tensor& pred, double target);
long round_count(double pred, long lo, long hi);

}  // namespace krst
