#pragma once

#include "krst/ops.hpp"

namespace krst {

struct WordAttentionOut {
    Tensor A_w;    // L x 1, sums to 1
    Tensor E_hat;  // 1 x embedding width
};

// Scores each question word with a small MLP, softmaxes over the sequence,
// and returns the attention-weighted sum of the raw word embeddings.
WordAttentionOut word_attention(const Tensor& Q_w, const Tensor& E, const Tensor& W1,
                                const Tensor& b1, const Tensor& W2, const Tensor& b2);

// A_o = sigmoid(O_hat * (W_q * E_hat^T)); one relevance score per object.
Tensor object_attention(const Tensor& O_hat, const Tensor& E_hat, const Tensor& W_q);

// V = O_hat + A_o (.) O_hat, the score broadcast across features.
Tensor augment_nodes(const Tensor& O_hat, const Tensor& A_o);

}  // namespace krst
