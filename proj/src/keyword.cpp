#include "krst/keyword.hpp"

namespace krst {

WordAttentionOut word_attention(const Tensor& Q_w, const Tensor& E, const Tensor& W1,
                                const Tensor& b1, const Tensor& W2, const Tensor& b2) {
    if (Q_w.rows() == 0) throw DimError("word_attention: empty sequence");
    if (Q_w.rows() != E.rows())
        throw DimError("word_attention: Q_w has " + std::to_string(Q_w.rows()) +
                       " rows but E has " + std::to_string(E.rows()));
    Tensor logits = mlp2(Q_w, W1, b1, W2, b2);
    if (logits.cols() != 1) throw DimError("word_attention: scoring MLP must end in width 1");
    WordAttentionOut out;
    out.A_w = softmax(logits, 0);
    out.E_hat = matmul(transpose(out.A_w), E);
    return out;
}

Tensor object_attention(const Tensor& O_hat, const Tensor& E_hat, const Tensor& W_q) {
    if (W_q.cols() != E_hat.cols())
        throw DimError("object_attention: W_q width " + std::to_string(W_q.cols()) +
                       " != attended question width " + std::to_string(E_hat.cols()));
    if (W_q.rows() != O_hat.cols())
        throw DimError("object_attention: W_q rows " + std::to_string(W_q.rows()) +
                       " != object feature width " + std::to_string(O_hat.cols()));
    return sigmoid(matmul(O_hat, matmul_nt(W_q, E_hat)));
}

Tensor augment_nodes(const Tensor& O_hat, const Tensor& A_o) {
    if (A_o.rows() != O_hat.rows() || A_o.cols() != 1)
        throw DimError("augment_nodes: A_o must be one score per object row");
    return add(O_hat, scale_rows(O_hat, A_o));
}

}  // namespace krst
