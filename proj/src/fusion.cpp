#include "krst/fusion.hpp"

#include <cmath>

namespace krst {

Tensor bilinear_attend(const Tensor& X, const Tensor& Q_w, const BilinearParams& p) {
    if (X.cols() != p.U.rows())
        throw DimError("bilinear_attend: node width " + std::to_string(X.cols()) +
                       " != U rows " + std::to_string(p.U.rows()));
    if (Q_w.cols() != p.V.rows())
        throw DimError("bilinear_attend: word width " + std::to_string(Q_w.cols()) +
                       " != V rows " + std::to_string(p.V.rows()));
    Tensor XU = matmul(X, p.U);                              // n x h
    Tensor logits = matmul_nt(XU, matmul(Q_w, p.V));         // n x L
    Tensor weights = softmax(logits, 0);                     // each word's column sums to 1
    return matmul(transpose(weights), matmul(XU, p.P));      // L x C_w
}

Tensor fuse(const Tensor& spatial_proj, const Tensor& temporal_proj, const Tensor& Q_s,
            const FuseParams& p) {
    if (spatial_proj.cols() != temporal_proj.cols())
        throw DimError("fuse: branch widths differ");
    Tensor rows = concat(spatial_proj, temporal_proj, 0);  // 2L x C_w
    Tensor query = add(matmul_nt(Q_s, p.W_g), p.b_a);      // 1 x C_w
    Tensor hidden = tanh_t(add_rowvec(matmul_nt(rows, p.W_h), query));
    Tensor scores = matmul_nt(hidden, p.w_v);              // 2L x 1
    Tensor weights = softmax(scores, 0);
    Tensor attended = matmul(transpose(weights), rows);    // 1 x C_w
    return relu(affine(attended, p.W_z, p.b_z));
}

Tensor merge_streams(const Tensor& z_app, const Tensor& z_motion, const Tensor& W_m,
                     const Tensor& b_m) {
    if (z_app.cols() != z_motion.cols())
        throw DimError("merge_streams: width mismatch " + std::to_string(z_app.cols()) + " vs " +
                       std::to_string(z_motion.cols()));
    return relu(affine(add(z_app, z_motion), W_m, b_m));
}

Tensor hinge_loss(const Tensor& scores, long correct_index) {
    long m = scores.rows();
    if (scores.cols() != 1) throw DimError("hinge_loss: scores must be M x 1");
    if (correct_index < 0 || correct_index >= m)
        throw ConfigError("hinge_loss: correct index " + std::to_string(correct_index) +
                          " outside 0.." + std::to_string(m - 1));
    std::vector<long> wrong;
    for (long i = 0; i < m; ++i)
        if (i != correct_index) wrong.push_back(i);
    if (wrong.empty()) return Tensor::zeros({});
    Tensor s_wrong = gather_rows(scores, wrong);
    Tensor s_plus = repeat_rows(row_range(scores, correct_index, correct_index + 1),
                                static_cast<long>(wrong.size()));
    return reduce_all(relu(add_const(sub(s_wrong, s_plus), 1.0)), Reduce::Sum);
}

OpenEndedOut classify_openended(const Tensor& z, const Tensor& W1, const Tensor& b1,
                                const Tensor& W2, const Tensor& b2, long label) {
    Tensor logits = mlp2(z, W1, b1, W2, b2);
    if (label < 0 || label >= logits.cols())
        throw DataError("classify_openended: label " + std::to_string(label) +
                        " outside answer vocabulary of " + std::to_string(logits.cols()));
    OpenEndedOut out;
    out.log_probs = log_softmax(logits, 1);
    out.loss = scale(element(out.log_probs, 0, label), -1.0);
    return out;
}

Tensor regress_count(const Tensor& z, const Tensor& W, const Tensor& b) {
    Tensor pred = affine(z, W, b);
    if (pred.cols() != 1) throw DimError("regress_count: head must end in one output");
    return pred;
}

Tensor mse_loss(const Tensor& pred, double target) {
    Tensor err = add_const(pred, -target);
    return reduce_all(mul(err, err), Reduce::Sum);
}

long round_count(double pred, long lo, long hi) {
    if (lo > hi) throw ConfigError("round_count: empty range");
    long r = std::llround(pred);
    return std::min(hi, std::max(lo, r));
}

}  // namespace krst
