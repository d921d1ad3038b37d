#pragma once

#include <random>

#include "krst/tensor.hpp"

namespace krst {

enum class Reduce { Max, Mean, Sum };

// ---- linear algebra ----
Tensor matmul(const Tensor& a, const Tensor& b);
// a · b^T without materializing the transpose.
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// ---- structure ----
// axis 0 stacks rows, axis 1 appends columns. Zero-extent along the
// concatenation axis is allowed and acts as the neutral element.
Tensor concat(const Tensor& a, const Tensor& b, int axis);
Tensor vstack(const std::vector<Tensor>& parts);
Tensor reshape(const Tensor& x, Shape shape);
Tensor gather_rows(const Tensor& x, const std::vector<long>& idx);
Tensor row_range(const Tensor& x, long lo, long hi);
Tensor col_range(const Tensor& x, long lo, long hi);
// Repeats each row k times consecutively: out[i*k + j] = x[i].
Tensor repeat_rows(const Tensor& x, long k);
// Rank-0 scalar out of a rank-2 tensor.
Tensor element(const Tensor& x, long r, long c);

// ---- elementwise ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor add_const(const Tensor& a, double c);
// x: n×q plus a 1×q row vector broadcast down the rows.
Tensor add_rowvec(const Tensor& x, const Tensor& b);
// x: n×q scaled per row by s: n×1.
Tensor scale_rows(const Tensor& x, const Tensor& s);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor tanh_t(const Tensor& x);

// ---- reductions / normalizations ----
Tensor softmax(const Tensor& x, int axis);
Tensor log_softmax(const Tensor& x, int axis);
// Max routes its gradient to the lowest-index maximal element per slice.
Tensor reduce(const Tensor& x, int axis, Reduce mode, bool keepdim = false);
Tensor reduce_all(const Tensor& x, Reduce mode);

// ---- composites ----
// x · W^T + b with W stored out×in and b 1×out.
Tensor affine(const Tensor& x, const Tensor& W, const Tensor& b);
// Two affine layers with an elementwise ReLU between them.
Tensor mlp2(const Tensor& x, const Tensor& W1, const Tensor& b1,
            const Tensor& W2, const Tensor& b2);

// ---- regularization ----
// Inverted dropout: keeps with probability 1-p and rescales by 1/(1-p)
// while training; identity in evaluation mode.
Tensor dropout(const Tensor& x, double p, bool training, std::mt19937_64& rng);

}  // namespace krst
