#include "krst/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

namespace krst {

namespace {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const EMat>;
using Map = Eigen::Map<EMat>;

MapC mat(const TensorImpl& t) { return MapC(t.value.data(), t.shape[0], t.shape[1]); }
Map gmat(TensorImpl& t) { return Map(t.grad.data(), t.shape[0], t.shape[1]); }

void require_rank2(const Tensor& t, const char* who) {
    if (t.rank() != 2)
        throw DimError(std::string(who) + ": expected rank-2 tensor, got shape " + shape_str(t.shape()));
}

// Flattens a shape around one axis: index = (o*n + j)*inner + i.
struct AxisView {
    long outer, n, inner;
};

AxisView axis_view(const Shape& s, int axis) {
    if (axis < 0 || axis >= static_cast<int>(s.size()))
        throw DimError("axis " + std::to_string(axis) + " out of range for shape " + shape_str(s));
    AxisView v{1, s[axis], 1};
    for (int i = 0; i < axis; ++i) v.outer *= s[i];
    for (size_t i = axis + 1; i < s.size(); ++i) v.inner *= s[i];
    return v;
}

void check_finite(const Tensor& x, const char* who) {
    for (double v : x.value())
        if (!std::isfinite(v)) throw NumericError(std::string(who) + ": non-finite input");
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank2(a, "matmul");
    require_rank2(b, "matmul");
    if (a.cols() != b.rows())
        throw DimError("matmul: inner dimensions disagree, " + shape_str(a.shape()) + " vs " +
                       shape_str(b.shape()));
    long m = a.rows(), n = b.cols();
    std::vector<double> out(static_cast<size_t>(m * n));
    Map(out.data(), m, n).noalias() = mat(*a.impl()) * mat(*b.impl());
    auto pa = a.impl(), pb = b.impl();
    return make_op({m, n}, std::move(out), {a, b}, [pa, pb](TensorImpl& self) {
        Map g(self.grad.data(), self.shape[0], self.shape[1]);
        if (pa->requires_grad) gmat(*pa).noalias() += g * mat(*pb).transpose();
        if (pb->requires_grad) gmat(*pb).noalias() += mat(*pa).transpose() * g;
    });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    require_rank2(a, "matmul_nt");
    require_rank2(b, "matmul_nt");
    if (a.cols() != b.cols())
        throw DimError("matmul_nt: inner dimensions disagree, " + shape_str(a.shape()) + " vs " +
                       shape_str(b.shape()));
    long m = a.rows(), n = b.rows();
    std::vector<double> out(static_cast<size_t>(m * n));
    Map(out.data(), m, n).noalias() = mat(*a.impl()) * mat(*b.impl()).transpose();
    auto pa = a.impl(), pb = b.impl();
    return make_op({m, n}, std::move(out), {a, b}, [pa, pb](TensorImpl& self) {
        Map g(self.grad.data(), self.shape[0], self.shape[1]);
        if (pa->requires_grad) gmat(*pa).noalias() += g * mat(*pb);
        if (pb->requires_grad) gmat(*pb).noalias() += g.transpose() * mat(*pa);
    });
}

Tensor transpose(const Tensor& a) {
    require_rank2(a, "transpose");
    long m = a.rows(), n = a.cols();
    std::vector<double> out(static_cast<size_t>(m * n));
    Map(out.data(), n, m) = mat(*a.impl()).transpose();
    auto pa = a.impl();
    return make_op({n, m}, std::move(out), {a}, [pa](TensorImpl& self) {
        if (pa->requires_grad)
            gmat(*pa) += Map(self.grad.data(), self.shape[0], self.shape[1]).transpose();
    });
}

Tensor concat(const Tensor& a, const Tensor& b, int axis) {
    require_rank2(a, "concat");
    require_rank2(b, "concat");
    if (axis != 0 && axis != 1) throw DimError("concat: axis must be 0 or 1");
    if (axis == 0 && a.cols() != b.cols())
        throw DimError("concat: column counts disagree, " + shape_str(a.shape()) + " vs " +
                       shape_str(b.shape()));
    if (axis == 1 && a.rows() != b.rows())
        throw DimError("concat: row counts disagree, " + shape_str(a.shape()) + " vs " +
                       shape_str(b.shape()));
    long m = axis == 0 ? a.rows() + b.rows() : a.rows();
    long n = axis == 1 ? a.cols() + b.cols() : a.cols();
    std::vector<double> out(static_cast<size_t>(m * n));
    const auto& av = a.value();
    const auto& bv = b.value();
    if (axis == 0) {
        std::copy(av.begin(), av.end(), out.begin());
        std::copy(bv.begin(), bv.end(), out.begin() + av.size());
    } else {
        long ca = a.cols(), cb = b.cols();
        for (long r = 0; r < m; ++r) {
            std::copy(av.begin() + r * ca, av.begin() + (r + 1) * ca, out.begin() + r * n);
            std::copy(bv.begin() + r * cb, bv.begin() + (r + 1) * cb, out.begin() + r * n + ca);
        }
    }
    auto pa = a.impl(), pb = b.impl();
    long ra = a.rows(), ca = a.cols(), cb = b.cols();
    return make_op({m, n}, std::move(out), {a, b}, [pa, pb, axis, ra, ca, cb](TensorImpl& self) {
        long n = self.shape[1];
        if (axis == 0) {
            if (pa->requires_grad)
                for (size_t i = 0; i < pa->grad.size(); ++i) pa->grad[i] += self.grad[i];
            if (pb->requires_grad) {
                size_t off = pa->value.size();
                for (size_t i = 0; i < pb->grad.size(); ++i) pb->grad[i] += self.grad[off + i];
            }
        } else {
            for (long r = 0; r < self.shape[0]; ++r) {
                if (pa->requires_grad)
                    for (long c = 0; c < ca; ++c) pa->grad[r * ca + c] += self.grad[r * n + c];
                if (pb->requires_grad)
                    for (long c = 0; c < cb; ++c) pb->grad[r * cb + c] += self.grad[r * n + ca + c];
            }
        }
        (void)ra;
    });
}

Tensor vstack(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw DimError("vstack: no parts");
    long cols = parts[0].cols();
    long rows = 0;
    for (const Tensor& p : parts) {
        require_rank2(p, "vstack");
        if (p.cols() != cols) throw DimError("vstack: column counts disagree");
        rows += p.rows();
    }
    std::vector<double> out;
    out.reserve(static_cast<size_t>(rows * cols));
    for (const Tensor& p : parts) out.insert(out.end(), p.value().begin(), p.value().end());
    std::vector<std::shared_ptr<TensorImpl>> impls;
    impls.reserve(parts.size());
    for (const Tensor& p : parts) impls.push_back(p.impl());
    return make_op({rows, cols}, std::move(out), parts, [impls](TensorImpl& self) {
        size_t off = 0;
        for (const auto& p : impls) {
            size_t n = p->value.size();
            if (p->requires_grad)
                for (size_t i = 0; i < n; ++i) p->grad[i] += self.grad[off + i];
            off += n;
        }
    });
}

Tensor reshape(const Tensor& x, Shape shape) {
    if (shape_numel(shape) != x.numel())
        throw DimError("reshape: " + shape_str(x.shape()) + " to " + shape_str(shape) +
                       " changes element count");
    auto px = x.impl();
    return make_op(std::move(shape), x.value(), {x}, [px](TensorImpl& self) {
        if (px->requires_grad)
            for (size_t i = 0; i < self.grad.size(); ++i) px->grad[i] += self.grad[i];
    });
}

Tensor gather_rows(const Tensor& x, const std::vector<long>& idx) {
    require_rank2(x, "gather_rows");
    long n = x.rows(), c = x.cols();
    std::vector<double> out(idx.size() * static_cast<size_t>(c));
    const auto& v = x.value();
    for (size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] < 0 || idx[i] >= n)
            throw DimError("gather_rows: index " + std::to_string(idx[i]) + " out of range [0," +
                           std::to_string(n) + ")");
        std::copy(v.begin() + idx[i] * c, v.begin() + (idx[i] + 1) * c, out.begin() + i * c);
    }
    auto px = x.impl();
    auto rows = idx;
    return make_op({static_cast<long>(idx.size()), c}, std::move(out), {x},
                   [px, rows](TensorImpl& self) {
                       if (!px->requires_grad) return;
                       long c = self.shape[1];
                       for (size_t i = 0; i < rows.size(); ++i)
                           for (long j = 0; j < c; ++j)
                               px->grad[rows[i] * c + j] += self.grad[i * c + j];
                   });
}

Tensor row_range(const Tensor& x, long lo, long hi) {
    require_rank2(x, "row_range");
    if (lo < 0 || hi < lo || hi > x.rows())
        throw DimError("row_range: [" + std::to_string(lo) + "," + std::to_string(hi) +
                       ") out of range for " + shape_str(x.shape()));
    long c = x.cols();
    std::vector<double> out(x.value().begin() + lo * c, x.value().begin() + hi * c);
    auto px = x.impl();
    return make_op({hi - lo, c}, std::move(out), {x}, [px, lo](TensorImpl& self) {
        if (!px->requires_grad) return;
        long c = self.shape[1];
        size_t off = static_cast<size_t>(lo * c);
        for (size_t i = 0; i < self.grad.size(); ++i) px->grad[off + i] += self.grad[i];
    });
}

Tensor col_range(const Tensor& x, long lo, long hi) {
    require_rank2(x, "col_range");
    if (lo < 0 || hi < lo || hi > x.cols())
        throw DimError("col_range: [" + std::to_string(lo) + "," + std::to_string(hi) +
                       ") out of range for " + shape_str(x.shape()));
    long n = x.rows(), c = x.cols(), w = hi - lo;
    std::vector<double> out(static_cast<size_t>(n * w));
    for (long r = 0; r < n; ++r)
        std::copy(x.value().begin() + r * c + lo, x.value().begin() + r * c + hi,
                  out.begin() + r * w);
    auto px = x.impl();
    return make_op({n, w}, std::move(out), {x}, [px, lo, c](TensorImpl& self) {
        if (!px->requires_grad) return;
        long w = self.shape[1];
        for (long r = 0; r < self.shape[0]; ++r)
            for (long j = 0; j < w; ++j) px->grad[r * c + lo + j] += self.grad[r * w + j];
    });
}

Tensor repeat_rows(const Tensor& x, long k) {
    require_rank2(x, "repeat_rows");
    if (k < 1) throw DimError("repeat_rows: k must be >= 1");
    long n = x.rows(), c = x.cols();
    std::vector<double> out(static_cast<size_t>(n * k * c));
    for (long r = 0; r < n; ++r)
        for (long j = 0; j < k; ++j)
            std::copy(x.value().begin() + r * c, x.value().begin() + (r + 1) * c,
                      out.begin() + (r * k + j) * c);
    auto px = x.impl();
    return make_op({n * k, c}, std::move(out), {x}, [px, k](TensorImpl& self) {
        if (!px->requires_grad) return;
        long c = self.shape[1];
        long n = self.shape[0] / k;
        for (long r = 0; r < n; ++r)
            for (long j = 0; j < k; ++j)
                for (long col = 0; col < c; ++col)
                    px->grad[r * c + col] += self.grad[(r * k + j) * c + col];
    });
}

Tensor element(const Tensor& x, long r, long c) {
    require_rank2(x, "element");
    if (r < 0 || r >= x.rows() || c < 0 || c >= x.cols())
        throw DimError("element: (" + std::to_string(r) + "," + std::to_string(c) +
                       ") out of range for " + shape_str(x.shape()));
    long pos = r * x.cols() + c;
    auto px = x.impl();
    return make_op({}, {x.value()[pos]}, {x}, [px, pos](TensorImpl& self) {
        if (px->requires_grad) px->grad[pos] += self.grad[0];
    });
}

namespace {

Tensor binary_same_shape(const Tensor& a, const Tensor& b, const char* who,
                         const std::function<double(double, double)>& f,
                         BackwardFn backward) {
    if (a.shape() != b.shape())
        throw DimError(std::string(who) + ": shapes disagree, " + shape_str(a.shape()) + " vs " +
                       shape_str(b.shape()));
    std::vector<double> out(a.value().size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = f(a.value()[i], b.value()[i]);
    return make_op(a.shape(), std::move(out), {a, b}, std::move(backward));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    auto pa = a.impl(), pb = b.impl();
    return binary_same_shape(a, b, "add", [](double x, double y) { return x + y; },
                             [pa, pb](TensorImpl& self) {
                                 if (pa->requires_grad)
                                     for (size_t i = 0; i < self.grad.size(); ++i)
                                         pa->grad[i] += self.grad[i];
                                 if (pb->requires_grad)
                                     for (size_t i = 0; i < self.grad.size(); ++i)
                                         pb->grad[i] += self.grad[i];
                             });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    auto pa = a.impl(), pb = b.impl();
    return binary_same_shape(a, b, "sub", [](double x, double y) { return x - y; },
                             [pa, pb](TensorImpl& self) {
                                 if (pa->requires_grad)
                                     for (size_t i = 0; i < self.grad.size(); ++i)
                                         pa->grad[i] += self.grad[i];
                                 if (pb->requires_grad)
                                     for (size_t i = 0; i < self.grad.size(); ++i)
                                         pb->grad[i] -= self.grad[i];
                             });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    auto pa = a.impl(), pb = b.impl();
    return binary_same_shape(a, b, "mul", [](double x, double y) { return x * y; },
                             [pa, pb](TensorImpl& self) {
                                 if (pa->requires_grad)
                                     for (size_t i = 0; i < self.grad.size(); ++i)
                                         pa->grad[i] += self.grad[i] * pb->value[i];
                                 if (pb->requires_grad)
                                     for (size_t i = 0; i < self.grad.size(); ++i)
                                         pb->grad[i] += self.grad[i] * pa->value[i];
                             });
}

Tensor scale(const Tensor& a, double c) {
    std::vector<double> out(a.value().size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * c;
    auto pa = a.impl();
    return make_op(a.shape(), std::move(out), {a}, [pa, c](TensorImpl& self) {
        if (pa->requires_grad)
            for (size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i] * c;
    });
}

Tensor add_const(const Tensor& a, double c) {
    std::vector<double> out(a.value().size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + c;
    auto pa = a.impl();
    return make_op(a.shape(), std::move(out), {a}, [pa](TensorImpl& self) {
        if (pa->requires_grad)
            for (size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i];
    });
}

Tensor add_rowvec(const Tensor& x, const Tensor& b) {
    require_rank2(x, "add_rowvec");
    require_rank2(b, "add_rowvec");
    if (b.rows() != 1 || b.cols() != x.cols())
        throw DimError("add_rowvec: expected 1x" + std::to_string(x.cols()) + " bias, got " +
                       shape_str(b.shape()));
    long n = x.rows(), c = x.cols();
    std::vector<double> out(static_cast<size_t>(n * c));
    for (long r = 0; r < n; ++r)
        for (long j = 0; j < c; ++j) out[r * c + j] = x.value()[r * c + j] + b.value()[j];
    auto px = x.impl(), pb = b.impl();
    return make_op({n, c}, std::move(out), {x, b}, [px, pb](TensorImpl& self) {
        long c = self.shape[1];
        if (px->requires_grad)
            for (size_t i = 0; i < self.grad.size(); ++i) px->grad[i] += self.grad[i];
        if (pb->requires_grad)
            for (long r = 0; r < self.shape[0]; ++r)
                for (long j = 0; j < c; ++j) pb->grad[j] += self.grad[r * c + j];
    });
}

Tensor scale_rows(const Tensor& x, const Tensor& s) {
    require_rank2(x, "scale_rows");
    require_rank2(s, "scale_rows");
    if (s.rows() != x.rows() || s.cols() != 1)
        throw DimError("scale_rows: expected " + std::to_string(x.rows()) + "x1 scale, got " +
                       shape_str(s.shape()));
    long n = x.rows(), c = x.cols();
    std::vector<double> out(static_cast<size_t>(n * c));
    for (long r = 0; r < n; ++r)
        for (long j = 0; j < c; ++j) out[r * c + j] = x.value()[r * c + j] * s.value()[r];
    auto px = x.impl(), ps = s.impl();
    return make_op({n, c}, std::move(out), {x, s}, [px, ps](TensorImpl& self) {
        long c = self.shape[1];
        for (long r = 0; r < self.shape[0]; ++r) {
            if (px->requires_grad)
                for (long j = 0; j < c; ++j)
                    px->grad[r * c + j] += self.grad[r * c + j] * ps->value[r];
            if (ps->requires_grad)
                for (long j = 0; j < c; ++j)
                    ps->grad[r] += self.grad[r * c + j] * px->value[r * c + j];
        }
    });
}

Tensor relu(const Tensor& x) {
    std::vector<double> out(x.value().size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = x.value()[i] > 0.0 ? x.value()[i] : 0.0;
    auto px = x.impl();
    return make_op(x.shape(), std::move(out), {x}, [px](TensorImpl& self) {
        if (!px->requires_grad) return;
        for (size_t i = 0; i < self.grad.size(); ++i)
            if (px->value[i] > 0.0) px->grad[i] += self.grad[i];
    });
}

Tensor sigmoid(const Tensor& x) {
    std::vector<double> out(x.value().size());
    for (size_t i = 0; i < out.size(); ++i) {
        double v = x.value()[i];
        if (v >= 0.0) {
            out[i] = 1.0 / (1.0 + std::exp(-v));
        } else {
            double e = std::exp(v);
            out[i] = e / (1.0 + e);
        }
    }
    auto px = x.impl();
    return make_op(x.shape(), std::move(out), {x}, [px](TensorImpl& self) {
        if (!px->requires_grad) return;
        for (size_t i = 0; i < self.grad.size(); ++i) {
            double y = self.value[i];
            px->grad[i] += self.grad[i] * y * (1.0 - y);
        }
    });
}

Tensor tanh_t(const Tensor& x) {
    std::vector<double> out(x.value().size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(x.value()[i]);
    auto px = x.impl();
    return make_op(x.shape(), std::move(out), {x}, [px](TensorImpl& self) {
        if (!px->requires_grad) return;
        for (size_t i = 0; i < self.grad.size(); ++i) {
            double y = self.value[i];
            px->grad[i] += self.grad[i] * (1.0 - y * y);
        }
    });
}

Tensor softmax(const Tensor& x, int axis) {
    check_finite(x, "softmax");
    AxisView v = axis_view(x.shape(), axis);
    if (v.n == 0) throw DimError("softmax: empty axis");
    std::vector<double> out(x.value().size());
    const auto& in = x.value();
    for (long o = 0; o < v.outer; ++o)
        for (long i = 0; i < v.inner; ++i) {
            long base = o * v.n * v.inner + i;
            double m = in[base];
            for (long j = 1; j < v.n; ++j) m = std::max(m, in[base + j * v.inner]);
            double sum = 0.0;
            for (long j = 0; j < v.n; ++j) {
                double e = std::exp(in[base + j * v.inner] - m);
                out[base + j * v.inner] = e;
                sum += e;
            }
            for (long j = 0; j < v.n; ++j) out[base + j * v.inner] /= sum;
        }
    auto px = x.impl();
    return make_op(x.shape(), std::move(out), {x}, [px, v](TensorImpl& self) {
        if (!px->requires_grad) return;
        for (long o = 0; o < v.outer; ++o)
            for (long i = 0; i < v.inner; ++i) {
                long base = o * v.n * v.inner + i;
                double dot = 0.0;
                for (long j = 0; j < v.n; ++j) {
                    long k = base + j * v.inner;
                    dot += self.grad[k] * self.value[k];
                }
                for (long j = 0; j < v.n; ++j) {
                    long k = base + j * v.inner;
                    px->grad[k] += self.value[k] * (self.grad[k] - dot);
                }
            }
    });
}

Tensor log_softmax(const Tensor& x, int axis) {
    check_finite(x, "log_softmax");
    AxisView v = axis_view(x.shape(), axis);
    if (v.n == 0) throw DimError("log_softmax: empty axis");
    std::vector<double> out(x.value().size());
    const auto& in = x.value();
    for (long o = 0; o < v.outer; ++o)
        for (long i = 0; i < v.inner; ++i) {
            long base = o * v.n * v.inner + i;
            double m = in[base];
            for (long j = 1; j < v.n; ++j) m = std::max(m, in[base + j * v.inner]);
            double sum = 0.0;
            for (long j = 0; j < v.n; ++j) sum += std::exp(in[base + j * v.inner] - m);
            double lse = m + std::log(sum);
            for (long j = 0; j < v.n; ++j) out[base + j * v.inner] = in[base + j * v.inner] - lse;
        }
    auto px = x.impl();
    return make_op(x.shape(), std::move(out), {x}, [px, v](TensorImpl& self) {
        if (!px->requires_grad) return;
        for (long o = 0; o < v.outer; ++o)
            for (long i = 0; i < v.inner; ++i) {
                long base = o * v.n * v.inner + i;
                double gsum = 0.0;
                for (long j = 0; j < v.n; ++j) gsum += self.grad[base + j * v.inner];
                for (long j = 0; j < v.n; ++j) {
                    long k = base + j * v.inner;
                    px->grad[k] += self.grad[k] - std::exp(self.value[k]) * gsum;
                }
            }
    });
}

namespace {

// Slice reduction shared by reduce() and reduce_all(). Max remembers the
// lowest-index maximum so the backward routing is deterministic.
void reduce_slices(const std::vector<double>& in, const AxisView& v, Reduce mode,
                   std::vector<double>& out, std::vector<long>* argmax) {
    for (long o = 0; o < v.outer; ++o)
        for (long i = 0; i < v.inner; ++i) {
            long base = o * v.n * v.inner + i;
            long oi = o * v.inner + i;
            if (mode == Reduce::Max) {
                double best = in[base];
                long bj = 0;
                for (long j = 1; j < v.n; ++j) {
                    double val = in[base + j * v.inner];
                    if (val > best) {
                        best = val;
                        bj = j;
                    }
                }
                out[oi] = best;
                if (argmax) (*argmax)[oi] = bj;
            } else {
                double acc = 0.0;
                for (long j = 0; j < v.n; ++j) acc += in[base + j * v.inner];
                out[oi] = mode == Reduce::Mean ? acc / static_cast<double>(v.n) : acc;
            }
        }
}

}  // namespace

Tensor reduce(const Tensor& x, int axis, Reduce mode, bool keepdim) {
    AxisView v = axis_view(x.shape(), axis);
    if (v.n == 0) throw DimError("reduce: empty axis in shape " + shape_str(x.shape()));
    Shape out_shape = x.shape();
    if (keepdim)
        out_shape[axis] = 1;
    else
        out_shape.erase(out_shape.begin() + axis);
    std::vector<double> out(static_cast<size_t>(v.outer * v.inner));
    std::vector<long> argmax;
    if (mode == Reduce::Max) argmax.resize(out.size());
    reduce_slices(x.value(), v, mode, out, mode == Reduce::Max ? &argmax : nullptr);
    auto px = x.impl();
    return make_op(std::move(out_shape), std::move(out), {x},
                   [px, v, mode, argmax = std::move(argmax)](TensorImpl& self) {
                       if (!px->requires_grad) return;
                       for (long o = 0; o < v.outer; ++o)
                           for (long i = 0; i < v.inner; ++i) {
                               long base = o * v.n * v.inner + i;
                               long oi = o * v.inner + i;
                               double g = self.grad[oi];
                               switch (mode) {
                                   case Reduce::Max:
                                       px->grad[base + argmax[oi] * v.inner] += g;
                                       break;
                                   case Reduce::Mean:
                                       g /= static_cast<double>(v.n);
                                       [[fallthrough]];
                                   case Reduce::Sum:
                                       for (long j = 0; j < v.n; ++j)
                                           px->grad[base + j * v.inner] += g;
                                       break;
                               }
                           }
                   });
}

Tensor reduce_all(const Tensor& x, Reduce mode) {
    if (x.numel() == 0) throw DimError("reduce_all: empty tensor");
    AxisView v{1, x.numel(), 1};
    std::vector<double> out(1);
    std::vector<long> argmax(1, 0);
    reduce_slices(x.value(), v, mode, out, mode == Reduce::Max ? &argmax : nullptr);
    auto px = x.impl();
    long n = x.numel();
    long am = argmax[0];
    return make_op({}, std::move(out), {x}, [px, mode, n, am](TensorImpl& self) {
        if (!px->requires_grad) return;
        double g = self.grad[0];
        switch (mode) {
            case Reduce::Max:
                px->grad[am] += g;
                break;
            case Reduce::Mean:
                g /= static_cast<double>(n);
                [[fallthrough]];
            case Reduce::Sum:
                for (long j = 0; j < n; ++j) px->grad[j] += g;
                break;
        }
    });
}

Tensor affine(const Tensor& x, const Tensor& W, const Tensor& b) {
    return add_rowvec(matmul_nt(x, W), b);
}

Tensor mlp2(const Tensor& x, const Tensor& W1, const Tensor& b1, const Tensor& W2,
            const Tensor& b2) {
    return affine(relu(affine(x, W1, b1)), W2, b2);
}

Tensor dropout(const Tensor& x, double p, bool training, std::mt19937_64& rng) {
    if (p < 0.0 || p >= 1.0)
        throw ConfigError("dropout: p must lie in [0,1), got " + std::to_string(p));
    if (!training || p == 0.0) return x;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double keep_scale = 1.0 / (1.0 - p);
    std::vector<double> mask(x.value().size());
    std::vector<double> out(x.value().size());
    for (size_t i = 0; i < mask.size(); ++i) {
        mask[i] = unit(rng) >= p ? keep_scale : 0.0;
        out[i] = x.value()[i] * mask[i];
    }
    auto px = x.impl();
    return make_op(x.shape(), std::move(out), {x}, [px, mask = std::move(mask)](TensorImpl& self) {
        if (!px->requires_grad) return;
        for (size_t i = 0; i < self.grad.size(); ++i) px->grad[i] += self.grad[i] * mask[i];
    });
}

}  // namespace krst
