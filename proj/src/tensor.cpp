#include "krst/tensor.hpp"

#include <unordered_set>

namespace krst {

long shape_numel(const Shape& s) {
    long n = 1;
    for (long e : s) {
        if (e < 0) throw DimError("negative extent in shape " + shape_str(s));
        n *= e;
    }
    return n;
}

std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

Tensor Tensor::zeros(Shape shape) {
    long n = shape_numel(shape);
    auto d = std::make_shared<TensorImpl>();
    d->shape = std::move(shape);
    d->value.assign(static_cast<size_t>(n), 0.0);
    return Tensor(std::move(d));
}

Tensor Tensor::full(Shape shape, double v) {
    Tensor t = zeros(std::move(shape));
    std::fill(t.d_->value.begin(), t.d_->value.end(), v);
    return t;
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data) {
    long n = shape_numel(shape);
    if (n != static_cast<long>(data.size()))
        throw DimError("data length " + std::to_string(data.size()) +
                       " does not match shape " + shape_str(shape));
    auto d = std::make_shared<TensorImpl>();
    d->shape = std::move(shape);
    d->value = std::move(data);
    return Tensor(std::move(d));
}

Tensor Tensor::param(Shape shape, std::vector<double> data) {
    Tensor t = from_data(std::move(shape), std::move(data));
    t.d_->requires_grad = true;
    return t;
}

long Tensor::rows() const {
    if (rank() != 2) throw DimError("rows() on rank-" + std::to_string(rank()) + " tensor");
    return d_->shape[0];
}

long Tensor::cols() const {
    if (rank() != 2) throw DimError("cols() on rank-" + std::to_string(rank()) + " tensor");
    return d_->shape[1];
}

double Tensor::at(long r, long c) const {
    return d_->value[static_cast<size_t>(r * cols() + c)];
}

double Tensor::item() const {
    if (numel() != 1) throw DimError("item() on tensor with " + std::to_string(numel()) + " elements");
    return d_->value[0];
}

const std::vector<double>& Tensor::grad() const {
    if (d_->grad.empty()) throw Error("gradient not populated");
    return d_->grad;
}

namespace {
thread_local bool g_grad_enabled = true;
}

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

bool grad_enabled() { return g_grad_enabled; }

Tensor make_op(Shape out_shape, std::vector<double> out_value,
               std::vector<Tensor> inputs, BackwardFn backward) {
    Tensor out = Tensor::from_data(std::move(out_shape), std::move(out_value));
    if (!g_grad_enabled) return out;
    bool needs = false;
    for (const Tensor& in : inputs)
        if (in.defined() && in.requires_grad()) needs = true;
    if (!needs) return out;
    auto d = out.impl();
    d->requires_grad = true;
    d->parents.reserve(inputs.size());
    for (const Tensor& in : inputs)
        if (in.defined()) d->parents.push_back(in.impl());
    d->backward = std::move(backward);
    return out;
}

void Tensor::backward() const {
    if (numel() != 1) throw DimError("backward() root must hold exactly one element");
    if (!d_->requires_grad) throw Error("backward() root does not require grad");

    // Iterative post-order DFS; reverse post-order is a topological order.
    std::vector<TensorImpl*> order;
    std::unordered_set<TensorImpl*> visited;
    std::vector<std::pair<TensorImpl*, size_t>> stack;
    stack.emplace_back(d_.get(), 0);
    visited.insert(d_.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            TensorImpl* p = node->parents[next++].get();
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    // Leaves keep accumulating across passes; interior op nodes start fresh.
    for (TensorImpl* n : order) {
        if (n->backward)
            n->grad.assign(n->value.size(), 0.0);
        else
            n->ensure_grad();
    }
    d_->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorImpl* n = *it;
        if (n->backward) n->backward(*n);
    }
}

}  // namespace krst
