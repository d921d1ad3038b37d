#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "krst/error.hpp"

namespace krst {

using Shape = std::vector<long>;

long shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

struct TensorImpl;
using BackwardFn = std::function<void(TensorImpl&)>;

// One node of the reverse-mode computation graph. Holds the forward value,
// the accumulated gradient, and a closure that pushes this node's gradient
// into its parents.
struct TensorImpl {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // empty until a backward pass reaches this node
    bool requires_grad = false;
    std::vector<std::shared_ptr<TensorImpl>> parents;
    BackwardFn backward;

    long numel() const { return static_cast<long>(value.size()); }
    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    }
};

// Value-semantics handle to a graph node. Copies share the node.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape);
    static Tensor full(Shape shape, double v);
    static Tensor from_data(Shape shape, std::vector<double> data);
    // Leaf with requires_grad = true; the unit of ParamStore storage.
    static Tensor param(Shape shape, std::vector<double> data);

    bool defined() const { return static_cast<bool>(d_); }
    const Shape& shape() const { return d_->shape; }
    long rank() const { return static_cast<long>(d_->shape.size()); }
    long numel() const { return d_->numel(); }
    // Rank-2 accessors; most of the network lives on matrices.
    long rows() const;
    long cols() const;

    const std::vector<double>& value() const { return d_->value; }
    std::vector<double>& value() { return d_->value; }
    double at(long r, long c) const;
    double item() const;

    bool requires_grad() const { return d_->requires_grad; }
    bool has_grad() const { return !d_->grad.empty(); }
    const std::vector<double>& grad() const;
    void clear_grad() { d_->grad.clear(); }

    // Reverse pass from this node, which must hold exactly one element.
    // Gradients accumulate into every reachable requires_grad node.
    void backward() const;

    std::shared_ptr<TensorImpl> impl() const { return d_; }
    explicit Tensor(std::shared_ptr<TensorImpl> d) : d_(std::move(d)) {}

private:
    std::shared_ptr<TensorImpl> d_;
};

// While alive, newly created ops record no graph edges (forward values only).
struct NoGradGuard {
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

bool grad_enabled();

// Builds an op node: forward value computed by the caller, backward supplied
// as a closure. The closure must only capture parent impls, never the node
// it belongs to.
Tensor make_op(Shape out_shape, std::vector<double> out_value,
               std::vector<Tensor> inputs, BackwardFn backward);

}  // namespace krst
