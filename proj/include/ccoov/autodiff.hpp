#pragma once

// Minimal reverse-mode automatic differentiation over dense float64 tensors.
//
// A Tape records operations in creation order (define-by-run) and is rebuilt
// for every example. Persistent parameters are plain Tensors referenced by the
// tape through `leaf()`; `backward()` accumulates into their `grad` buffers.
// Intermediate values are owned by the tape.
//
// There is no broadcasting: every shape mismatch raises ShapeMismatch.
// Non-finite values are rejected at the leaves and at every op output.
//
// Shape table (m, n, k positive):
//   matvec        (m x n), (n)            -> (m)
//   matmul        (m x k), (k x n)        -> (m x n)
//   add, mul      a, a                    -> a
//   tanh, sigmoid a                       -> a
//   scale         a                       -> a          (constant factor)
//   concat        (n1), (n2), ...         -> (n1 + n2 + ...)
//   slice         any                     -> (length)   (flat offset)
//   softmax       (n) or (m x n)          -> same, normalized per row
//   weighted_sum  (n), n inputs of (d)    -> (d)
//   sum           any                     -> (1)
//   cross_entropy (C)                     -> (1)        (gold class index)

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ccoov/error.hpp"

namespace ccoov::ad {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

// Dense row-major array. Scalars are shape {1}.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> values);

    static Tensor vector(std::vector<double> values);
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
    static Tensor scalar(double value);

    const Shape& shape() const { return shape_; }
    std::size_t size() const { return values_.size(); }
    std::size_t rows() const { return shape_.empty() ? 0 : shape_[0]; }
    std::size_t cols() const { return shape_.size() < 2 ? 1 : shape_[1]; }

    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }
    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }

    bool requires_grad() const { return requires_grad_; }
    void set_requires_grad(bool on);
    // Empty unless requires_grad is set.
    std::span<double> grad() { return grad_; }
    std::span<const double> grad() const { return grad_; }
    void zero_grad();

    bool all_finite() const;

private:
    Shape shape_;
    std::vector<double> values_;
    bool requires_grad_ = false;
    std::vector<double> grad_;
};

enum class OpKind {
    leaf,
    matvec,
    matmul,
    add,
    mul,
    tanh,
    sigmoid,
    concat,
    slice,
    softmax,
    weighted_sum,
    scale,
    sum,
    cross_entropy,
};

const char* op_name(OpKind kind);

// Non-tensor arguments of an op.
struct OpArgs {
    std::size_t offset = 0;  // slice
    std::size_t length = 0;  // slice
    double factor = 1.0;     // scale
    std::size_t index = 0;   // cross_entropy gold class
};

class Tape;

// Handle to a node of one tape.
class Var {
public:
    Var() = default;
    bool valid() const { return tape_ != nullptr; }
    std::size_t id() const { return id_; }
    const Tape* tape() const { return tape_; }

private:
    friend class Tape;
    Var(const Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
    const Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // References `t` without copying. Registering the same tensor twice
    // returns the same node. When t.requires_grad(), backward accumulates
    // into t.grad(). The tensor must outlive the tape.
    Var leaf(Tensor& t);
    // Copies a value onto the tape; never receives gradient.
    Var constant(Tensor t);
    Var constant(std::span<const double> values);

    Var apply(OpKind kind, std::span<const Var> inputs, const OpArgs& args = {});

    Var matvec(Var w, Var x);
    Var matmul(Var a, Var b);
    Var add(Var a, Var b);
    Var mul(Var a, Var b);
    Var tanh(Var x);
    Var sigmoid(Var x);
    Var concat(std::span<const Var> parts);
    Var slice(Var x, std::size_t offset, std::size_t length);
    Var softmax(Var x);
    Var weighted_sum(Var weights, std::span<const Var> items);
    Var scale(Var x, double factor);
    Var sum(Var x);
    Var cross_entropy(Var logits, std::size_t gold);

    // Reverse sweep from a scalar. A tape can be differentiated once; a
    // second call raises TapeConsumed. Zeroing parameter gradients between
    // steps is the caller's job.
    void backward(Var loss);

    const Shape& shape(Var v) const;
    std::span<const double> value(Var v) const;
    double scalar(Var v) const;
    // Gradient of the last backward() wrt v; empty if v received none.
    std::span<const double> grad(Var v) const;
    Tensor to_tensor(Var v) const;

    std::size_t size() const { return nodes_.size(); }
    bool consumed() const { return consumed_; }

private:
    struct Node {
        OpKind kind = OpKind::leaf;
        std::vector<std::size_t> inputs;
        Shape shape;
        std::vector<double> value;
        Tensor* source = nullptr;  // leaf referencing an external tensor
        std::vector<double> grad;
        std::vector<double> saved;  // op-specific activations
        OpArgs args;
        bool needs_grad = false;
    };

    const Node& node(Var v) const;
    std::size_t check(Var v) const;
    std::span<const double> values_of(const Node& n) const;
    std::span<double> grad_buffer(Node& n);
    Var push(Node n);
    void backprop_node(std::size_t id);

    std::vector<Node> nodes_;
    std::unordered_map<const Tensor*, std::size_t> leaf_ids_;
    bool consumed_ = false;
};

}  // namespace ccoov::ad
