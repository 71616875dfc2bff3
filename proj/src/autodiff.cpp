#include "ccoov/autodiff.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <sstream>

namespace ccoov::ad {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using VectorMap = Eigen::Map<Eigen::VectorXd>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;

bool finite(std::span<const double> xs) {
    return std::all_of(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
}

double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

void softmax_row(const double* in, double* out, std::size_t n) {
    const double mx = *std::max_element(in, in + n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = std::exp(in[i] - mx);
        total += out[i];
    }
    for (std::size_t i = 0; i < n; ++i) out[i] /= total;
}

[[noreturn]] void shape_error(OpKind kind, const std::string& detail) {
    throw ShapeMismatch(std::string(op_name(kind)) + ": " + detail);
}

}  // namespace

std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
    std::ostringstream out;
    out << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? " x " : "") << shape[i];
    out << ')';
    return out.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
    if (shape_.empty() || std::find(shape_.begin(), shape_.end(), 0u) != shape_.end())
        throw ShapeMismatch("tensor dimensions must be positive, got " + shape_string(shape_));
    values_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), values_(std::move(values)) {
    if (shape_.empty() || std::find(shape_.begin(), shape_.end(), 0u) != shape_.end())
        throw ShapeMismatch("tensor dimensions must be positive, got " + shape_string(shape_));
    if (values_.size() != shape_size(shape_))
        throw ShapeMismatch("tensor of shape " + shape_string(shape_) + " given " +
                            std::to_string(values_.size()) + " values");
}

Tensor Tensor::vector(std::vector<double> values) {
    const std::size_t n = values.size();
    return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
    return Tensor({rows, cols}, std::move(values));
}

Tensor Tensor::scalar(double value) { return Tensor({1}, std::vector<double>{value}); }

void Tensor::set_requires_grad(bool on) {
    requires_grad_ = on;
    if (on)
        grad_.assign(values_.size(), 0.0);
    else
        grad_.clear();
}

void Tensor::zero_grad() { std::fill(grad_.begin(), grad_.end(), 0.0); }

bool Tensor::all_finite() const { return finite(values_); }

const char* op_name(OpKind kind) {
    switch (kind) {
        case OpKind::leaf: return "leaf";
        case OpKind::matvec: return "matvec";
        case OpKind::matmul: return "matmul";
        case OpKind::add: return "add";
        case OpKind::mul: return "mul";
        case OpKind::tanh: return "tanh";
        case OpKind::sigmoid: return "sigmoid";
        case OpKind::concat: return "concat";
        case OpKind::slice: return "slice";
        case OpKind::softmax: return "softmax";
        case OpKind::weighted_sum: return "weighted_sum";
        case OpKind::scale: return "scale";
        case OpKind::sum: return "sum";
        case OpKind::cross_entropy: return "cross_entropy";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// node access

std::size_t Tape::check(Var v) const {
    if (v.tape_ != this || v.id_ >= nodes_.size())
        throw DetachedTensor("variable does not belong to this tape");
    return v.id_;
}

const Tape::Node& Tape::node(Var v) const { return nodes_[check(v)]; }

std::span<const double> Tape::values_of(const Node& n) const {
    if (n.source) return n.source->values();
    return n.value;
}

std::span<double> Tape::grad_buffer(Node& n) {
    if (n.source && n.source->requires_grad()) return n.source->grad();
    if (n.grad.empty()) n.grad.assign(shape_size(n.shape), 0.0);
    return n.grad;
}

const Shape& Tape::shape(Var v) const { return node(v).shape; }

std::span<const double> Tape::value(Var v) const { return values_of(node(v)); }

double Tape::scalar(Var v) const {
    const Node& n = node(v);
    if (shape_size(n.shape) != 1) throw NotScalar("shape " + shape_string(n.shape));
    return values_of(n)[0];
}

std::span<const double> Tape::grad(Var v) const {
    const Node& n = node(v);
    if (n.source && n.source->requires_grad()) return n.source->grad();
    return n.grad;
}

Tensor Tape::to_tensor(Var v) const {
    const Node& n = node(v);
    auto vals = values_of(n);
    return Tensor(n.shape, std::vector<double>(vals.begin(), vals.end()));
}

Var Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
}

// ---------------------------------------------------------------------------
// leaves

Var Tape::leaf(Tensor& t) {
    if (auto it = leaf_ids_.find(&t); it != leaf_ids_.end()) return Var(this, it->second);
    if (t.size() == 0) throw ShapeMismatch("leaf tensor is empty");
    if (!t.all_finite()) throw NonFinite("leaf tensor contains NaN or Inf");
    Node n;
    n.shape = t.shape();
    n.source = &t;
    n.needs_grad = t.requires_grad();
    Var v = push(std::move(n));
    leaf_ids_.emplace(&t, v.id_);
    return v;
}

Var Tape::constant(Tensor t) {
    if (!t.all_finite()) throw NonFinite("constant contains NaN or Inf");
    Node n;
    n.shape = t.shape();
    n.value.assign(t.values().begin(), t.values().end());
    return push(std::move(n));
}

Var Tape::constant(std::span<const double> values) {
    if (values.empty()) throw ShapeMismatch("constant is empty");
    if (!finite(values)) throw NonFinite("constant contains NaN or Inf");
    Node n;
    n.shape = {values.size()};
    n.value.assign(values.begin(), values.end());
    return push(std::move(n));
}

// ---------------------------------------------------------------------------
// forward

Var Tape::apply(OpKind kind, std::span<const Var> inputs, const OpArgs& args) {
    Node out;
    out.kind = kind;
    out.args = args;
    out.inputs.reserve(inputs.size());
    for (Var v : inputs) {
        const std::size_t id = check(v);
        out.inputs.push_back(id);
        out.needs_grad = out.needs_grad || nodes_[id].needs_grad;
    }
    auto in_shape = [&](std::size_t i) -> const Shape& { return nodes_[out.inputs[i]].shape; };
    auto in_vals = [&](std::size_t i) { return values_of(nodes_[out.inputs[i]]); };
    auto require_arity = [&](std::size_t n) {
        if (inputs.size() != n)
            shape_error(kind, "expected " + std::to_string(n) + " inputs, got " + std::to_string(inputs.size()));
    };

    switch (kind) {
        case OpKind::leaf:
            throw Error("apply: leaf is not an operation");

        case OpKind::matvec: {
            require_arity(2);
            const Shape& ws = in_shape(0);
            const Shape& xs = in_shape(1);
            if (ws.size() != 2 || xs.size() != 1 || ws[1] != xs[0])
                shape_error(kind, shape_string(ws) + " * " + shape_string(xs));
            out.shape = {ws[0]};
            out.value.resize(ws[0]);
            VectorMap(out.value.data(), ws[0]).noalias() =
                ConstMatrixMap(in_vals(0).data(), ws[0], ws[1]) * ConstVectorMap(in_vals(1).data(), xs[0]);
            break;
        }
        case OpKind::matmul: {
            require_arity(2);
            const Shape& as = in_shape(0);
            const Shape& bs = in_shape(1);
            if (as.size() != 2 || bs.size() != 2 || as[1] != bs[0])
                shape_error(kind, shape_string(as) + " * " + shape_string(bs));
            out.shape = {as[0], bs[1]};
            out.value.resize(as[0] * bs[1]);
            MatrixMap(out.value.data(), as[0], bs[1]).noalias() =
                ConstMatrixMap(in_vals(0).data(), as[0], as[1]) * ConstMatrixMap(in_vals(1).data(), bs[0], bs[1]);
            break;
        }
        case OpKind::add:
        case OpKind::mul: {
            require_arity(2);
            if (in_shape(0) != in_shape(1))
                shape_error(kind, shape_string(in_shape(0)) + " vs " + shape_string(in_shape(1)));
            out.shape = in_shape(0);
            auto a = in_vals(0);
            auto b = in_vals(1);
            out.value.resize(a.size());
            if (kind == OpKind::add)
                for (std::size_t i = 0; i < a.size(); ++i) out.value[i] = a[i] + b[i];
            else
                for (std::size_t i = 0; i < a.size(); ++i) out.value[i] = a[i] * b[i];
            break;
        }
        case OpKind::tanh:
        case OpKind::sigmoid: {
            require_arity(1);
            out.shape = in_shape(0);
            auto x = in_vals(0);
            out.value.resize(x.size());
            if (kind == OpKind::tanh)
                for (std::size_t i = 0; i < x.size(); ++i) out.value[i] = std::tanh(x[i]);
            else
                for (std::size_t i = 0; i < x.size(); ++i) out.value[i] = stable_sigmoid(x[i]);
            break;
        }
        case OpKind::scale: {
            require_arity(1);
            if (!std::isfinite(args.factor)) throw NonFinite("scale factor");
            out.shape = in_shape(0);
            auto x = in_vals(0);
            out.value.resize(x.size());
            for (std::size_t i = 0; i < x.size(); ++i) out.value[i] = args.factor * x[i];
            break;
        }
        case OpKind::concat: {
            if (inputs.empty()) shape_error(kind, "no inputs");
            std::size_t total = 0;
            for (std::size_t i = 0; i < inputs.size(); ++i) {
                if (in_shape(i).size() != 1) shape_error(kind, "inputs must be vectors, got " + shape_string(in_shape(i)));
                total += in_shape(i)[0];
            }
            out.shape = {total};
            out.value.reserve(total);
            for (std::size_t i = 0; i < inputs.size(); ++i) {
                auto x = in_vals(i);
                out.value.insert(out.value.end(), x.begin(), x.end());
            }
            break;
        }
        case OpKind::slice: {
            require_arity(1);
            const std::size_t n = shape_size(in_shape(0));
            if (args.length == 0 || args.offset + args.length > n)
                shape_error(kind, "[" + std::to_string(args.offset) + ", " + std::to_string(args.offset + args.length) +
                                      ") out of " + std::to_string(n));
            out.shape = {args.length};
            auto x = in_vals(0);
            out.value.assign(x.begin() + static_cast<std::ptrdiff_t>(args.offset),
                             x.begin() + static_cast<std::ptrdiff_t>(args.offset + args.length));
            break;
        }
        case OpKind::softmax: {
            require_arity(1);
            const Shape& s = in_shape(0);
            if (s.size() > 2) shape_error(kind, "rank > 2");
            out.shape = s;
            const std::size_t cols = s.back();
            const std::size_t rows = shape_size(s) / cols;
            auto x = in_vals(0);
            out.value.resize(x.size());
            for (std::size_t r = 0; r < rows; ++r) softmax_row(x.data() + r * cols, out.value.data() + r * cols, cols);
            break;
        }
        case OpKind::weighted_sum: {
            if (inputs.size() < 2) shape_error(kind, "needs weights and at least one item");
            const Shape& ws = in_shape(0);
            const std::size_t n = inputs.size() - 1;
            if (ws.size() != 1 || ws[0] != n)
                shape_error(kind, "weights " + shape_string(ws) + " for " + std::to_string(n) + " items");
            const Shape& item = in_shape(1);
            if (item.size() != 1) shape_error(kind, "items must be vectors");
            for (std::size_t i = 2; i < inputs.size(); ++i)
                if (in_shape(i) != item) shape_error(kind, "items differ in shape");
            out.shape = item;
            out.value.assign(item[0], 0.0);
            auto w = in_vals(0);
            for (std::size_t i = 0; i < n; ++i) {
                auto h = in_vals(i + 1);
                for (std::size_t j = 0; j < item[0]; ++j) out.value[j] += w[i] * h[j];
            }
            break;
        }
        case OpKind::sum: {
            require_arity(1);
            out.shape = {1};
            auto x = in_vals(0);
            out.value = {std::accumulate(x.begin(), x.end(), 0.0)};
            break;
        }
        case OpKind::cross_entropy: {
            require_arity(1);
            const Shape& s = in_shape(0);
            if (s.size() != 1) shape_error(kind, "logits must be a vector");
            if (args.index >= s[0])
                throw IndexOutOfRange("gold class " + std::to_string(args.index) + " of " + std::to_string(s[0]));
            auto x = in_vals(0);
            const double mx = *std::max_element(x.begin(), x.end());
            double total = 0.0;
            for (double xi : x) total += std::exp(xi - mx);
            const double log_z = mx + std::log(total);
            out.saved.resize(x.size());
            for (std::size_t i = 0; i < x.size(); ++i) out.saved[i] = std::exp(x[i] - log_z);
            out.shape = {1};
            out.value = {log_z - x[args.index]};
            break;
        }
    }
    if (!finite(out.value)) throw NonFinite(std::string(op_name(kind)) + " produced NaN or Inf");
    return push(std::move(out));
}

Var Tape::matvec(Var w, Var x) { return apply(OpKind::matvec, std::array{w, x}); }
Var Tape::matmul(Var a, Var b) { return apply(OpKind::matmul, std::array{a, b}); }
Var Tape::add(Var a, Var b) { return apply(OpKind::add, std::array{a, b}); }
Var Tape::mul(Var a, Var b) { return apply(OpKind::mul, std::array{a, b}); }
Var Tape::tanh(Var x) { return apply(OpKind::tanh, std::array{x}); }
Var Tape::sigmoid(Var x) { return apply(OpKind::sigmoid, std::array{x}); }
Var Tape::concat(std::span<const Var> parts) { return apply(OpKind::concat, parts); }
Var Tape::softmax(Var x) { return apply(OpKind::softmax, std::array{x}); }
Var Tape::sum(Var x) { return apply(OpKind::sum, std::array{x}); }

Var Tape::slice(Var x, std::size_t offset, std::size_t length) {
    OpArgs args;
    args.offset = offset;
    args.length = length;
    return apply(OpKind::slice, std::array{x}, args);
}

Var Tape::weighted_sum(Var weights, std::span<const Var> items) {
    std::vector<Var> all;
    all.reserve(items.size() + 1);
    all.push_back(weights);
    all.insert(all.end(), items.begin(), items.end());
    return apply(OpKind::weighted_sum, all);
}

Var Tape::scale(Var x, double factor) {
    OpArgs args;
    args.factor = factor;
    return apply(OpKind::scale, std::array{x}, args);
}

Var Tape::cross_entropy(Var logits, std::size_t gold) {
    OpArgs args;
    args.index = gold;
    return apply(OpKind::cross_entropy, std::array{logits}, args);
}

// ---------------------------------------------------------------------------
// backward

void Tape::backward(Var loss) {
    const std::size_t root = check(loss);
    if (consumed_) throw TapeConsumed("backward already ran on this tape");
    if (shape_size(nodes_[root].shape) != 1) throw NotScalar("loss shape " + shape_string(nodes_[root].shape));
    consumed_ = true;
    if (!nodes_[root].needs_grad) return;
    grad_buffer(nodes_[root])[0] += 1.0;
    for (std::size_t id = root + 1; id-- > 0;) {
        Node& n = nodes_[id];
        if (!n.needs_grad || n.kind == OpKind::leaf || n.grad.empty()) continue;
        backprop_node(id);
    }
}

void Tape::backprop_node(std::size_t id) {
    // Inputs always precede their consumer, so references into nodes_ stay valid.
    Node& n = nodes_[id];
    std::span<const double> g = n.grad;
    auto input = [&](std::size_t i) -> Node& { return nodes_[n.inputs[i]]; };
    auto wants = [&](std::size_t i) { return input(i).needs_grad; };

    switch (n.kind) {
        case OpKind::leaf:
            break;
        case OpKind::matvec: {
            Node& w = input(0);
            Node& x = input(1);
            const auto m = static_cast<Eigen::Index>(w.shape[0]);
            const auto k = static_cast<Eigen::Index>(w.shape[1]);
            ConstVectorMap gv(g.data(), m);
            if (wants(0))
                MatrixMap(grad_buffer(w).data(), m, k).noalias() += gv * ConstVectorMap(values_of(x).data(), k).transpose();
            if (wants(1))
                VectorMap(grad_buffer(x).data(), k).noalias() += ConstMatrixMap(values_of(w).data(), m, k).transpose() * gv;
            break;
        }
        case OpKind::matmul: {
            Node& a = input(0);
            Node& b = input(1);
            const auto m = static_cast<Eigen::Index>(a.shape[0]);
            const auto k = static_cast<Eigen::Index>(a.shape[1]);
            const auto c = static_cast<Eigen::Index>(b.shape[1]);
            ConstMatrixMap gm(g.data(), m, c);
            if (wants(0))
                MatrixMap(grad_buffer(a).data(), m, k).noalias() += gm * ConstMatrixMap(values_of(b).data(), k, c).transpose();
            if (wants(1))
                MatrixMap(grad_buffer(b).data(), k, c).noalias() += ConstMatrixMap(values_of(a).data(), m, k).transpose() * gm;
            break;
        }
        case OpKind::add:
            for (std::size_t i = 0; i < 2; ++i) {
                if (!wants(i)) continue;
                auto dst = grad_buffer(input(i));
                for (std::size_t j = 0; j < g.size(); ++j) dst[j] += g[j];
            }
            break;
        case OpKind::mul:
            for (std::size_t i = 0; i < 2; ++i) {
                if (!wants(i)) continue;
                auto other = values_of(input(1 - i));
                auto dst = grad_buffer(input(i));
                for (std::size_t j = 0; j < g.size(); ++j) dst[j] += g[j] * other[j];
            }
            break;
        case OpKind::tanh:
            if (wants(0)) {
                auto dst = grad_buffer(input(0));
                for (std::size_t j = 0; j < g.size(); ++j) dst[j] += g[j] * (1.0 - n.value[j] * n.value[j]);
            }
            break;
        case OpKind::sigmoid:
            if (wants(0)) {
                auto dst = grad_buffer(input(0));
                for (std::size_t j = 0; j < g.size(); ++j) dst[j] += g[j] * n.value[j] * (1.0 - n.value[j]);
            }
            break;
        case OpKind::scale:
            if (wants(0)) {
                auto dst = grad_buffer(input(0));
                for (std::size_t j = 0; j < g.size(); ++j) dst[j] += n.args.factor * g[j];
            }
            break;
        case OpKind::concat: {
            std::size_t offset = 0;
            for (std::size_t i = 0; i < n.inputs.size(); ++i) {
                const std::size_t len = input(i).shape[0];
                if (wants(i)) {
                    auto dst = grad_buffer(input(i));
                    for (std::size_t j = 0; j < len; ++j) dst[j] += g[offset + j];
                }
                offset += len;
            }
            break;
        }
        case OpKind::slice:
            if (wants(0)) {
                auto dst = grad_buffer(input(0));
                for (std::size_t j = 0; j < n.args.length; ++j) dst[n.args.offset + j] += g[j];
            }
            break;
        case OpKind::softmax:
            if (wants(0)) {
                auto dst = grad_buffer(input(0));
                const std::size_t cols = n.shape.back();
                const std::size_t rows = n.value.size() / cols;
                for (std::size_t r = 0; r < rows; ++r) {
                    const double* y = n.value.data() + r * cols;
                    const double* gr = g.data() + r * cols;
                    double dot = 0.0;
                    for (std::size_t j = 0; j < cols; ++j) dot += gr[j] * y[j];
                    for (std::size_t j = 0; j < cols; ++j) dst[r * cols + j] += y[j] * (gr[j] - dot);
                }
            }
            break;
        case OpKind::weighted_sum: {
            const std::size_t count = n.inputs.size() - 1;
            auto w = values_of(input(0));
            if (wants(0)) {
                auto dst = grad_buffer(input(0));
                for (std::size_t i = 0; i < count; ++i) {
                    auto h = values_of(input(i + 1));
                    double dot = 0.0;
                    for (std::size_t j = 0; j < g.size(); ++j) dot += g[j] * h[j];
                    dst[i] += dot;
                }
            }
            for (std::size_t i = 0; i < count; ++i) {
                if (!wants(i + 1)) continue;
                auto dst = grad_buffer(input(i + 1));
                for (std::size_t j = 0; j < g.size(); ++j) dst[j] += w[i] * g[j];
            }
            break;
        }
        case OpKind::sum:
            if (wants(0)) {
                auto dst = grad_buffer(input(0));
                for (double& d : dst) d += g[0];
            }
            break;
        case OpKind::cross_entropy:
            if (wants(0)) {
                auto dst = grad_buffer(input(0));
                for (std::size_t j = 0; j < dst.size(); ++j)
                    dst[j] += g[0] * (n.saved[j] - (j == n.args.index ? 1.0 : 0.0));
            }
            break;
    }
}

}  // namespace ccoov::ad
