#ifndef JOP_AUTODIFF_HPP
#define JOP_AUTODIFF_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "jop/tensor.hpp"

namespace jop::ad {

// Reverse-mode autodiff on a tape of eagerly evaluated nodes. A Tape is
// single-threaded; distinct tapes may run concurrently. Creation order is
// a topological order, so backward() is a single reverse sweep with a
// fixed, deterministic accumulation order.

enum class Op : std::uint8_t {
    Leaf,
    MatMul,
    Add,
    AddRowVec,
    Mul,
    Affine,
    Tanh,
    Sigmoid,
    Relu,
    Log,
    Clamp,
    Concat,
    Stack,
    Sum,
    Pick,
    MaskedSoftmax,
    LogSoftmax,
    Rows,
};

class Tape;

struct Var {
    Tape* tape = nullptr;
    int id = -1;

    bool valid() const { return tape != nullptr && id >= 0; }
    const Tensor& value() const;
};

struct Node {
    Op op = Op::Leaf;
    std::vector<int> inputs;
    Tensor value;                  // owned value (unused for external leaves)
    Tensor grad;                   // allocated during backward
    const Tensor* external = nullptr;
    bool requires_grad = false;
    bool grad_ready = false;

    double k = 0.0, c = 0.0;       // Affine: k*x+c, Clamp: [k, c]
    std::size_t index = 0;         // Pick
    std::vector<std::uint8_t> mask;     // MaskedSoftmax (1 = visible)
    std::vector<std::size_t> rows;      // Rows gather indices

    const Tensor& val() const { return external ? *external : value; }
};

class Tape {
public:
    // Owning constant leaf.
    Var leaf(Tensor v);
    Var scalar(double v) { return leaf(Tensor::scalar(v)); }

    // Non-owning views over tensors that outlive the tape. `param` leaves
    // receive gradients; `input` leaves do not.
    Var param(const Tensor* t);
    Var input(const Tensor* t);

    void backward(Var loss);

    const Tensor& value(int id) const { return nodes_[static_cast<std::size_t>(id)].val(); }
    const Tensor& grad(int id) const;
    bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }

    std::size_t size() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

    Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
    const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
    Var emplace(Node n);

private:
    std::vector<Node> nodes_;
};

// ---- primitive operations ------------------------------------------------

// matmul supports [m,k]x[k,n] -> [m,n], [m,k]x[k] -> [m], [k]x[k,n] -> [n].
Var matmul(Var a, Var b);
Var add(Var a, Var b);
// M [r,c] + v [c] broadcast over rows.
Var add_rowvec(Var m, Var v);
Var mul(Var a, Var b);
// Elementwise k*x + c.
Var affine(Var a, double k, double c);
Var tanh(Var a);
Var sigmoid(Var a);
Var relu(Var a);
Var log(Var a);
Var clamp(Var a, double lo, double hi);
// 1-D concatenation of all parts.
Var concat(const std::vector<Var>& parts);
inline Var concat(Var a, Var b) { return concat(std::vector<Var>{a, b}); }
// Stack n equal-length 1-D vectors into an [n, d] matrix.
Var stack(const std::vector<Var>& rows);
Var sum(Var a);
// Single element of a tensor (flat index) as a scalar.
Var pick(Var a, std::size_t flat_index);
// Softmax over the unmasked entries of a 1-D tensor; masked entries are
// exactly zero in both value and gradient. Max-subtraction for stability.
Var masked_softmax(Var scores, const std::vector<std::uint8_t>& mask);
inline Var softmax(Var scores) {
    return masked_softmax(scores, std::vector<std::uint8_t>(scores.value().size(), 1));
}
// log(softmax(x)) computed stably; unlike log(clamp(softmax(x))) its
// gradient never dies when a logit saturates.
Var log_softmax(Var scores);
// Gather rows of a [V, d] table into an [n, d] matrix; backward scatter-adds.
Var gather_rows(Var table, std::vector<std::size_t> indices);
// Single row of a [V, d] table as a [d] vector.
Var gather_row(Var table, std::size_t index);

// -(y ln p + (1-y) ln(1-p)) with p clamped to [eps, 1-eps], eps = 1e-7.
Var binary_cross_entropy(Var p, double y);

// ---- named parameter sets --------------------------------------------------

// Ordered collection of named tensors. Order is fixed at insertion, names
// are unique; every consumer iterates in this order so results do not
// depend on hashing.
class ParamSet {
public:
    Tensor& add(std::string name, Tensor t);
    Tensor& at(std::string_view name);
    const Tensor& at(std::string_view name) const;
    bool contains(std::string_view name) const;

    std::size_t size() const { return items_.size(); }
    auto begin() { return items_.begin(); }
    auto end() { return items_.end(); }
    auto begin() const { return items_.begin(); }
    auto end() const { return items_.end(); }

    // Total scalar count across all tensors.
    std::size_t scalar_count() const;

private:
    std::vector<std::pair<std::string, Tensor>> items_;
};

// Registers every tensor of a ParamSet as a leaf on one tape and exposes
// them by name. After backward(), harvest() adds each parameter gradient
// into a same-shaped accumulator set.
class Binding {
public:
    Binding(Tape& tape, const ParamSet& params, bool trainable = true);

    Var operator[](std::string_view name) const;
    void harvest(ParamSet& grad_accum) const;

private:
    Tape* tape_;
    std::vector<std::pair<std::string, Var>> vars_;
};

// ---- finite-difference verification -----------------------------------------

struct GradCheckReport {
    struct Entry {
        std::string name;
        double max_rel_error = 0.0;
    };
    std::vector<Entry> entries;
    double step = 0.0;

    double max_rel_error() const;
};

// Central differences (f(x+h)-f(x-h))/2h against tape gradients.
// `build` must construct the loss graph from scratch on each call.
GradCheckReport gradient_check(
    ParamSet& params,
    const std::function<Var(Tape&, const Binding&)>& build,
    double step);

} // namespace jop::ad

#endif
