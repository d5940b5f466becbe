#include "jop/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "jop/errors.hpp"

namespace jop::ad {

const Tensor& Var::value() const { return tape->value(id); }

Var Tape::emplace(Node n) {
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::leaf(Tensor v) {
    Node n;
    n.op = Op::Leaf;
    n.value = std::move(v);
    return emplace(std::move(n));
}

Var Tape::param(const Tensor* t) {
    Node n;
    n.op = Op::Leaf;
    n.external = t;
    n.requires_grad = true;
    return emplace(std::move(n));
}

Var Tape::input(const Tensor* t) {
    Node n;
    n.op = Op::Leaf;
    n.external = t;
    return emplace(std::move(n));
}

const Tensor& Tape::grad(int id) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.grad_ready) throw Error("gradient not computed for this node");
    return n.grad;
}

namespace {

Node make(Op op, std::vector<int> inputs, Tensor value, Tape& t) {
    Node n;
    n.op = op;
    n.inputs = std::move(inputs);
    n.value = std::move(value);
    for (int i : n.inputs)
        if (t.node(i).requires_grad) n.requires_grad = true;
    return n;
}

void check_same_tape(Var a, Var b) {
    if (a.tape != b.tape) throw Error("operands belong to different tapes");
}

} // namespace

Var matmul(Var a, Var b) {
    check_same_tape(a, b);
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    Tensor out;
    if (A.rank() == 2 && B.rank() == 2) {
        if (A.dim(1) != B.dim(0)) throw ShapeError("matmul: inner dimensions differ");
        const std::size_t m = A.dim(0), k = A.dim(1), n = B.dim(1);
        out = Tensor(Shape{m, n});
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t l = 0; l < k; ++l) {
                const double av = A(i, l);
                if (av == 0.0) continue;
                for (std::size_t j = 0; j < n; ++j) out(i, j) += av * B(l, j);
            }
    } else if (A.rank() == 2 && B.rank() == 1) {
        if (A.dim(1) != B.dim(0)) throw ShapeError("matmul: matrix/vector dimensions differ");
        const std::size_t m = A.dim(0), k = A.dim(1);
        out = Tensor(Shape{m});
        for (std::size_t i = 0; i < m; ++i) {
            double acc = 0.0;
            for (std::size_t l = 0; l < k; ++l) acc += A(i, l) * B[l];
            out[i] = acc;
        }
    } else if (A.rank() == 1 && B.rank() == 2) {
        if (A.dim(0) != B.dim(0)) throw ShapeError("matmul: vector/matrix dimensions differ");
        const std::size_t k = A.dim(0), n = B.dim(1);
        out = Tensor(Shape{n});
        for (std::size_t l = 0; l < k; ++l) {
            const double av = A[l];
            if (av == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) out[j] += av * B(l, j);
        }
    } else {
        throw ShapeError("matmul: unsupported ranks");
    }
    return a.tape->emplace(make(Op::MatMul, {a.id, b.id}, std::move(out), *a.tape));
}

Var add(Var a, Var b) {
    check_same_tape(a, b);
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    if (!A.same_shape(B)) throw ShapeError("add: shapes differ");
    Tensor out = A;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += B[i];
    return a.tape->emplace(make(Op::Add, {a.id, b.id}, std::move(out), *a.tape));
}

Var add_rowvec(Var m, Var v) {
    check_same_tape(m, v);
    const Tensor& M = m.value();
    const Tensor& V = v.value();
    if (M.rank() != 2 || V.rank() != 1 || M.dim(1) != V.dim(0))
        throw ShapeError("add_rowvec: expected [r,c] and [c]");
    Tensor out = M;
    for (std::size_t i = 0; i < M.dim(0); ++i)
        for (std::size_t j = 0; j < M.dim(1); ++j) out(i, j) += V[j];
    return m.tape->emplace(make(Op::AddRowVec, {m.id, v.id}, std::move(out), *m.tape));
}

Var mul(Var a, Var b) {
    check_same_tape(a, b);
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    if (!A.same_shape(B)) throw ShapeError("mul: shapes differ");
    Tensor out = A;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= B[i];
    return a.tape->emplace(make(Op::Mul, {a.id, b.id}, std::move(out), *a.tape));
}

Var affine(Var a, double k, double c) {
    Tensor out = a.value();
    for (double& x : out.vec()) x = k * x + c;
    Node n = make(Op::Affine, {a.id}, std::move(out), *a.tape);
    n.k = k;
    n.c = c;
    return a.tape->emplace(std::move(n));
}

Var tanh(Var a) {
    Tensor out = a.value();
    for (double& x : out.vec()) x = std::tanh(x);
    return a.tape->emplace(make(Op::Tanh, {a.id}, std::move(out), *a.tape));
}

Var sigmoid(Var a) {
    Tensor out = a.value();
    for (double& x : out.vec()) x = 1.0 / (1.0 + std::exp(-x));
    return a.tape->emplace(make(Op::Sigmoid, {a.id}, std::move(out), *a.tape));
}

Var relu(Var a) {
    Tensor out = a.value();
    for (double& x : out.vec()) x = x > 0.0 ? x : 0.0;
    return a.tape->emplace(make(Op::Relu, {a.id}, std::move(out), *a.tape));
}

Var log(Var a) {
    Tensor out = a.value();
    for (double& x : out.vec()) x = std::log(x);
    return a.tape->emplace(make(Op::Log, {a.id}, std::move(out), *a.tape));
}

Var clamp(Var a, double lo, double hi) {
    Tensor out = a.value();
    for (double& x : out.vec()) x = std::min(std::max(x, lo), hi);
    Node n = make(Op::Clamp, {a.id}, std::move(out), *a.tape);
    n.k = lo;
    n.c = hi;
    return a.tape->emplace(std::move(n));
}

Var concat(const std::vector<Var>& parts) {
    if (parts.empty()) throw ShapeError("concat: no parts");
    Tape* t = parts.front().tape;
    std::size_t total = 0;
    std::vector<int> ids;
    ids.reserve(parts.size());
    for (Var p : parts) {
        check_same_tape(parts.front(), p);
        if (p.value().rank() != 1) throw ShapeError("concat: parts must be 1-D");
        total += p.value().size();
        ids.push_back(p.id);
    }
    Tensor out(Shape{total});
    std::size_t off = 0;
    for (Var p : parts) {
        const Tensor& v = p.value();
        std::copy(v.data(), v.data() + v.size(), out.data() + off);
        off += v.size();
    }
    return t->emplace(make(Op::Concat, std::move(ids), std::move(out), *t));
}

Var stack(const std::vector<Var>& rows) {
    if (rows.empty()) throw ShapeError("stack: no rows");
    Tape* t = rows.front().tape;
    const std::size_t d = rows.front().value().size();
    std::vector<int> ids;
    ids.reserve(rows.size());
    for (Var r : rows) {
        check_same_tape(rows.front(), r);
        if (r.value().rank() != 1 || r.value().size() != d)
            throw ShapeError("stack: rows must be equal-length 1-D");
        ids.push_back(r.id);
    }
    Tensor out(Shape{rows.size(), d});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const Tensor& v = rows[i].value();
        std::copy(v.data(), v.data() + d, out.data() + i * d);
    }
    return t->emplace(make(Op::Stack, std::move(ids), std::move(out), *t));
}

Var sum(Var a) {
    double acc = 0.0;
    for (double x : a.value().vec()) acc += x;
    return a.tape->emplace(make(Op::Sum, {a.id}, Tensor::scalar(acc), *a.tape));
}

Var pick(Var a, std::size_t flat_index) {
    if (flat_index >= a.value().size()) throw ShapeError("pick: index out of range");
    Node n = make(Op::Pick, {a.id}, Tensor::scalar(a.value()[flat_index]), *a.tape);
    n.index = flat_index;
    return a.tape->emplace(std::move(n));
}

Var masked_softmax(Var scores, const std::vector<std::uint8_t>& mask) {
    const Tensor& s = scores.value();
    if (s.rank() != 1) throw ShapeError("masked_softmax: expected 1-D scores");
    if (mask.size() != s.size()) throw ShapeError("masked_softmax: mask size mismatch");
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < s.size(); ++i)
        if (mask[i] && s[i] > mx) mx = s[i];
    if (mx == -std::numeric_limits<double>::infinity())
        throw AllMaskedError("masked_softmax: every position is masked");
    Tensor out(Shape{s.size()});
    double z = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!mask[i]) continue;
        out[i] = std::exp(s[i] - mx);
        z += out[i];
    }
    for (std::size_t i = 0; i < s.size(); ++i)
        if (mask[i]) out[i] /= z;
    Node n = make(Op::MaskedSoftmax, {scores.id}, std::move(out), *scores.tape);
    n.mask = mask;
    return scores.tape->emplace(std::move(n));
}

Var log_softmax(Var scores) {
    const Tensor& s = scores.value();
    if (s.rank() != 1) throw ShapeError("log_softmax: expected 1-D scores");
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < s.size(); ++i) mx = std::max(mx, s[i]);
    double z = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) z += std::exp(s[i] - mx);
    const double lse = mx + std::log(z);
    Tensor out(Shape{s.size()});
    for (std::size_t i = 0; i < s.size(); ++i) out[i] = s[i] - lse;
    return scores.tape->emplace(
        make(Op::LogSoftmax, {scores.id}, std::move(out), *scores.tape));
}

Var gather_rows(Var table, std::vector<std::size_t> indices) {
    const Tensor& T = table.value();
    if (T.rank() != 2) throw ShapeError("gather_rows: table must be 2-D");
    const std::size_t d = T.dim(1);
    Tensor out(Shape{indices.size(), d});
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= T.dim(0)) throw ShapeError("gather_rows: row index out of range");
        std::copy(T.data() + indices[i] * d, T.data() + (indices[i] + 1) * d,
                  out.data() + i * d);
    }
    Node n = make(Op::Rows, {table.id}, std::move(out), *table.tape);
    n.rows = std::move(indices);
    return table.tape->emplace(std::move(n));
}

Var gather_row(Var table, std::size_t index) {
    const Tensor& T = table.value();
    if (T.rank() != 2) throw ShapeError("gather_row: table must be 2-D");
    if (index >= T.dim(0)) throw ShapeError("gather_row: row index out of range");
    const std::size_t d = T.dim(1);
    Tensor out(Shape{d});
    std::copy(T.data() + index * d, T.data() + (index + 1) * d, out.data());
    Node n = make(Op::Rows, {table.id}, std::move(out), *table.tape);
    n.rows = {index};
    return table.tape->emplace(std::move(n));
}

Var binary_cross_entropy(Var p, double y) {
    constexpr double kEps = 1e-7;
    if (!p.value().is_scalar()) throw ShapeError("binary_cross_entropy: p must be scalar");
    Var pc = clamp(p, kEps, 1.0 - kEps);
    Var pos = log(pc);                       // ln p
    Var neg = log(affine(pc, -1.0, 1.0));    // ln (1-p)
    return affine(add(affine(pos, y, 0.0), affine(neg, 1.0 - y, 0.0)), -1.0, 0.0);
}

// ---- backward ---------------------------------------------------------------

void Tape::backward(Var loss) {
    if (loss.tape != this) throw Error("backward: loss from another tape");
    Node& ln = nodes_[static_cast<std::size_t>(loss.id)];
    if (!ln.val().is_scalar()) throw NonScalarLossError("backward: loss must be a scalar");

    for (Node& n : nodes_) {
        n.grad_ready = false;
        if (n.requires_grad) {
            n.grad = Tensor(n.val().shape());
        }
    }
    // A loss that does not depend on any parameter still yields (zero)
    // gradients for every registered parameter.
    if (ln.requires_grad) {
        ln.grad[0] = 1.0;
        ln.grad_ready = true;
    }

    for (int id = loss.id; id >= 0; --id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (!n.requires_grad || n.op == Op::Leaf) {
            n.grad_ready = n.requires_grad;
            continue;
        }
        n.grad_ready = true;
        const Tensor& g = n.grad;
        switch (n.op) {
        case Op::MatMul: {
            Node& na = nodes_[static_cast<std::size_t>(n.inputs[0])];
            Node& nb = nodes_[static_cast<std::size_t>(n.inputs[1])];
            const Tensor& A = na.val();
            const Tensor& B = nb.val();
            if (A.rank() == 2 && B.rank() == 2) {
                const std::size_t m = A.dim(0), k = A.dim(1), c = B.dim(1);
                if (na.requires_grad)
                    for (std::size_t i = 0; i < m; ++i)
                        for (std::size_t l = 0; l < k; ++l) {
                            double acc = 0.0;
                            for (std::size_t j = 0; j < c; ++j) acc += g(i, j) * B(l, j);
                            na.grad(i, l) += acc;
                        }
                if (nb.requires_grad)
                    for (std::size_t l = 0; l < k; ++l)
                        for (std::size_t j = 0; j < c; ++j) {
                            double acc = 0.0;
                            for (std::size_t i = 0; i < m; ++i) acc += A(i, l) * g(i, j);
                            nb.grad(l, j) += acc;
                        }
            } else if (A.rank() == 2 && B.rank() == 1) {
                const std::size_t m = A.dim(0), k = A.dim(1);
                if (na.requires_grad)
                    for (std::size_t i = 0; i < m; ++i)
                        for (std::size_t l = 0; l < k; ++l) na.grad(i, l) += g[i] * B[l];
                if (nb.requires_grad)
                    for (std::size_t l = 0; l < k; ++l) {
                        double acc = 0.0;
                        for (std::size_t i = 0; i < m; ++i) acc += A(i, l) * g[i];
                        nb.grad[l] += acc;
                    }
            } else {  // [k] x [k,n]
                const std::size_t k = A.dim(0), c = B.dim(1);
                if (na.requires_grad)
                    for (std::size_t l = 0; l < k; ++l) {
                        double acc = 0.0;
                        for (std::size_t j = 0; j < c; ++j) acc += B(l, j) * g[j];
                        na.grad[l] += acc;
                    }
                if (nb.requires_grad)
                    for (std::size_t l = 0; l < k; ++l)
                        for (std::size_t j = 0; j < c; ++j) nb.grad(l, j) += A[l] * g[j];
            }
            break;
        }
        case Op::Add: {
            for (int in : n.inputs) {
                Node& ni = nodes_[static_cast<std::size_t>(in)];
                if (!ni.requires_grad) continue;
                for (std::size_t i = 0; i < g.size(); ++i) ni.grad[i] += g[i];
            }
            break;
        }
        case Op::AddRowVec: {
            Node& nm = nodes_[static_cast<std::size_t>(n.inputs[0])];
            Node& nv = nodes_[static_cast<std::size_t>(n.inputs[1])];
            const std::size_t r = n.val().dim(0), c = n.val().dim(1);
            if (nm.requires_grad)
                for (std::size_t i = 0; i < g.size(); ++i) nm.grad[i] += g[i];
            if (nv.requires_grad)
                for (std::size_t j = 0; j < c; ++j) {
                    double acc = 0.0;
                    for (std::size_t i = 0; i < r; ++i) acc += g[i * c + j];
                    nv.grad[j] += acc;
                }
            break;
        }
        case Op::Mul: {
            Node& na = nodes_[static_cast<std::size_t>(n.inputs[0])];
            Node& nb = nodes_[static_cast<std::size_t>(n.inputs[1])];
            if (na.requires_grad)
                for (std::size_t i = 0; i < g.size(); ++i) na.grad[i] += g[i] * nb.val()[i];
            if (nb.requires_grad)
                for (std::size_t i = 0; i < g.size(); ++i) nb.grad[i] += g[i] * na.val()[i];
            break;
        }
        case Op::Affine: {
            Node& na = nodes_[static_cast<std::size_t>(n.inputs[0])];
            if (na.requires_grad)
                for (std::size_t i = 0; i < g.size(); ++i) na.grad[i] += n.k * g[i];
            break;
        }
        case Op::Tanh: {
            Node& na = nodes_[static_cast<std::size_t>(n.inputs[0])];
            if (na.requires_grad)
                for (std::size_t i = 0; i < g.size(); ++i)
                    na.grad[i] += (1.0 - n.value[i] * n.value[i]) * g[i];
            break;
        }
        case Op::Sigmoid: {
            Node& na = nodes_[static_cast<std::size_t>(n.inputs[0])];
            if (na.requires_grad)
                for (std::size_t i = 0; i < g.size(); ++i)
                    na.grad[i] += n.value[i] * (1.0 - n.value[i]) * g[i];
            break;
        }
        case Op::Relu: {
            Node& na = nodes_[static_cast<std::size_t>(n.inputs[0])];
            if (na.requires_grad)
                for (std::size_t i = 0; i < g.size(); ++i)
                    if (na.val()[i] > 0.0) na.grad[i] += g[i];
            break;
        }
        case Op::Log: {
            Node& na = nodes_[static_cast<std::size_t>(n.inputs[0])];
            if (na.requires_grad)
                for (std::size_t i = 0; i < g.size(); ++i) na.grad[i] += g[i] / na.val()[i];
            break;
        }
        case Op::Clamp: {
            Node& na = nodes_[static_cast<std::size_t>(n.inputs[0])];
            if (na.requires_grad)
                for (std::size_t i = 0; i < g.size(); ++i) {
                    const double x = na.val()[i];
                    if (x >= n.k && x <= n.c) na.grad[i] += g[i];
                }
            break;
        }
        case Op::Concat: {
            std::size_t off = 0;
            for (int in : n.inputs) {
                Node& ni = nodes_[static_cast<std::size_t>(in)];
                const std::size_t len = ni.val().size();
                if (ni.requires_grad)
                    for (std::size_t i = 0; i < len; ++i) ni.grad[i] += g[off + i];
                off += len;
            }
            break;
        }
        case Op::Stack: {
            const std::size_t d = n.val().dim(1);
            for (std::size_t r = 0; r < n.inputs.size(); ++r) {
                Node& ni = nodes_[static_cast<std::size_t>(n.inputs[r])];
                if (!ni.requires_grad) continue;
                for (std::size_t i = 0; i < d; ++i) ni.grad[i] += g[r * d + i];
            }
            break;
        }
        case Op::Sum: {
            Node& na = nodes_[static_cast<std::size_t>(n.inputs[0])];
            if (na.requires_grad)
                for (std::size_t i = 0; i < na.grad.size(); ++i) na.grad[i] += g[0];
            break;
        }
        case Op::Pick: {
            Node& na = nodes_[static_cast<std::size_t>(n.inputs[0])];
            if (na.requires_grad) na.grad[n.index] += g[0];
            break;
        }
        case Op::MaskedSoftmax: {
            Node& na = nodes_[static_cast<std::size_t>(n.inputs[0])];
            if (na.requires_grad) {
                double dot = 0.0;
                for (std::size_t i = 0; i < g.size(); ++i)
                    if (n.mask[i]) dot += g[i] * n.value[i];
                for (std::size_t i = 0; i < g.size(); ++i)
                    if (n.mask[i]) na.grad[i] += n.value[i] * (g[i] - dot);
            }
            break;
        }
        case Op::LogSoftmax: {
            Node& na = nodes_[static_cast<std::size_t>(n.inputs[0])];
            if (na.requires_grad) {
                double total = 0.0;
                for (std::size_t i = 0; i < g.size(); ++i) total += g[i];
                for (std::size_t i = 0; i < g.size(); ++i)
                    na.grad[i] += g[i] - std::exp(n.value[i]) * total;
            }
            break;
        }
        case Op::Rows: {
            Node& nt = nodes_[static_cast<std::size_t>(n.inputs[0])];
            if (nt.requires_grad) {
                const std::size_t d =
                    n.val().rank() == 2 ? n.val().dim(1) : n.val().size();
                for (std::size_t i = 0; i < n.rows.size(); ++i)
                    for (std::size_t j = 0; j < d; ++j)
                        nt.grad[n.rows[i] * d + j] += g[i * d + j];
            }
            break;
        }
        case Op::Leaf:
            break;
        }
    }
}

// ---- ParamSet / Binding ------------------------------------------------------

Tensor& ParamSet::add(std::string name, Tensor t) {
    if (contains(name)) throw Error("duplicate parameter name: " + name);
    items_.emplace_back(std::move(name), std::move(t));
    return items_.back().second;
}

Tensor& ParamSet::at(std::string_view name) {
    for (auto& [n, t] : items_)
        if (n == name) return t;
    throw Error("unknown parameter: " + std::string(name));
}

const Tensor& ParamSet::at(std::string_view name) const {
    for (const auto& [n, t] : items_)
        if (n == name) return t;
    throw Error("unknown parameter: " + std::string(name));
}

bool ParamSet::contains(std::string_view name) const {
    for (const auto& [n, t] : items_)
        if (n == name) return true;
    return false;
}

std::size_t ParamSet::scalar_count() const {
    std::size_t total = 0;
    for (const auto& [n, t] : items_) total += t.size();
    return total;
}

Binding::Binding(Tape& tape, const ParamSet& params, bool trainable) : tape_(&tape) {
    for (const auto& [name, tensor] : params)
        vars_.emplace_back(name, trainable ? tape.param(&tensor) : tape.input(&tensor));
}

Var Binding::operator[](std::string_view name) const {
    for (const auto& [n, v] : vars_)
        if (n == name) return v;
    throw Error("binding has no parameter: " + std::string(name));
}

void Binding::harvest(ParamSet& grad_accum) const {
    for (const auto& [name, var] : vars_) {
        const Tensor& g = tape_->grad(var.id);
        Tensor& acc = grad_accum.at(name);
        if (!acc.same_shape(g)) throw ShapeError("harvest: accumulator shape mismatch");
        for (std::size_t i = 0; i < g.size(); ++i) acc[i] += g[i];
    }
}

// ---- gradient check ----------------------------------------------------------

double GradCheckReport::max_rel_error() const {
    double m = 0.0;
    for (const auto& e : entries) m = std::max(m, e.max_rel_error);
    return m;
}

GradCheckReport gradient_check(
    ParamSet& params,
    const std::function<Var(Tape&, const Binding&)>& build,
    double step) {
    // Analytic pass.
    ParamSet analytic;
    for (const auto& [name, t] : params) analytic.add(name, Tensor(t.shape()));
    {
        Tape tape;
        Binding bind(tape, params);
        Var loss = build(tape, bind);
        tape.backward(loss);
        bind.harvest(analytic);
    }

    auto eval = [&]() {
        Tape tape;
        Binding bind(tape, params, /*trainable=*/false);
        return build(tape, bind).value().item();
    };

    GradCheckReport report;
    report.step = step;
    for (auto& [name, tensor] : params) {
        double worst = 0.0;
        for (std::size_t i = 0; i < tensor.size(); ++i) {
            const double keep = tensor[i];
            tensor[i] = keep + step;
            const double fp = eval();
            tensor[i] = keep - step;
            const double fm = eval();
            tensor[i] = keep;
            const double numeric = (fp - fm) / (2.0 * step);
            const double a = analytic.at(name)[i];
            // (fp - fm) carries cancellation error of order eps*|f|; a
            // discrepancy below that bound is indistinguishable from the
            // reference's own rounding noise and cannot count as error.
            const double noise = 4.0 * std::numeric_limits<double>::epsilon() *
                                 std::max(std::abs(fp), std::abs(fm)) / (2.0 * step);
            const double diff = std::abs(a - numeric);
            if (diff <= noise) continue;
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-12});
            worst = std::max(worst, diff / denom);
        }
        report.entries.push_back({name, worst});
    }
    return report;
}

} // namespace jop::ad
