#include "chatty/tape.hpp"

#include "chatty/errors.hpp"

#include <cmath>
#include <utility>

namespace chatty {

namespace {

using Arr = Eigen::Array<Real, Eigen::Dynamic, 1>;

void require_same_tape(Node a, Node b, const char* op) {
    if (a.tape == nullptr || b.tape == nullptr || a.tape != b.tape) {
        throw StateError(std::string(op) + ": operands belong to different tapes");
    }
}

void require_same_shape(Node a, Node b, const char* op) {
    require_same_tape(a, b, op);
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ShapeError(std::string(op) + ": shapes disagree: " + shape_str(a.value()) +
                         " vs " + shape_str(b.value()));
    }
}

Mat row_softmax(const Mat& z, Real temperature) {
    const Arr rowmax = z.rowwise().maxCoeff().array();
    Mat out(z.rows(), z.cols());
    out.array() = ((z.array().colwise() - rowmax) / temperature).exp();
    const Arr sums = out.rowwise().sum().array();
    out.array().colwise() /= sums;
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Node
// ---------------------------------------------------------------------------

const Mat& Node::value() const { return tape->value(id); }
const Mat& Node::grad() const { return tape->grad(id); }
Index Node::rows() const { return value().rows(); }
Index Node::cols() const { return value().cols(); }

Real Node::scalar() const {
    const Mat& v = value();
    if (v.rows() != 1 || v.cols() != 1) {
        throw ShapeError("scalar: node is " + shape_str(v) + ", expected 1x1");
    }
    return v(0, 0);
}

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

Node Tape::make(const char* op, Mat value, std::array<int, 2> parents, BackwardFn backward) {
    Slot slot;
    slot.grad = Mat::Zero(value.rows(), value.cols());
    slot.value = std::move(value);
    slot.parents = parents;
    slot.op = op;
    slot.backward = std::move(backward);
    slots_.push_back(std::move(slot));
    return Node{this, static_cast<int>(slots_.size()) - 1};
}

Node Tape::leaf(const Mat& param) {
    auto it = leaf_ids_.find(&param);
    if (it != leaf_ids_.end()) {
        return Node{this, it->second};
    }
    Node n = make("leaf", param, {-1, -1}, nullptr);
    leaf_ids_.emplace(&param, n.id);
    return n;
}

Node Tape::constant(Mat value) {
    return make("constant", std::move(value), {-1, -1}, nullptr);
}

Node Tape::constant_scalar(Real v) {
    Mat m(1, 1);
    m(0, 0) = v;
    return constant(std::move(m));
}

void Tape::backward(Node loss) {
    if (loss.tape != this) {
        throw StateError("backward: loss node belongs to a different tape");
    }
    if (backward_done_) {
        throw StateError("backward: called twice without reset_grads()");
    }
    const Mat& v = value(loss.id);
    if (v.rows() != 1 || v.cols() != 1) {
        throw ShapeError("backward: loss is " + shape_str(v) + ", expected 1x1");
    }
    backward_done_ = true;
    slots_[static_cast<std::size_t>(loss.id)].grad(0, 0) += 1.0;
    for (int i = loss.id; i >= 0; --i) {
        Slot& slot = slots_[static_cast<std::size_t>(i)];
        if (!slot.backward) continue;
        if ((slot.grad.array() == 0.0).all()) continue;
        slot.backward(*this, i);
    }
}

void Tape::reset_grads() {
    for (Slot& slot : slots_) {
        slot.grad.setZero();
    }
    backward_done_ = false;
}

const Mat* Tape::grad_of(const Mat& param) const {
    auto it = leaf_ids_.find(&param);
    if (it == leaf_ids_.end()) return nullptr;
    return &slots_[static_cast<std::size_t>(it->second)].grad;
}

// ---------------------------------------------------------------------------
// Ops
// ---------------------------------------------------------------------------

Node matmul(Node a, Node b) {
    require_same_tape(a, b, "matmul");
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: inner dimensions disagree: " + shape_str(a.value()) +
                         " vs " + shape_str(b.value()));
    }
    Tape& t = *a.tape;
    const int ia = a.id, ib = b.id;
    return t.make("matmul", a.value() * b.value(), {ia, ib}, [ia, ib](Tape& t, int self) {
        const Mat& g = t.grad(self);
        t.grad_ref(ia) += g * t.value(ib).transpose();
        t.grad_ref(ib) += t.value(ia).transpose() * g;
    });
}

Node transpose(Node x) {
    Tape& t = *x.tape;
    const int ix = x.id;
    return t.make("transpose", x.value().transpose(), {ix, -1}, [ix](Tape& t, int self) {
        t.grad_ref(ix) += t.grad(self).transpose();
    });
}

Node add(Node a, Node b) {
    require_same_shape(a, b, "add");
    Tape& t = *a.tape;
    const int ia = a.id, ib = b.id;
    return t.make("add", a.value() + b.value(), {ia, ib}, [ia, ib](Tape& t, int self) {
        t.grad_ref(ia) += t.grad(self);
        t.grad_ref(ib) += t.grad(self);
    });
}

Node sub(Node a, Node b) {
    require_same_shape(a, b, "sub");
    Tape& t = *a.tape;
    const int ia = a.id, ib = b.id;
    return t.make("sub", a.value() - b.value(), {ia, ib}, [ia, ib](Tape& t, int self) {
        t.grad_ref(ia) += t.grad(self);
        t.grad_ref(ib) -= t.grad(self);
    });
}

Node mul(Node a, Node b) {
    require_same_shape(a, b, "mul");
    Tape& t = *a.tape;
    const int ia = a.id, ib = b.id;
    return t.make("mul", a.value().cwiseProduct(b.value()), {ia, ib}, [ia, ib](Tape& t, int self) {
        const Mat& g = t.grad(self);
        t.grad_ref(ia).array() += g.array() * t.value(ib).array();
        t.grad_ref(ib).array() += g.array() * t.value(ia).array();
    });
}

Node divide(Node a, Node b) {
    require_same_shape(a, b, "divide");
    Tape& t = *a.tape;
    const int ia = a.id, ib = b.id;
    Mat out = a.value().array() / b.value().array();
    return t.make("divide", std::move(out), {ia, ib}, [ia, ib](Tape& t, int self) {
        const Mat& g = t.grad(self);
        const auto bv = t.value(ib).array();
        t.grad_ref(ia).array() += g.array() / bv;
        t.grad_ref(ib).array() -= g.array() * t.value(ia).array() / (bv * bv);
    });
}

Node neg(Node x) {
    Tape& t = *x.tape;
    const int ix = x.id;
    return t.make("neg", -x.value(), {ix, -1}, [ix](Tape& t, int self) {
        t.grad_ref(ix) -= t.grad(self);
    });
}

Node abs(Node x) {
    Tape& t = *x.tape;
    const int ix = x.id;
    return t.make("abs", x.value().cwiseAbs(), {ix, -1}, [ix](Tape& t, int self) {
        // sign(0) = 0
        t.grad_ref(ix).array() += t.grad(self).array() * t.value(ix).array().sign();
    });
}

Node exp(Node x) {
    Tape& t = *x.tape;
    const int ix = x.id;
    return t.make("exp", x.value().array().exp(), {ix, -1}, [ix](Tape& t, int self) {
        t.grad_ref(ix).array() += t.grad(self).array() * t.value(self).array();
    });
}

Node log(Node x) {
    if ((x.value().array() <= 0.0).any()) {
        throw DomainError("log: input has a non-positive entry");
    }
    Tape& t = *x.tape;
    const int ix = x.id;
    return t.make("log", x.value().array().log(), {ix, -1}, [ix](Tape& t, int self) {
        t.grad_ref(ix).array() += t.grad(self).array() / t.value(ix).array();
    });
}

Node sqrt(Node x) {
    if ((x.value().array() < 0.0).any()) {
        throw DomainError("sqrt: input has a negative entry");
    }
    Tape& t = *x.tape;
    const int ix = x.id;
    return t.make("sqrt", x.value().array().sqrt(), {ix, -1}, [ix](Tape& t, int self) {
        t.grad_ref(ix).array() += t.grad(self).array() / (2.0 * t.value(self).array());
    });
}

Node relu(Node x) {
    Tape& t = *x.tape;
    const int ix = x.id;
    return t.make("relu", x.value().cwiseMax(0.0), {ix, -1}, [ix](Tape& t, int self) {
        // subgradient 0 at 0
        const auto mask = (t.value(ix).array() > 0.0).cast<Real>();
        t.grad_ref(ix).array() += t.grad(self).array() * mask;
    });
}

Node sigmoid(Node x) {
    Tape& t = *x.tape;
    const int ix = x.id;
    Mat out = x.value().unaryExpr([](Real v) {
        if (v >= 0.0) {
            return 1.0 / (1.0 + std::exp(-v));
        }
        const Real e = std::exp(v);
        return e / (1.0 + e);
    });
    return t.make("sigmoid", std::move(out), {ix, -1}, [ix](Tape& t, int self) {
        const auto s = t.value(self).array();
        t.grad_ref(ix).array() += t.grad(self).array() * s * (1.0 - s);
    });
}

Node scale(Node x, Real k) {
    Tape& t = *x.tape;
    const int ix = x.id;
    return t.make("scale", x.value() * k, {ix, -1}, [ix, k](Tape& t, int self) {
        t.grad_ref(ix) += k * t.grad(self);
    });
}

Node add_const(Node x, Real k) {
    Tape& t = *x.tape;
    const int ix = x.id;
    return t.make("add_const", x.value().array() + k, {ix, -1}, [ix](Tape& t, int self) {
        t.grad_ref(ix) += t.grad(self);
    });
}

Node clamp(Node x, Real lo, Real hi) {
    if (!(lo <= hi)) {
        throw ParamError("clamp: lo > hi");
    }
    Tape& t = *x.tape;
    const int ix = x.id;
    return t.make("clamp", x.value().cwiseMax(lo).cwiseMin(hi), {ix, -1},
                  [ix, lo, hi](Tape& t, int self) {
                      const auto xv = t.value(ix).array();
                      const auto mask = ((xv > lo).cast<Real>() * (xv < hi).cast<Real>());
                      t.grad_ref(ix).array() += t.grad(self).array() * mask;
                  });
}

Node sum_all(Node x) {
    Tape& t = *x.tape;
    const int ix = x.id;
    Mat out(1, 1);
    out(0, 0) = x.value().sum();
    return t.make("sum_all", std::move(out), {ix, -1}, [ix](Tape& t, int self) {
        t.grad_ref(ix).array() += t.grad(self)(0, 0);
    });
}

Node trace(Node x) {
    if (x.rows() != x.cols()) {
        throw ShapeError("trace: input is " + shape_str(x.value()) + ", expected square");
    }
    Tape& t = *x.tape;
    const int ix = x.id;
    Mat out(1, 1);
    out(0, 0) = x.value().trace();
    return t.make("trace", std::move(out), {ix, -1}, [ix](Tape& t, int self) {
        t.grad_ref(ix).diagonal().array() += t.grad(self)(0, 0);
    });
}

Node row_sum(Node x) {
    Tape& t = *x.tape;
    const int ix = x.id;
    Mat out = x.value().rowwise().sum();
    return t.make("row_sum", std::move(out), {ix, -1}, [ix](Tape& t, int self) {
        t.grad_ref(ix).array().colwise() += t.grad(self).col(0).array();
    });
}

Node mean(Node x) {
    Tape& t = *x.tape;
    const int ix = x.id;
    const Real n = static_cast<Real>(x.rows() * x.cols());
    Mat out(1, 1);
    out(0, 0) = x.value().sum() / n;
    return t.make("mean", std::move(out), {ix, -1}, [ix, n](Tape& t, int self) {
        t.grad_ref(ix).array() += t.grad(self)(0, 0) / n;
    });
}

Node softmax_rows(Node z, Real temperature) {
    if (!(temperature > 0.0)) {
        throw ParamError("softmax_rows: temperature must be positive");
    }
    Tape& t = *z.tape;
    const int iz = z.id;
    return t.make("softmax_rows", row_softmax(z.value(), temperature), {iz, -1},
                  [iz, temperature](Tape& t, int self) {
                      const auto p = t.value(self).array();
                      const auto g = t.grad(self).array();
                      const Arr dot = (g * p).rowwise().sum();
                      t.grad_ref(iz).array() += p * (g.colwise() - dot) / temperature;
                  });
}

Node log_softmax_rows(Node z, Real temperature) {
    if (!(temperature > 0.0)) {
        throw ParamError("log_softmax_rows: temperature must be positive");
    }
    Tape& t = *z.tape;
    const int iz = z.id;
    const Mat& zv = z.value();
    const Arr rowmax = zv.rowwise().maxCoeff().array();
    Mat shifted(zv.rows(), zv.cols());
    shifted.array() = (zv.array().colwise() - rowmax) / temperature;
    const Arr lse = shifted.array().exp().rowwise().sum().log();
    Mat out(zv.rows(), zv.cols());
    out.array() = shifted.array().colwise() - lse;
    return t.make("log_softmax_rows", std::move(out), {iz, -1},
                  [iz, temperature](Tape& t, int self) {
                      const auto p = t.value(self).array().exp();
                      const auto g = t.grad(self).array();
                      const Arr gsum = g.rowwise().sum();
                      t.grad_ref(iz).array() += (g - p.colwise() * gsum) / temperature;
                  });
}

Node grad_reverse(Node x, Real scale) {
    Tape& t = *x.tape;
    const int ix = x.id;
    return t.make("grad_reverse", x.value(), {ix, -1}, [ix, scale](Tape& t, int self) {
        t.grad_ref(ix) -= scale * t.grad(self);
    });
}

Node add_rowvec(Node x, Node b) {
    require_same_tape(x, b, "add_rowvec");
    if (b.rows() != 1 || b.cols() != x.cols()) {
        throw ShapeError("add_rowvec: " + shape_str(x.value()) + " vs " + shape_str(b.value()) +
                         ", expected 1x" + std::to_string(x.cols()));
    }
    Tape& t = *x.tape;
    const int ix = x.id, ib = b.id;
    Mat out = x.value();
    out.rowwise() += b.value().row(0);
    return t.make("add_rowvec", std::move(out), {ix, ib}, [ix, ib](Tape& t, int self) {
        const Mat& g = t.grad(self);
        t.grad_ref(ix) += g;
        t.grad_ref(ib) += g.colwise().sum();
    });
}

Node mul_colvec(Node x, Node w) {
    require_same_tape(x, w, "mul_colvec");
    if (w.cols() != 1 || w.rows() != x.rows()) {
        throw ShapeError("mul_colvec: " + shape_str(x.value()) + " vs " + shape_str(w.value()) +
                         ", expected " + std::to_string(x.rows()) + "x1");
    }
    Tape& t = *x.tape;
    const int ix = x.id, iw = w.id;
    Mat out(x.rows(), x.cols());
    out.array() = x.value().array().colwise() * w.value().col(0).array();
    return t.make("mul_colvec", std::move(out), {ix, iw}, [ix, iw](Tape& t, int self) {
        const auto g = t.grad(self).array();
        t.grad_ref(ix).array() += g.colwise() * t.value(iw).col(0).array();
        t.grad_ref(iw).col(0).array() += (g * t.value(ix).array()).rowwise().sum();
    });
}

Node div_colvec(Node x, Node s) {
    require_same_tape(x, s, "div_colvec");
    if (s.cols() != 1 || s.rows() != x.rows()) {
        throw ShapeError("div_colvec: " + shape_str(x.value()) + " vs " + shape_str(s.value()) +
                         ", expected " + std::to_string(x.rows()) + "x1");
    }
    Tape& t = *x.tape;
    const int ix = x.id, is = s.id;
    Mat out(x.rows(), x.cols());
    out.array() = x.value().array().colwise() / s.value().col(0).array();
    return t.make("div_colvec", std::move(out), {ix, is}, [ix, is](Tape& t, int self) {
        const auto g = t.grad(self).array();
        const auto sv = t.value(is).col(0).array();
        t.grad_ref(ix).array() += g.colwise() / sv;
        t.grad_ref(is).col(0).array() -=
            (g * t.value(ix).array()).rowwise().sum() / sv.square();
    });
}

Node concat_rows(Node a, Node b) {
    require_same_tape(a, b, "concat_rows");
    if (a.cols() != b.cols()) {
        throw ShapeError("concat_rows: column counts disagree: " + shape_str(a.value()) +
                         " vs " + shape_str(b.value()));
    }
    Tape& t = *a.tape;
    const int ia = a.id, ib = b.id;
    const Index ra = a.rows(), rb = b.rows();
    Mat out(ra + rb, a.cols());
    out.topRows(ra) = a.value();
    out.bottomRows(rb) = b.value();
    return t.make("concat_rows", std::move(out), {ia, ib}, [ia, ib, ra, rb](Tape& t, int self) {
        const Mat& g = t.grad(self);
        t.grad_ref(ia) += g.topRows(ra);
        t.grad_ref(ib) += g.bottomRows(rb);
    });
}

}  // namespace chatty
