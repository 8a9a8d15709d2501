#pragma once

#include "chatty/matrix.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <unordered_map>
#include <vector>

namespace chatty {

class Tape;

/// Lightweight handle to a node on a Tape. Cheap to copy; the tape owns
/// the value and gradient storage.
struct Node {
    Tape* tape = nullptr;
    int id = -1;

    const Mat& value() const;
    const Mat& grad() const;
    Index rows() const;
    Index cols() const;
    Real scalar() const;  ///< value(0,0); shape error unless 1x1
};

/// Reverse-mode autodiff over dense matrices. The graph is rebuilt per
/// minibatch: nodes are appended in creation order, which is therefore a
/// valid topological order, and backward() walks it in reverse.
///
/// Gradient conventions:
///   relu'(0) = 0, d|x|/dx at 0 = 0, clamp passes gradient only strictly
///   inside [lo, hi]. grad_reverse is identity forward and multiplies the
///   incoming gradient by -scale.
class Tape {
  public:
    explicit Tape(std::uint64_t seed = 0) : seed_(seed) {}

    /// Differentiable input. Memoized by address: binding the same matrix
    /// twice on one tape returns the same node, so gradients from several
    /// forward passes accumulate in one place.
    Node leaf(const Mat& param);

    /// Non-differentiable input (data, masks, fixed matrices).
    Node constant(Mat value);
    Node constant_scalar(Real v);

    /// Seeds d(loss)/d(loss) = 1 and accumulates exact reverse-mode
    /// gradients into every node. loss must be 1x1. Calling twice without
    /// reset_grads() is a StateError.
    void backward(Node loss);

    /// Zeroes every gradient and re-arms backward().
    void reset_grads();

    const Mat& value(int id) const { return slots_[static_cast<std::size_t>(id)].value; }
    const Mat& grad(int id) const { return slots_[static_cast<std::size_t>(id)].grad; }

    /// Gradient of a leaf previously bound with leaf(); null if not bound.
    const Mat* grad_of(const Mat& param) const;

    std::size_t size() const { return slots_.size(); }
    std::uint64_t seed() const { return seed_; }

    // Introspection for tests: parents of a node (creation-order ids, -1 = none)
    // and the name of the backward rule that produced it.
    std::array<int, 2> parents(int id) const { return slots_[static_cast<std::size_t>(id)].parents; }
    const char* op_name(int id) const { return slots_[static_cast<std::size_t>(id)].op; }

    // Used by the op free functions.
    using BackwardFn = std::function<void(Tape&, int self)>;
    Node make(const char* op, Mat value, std::array<int, 2> parents, BackwardFn backward);
    Mat& grad_ref(int id) { return slots_[static_cast<std::size_t>(id)].grad; }

  private:
    struct Slot {
        Mat value;
        Mat grad;
        std::array<int, 2> parents{-1, -1};
        const char* op = "";
        BackwardFn backward;  // empty for leaves and constants
    };

    std::vector<Slot> slots_;
    std::unordered_map<const Mat*, int> leaf_ids_;
    std::uint64_t seed_ = 0;
    bool backward_done_ = false;
};

// ---------------------------------------------------------------------------
// Ops. Free functions building one node each; shapes are validated eagerly
// and violations throw ShapeError/DomainError/ParamError naming the shapes.
// ---------------------------------------------------------------------------

Node matmul(Node a, Node b);
Node transpose(Node x);

// Elementwise; binary ops require equal shapes.
Node add(Node a, Node b);
Node sub(Node a, Node b);
Node mul(Node a, Node b);
Node divide(Node a, Node b);
Node neg(Node x);
Node abs(Node x);
Node exp(Node x);
Node log(Node x);   ///< requires strictly positive entries
Node sqrt(Node x);  ///< requires non-negative entries
Node relu(Node x);
Node sigmoid(Node x);

Node scale(Node x, Real k);      ///< k * x
Node add_const(Node x, Real k);  ///< x + k
Node clamp(Node x, Real lo, Real hi);

// Reductions.
Node sum_all(Node x);  ///< 1x1 sum of all entries
Node trace(Node x);    ///< 1x1; requires square input
Node row_sum(Node x);  ///< Bxn -> Bx1
Node mean(Node x);     ///< 1x1 mean of all entries

/// Row-wise softmax with temperature, computed with row-max subtraction.
Node softmax_rows(Node z, Real temperature);
/// Row-wise log-softmax with temperature; numerically safe companion of
/// softmax_rows for entropy and cross-entropy terms.
Node log_softmax_rows(Node z, Real temperature);

/// Identity forward; backward multiplies the incoming gradient by -scale.
Node grad_reverse(Node x, Real scale);

// Broadcasting helpers.
Node add_rowvec(Node x, Node b);  ///< x[Bxn] + b[1xn] broadcast over rows
Node mul_colvec(Node x, Node w);  ///< row i of x scaled by w(i,0); w is Bx1
Node div_colvec(Node x, Node s);  ///< row i of x divided by s(i,0); s is Bx1

Node concat_rows(Node a, Node b);  ///< [a; b], equal column counts

}  // namespace chatty
