#pragma once

#include <optional>
#include <vector>

#include "chatty/matrix.hpp"
#include "chatty/tape.hpp"

namespace chatty {

// Weights and knobs shared by the loss terms.
//
// class_info is the c-by-c matrix sandwiched inside the transport yield
// (empty means identity). confusion_embed is an optional c-by-c embedding for
// the embedded transport-loss variant (empty means unused).
struct LossWeights {
    Real lambda1 = 1.0;      // adversarial weight, >= 0
    Real lambda2 = 0.0;      // transport weight, >= 0
    Real temperature = 2.5;  // confusion-loss softmax temperature, > 0
    Mat class_info;          // empty => identity
    Mat confusion_embed;     // empty => none

    // Throws ParamError / ShapeError if a field is out of contract for a
    // network with `num_classes` classes.
    void validate(Index num_classes) const;
};

// Scalar values of every term after a forward pass. l_total always equals
// l_c + lambda1*l_adv + lambda2*l_tl + l_mcc (l_mcc is 0 when disabled).
struct LossBreakdown {
    Real l_c = 0.0;
    Real l_adv = 0.0;
    Real l_tl = 0.0;
    Real l_mcc = 0.0;
    Real l_total = 0.0;
};

// Mean cross-entropy of `logits` (B x c) against integer labels (size B),
// softmax at temperature 1. Out-of-range label -> IndexError.
Node cross_entropy(Node logits, const std::vector<int>& labels);

// Domain-discrimination loss: -mean(log d_src) - mean(log(1 - d_tgt)), each
// mean over its own column (Bs x 1 and Bt x 1 probabilities). Entries outside
// [0, 1] -> DomainError; entries inside are clamped to [1e-7, 1 - 1e-7]
// before the log so saturated discriminator outputs stay finite.
Node adversarial_loss(Node disc_src, Node disc_tgt);

// Bilinear yield Y = t1 * class_info * t2^T (B x B). The two-argument form
// uses the identity, giving the plain matrix of row dot products.
Node transport_yield(Node t1, Node t2);
Node transport_yield(Node t1, Node t2, const Mat& class_info);

// |sum(Y) - trace(Y)|: absolute off-diagonal mass of a square yield matrix.
Node transport_loss(Node yield);

// Cosine-normalized variant: Y_ij = <t1_i, t2_j> / ((|t1_i| + 1e-8) * (|t2_j| + 1e-8)),
// then the same |sum - trace|. The epsilon keeps zero rows harmless.
Node transport_loss_cos(Node t1, Node t2);

// Embedded variant: |sum - trace| of t1 * M * t2^T for a fixed c x c M.
Node transport_loss_embedded(Node t1, Node t2, const Mat& embed);

// Minimum-class-confusion loss over target logits (B x c):
// probabilities at `temperature`, certainty weights from per-sample entropies
// (softmax over -H, scaled by B), confusion matrix p^T W p row-normalized,
// loss = mean off-diagonal row mass = (1/c) * sum of off-diagonal entries.
// Always in [0, 1]; exactly 0 when every row of p is one-hot.
Node mcc_loss(Node target_logits, Real temperature);

// l_c + lambda1*l_adv + lambda2*l_tl (+ l_mcc when present). All nodes must
// live on one tape. If `out` is non-null the scalar breakdown is recorded.
Node total_loss(Node l_c, Node l_adv, Node l_tl, std::optional<Node> l_mcc,
                const LossWeights& weights, LossBreakdown* out = nullptr);

}  // namespace chatty
