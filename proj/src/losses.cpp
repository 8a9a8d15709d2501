#include "chatty/losses.hpp"

#include <string>

#include "chatty/errors.hpp"

namespace chatty {

namespace {

constexpr Real kProbClamp = 1e-7;   // distance kept from 0 and 1 inside logs
constexpr Real kNormFloor = 1e-32;  // under the sqrt so zero rows stay differentiable
constexpr Real kNormEps = 1e-8;     // added to each row norm
constexpr Real kRowSumEps = 1e-12;  // guards all-zero confusion rows

void require_probability(const Mat& v, const char* which) {
    if ((v.array() < 0.0).any() || (v.array() > 1.0).any()) {
        throw DomainError(std::string("adversarial_loss: ") + which +
                          " has an entry outside [0, 1]");
    }
}

// -mean(log clamp(p)) for a column of probabilities.
Node neg_mean_log(Node p) {
    return neg(mean(log(clamp(p, kProbClamp, 1.0 - kProbClamp))));
}

// Row norms of t with the cosine-variant epsilon: sqrt(|t_i|^2 + 1e-32) + 1e-8.
Node guarded_row_norms(Node t) {
    return add_const(sqrt(add_const(row_sum(mul(t, t)), kNormFloor)), kNormEps);
}

Node offdiag_abs(Node y) {
    return abs(sub(sum_all(y), trace(y)));
}

}  // namespace

void LossWeights::validate(Index num_classes) const {
    if (lambda1 < 0.0 || lambda2 < 0.0) {
        throw ParamError("LossWeights: lambda1 and lambda2 must be non-negative");
    }
    if (!(temperature > 0.0)) {
        throw ParamError("LossWeights: temperature must be positive");
    }
    if (class_info.size() != 0 &&
        (class_info.rows() != num_classes || class_info.cols() != num_classes)) {
        throw ShapeError("LossWeights: class_info is " + shape_str(class_info) +
                         ", expected " + shape_str(num_classes, num_classes));
    }
    if (confusion_embed.size() != 0 &&
        (confusion_embed.rows() != num_classes || confusion_embed.cols() != num_classes)) {
        throw ShapeError("LossWeights: confusion_embed is " + shape_str(confusion_embed) +
                         ", expected " + shape_str(num_classes, num_classes));
    }
}

Node cross_entropy(Node logits, const std::vector<int>& labels) {
    const Index batch = logits.rows();
    const Index classes = logits.cols();
    if (static_cast<Index>(labels.size()) != batch) {
        throw ShapeError("cross_entropy: " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(batch) + " logit rows");
    }
    Mat onehot = Mat::Zero(batch, classes);
    for (Index i = 0; i < batch; ++i) {
        const int y = labels[static_cast<std::size_t>(i)];
        if (y < 0 || y >= classes) {
            throw IndexError("cross_entropy: label " + std::to_string(y) + " at row " +
                             std::to_string(i) + " outside [0, " + std::to_string(classes) + ")");
        }
        onehot(i, y) = 1.0;
    }
    Tape& t = *logits.tape;
    Node picked = sum_all(mul(t.constant(std::move(onehot)), log_softmax_rows(logits, 1.0)));
    return scale(picked, -1.0 / static_cast<Real>(batch));
}

Node adversarial_loss(Node disc_src, Node disc_tgt) {
    if (disc_src.cols() != 1 || disc_tgt.cols() != 1) {
        throw ShapeError("adversarial_loss: expected column vectors, got " +
                         shape_str(disc_src.value()) + " and " + shape_str(disc_tgt.value()));
    }
    require_probability(disc_src.value(), "disc_src");
    require_probability(disc_tgt.value(), "disc_tgt");
    Node one_minus_tgt = add_const(scale(disc_tgt, -1.0), 1.0);
    return add(neg_mean_log(disc_src), neg_mean_log(one_minus_tgt));
}

Node transport_yield(Node t1, Node t2) {
    if (t1.cols() != t2.cols()) {
        throw ShapeError("transport_yield: column counts disagree: " + shape_str(t1.value()) +
                         " vs " + shape_str(t2.value()));
    }
    return matmul(t1, transpose(t2));
}

Node transport_yield(Node t1, Node t2, const Mat& class_info) {
    if (t1.cols() != t2.cols()) {
        throw ShapeError("transport_yield: column counts disagree: " + shape_str(t1.value()) +
                         " vs " + shape_str(t2.value()));
    }
    if (class_info.rows() != t1.cols() || class_info.cols() != t1.cols()) {
        throw ShapeError("transport_yield: class_info is " + shape_str(class_info) +
                         ", expected " + shape_str(t1.cols(), t1.cols()));
    }
    Tape& t = *t1.tape;
    return matmul(matmul(t1, t.constant(class_info)), transpose(t2));
}

Node transport_loss(Node yield) {
    if (yield.rows() != yield.cols()) {
        throw ShapeError("transport_loss: yield is " + shape_str(yield.value()) +
                         ", expected square");
    }
    return offdiag_abs(yield);
}

Node transport_loss_cos(Node t1, Node t2) {
    if (t1.cols() != t2.cols() || t1.rows() != t2.rows()) {
        throw ShapeError("transport_loss_cos: shapes disagree: " + shape_str(t1.value()) +
                         " vs " + shape_str(t2.value()));
    }
    Node raw = matmul(t1, transpose(t2));
    Node by_rows = div_colvec(raw, guarded_row_norms(t1));
    Node by_cols = transpose(div_colvec(transpose(by_rows), guarded_row_norms(t2)));
    return offdiag_abs(by_cols);
}

Node transport_loss_embedded(Node t1, Node t2, const Mat& embed) {
    return offdiag_abs(transport_yield(t1, t2, embed));
}

Node mcc_loss(Node target_logits, Real temperature) {
    if (!(temperature > 0.0)) {
        throw ParamError("mcc_loss: temperature must be positive");
    }
    const Index batch = target_logits.rows();
    const Index classes = target_logits.cols();

    Node p = softmax_rows(target_logits, temperature);
    Node logp = log_softmax_rows(target_logits, temperature);
    // Per-sample entropy via p .* log p, which stays finite where p -> 0.
    Node entropy = neg(row_sum(mul(p, logp)));  // B x 1

    // Certainty weights: softmax over samples of -H, scaled by B so equal
    // entropies give unit weights.
    Node weights_row = softmax_rows(transpose(neg(entropy)), 1.0);  // 1 x B
    Node weights = scale(transpose(weights_row), static_cast<Real>(batch));  // B x 1

    Node confusion = matmul(transpose(mul_colvec(p, weights)), p);  // c x c
    Node row_mass = add_const(row_sum(confusion), kRowSumEps);
    Node normalized = div_colvec(confusion, row_mass);

    return scale(sub(sum_all(normalized), trace(normalized)),
                 1.0 / static_cast<Real>(classes));
}

Node total_loss(Node l_c, Node l_adv, Node l_tl, std::optional<Node> l_mcc,
                const LossWeights& weights, LossBreakdown* out) {
    if (weights.lambda1 < 0.0 || weights.lambda2 < 0.0) {
        throw ParamError("total_loss: lambda1 and lambda2 must be non-negative");
    }
    Node total = add(l_c, add(scale(l_adv, weights.lambda1), scale(l_tl, weights.lambda2)));
    if (l_mcc.has_value()) {
        total = add(total, *l_mcc);
    }
    if (out != nullptr) {
        out->l_c = l_c.scalar();
        out->l_adv = l_adv.scalar();
        out->l_tl = l_tl.scalar();
        out->l_mcc = l_mcc.has_value() ? l_mcc->scalar() : 0.0;
        out->l_total = total.scalar();
    }
    return total;
}

}  // namespace chatty
