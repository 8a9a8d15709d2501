#include "chatty/model.hpp"

#include <cmath>
#include <string>

#include "chatty/errors.hpp"
#include "chatty/rng.hpp"

namespace chatty {

namespace {

Mat glorot_uniform(Index fan_in, Index fan_out, Rng& rng, Real extra_scale) {
    const Real bound = std::sqrt(6.0 / static_cast<Real>(fan_in + fan_out));
    Mat w(fan_in, fan_out);
    for (Index i = 0; i < fan_in; ++i) {
        for (Index j = 0; j < fan_out; ++j) {
            w(i, j) = extra_scale * rng.uniform(-bound, bound);
        }
    }
    return w;
}

Affine init_affine(Index fan_in, Index fan_out, Rng& rng, Real extra_scale = 1.0) {
    return Affine{glorot_uniform(fan_in, fan_out, rng, extra_scale), Mat::Zero(1, fan_out)};
}

void push_affine(std::vector<Mat*>& out, Affine& a) {
    out.push_back(&a.w);
    out.push_back(&a.b);
}

Node apply_affine(Tape& tape, Affine& a, Node x) {
    return add_rowvec(matmul(x, tape.leaf(a.w)), tape.leaf(a.b));
}

}  // namespace

void ModelSpec::validate() const {
    if (input_dim < 1) {
        throw ParamError("ModelSpec: input_dim must be positive");
    }
    if (num_classes < 2) {
        throw ParamError("ModelSpec: num_classes must be at least 2");
    }
    if (g_widths.empty()) {
        throw ParamError("ModelSpec: g_widths must name at least the feature dim");
    }
    for (Index w : g_widths) {
        if (w < 1) throw ParamError("ModelSpec: g_widths entries must be positive");
    }
    for (Index w : d_widths) {
        if (w < 1) throw ParamError("ModelSpec: d_widths entries must be positive");
    }
    if (dual_transport) {
        if (!(lambda > 0.0 && lambda < 1.0)) {
            throw ParamError("ModelSpec: lambda must be in (0, 1) in dual-transport mode");
        }
    }
}

std::vector<Mat*> ChattyModel::parameters() {
    std::vector<Mat*> out;
    for (Affine& a : g) push_affine(out, a);
    push_affine(out, c_head);
    push_affine(out, t1_head);
    if (spec.dual_transport) push_affine(out, t2_head);
    for (Affine& a : d) push_affine(out, a);
    return out;
}

std::vector<const Mat*> ChattyModel::parameters() const {
    std::vector<const Mat*> out;
    for (Mat* m : const_cast<ChattyModel*>(this)->parameters()) out.push_back(m);
    return out;
}

std::vector<Mat*> ChattyModel::generator_parameters() {
    std::vector<Mat*> out;
    for (Affine& a : g) push_affine(out, a);
    push_affine(out, c_head);
    push_affine(out, t1_head);
    if (spec.dual_transport) push_affine(out, t2_head);
    return out;
}

std::vector<Mat*> ChattyModel::discriminator_parameters() {
    std::vector<Mat*> out;
    for (Affine& a : d) push_affine(out, a);
    return out;
}

ChattyModel init_model(const ModelSpec& spec, std::uint64_t seed) {
    spec.validate();
    ChattyModel model;
    model.spec = spec;
    if (!spec.dual_transport) {
        model.spec.lambda = 1.0;
    }
    Rng rng(seed);

    Index in = spec.input_dim;
    for (Index width : spec.g_widths) {
        model.g.push_back(init_affine(in, width, rng));
        in = width;
    }
    const Index f = spec.feature_dim();
    const Index c = spec.num_classes;
    model.c_head = init_affine(f, c, rng);
    model.t1_head = init_affine(f, c, rng, 0.1);
    if (spec.dual_transport) {
        model.t2_head = init_affine(f, c, rng, 0.1);
    }
    in = c;
    for (Index width : spec.d_widths) {
        model.d.push_back(init_affine(in, width, rng));
        in = width;
    }
    model.d.push_back(init_affine(in, 1, rng));
    return model;
}

ForwardBundle forward(Tape& tape, ChattyModel& model, const Mat& x, Real grl_scale) {
    const ModelSpec& spec = model.spec;
    if (x.cols() != spec.input_dim) {
        throw ShapeError("forward: input is " + shape_str(x) + ", expected " +
                         std::to_string(spec.input_dim) + " columns");
    }

    Node h = tape.constant(x);
    for (Affine& layer : model.g) {
        h = relu(apply_affine(tape, layer, h));
    }
    Node features = h;

    Node logits_c = apply_affine(tape, model.c_head, features);
    Node t1 = apply_affine(tape, model.t1_head, features);
    Node o1 = add(logits_c, t1);

    std::optional<Node> t2;
    std::optional<Node> o2;
    Node interp = o1;
    if (spec.dual_transport) {
        t2 = apply_affine(tape, model.t2_head, features);
        o2 = add(logits_c, *t2);
        interp = add(scale(o1, spec.lambda), scale(*o2, 1.0 - spec.lambda));
    }

    Node disc_raw = interp;
    if (!spec.disc_on_logits) {
        if (spec.dual_transport) {
            disc_raw = add(scale(softmax_rows(o1, 1.0), spec.lambda),
                           scale(softmax_rows(*o2, 1.0), 1.0 - spec.lambda));
        } else {
            disc_raw = softmax_rows(o1, 1.0);
        }
    }
    Node disc_in = grad_reverse(disc_raw, grl_scale);

    Node dh = disc_in;
    const std::size_t d_layers = model.d.size();
    for (std::size_t i = 0; i + 1 < d_layers; ++i) {
        dh = relu(apply_affine(tape, model.d[i], dh));
    }
    Node disc_out = sigmoid(apply_affine(tape, model.d.back(), dh));

    ForwardBundle bundle{features, logits_c, t1,     t2,      o1,
                         o2,       interp,   disc_in, disc_out};
    return bundle;
}

std::vector<int> predict(ChattyModel& model, const Mat& x) {
    Tape tape;
    ForwardBundle bundle = forward(tape, model, x, 0.0);
    const Mat& logits = bundle.interp_logits.value();
    std::vector<int> out(static_cast<std::size_t>(logits.rows()));
    for (Index i = 0; i < logits.rows(); ++i) {
        int best = 0;
        for (Index j = 1; j < logits.cols(); ++j) {
            if (logits(i, j) > logits(i, best)) best = static_cast<int>(j);
        }
        out[static_cast<std::size_t>(i)] = best;
    }
    return out;
}

}  // namespace chatty
