#include "chatty/verify.hpp"

#include <cmath>
#include <functional>
#include <sstream>

#include "chatty/config.hpp"
#include "chatty/data.hpp"
#include "chatty/errors.hpp"
#include "chatty/losses.hpp"
#include "chatty/model.hpp"
#include "chatty/rng.hpp"
#include "chatty/tape.hpp"
#include "chatty/train.hpp"

namespace chatty {

namespace {

constexpr Real kFdStep = 1e-5;
constexpr Real kRelTol = 1e-4;
constexpr Real kAbsFloor = 1e-7;

Mat random_mat(Rng& rng, Index rows, Index cols, Real lo = -1.0, Real hi = 1.0) {
    Mat m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        for (Index j = 0; j < cols; ++j) {
            m(i, j) = rng.uniform(lo, hi);
        }
    }
    return m;
}

bool close(Real analytic, Real fd) {
    return std::abs(analytic - fd) <= kRelTol * std::max(std::abs(analytic), std::abs(fd)) +
                                          kAbsFloor;
}

// Central difference evaluated at two step sizes. When the two estimates
// disagree, a kink (relu corner, clamp edge) sits inside the step window and
// the finite difference is not a valid derivative reference at this entry.
struct FdEstimate {
    Real value = 0.0;
    bool smooth = false;
};

template <class Eval>
FdEstimate fd_two_scale(Real* entry, const Eval& eval) {
    const Real orig = *entry;
    auto central = [&](Real h) {
        *entry = orig + h;
        const Real fp = eval();
        *entry = orig - h;
        const Real fm = eval();
        *entry = orig;
        return (fp - fm) / (2.0 * h);
    };
    const Real wide = central(kFdStep);
    const Real tight = central(kFdStep / 4.0);
    const bool smooth =
        std::abs(wide - tight) <= 1e-3 * std::max(std::abs(wide), std::abs(tight)) + 1e-8;
    return {tight, smooth};
}

// Freshly initialized biases are exactly zero, which can park a relu
// pre-activation exactly on its corner (any sample that silences a whole
// layer). A two-sided difference there measures the mean of the two one-sided
// slopes no matter how small the step, so the finite-difference checks nudge
// every bias off zero first.
void jitter_biases(ChattyModel& model, Rng& rng) {
    auto jitter = [&](Mat& b) {
        for (Index j = 0; j < b.cols(); ++j) {
            const Real sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
            b(0, j) += sign * rng.uniform(0.05, 0.15);
        }
    };
    for (Affine& layer : model.g) jitter(layer.b);
    jitter(model.c_head.b);
    jitter(model.t1_head.b);
    jitter(model.t2_head.b);
    for (Affine& layer : model.d) jitter(layer.b);
}

// Builds a scalar loss over leaves bound from `inputs` (same tape passed in).
using GraphFn = std::function<Node(Tape&, std::vector<Mat>&)>;

// Central-difference check of every entry of every input against the
// reverse-mode gradients. The graph is rebuilt per evaluation.
bool check_gradients(const GraphFn& graph, std::vector<Mat> inputs, std::string* detail) {
    std::vector<Mat> analytic;
    {
        Tape tape;
        Node loss = graph(tape, inputs);
        tape.backward(loss);
        for (const Mat& m : inputs) {
            const Mat* g = tape.grad_of(m);
            if (g == nullptr) {
                if (detail) *detail = "an input was never bound as a leaf";
                return false;
            }
            analytic.push_back(*g);
        }
    }
    auto eval = [&]() {
        Tape tape;
        return graph(tape, inputs).scalar();
    };
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        Mat& m = inputs[k];
        for (Index i = 0; i < m.rows(); ++i) {
            for (Index j = 0; j < m.cols(); ++j) {
                const FdEstimate fd = fd_two_scale(&m(i, j), eval);
                if (!fd.smooth) continue;  // kink inside the step window
                const Real an = analytic[k](i, j);
                if (!close(an, fd.value)) {
                    if (detail) {
                        std::ostringstream os;
                        os << "input " << k << " entry (" << i << ',' << j << "): reverse-mode "
                           << an << " vs finite-difference " << fd.value;
                        *detail = os.str();
                    }
                    return false;
                }
            }
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// Individual checks
// ---------------------------------------------------------------------------

VerifyResult check_op_gradients(std::uint64_t seed) {
    VerifyResult result{"op-gradients-vs-finite-differences", true, ""};
    Rng rng(seed);

    // Weighting constant makes reductions sensitive to every entry.
    auto weighted = [](Tape& t, Node x, const Mat& w) {
        return sum_all(mul(x, t.constant(w)));
    };

    struct Case {
        const char* name;
        GraphFn graph;
        std::vector<Mat> inputs;
    };
    std::vector<Case> cases;

    const Mat w34 = random_mat(rng, 3, 4);
    const Mat w33 = random_mat(rng, 3, 3);
    const Mat w31 = random_mat(rng, 3, 1);
    const Mat w64 = random_mat(rng, 6, 4);
    const Mat w43 = random_mat(rng, 4, 3);

    cases.push_back({"matmul",
                     [=](Tape& t, std::vector<Mat>& in) {
                         return weighted(t, matmul(t.leaf(in[0]), t.leaf(in[1])), w34);
                     },
                     {random_mat(rng, 3, 5), random_mat(rng, 5, 4)}});
    cases.push_back({"transpose",
                     [=](Tape& t, std::vector<Mat>& in) {
                         return weighted(t, transpose(t.leaf(in[0])), w43);
                     },
                     {random_mat(rng, 3, 4)}});
    cases.push_back({"add/sub/mul",
                     [=](Tape& t, std::vector<Mat>& in) {
                         Node a = t.leaf(in[0]);
                         Node b = t.leaf(in[1]);
                         return weighted(t, mul(add(a, b), sub(a, b)), w34);
                     },
                     {random_mat(rng, 3, 4), random_mat(rng, 3, 4)}});
    cases.push_back({"divide",
                     [=](Tape& t, std::vector<Mat>& in) {
                         return weighted(t, divide(t.leaf(in[0]), t.leaf(in[1])), w34);
                     },
                     {random_mat(rng, 3, 4), random_mat(rng, 3, 4, 0.5, 2.0)}});
    cases.push_back({"neg/abs",
                     [=](Tape& t, std::vector<Mat>& in) {
                         return weighted(t, abs(neg(t.leaf(in[0]))), w34);
                     },
                     {random_mat(rng, 3, 4, 0.2, 1.0)}});
    cases.push_back({"exp/log",
                     [=](Tape& t, std::vector<Mat>& in) {
                         return weighted(t, log(exp(t.leaf(in[0]))), w34);
                     },
                     {random_mat(rng, 3, 4)}});
    cases.push_back({"sqrt",
                     [=](Tape& t, std::vector<Mat>& in) {
                         return weighted(t, sqrt(t.leaf(in[0])), w34);
                     },
                     {random_mat(rng, 3, 4, 0.3, 2.0)}});
    cases.push_back({"relu",
                     [=](Tape& t, std::vector<Mat>& in) {
                         return weighted(t, relu(t.leaf(in[0])), w34);
                     },
                     {random_mat(rng, 3, 4, 0.2, 1.0)}});
    cases.push_back({"sigmoid",
                     [=](Tape& t, std::vector<Mat>& in) {
                         return weighted(t, sigmoid(t.leaf(in[0])), w34);
                     },
                     {random_mat(rng, 3, 4)}});
    cases.push_back({"scale/add_const",
                     [=](Tape& t, std::vector<Mat>& in) {
                         return weighted(t, add_const(scale(t.leaf(in[0]), 1.7), -0.3), w34);
                     },
                     {random_mat(rng, 3, 4)}});
    cases.push_back({"clamp (interior)",
                     [=](Tape& t, std::vector<Mat>& in) {
                         return weighted(t, clamp(t.leaf(in[0]), -5.0, 5.0), w34);
                     },
                     {random_mat(rng, 3, 4)}});
    cases.push_back({"sum_all/mean",
                     [](Tape& t, std::vector<Mat>& in) {
                         return add(sum_all(t.leaf(in[0])), mean(t.leaf(in[0])));
                     },
                     {random_mat(rng, 3, 4)}});
    cases.push_back({"trace",
                     [](Tape& t, std::vector<Mat>& in) {
                         return trace(matmul(t.leaf(in[0]), t.leaf(in[0])));
                     },
                     {random_mat(rng, 3, 3)}});
    cases.push_back({"row_sum",
                     [=](Tape& t, std::vector<Mat>& in) {
                         return weighted(t, row_sum(t.leaf(in[0])), w31);
                     },
                     {random_mat(rng, 3, 4)}});
    cases.push_back({"softmax_rows",
                     [=](Tape& t, std::vector<Mat>& in) {
                         return weighted(t, softmax_rows(t.leaf(in[0]), 2.5), w34);
                     },
                     {random_mat(rng, 3, 4, -2.0, 2.0)}});
    cases.push_back({"log_softmax_rows",
                     [=](Tape& t, std::vector<Mat>& in) {
                         return weighted(t, log_softmax_rows(t.leaf(in[0]), 0.7), w34);
                     },
                     {random_mat(rng, 3, 4, -2.0, 2.0)}});
    cases.push_back({"add_rowvec",
                     [=](Tape& t, std::vector<Mat>& in) {
                         return weighted(t, add_rowvec(t.leaf(in[0]), t.leaf(in[1])), w34);
                     },
                     {random_mat(rng, 3, 4), random_mat(rng, 1, 4)}});
    cases.push_back({"mul_colvec",
                     [=](Tape& t, std::vector<Mat>& in) {
                         return weighted(t, mul_colvec(t.leaf(in[0]), t.leaf(in[1])), w34);
                     },
                     {random_mat(rng, 3, 4), random_mat(rng, 3, 1)}});
    cases.push_back({"div_colvec",
                     [=](Tape& t, std::vector<Mat>& in) {
                         return weighted(t, div_colvec(t.leaf(in[0]), t.leaf(in[1])), w34);
                     },
                     {random_mat(rng, 3, 4), random_mat(rng, 3, 1, 0.5, 2.0)}});
    cases.push_back({"concat_rows",
                     [=](Tape& t, std::vector<Mat>& in) {
                         return weighted(t, concat_rows(t.leaf(in[0]), t.leaf(in[1])), w64);
                     },
                     {random_mat(rng, 2, 4), random_mat(rng, 4, 4)}});
    cases.push_back({"grad_reverse (pass-through at scale -1)",
                     [=](Tape& t, std::vector<Mat>& in) {
                         return weighted(t, grad_reverse(t.leaf(in[0]), -1.0), w34);
                     },
                     {random_mat(rng, 3, 4)}});

    for (Case& c : cases) {
        std::string detail;
        if (!check_gradients(c.graph, std::move(c.inputs), &detail)) {
            result.pass = false;
            result.detail = std::string(c.name) + ": " + detail;
            return result;
        }
    }
    return result;
}

VerifyResult check_full_model_gradients(std::uint64_t seed) {
    VerifyResult result{"full-model-gradient-check", true, ""};
    Rng rng(seed);

    TrainConfig cfg;
    cfg.lambda1 = 1.0;
    cfg.lambda2 = 0.7;
    cfg.mcc_enabled = true;
    cfg.g_widths = {5, 4};
    cfg.d_widths = {3};
    const Index batch = 4, classes = 3, dim = 3;

    for (int trial = 0; trial < 3; ++trial) {
        ChattyModel model = init_model(cfg.model_spec(dim, classes), seed + trial);
        jitter_biases(model, rng);
        const LossWeights weights = cfg.loss_weights(classes);
        const Mat src_x = random_mat(rng, batch, dim);
        const Mat tgt_x = random_mat(rng, batch, dim);
        std::vector<int> src_y;
        for (Index i = 0; i < batch; ++i) {
            src_y.push_back(static_cast<int>(rng.uniform_int(classes)));
        }

        // Plain differentiable composite: reversal off, identity scale.
        auto eval = [&]() {
            Tape tape;
            return compose_losses(tape, model, src_x, src_y, tgt_x, weights, cfg, -1.0)
                .total.scalar();
        };
        Tape tape;
        ComposedLosses losses =
            compose_losses(tape, model, src_x, src_y, tgt_x, weights, cfg, -1.0);
        tape.backward(losses.total);

        for (Mat* p : model.parameters()) {
            const Mat* g = tape.grad_of(*p);
            if (g == nullptr) {
                result.pass = false;
                result.detail = "a model parameter is not on the tape";
                return result;
            }
            for (Index i = 0; i < p->rows(); ++i) {
                for (Index j = 0; j < p->cols(); ++j) {
                    const FdEstimate fd = fd_two_scale(&(*p)(i, j), eval);
                    if (!fd.smooth) continue;  // kink inside the step window
                    if (!close((*g)(i, j), fd.value)) {
                        std::ostringstream os;
                        os << "trial " << trial << " entry (" << i << ',' << j
                           << "): reverse-mode " << (*g)(i, j) << " vs finite-difference "
                           << fd.value;
                        result.pass = false;
                        result.detail = os.str();
                        return result;
                    }
                }
            }
        }
    }
    return result;
}

VerifyResult check_transport_closed_form(std::uint64_t seed) {
    VerifyResult result{"transport-loss-closed-form-gradient", true, ""};
    Rng rng(seed);
    for (int trial = 0; trial < 10; ++trial) {
        const Index b = 2 + static_cast<Index>(rng.uniform_int(5));
        const Index c = 2 + static_cast<Index>(rng.uniform_int(4));
        const Mat t1 = random_mat(rng, b, c);
        const Mat t2 = random_mat(rng, b, c);

        Tape tape;
        Node yield = transport_yield(tape.leaf(t1), tape.leaf(t2));
        const Real spread = yield.value().sum() - yield.value().trace();
        if (std::abs(spread) < 1e-9) continue;  // measure-zero kink
        Node loss = transport_loss(yield);
        tape.backward(loss);

        const Real s = spread > 0.0 ? 1.0 : -1.0;
        const Mat j_minus_i = Mat::Ones(b, b) - Mat::Identity(b, b);
        const Mat want1 = s * j_minus_i * t2;
        const Mat want2 = s * j_minus_i.transpose() * t1;
        if ((*tape.grad_of(t1) - want1).cwiseAbs().maxCoeff() > 1e-8 ||
            (*tape.grad_of(t2) - want2).cwiseAbs().maxCoeff() > 1e-8) {
            result.pass = false;
            result.detail = "trial " + std::to_string(trial) +
                            ": reverse-mode gradient differs from s*(J-I)*T form";
            return result;
        }
    }
    return result;
}

// Step-by-step scalar reimplementation of the class-confusion loss.
Real mcc_scalar_reference(const Mat& z, Real temperature) {
    const Index b = z.rows(), c = z.cols();
    Mat p(b, c);
    std::vector<Real> entropy(static_cast<std::size_t>(b));
    for (Index i = 0; i < b; ++i) {
        Real zmax = z(i, 0);
        for (Index j = 1; j < c; ++j) zmax = std::max(zmax, z(i, j));
        Real sum = 0.0;
        for (Index j = 0; j < c; ++j) {
            p(i, j) = std::exp((z(i, j) - zmax) / temperature);
            sum += p(i, j);
        }
        Real h = 0.0;
        for (Index j = 0; j < c; ++j) {
            p(i, j) /= sum;
            if (p(i, j) > 0.0) h -= p(i, j) * std::log(p(i, j));
        }
        entropy[static_cast<std::size_t>(i)] = h;
    }
    Real wmax = -entropy[0];
    for (Index i = 1; i < b; ++i) wmax = std::max(wmax, -entropy[static_cast<std::size_t>(i)]);
    Real wsum = 0.0;
    std::vector<Real> w(static_cast<std::size_t>(b));
    for (Index i = 0; i < b; ++i) {
        w[static_cast<std::size_t>(i)] = std::exp(-entropy[static_cast<std::size_t>(i)] - wmax);
        wsum += w[static_cast<std::size_t>(i)];
    }
    for (Index i = 0; i < b; ++i) {
        w[static_cast<std::size_t>(i)] *= static_cast<Real>(b) / wsum;
    }
    Mat confusion = Mat::Zero(c, c);
    for (Index j = 0; j < c; ++j) {
        for (Index k = 0; k < c; ++k) {
            for (Index i = 0; i < b; ++i) {
                confusion(j, k) += w[static_cast<std::size_t>(i)] * p(i, j) * p(i, k);
            }
        }
    }
    Real loss = 0.0;
    for (Index j = 0; j < c; ++j) {
        Real row = 0.0;
        for (Index k = 0; k < c; ++k) row += confusion(j, k);
        if (row <= 0.0) continue;
        for (Index k = 0; k < c; ++k) {
            if (k != j) loss += confusion(j, k) / row;
        }
    }
    return loss / static_cast<Real>(c);
}

VerifyResult check_mcc_equivalence(std::uint64_t seed) {
    VerifyResult result{"mcc-scalar-loop-equivalence", true, ""};
    Rng rng(seed);
    for (int trial = 0; trial < 20; ++trial) {
        const Index b = 2 + static_cast<Index>(rng.uniform_int(7));
        const Index c = 2 + static_cast<Index>(rng.uniform_int(4));
        const Mat z = random_mat(rng, b, c, -3.0, 3.0);
        const Real temperature = rng.uniform(0.8, 3.0);
        Tape tape;
        const Real got = mcc_loss(tape.constant(z), temperature).scalar();
        const Real want = mcc_scalar_reference(z, temperature);
        if (std::abs(got - want) > 1e-9) {
            result.pass = false;
            result.detail = "trial " + std::to_string(trial) + ": graph " + std::to_string(got) +
                            " vs scalar loop " + std::to_string(want);
            return result;
        }
    }
    return result;
}

VerifyResult check_adversarial_fixed_point() {
    VerifyResult result{"adversarial-fixed-point", true, ""};
    Tape tape;
    Mat half = Mat::Constant(4, 1, 0.5);
    const Real got = adversarial_loss(tape.constant(half), tape.constant(half)).scalar();
    const Real want = 2.0 * std::log(2.0);
    if (std::abs(got - want) > 1e-12) {
        result.pass = false;
        result.detail = "all-0.5 outputs give " + std::to_string(got) + ", expected 2 ln 2";
    }
    return result;
}

VerifyResult check_gradient_sign_contract(std::uint64_t seed) {
    VerifyResult result{"gradient-sign-contract", true, ""};
    Rng rng(seed);

    TrainConfig cfg;
    cfg.g_widths = {4, 3};
    cfg.d_widths = {3};
    const Index batch = 4, classes = 2, dim = 2;
    const Real lambda1 = 0.8;
    const Real grl_now = 1.3;

    ChattyModel model = init_model(cfg.model_spec(dim, classes), seed);
    jitter_biases(model, rng);
    const Mat src_x = random_mat(rng, batch, dim);
    const Mat tgt_x = random_mat(rng, batch, dim);

    // The training-time adversarial term: reversal on the discriminator
    // input, nothing else.
    auto build = [&](Tape& tape) {
        ForwardBundle fs = forward(tape, model, src_x, grl_now);
        ForwardBundle ft = forward(tape, model, tgt_x, grl_now);
        return scale(adversarial_loss(fs.disc_out, ft.disc_out), lambda1);
    };
    // Plain value of the adversarial loss for finite differences.
    auto eval_plain = [&]() {
        Tape tape;
        ForwardBundle fs = forward(tape, model, src_x, grl_now);
        ForwardBundle ft = forward(tape, model, tgt_x, grl_now);
        return adversarial_loss(fs.disc_out, ft.disc_out).scalar();
    };

    Tape tape;
    Node term = build(tape);
    tape.backward(term);

    auto check_group = [&](const std::vector<Mat*>& params, Real factor,
                           const char* side) -> bool {
        for (Mat* p : params) {
            for (Index i = 0; i < p->rows(); ++i) {
                for (Index j = 0; j < p->cols(); ++j) {
                    const FdEstimate fd = fd_two_scale(&(*p)(i, j), eval_plain);
                    if (!fd.smooth) continue;  // kink inside the step window
                    const Real an = (*tape.grad_of(*p))(i, j);
                    if (!close(an, factor * fd.value)) {
                        std::ostringstream os;
                        os << side << " entry (" << i << ',' << j << "): applied gradient " << an
                           << " vs expected " << factor * fd.value << " (factor " << factor << ")";
                        result.detail = os.str();
                        return false;
                    }
                }
            }
        }
        return true;
    };

    // Discriminator side: plain descent on the adversarial loss (it learns to
    // tell the domains apart).
    if (!check_group(model.discriminator_parameters(), lambda1, "discriminator")) {
        result.pass = false;
        return result;
    }
    // Generator side: negated by the reversal and scaled by its strength, so
    // a descent step ascends the adversarial loss (it learns to confuse the
    // discriminator).
    if (!check_group(model.generator_parameters(), -lambda1 * grl_now, "generator")) {
        result.pass = false;
        return result;
    }
    return result;
}

VerifyResult check_determinism_replay(std::uint64_t seed) {
    VerifyResult result{"determinism-replay", true, ""};
    const DomainPair pair = gen_moons(30.0, 0.1, 40, seed);
    TrainConfig cfg;
    cfg.iterations = 30;
    cfg.eval_every = 10;
    cfg.snapshot_every = 15;
    cfg.batch_size = 8;
    cfg.g_widths = {8, 6};
    cfg.d_widths = {4};
    cfg.mcc_enabled = true;
    cfg.seed = seed;

    const RunRecord a = run(pair, cfg);
    const RunRecord b = run(pair, cfg);
    if (metrics_csv(a) != metrics_csv(b)) {
        result.pass = false;
        result.detail = "metric rows differ between identical runs";
        return result;
    }
    if (a.snapshots.size() != b.snapshots.size()) {
        result.pass = false;
        result.detail = "snapshot counts differ between identical runs";
        return result;
    }
    for (std::size_t i = 0; i < a.snapshots.size(); ++i) {
        const Mat& ma = a.snapshots[i].target_logits;
        const Mat& mb = b.snapshots[i].target_logits;
        if (a.snapshots[i].iter != b.snapshots[i].iter || ma.rows() != mb.rows() ||
            ma.cols() != mb.cols() || !(ma.array() == mb.array()).all()) {
            result.pass = false;
            result.detail = "snapshot " + std::to_string(i) + " differs between identical runs";
            return result;
        }
    }
    return result;
}

}  // namespace

std::vector<VerifyResult> run_verification(std::uint64_t seed) {
    std::vector<VerifyResult> results;
    results.push_back(check_op_gradients(seed));
    results.push_back(check_full_model_gradients(seed + 1));
    results.push_back(check_transport_closed_form(seed + 2));
    results.push_back(check_mcc_equivalence(seed + 3));
    results.push_back(check_adversarial_fixed_point());
    results.push_back(check_gradient_sign_contract(seed + 4));
    results.push_back(check_determinism_replay(seed + 5));
    return results;
}

}  // namespace chatty
