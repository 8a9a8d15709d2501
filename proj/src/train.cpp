#include "chatty/train.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "chatty/errors.hpp"
#include "chatty/metrics.hpp"

namespace chatty {

namespace {

// Decorrelates the batch sampler from model initialization under one seed.
constexpr std::uint64_t kSamplerSalt = 0x5851f42d4c957f2dULL;

std::string format_real(Real v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void require_finite(const LossBreakdown& bd, bool mcc_enabled) {
    if (!std::isfinite(bd.l_c)) throw NanAbort("l_c");
    if (!std::isfinite(bd.l_adv)) throw NanAbort("l_adv");
    if (!std::isfinite(bd.l_tl)) throw NanAbort("l_tl");
    if (mcc_enabled && !std::isfinite(bd.l_mcc)) throw NanAbort("l_mcc");
    if (!std::isfinite(bd.l_total)) throw NanAbort("l_total");
}

// Transport loss on the concatenated source+target transport outputs,
// honoring the variant and the single-transport fallbacks.
Node transport_term(Tape& tape, const ForwardBundle& fs, const ForwardBundle& ft,
                    const LossWeights& weights, const TrainConfig& cfg) {
    Node t1_all = concat_rows(fs.t1, ft.t1);
    Node t2_all = t1_all;  // single-transport self-spread
    if (cfg.dual_transport) {
        t2_all = concat_rows(*fs.t2, *ft.t2);
    } else if (!cfg.single_mode_tl) {
        return tape.constant_scalar(0.0);
    }
    switch (cfg.tl_variant) {
        case TlVariant::cosine:
            return transport_loss_cos(t1_all, t2_all);
        case TlVariant::embedded: {
            if (weights.confusion_embed.size() != 0) {
                return transport_loss_embedded(t1_all, t2_all, weights.confusion_embed);
            }
            return transport_loss(transport_yield(t1_all, t2_all));
        }
        case TlVariant::plain:
        default: {
            if (weights.class_info.size() != 0) {
                return transport_loss(transport_yield(t1_all, t2_all, weights.class_info));
            }
            return transport_loss(transport_yield(t1_all, t2_all));
        }
    }
}

Mat target_logit_snapshot(ChattyModel& model, const Mat& target_x) {
    Tape tape;
    return forward(tape, model, target_x, 0.0).interp_logits.value();
}

MetricsRow evaluate_full(ChattyModel& model, const DomainPair& pair, const LossWeights& weights,
                         const TrainConfig& cfg, Index iter) {
    Tape tape;
    ComposedLosses losses = compose_losses(tape, model, pair.source_x, pair.source_y,
                                           pair.target_x, weights, cfg, -1.0);
    MetricsRow row;
    row.iter = iter;
    row.l_c = losses.breakdown.l_c;
    row.l_adv = losses.breakdown.l_adv;
    row.l_tl = losses.breakdown.l_tl;
    row.l_mcc = losses.breakdown.l_mcc;
    row.l_total = losses.breakdown.l_total;
    row.src_acc = evaluate(model, pair.source_x, pair.source_y);
    row.tgt_acc = evaluate(model, pair.target_x, pair.target_y);
    return row;
}

}  // namespace

Real reversal_strength(const TrainConfig& cfg, Index iter) {
    if (!cfg.grl_warmup) return cfg.grl_scale;
    const Real p = static_cast<Real>(iter) / static_cast<Real>(cfg.iterations);
    return cfg.grl_scale * (2.0 / (1.0 + std::exp(-10.0 * p)) - 1.0);
}

void TrainConfig::validate() const {
    if (!(lr > 0.0)) throw ParamError("TrainConfig: lr must be positive");
    if (iterations < 1) throw ParamError("TrainConfig: iterations must be at least 1");
    if (lambda1 < 0.0) throw ParamError("TrainConfig: lambda1 must be non-negative");
    if (lambda2 < 0.0 && lambda2 != kAutoLambda2) {
        throw ParamError("TrainConfig: lambda2 must be non-negative or auto");
    }
    if (!(temperature > 0.0)) throw ParamError("TrainConfig: temperature must be positive");
    if (momentum < 0.0 || momentum >= 1.0) {
        throw ParamError("TrainConfig: momentum must be in [0, 1)");
    }
    if (eval_every < 1) throw ParamError("TrainConfig: eval_every must be positive");
    if (snapshot_every < 1) throw ParamError("TrainConfig: snapshot_every must be positive");
    if (batch_size < 1) throw ParamError("TrainConfig: batch_size must be positive");
    if (dual_transport && !(lambda > 0.0 && lambda < 1.0)) {
        throw ParamError("TrainConfig: lambda must be in (0, 1) in dual-transport mode");
    }
}

Real TrainConfig::resolved_lambda2(Index num_classes) const {
    return lambda2 == kAutoLambda2 ? default_lambda2(num_classes) : lambda2;
}

LossWeights TrainConfig::loss_weights(Index num_classes) const {
    LossWeights weights;
    weights.lambda1 = lambda1;
    weights.lambda2 = resolved_lambda2(num_classes);
    weights.temperature = temperature;
    weights.class_info = class_info;
    weights.confusion_embed = confusion_embed;
    weights.validate(num_classes);
    return weights;
}

ModelSpec TrainConfig::model_spec(Index input_dim, Index num_classes) const {
    ModelSpec spec;
    spec.input_dim = input_dim;
    spec.g_widths = g_widths;
    spec.num_classes = num_classes;
    spec.d_widths = d_widths;
    spec.lambda = lambda;
    spec.dual_transport = dual_transport;
    spec.disc_on_logits = disc_on_logits;
    return spec;
}

ComposedLosses compose_losses(Tape& tape, ChattyModel& model, const Mat& src_x,
                              const std::vector<int>& src_y, const Mat& tgt_x,
                              const LossWeights& weights, const TrainConfig& cfg, Real grl_now) {
    ForwardBundle fs = forward(tape, model, src_x, grl_now);
    ForwardBundle ft = forward(tape, model, tgt_x, grl_now);

    Node l_c = cross_entropy(fs.interp_logits, src_y);
    Node l_adv = adversarial_loss(fs.disc_out, ft.disc_out);
    Node l_tl = transport_term(tape, fs, ft, weights, cfg);
    Node l_mcc = mcc_loss(ft.interp_logits, weights.temperature);

    ComposedLosses out;
    out.total = total_loss(l_c, l_adv, l_tl,
                           cfg.mcc_enabled ? std::optional<Node>(l_mcc) : std::nullopt,
                           weights, &out.breakdown);
    out.breakdown.l_mcc = l_mcc.scalar();  // measured even when not optimized
    return out;
}

Trainer::Trainer(ChattyModel& model, const TrainConfig& cfg, LossWeights weights)
    : model_(model), cfg_(cfg), weights_(std::move(weights)) {
    all_params_ = model_.parameters();
    gen_params_ = model_.generator_parameters();
    disc_params_ = model_.discriminator_parameters();
    for (Mat* p : all_params_) {
        velocity_.emplace(p, Mat::Zero(p->rows(), p->cols()));
    }
}

void Trainer::apply_sgd(Tape& tape, const std::vector<Mat*>& params) {
    for (Mat* p : params) {
        const Mat* g = tape.grad_of(*p);
        if (g == nullptr) continue;  // parameter not touched by this graph
        Mat& v = velocity_.at(p);
        v = cfg_.momentum * v + *g;
        *p -= cfg_.lr * v;
    }
}

LossBreakdown Trainer::step(const BatchPair& batch, Real grl_now) {
    if (!cfg_.alternating) {
        Tape tape;
        ComposedLosses losses = compose_losses(tape, model_, batch.src_x, batch.src_y,
                                               batch.tgt_x, weights_, cfg_, grl_now);
        require_finite(losses.breakdown, cfg_.mcc_enabled);
        tape.backward(losses.total);
        apply_sgd(tape, all_params_);
        return losses.breakdown;
    }

    // Literal two-pass minimax. Pass 1 trains the discriminator to tell the
    // domains apart (reversal scale 0 cuts the generator pathway, so only
    // discriminator parameters see a gradient).
    {
        Tape tape;
        ForwardBundle fs = forward(tape, model_, batch.src_x, 0.0);
        ForwardBundle ft = forward(tape, model_, batch.tgt_x, 0.0);
        Node l_adv = adversarial_loss(fs.disc_out, ft.disc_out);
        if (!std::isfinite(l_adv.scalar())) throw NanAbort("l_adv");
        tape.backward(l_adv);
        apply_sgd(tape, disc_params_);
    }

    // Pass 2 steps the generator side on the full objective; the reversal on
    // the discriminator input makes that side ascend the adversarial term,
    // matching the single-pass signal. Discriminator gradients exist on this
    // tape but are not applied.
    Tape tape;
    ComposedLosses losses = compose_losses(tape, model_, batch.src_x, batch.src_y, batch.tgt_x,
                                           weights_, cfg_, grl_now);
    require_finite(losses.breakdown, cfg_.mcc_enabled);
    tape.backward(losses.total);
    apply_sgd(tape, gen_params_);
    return losses.breakdown;
}

RunRecord run(const DomainPair& pair, const TrainConfig& cfg, ChattyModel* final_model,
              const EvalCallback& on_eval) {
    cfg.validate();
    const LossWeights weights = cfg.loss_weights(pair.num_classes);
    ChattyModel model = init_model(cfg.model_spec(pair.dim(), pair.num_classes), cfg.seed);
    BatchSampler sampler(pair, cfg.batch_size, cfg.seed ^ kSamplerSalt);
    Trainer trainer(model, cfg, weights);

    RunRecord record;
    record.rows.push_back(evaluate_full(model, pair, weights, cfg, 0));
    if (on_eval) on_eval(record.rows.back());
    record.snapshots.push_back({0, target_logit_snapshot(model, pair.target_x)});

    for (Index iter = 1; iter <= cfg.iterations; ++iter) {
        const Real grl_now = reversal_strength(cfg, iter);
        trainer.step(sampler.next(), grl_now);
        if (iter % cfg.eval_every == 0 || iter == cfg.iterations) {
            record.rows.push_back(evaluate_full(model, pair, weights, cfg, iter));
            if (on_eval) on_eval(record.rows.back());
        }
        if (iter % cfg.snapshot_every == 0 || iter == cfg.iterations) {
            record.snapshots.push_back({iter, target_logit_snapshot(model, pair.target_x)});
        }
    }
    if (final_model != nullptr) {
        *final_model = model;
    }
    return record;
}

Real evaluate(ChattyModel& model, const Mat& x, const std::vector<int>& y) {
    return accuracy(predict(model, x), y);
}

Real default_lambda2(Index num_classes) {
    if (num_classes < 2) {
        throw ParamError("default_lambda2: need at least 2 classes");
    }
    return 0.0496 / static_cast<Real>(num_classes);
}

TrainConfig office31_preset() {
    TrainConfig cfg;
    cfg.lambda2 = 0.0016;
    return cfg;
}

TrainConfig office_home_preset() {
    TrainConfig cfg;
    cfg.lambda2 = 0.0002;
    return cfg;
}

std::string metrics_csv(const RunRecord& record) {
    std::ostringstream out;
    out << "iter,l_c,l_adv,l_tl,l_mcc,l_total,src_acc,tgt_acc\n";
    for (const MetricsRow& r : record.rows) {
        out << r.iter << ',' << format_real(r.l_c) << ',' << format_real(r.l_adv) << ','
            << format_real(r.l_tl) << ',' << format_real(r.l_mcc) << ','
            << format_real(r.l_total) << ',' << format_real(r.src_acc) << ','
            << format_real(r.tgt_acc) << '\n';
    }
    return out.str();
}

std::string run_record_json(const RunRecord& record) {
    nlohmann::json rows = nlohmann::json::array();
    for (const MetricsRow& r : record.rows) {
        rows.push_back({{"iter", r.iter},
                        {"l_c", r.l_c},
                        {"l_adv", r.l_adv},
                        {"l_tl", r.l_tl},
                        {"l_mcc", r.l_mcc},
                        {"l_total", r.l_total},
                        {"src_acc", r.src_acc},
                        {"tgt_acc", r.tgt_acc}});
    }
    nlohmann::json snaps = nlohmann::json::array();
    for (const Snapshot& s : record.snapshots) {
        snaps.push_back(s.iter);
    }
    nlohmann::json j = {{"rows", std::move(rows)}, {"snapshot_iters", std::move(snaps)}};
    return j.dump(1) + "\n";
}

void save_run_record(const RunRecord& record, const std::string& dir) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir + "/metrics.csv");
        if (!out) throw ParamError("save_run_record: cannot write " + dir + "/metrics.csv");
        out << metrics_csv(record);
    }
    {
        std::ofstream out(dir + "/run.json");
        if (!out) throw ParamError("save_run_record: cannot write " + dir + "/run.json");
        out << run_record_json(record);
    }
    for (const Snapshot& s : record.snapshots) {
        const std::string path = dir + "/snapshot_" + std::to_string(s.iter) + ".csv";
        std::ofstream out(path);
        if (!out) throw ParamError("save_run_record: cannot write " + path);
        for (Index j = 0; j < s.target_logits.cols(); ++j) {
            out << 'z' << j << (j + 1 == s.target_logits.cols() ? '\n' : ',');
        }
        for (Index i = 0; i < s.target_logits.rows(); ++i) {
            for (Index j = 0; j < s.target_logits.cols(); ++j) {
                out << format_real(s.target_logits(i, j))
                    << (j + 1 == s.target_logits.cols() ? '\n' : ',');
            }
        }
    }
}

}  // namespace chatty
