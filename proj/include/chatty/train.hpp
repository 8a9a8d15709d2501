#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "chatty/data.hpp"
#include "chatty/losses.hpp"
#include "chatty/model.hpp"

namespace chatty {

enum class TlVariant { plain, cosine, embedded };

// Negative lambda2 means "derive from the class count" (default_lambda2).
inline constexpr Real kAutoLambda2 = -1.0;

struct TrainConfig {
    Real lr = 0.001;
    Index iterations = 10000;
    Real lambda = 0.5;            // interpolation weight between the two transported outputs
    Real lambda1 = 1.0;           // adversarial weight
    Real lambda2 = kAutoLambda2;  // transport weight; auto by default
    Real temperature = 2.5;       // confusion-loss temperature
    Real momentum = 0.9;
    Real grl_scale = 1.0;      // gradient-reversal strength on the generator side
    bool grl_warmup = false;   // ramp 2/(1+exp(-10p)) - 1 instead of a constant
    bool mcc_enabled = false;  // add the class-confusion loss on target logits
    TlVariant tl_variant = TlVariant::plain;
    bool dual_transport = true;
    bool single_mode_tl = true;  // single-transport mode: keep L_TL as T1 self-spread
    bool alternating = false;    // literal two-pass max/min instead of gradient reversal
    bool disc_on_logits = false;
    std::uint64_t seed = 1;
    Index eval_every = 100;
    Index snapshot_every = 2500;
    Index batch_size = 16;
    std::vector<Index> g_widths = {128, 64};
    std::vector<Index> d_widths = {32};
    Mat class_info;       // empty => identity inside the transport yield
    Mat confusion_embed;  // empty => identity for the embedded variant

    void validate() const;
    Real resolved_lambda2(Index num_classes) const;
    LossWeights loss_weights(Index num_classes) const;
    ModelSpec model_spec(Index input_dim, Index num_classes) const;
};

struct MetricsRow {
    Index iter = 0;
    Real l_c = 0.0;
    Real l_adv = 0.0;
    Real l_tl = 0.0;
    Real l_mcc = 0.0;
    Real l_total = 0.0;
    Real src_acc = 0.0;
    Real tgt_acc = 0.0;
};

struct Snapshot {
    Index iter = 0;
    Mat target_logits;  // Nt x c interpolated logits
};

// Full history of one run: metric rows at the evaluation points (strictly
// increasing iterations, full-dataset losses and accuracies) plus logit
// snapshots.
struct RunRecord {
    std::vector<MetricsRow> rows;
    std::vector<Snapshot> snapshots;
};

// One forward composition of every loss term. `total` is the training
// objective; `breakdown` holds the scalar values, with l_mcc always measured
// even when it is not part of the objective.
struct ComposedLosses {
    Node total;
    LossBreakdown breakdown;
};

// Builds the complete loss graph on `tape` for one source/target batch.
//
// grl_now is passed straight to forward() as the reversal scale (backward
// multiplier -grl_now on the discriminator input path). One descent step on
// `total` therefore descends the adversarial loss for the discriminator while
// the feature/classifier/transport side ascends it, scaled by grl_now. Use
// grl_now = -1 to make the discriminator path an identity in both directions,
// turning the graph into a plain differentiable composite for gradient checks
// and evaluation. Forward values do not depend on grl_now.
ComposedLosses compose_losses(Tape& tape, ChattyModel& model, const Mat& src_x,
                              const std::vector<int>& src_y, const Mat& tgt_x,
                              const LossWeights& weights, const TrainConfig& cfg, Real grl_now);

// SGD-with-momentum stepper over a model. Velocities persist across steps.
class Trainer {
  public:
    Trainer(ChattyModel& model, const TrainConfig& cfg, LossWeights weights);

    // One optimizer step on one batch. Throws NanAbort naming the first
    // non-finite loss term.
    LossBreakdown step(const BatchPair& batch, Real grl_now);

  private:
    void apply_sgd(Tape& tape, const std::vector<Mat*>& params);

    ChattyModel& model_;
    TrainConfig cfg_;
    LossWeights weights_;
    std::vector<Mat*> all_params_;
    std::vector<Mat*> gen_params_;
    std::vector<Mat*> disc_params_;
    std::unordered_map<const Mat*, Mat> velocity_;
};

// Progress hook: invoked once per recorded metrics row (including iteration 0
// and the final iteration), in order.
using EvalCallback = std::function<void(const MetricsRow&)>;

// Trains a fresh model on the pair and records metrics at iteration 0, every
// eval_every iterations, and the final iteration; snapshots of target
// interpolated logits at iteration 0, multiples of snapshot_every, and the
// final iteration. Deterministic in (pair, cfg). If final_model is non-null
// the trained model is copied out.
RunRecord run(const DomainPair& pair, const TrainConfig& cfg, ChattyModel* final_model = nullptr,
              const EvalCallback& on_eval = {});

// Fraction of predict() hits against labels.
Real evaluate(ChattyModel& model, const Mat& x, const std::vector<int>& y);

// Reversal strength applied at an iteration: grl_scale, optionally ramped by
// 2/(1+exp(-10p)) - 1 with p = iter/iterations when grl_warmup is set.
Real reversal_strength(const TrainConfig& cfg, Index iter);

// Transport weight heuristic k/c with k = 0.0496 (so 31 classes gives
// 0.0016). Throws ParamError for fewer than 2 classes.
Real default_lambda2(Index num_classes);

// Hyperparameter presets with the published transport weights.
TrainConfig office31_preset();    // lambda2 = 0.0016
TrainConfig office_home_preset();  // lambda2 = 0.0002

// Serialization. metrics_csv uses the stable header
// iter,l_c,l_adv,l_tl,l_mcc,l_total,src_acc,tgt_acc with round-trip floats.
std::string metrics_csv(const RunRecord& record);
std::string run_record_json(const RunRecord& record);

// Writes metrics.csv, run.json, and snapshot_<iter>.csv files into dir
// (created if missing).
void save_run_record(const RunRecord& record, const std::string& dir);

}  // namespace chatty
