#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "chatty/data.hpp"
#include "chatty/errors.hpp"
#include "chatty/metrics.hpp"
#include "chatty/train.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace chatty;

namespace {

TrainConfig small_cfg() {
    TrainConfig cfg;
    cfg.iterations = 30;
    cfg.eval_every = 10;
    cfg.snapshot_every = 10;
    cfg.batch_size = 8;
    cfg.g_widths = {16, 8};
    cfg.d_widths = {8};
    cfg.seed = 5;
    return cfg;
}

bool same_params(ChattyModel& a, ChattyModel& b) {
    const auto pa = a.parameters();
    const auto pb = b.parameters();
    if (pa.size() != pb.size()) return false;
    for (std::size_t i = 0; i < pa.size(); ++i) {
        if (pa[i]->rows() != pb[i]->rows() || pa[i]->cols() != pb[i]->cols()) return false;
        if (!(pa[i]->array() == pb[i]->array()).all()) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("config validation rejects out-of-range values") {
    auto reject = [](auto&& mutate) {
        TrainConfig cfg;
        mutate(cfg);
        CHECK_THROWS_AS(cfg.validate(), ParamError);
    };
    reject([](TrainConfig& c) { c.lr = 0.0; });
    reject([](TrainConfig& c) { c.lr = -0.1; });
    reject([](TrainConfig& c) { c.iterations = 0; });
    reject([](TrainConfig& c) { c.lambda1 = -0.5; });
    reject([](TrainConfig& c) { c.lambda2 = -0.5; });
    reject([](TrainConfig& c) { c.temperature = 0.0; });
    reject([](TrainConfig& c) { c.momentum = 1.0; });
    reject([](TrainConfig& c) { c.momentum = -0.1; });
    reject([](TrainConfig& c) { c.eval_every = 0; });
    reject([](TrainConfig& c) { c.snapshot_every = 0; });
    reject([](TrainConfig& c) { c.batch_size = 0; });
    reject([](TrainConfig& c) { c.lambda = 1.0; });
    reject([](TrainConfig& c) { c.lambda = 0.0; });

    TrainConfig ok;
    CHECK_NOTHROW(ok.validate());
    // the interpolation weight is unconstrained once only one transport head exists
    ok.dual_transport = false;
    ok.lambda = 1.0;
    CHECK_NOTHROW(ok.validate());
}

TEST_CASE("transport weight heuristic scales inversely with the class count") {
    CHECK(default_lambda2(31) == doctest::Approx(0.0016).epsilon(1e-12));
    CHECK(default_lambda2(62) == default_lambda2(31) / 2.0);
    CHECK(default_lambda2(2) == doctest::Approx(0.0248).epsilon(1e-12));
    CHECK_THROWS_AS(default_lambda2(1), ParamError);
    CHECK_THROWS_AS(default_lambda2(0), ParamError);

    TrainConfig cfg;
    CHECK(cfg.lambda2 == kAutoLambda2);
    CHECK(cfg.resolved_lambda2(31) == doctest::Approx(0.0016).epsilon(1e-12));
    cfg.lambda2 = 0.7;
    CHECK(cfg.resolved_lambda2(31) == 0.7);
    CHECK(cfg.loss_weights(31).lambda2 == 0.7);
}

TEST_CASE("presets pin the published transport weights") {
    CHECK(office31_preset().lambda2 == 0.0016);
    CHECK(office_home_preset().lambda2 == 0.0002);
    CHECK(office31_preset().lambda1 == 1.0);
    CHECK(office_home_preset().lambda1 == 1.0);
}

TEST_CASE("reversal strength is constant without warmup and ramps with it") {
    TrainConfig cfg;
    cfg.grl_scale = 0.8;
    cfg.iterations = 1000;
    cfg.grl_warmup = false;
    CHECK(reversal_strength(cfg, 0) == 0.8);
    CHECK(reversal_strength(cfg, 500) == 0.8);
    CHECK(reversal_strength(cfg, 1000) == 0.8);

    cfg.grl_warmup = true;
    CHECK(reversal_strength(cfg, 0) == doctest::Approx(0.0).epsilon(1e-15));
    const Real mid = 0.8 * (2.0 / (1.0 + std::exp(-5.0)) - 1.0);
    CHECK(reversal_strength(cfg, 500) == doctest::Approx(mid).epsilon(1e-12));
    CHECK(reversal_strength(cfg, 1000) ==
          doctest::Approx(0.8 * (2.0 / (1.0 + std::exp(-10.0)) - 1.0)).epsilon(1e-12));
    Real prev = -1.0;
    for (Index iter = 0; iter <= 1000; iter += 100) {
        const Real s = reversal_strength(cfg, iter);
        CHECK(s > prev);
        prev = s;
    }
    CHECK(prev <= 0.8);
}

TEST_CASE("loss composition reports an exact weighted breakdown") {
    const DomainPair pair = gen_moons(30.0, 0.1, 40, 3);
    TrainConfig cfg = small_cfg();
    cfg.lambda1 = 0.6;
    cfg.lambda2 = 0.3;

    for (const bool with_mcc : {false, true}) {
        cfg.mcc_enabled = with_mcc;
        const LossWeights weights = cfg.loss_weights(pair.num_classes);
        ChattyModel model = init_model(cfg.model_spec(pair.dim(), pair.num_classes), cfg.seed);
        Tape tape;
        const ComposedLosses cl = compose_losses(tape, model, pair.source_x, pair.source_y,
                                                 pair.target_x, weights, cfg, -1.0);
        const LossBreakdown& bd = cl.breakdown;
        Real expect = bd.l_c + 0.6 * bd.l_adv + 0.3 * bd.l_tl;
        if (with_mcc) expect += bd.l_mcc;
        CHECK(bd.l_total == doctest::Approx(expect).epsilon(1e-12));
        CHECK(cl.total.scalar() == bd.l_total);
        // the confusion term is measured even when it is not optimized
        CHECK(bd.l_mcc >= 0.0);
        CHECK(bd.l_mcc <= 1.0);
        CHECK(std::isfinite(bd.l_adv));
        CHECK(std::isfinite(bd.l_tl));
    }
}

TEST_CASE("training ignores target content when target-dependent terms are off") {
    const DomainPair a = gen_moons(30.0, 0.1, 48, 9);

    DomainPair b = a;  // same source, unrelated target inputs
    Rng noise(1234);
    b.target_x = oracle::random_mat(noise, b.target_x.rows(), b.target_x.cols(), -2.0, 2.0);

    TrainConfig cfg = small_cfg();
    cfg.lambda1 = 0.0;
    cfg.lambda2 = 0.0;
    cfg.mcc_enabled = false;

    ChattyModel ma;
    ChattyModel mb;
    const RunRecord ra = run(a, cfg, &ma);
    const RunRecord rb = run(b, cfg, &mb);

    // The source-only objective must make the target sample invisible to the
    // optimizer: every parameter ends bitwise identical.
    CHECK(same_params(ma, mb));
    REQUIRE(ra.rows.size() == rb.rows.size());
    for (std::size_t i = 0; i < ra.rows.size(); ++i) {
        CHECK(ra.rows[i].l_c == rb.rows[i].l_c);
        CHECK(ra.rows[i].src_acc == rb.rows[i].src_acc);
        // target-side diagnostics still see the different sample
    }
}

TEST_CASE("evaluation labels never feed back into training") {
    const DomainPair a = gen_moons(30.0, 0.1, 48, 9);
    DomainPair c = a;
    for (auto& y : c.target_y) y = 1 - y;  // poison every evaluation label

    TrainConfig cfg = small_cfg();
    cfg.lambda1 = 1.0;
    cfg.lambda2 = 0.05;
    cfg.mcc_enabled = true;

    ChattyModel ma;
    ChattyModel mc;
    const RunRecord ra = run(a, cfg, &ma);
    const RunRecord rc = run(c, cfg, &mc);

    CHECK(same_params(ma, mc));
    REQUIRE(ra.rows.size() == rc.rows.size());
    for (std::size_t i = 0; i < ra.rows.size(); ++i) {
        CHECK(ra.rows[i].l_c == rc.rows[i].l_c);
        CHECK(ra.rows[i].l_adv == rc.rows[i].l_adv);
        CHECK(ra.rows[i].l_tl == rc.rows[i].l_tl);
        CHECK(ra.rows[i].l_mcc == rc.rows[i].l_mcc);
        CHECK(ra.rows[i].l_total == rc.rows[i].l_total);
        CHECK(ra.rows[i].src_acc == rc.rows[i].src_acc);
        // binary labels flipped wholesale: accuracies are exact complements
        CHECK(ra.rows[i].tgt_acc == doctest::Approx(1.0 - rc.rows[i].tgt_acc).epsilon(1e-12));
    }
}

TEST_CASE("runs are deterministic and record the expected evaluation grid") {
    const DomainPair pair = gen_moons(20.0, 0.1, 40, 2);
    TrainConfig cfg = small_cfg();
    cfg.iterations = 25;
    cfg.eval_every = 10;
    cfg.snapshot_every = 10;

    std::vector<Index> seen_iters;
    const RunRecord r1 = run(pair, cfg, nullptr,
                             [&](const MetricsRow& row) { seen_iters.push_back(row.iter); });
    const RunRecord r2 = run(pair, cfg);
    CHECK(metrics_csv(r1) == metrics_csv(r2));

    REQUIRE(r1.rows.size() == 4);
    CHECK(r1.rows[0].iter == 0);
    CHECK(r1.rows[1].iter == 10);
    CHECK(r1.rows[2].iter == 20);
    CHECK(r1.rows[3].iter == 25);
    CHECK(seen_iters == std::vector<Index>{0, 10, 20, 25});

    REQUIRE(r1.snapshots.size() == 4);
    CHECK(r1.snapshots[0].iter == 0);
    CHECK(r1.snapshots[1].iter == 10);
    CHECK(r1.snapshots[2].iter == 20);
    CHECK(r1.snapshots[3].iter == 25);
    for (const Snapshot& s : r1.snapshots) {
        CHECK(s.target_logits.rows() == pair.target_x.rows());
        CHECK(s.target_logits.cols() == pair.num_classes);
    }
    for (const MetricsRow& row : r1.rows) {
        CHECK(row.src_acc >= 0.0);
        CHECK(row.src_acc <= 1.0);
        CHECK(row.tgt_acc >= 0.0);
        CHECK(row.tgt_acc <= 1.0);
        CHECK(std::isfinite(row.l_total));
    }

    // a different seed takes a different trajectory
    cfg.seed += 1;
    const RunRecord r3 = run(pair, cfg);
    CHECK(metrics_csv(r1) != metrics_csv(r3));
}

TEST_CASE("evaluate agrees with accuracy over predictions") {
    const DomainPair pair = gen_moons(30.0, 0.1, 30, 4);
    TrainConfig cfg = small_cfg();
    ChattyModel model = init_model(cfg.model_spec(pair.dim(), pair.num_classes), 3);
    CHECK(evaluate(model, pair.source_x, pair.source_y) ==
          accuracy(predict(model, pair.source_x), pair.source_y));
    CHECK(evaluate(model, pair.target_x, pair.target_y) ==
          accuracy(predict(model, pair.target_x), pair.target_y));
}

TEST_CASE("diverging losses abort with the offending term named") {
    const DomainPair pair = gen_moons(30.0, 0.1, 40, 6);
    TrainConfig cfg = small_cfg();
    cfg.lr = 1e7;  // deliberately unstable
    cfg.iterations = 200;
    bool aborted = false;
    try {
        run(pair, cfg);
    } catch (const NanAbort& e) {
        aborted = true;
        CHECK(std::string(e.what()).find("loss term") != std::string::npos);
        CHECK_FALSE(e.term().empty());
    }
    CHECK(aborted);
}

TEST_CASE("two-pass minimax training is deterministic and reduces source loss") {
    const DomainPair pair = gen_moons(30.0, 0.1, 80, 12);
    TrainConfig cfg = small_cfg();
    cfg.alternating = true;
    cfg.lambda1 = 0.2;  // keep the focus on optimizer mechanics
    cfg.iterations = 150;
    cfg.eval_every = 50;

    const RunRecord r1 = run(pair, cfg);
    const RunRecord r2 = run(pair, cfg);
    CHECK(metrics_csv(r1) == metrics_csv(r2));
    for (const MetricsRow& row : r1.rows) {
        CHECK(std::isfinite(row.l_c));
        CHECK(std::isfinite(row.l_adv));
        CHECK(std::isfinite(row.l_tl));
        CHECK(std::isfinite(row.l_total));
    }
    CHECK(r1.rows.back().l_c < r1.rows.front().l_c);
}

TEST_CASE("single-pass training reduces source loss on plain moons") {
    const DomainPair pair = gen_moons(30.0, 0.1, 80, 12);
    TrainConfig cfg = small_cfg();
    cfg.lambda1 = 0.2;
    cfg.iterations = 150;
    cfg.eval_every = 50;
    const RunRecord record = run(pair, cfg);
    CHECK(record.rows.back().l_c < record.rows.front().l_c);
    CHECK(record.rows.back().src_acc >= record.rows.front().src_acc);
}

TEST_CASE("run records serialize with a stable header and full precision") {
    const DomainPair pair = gen_moons(30.0, 0.1, 30, 2);
    TrainConfig cfg = small_cfg();
    cfg.iterations = 10;
    cfg.eval_every = 5;
    cfg.snapshot_every = 5;
    const RunRecord record = run(pair, cfg);

    const std::string csv = metrics_csv(record);
    CHECK(csv.rfind("iter,l_c,l_adv,l_tl,l_mcc,l_total,src_acc,tgt_acc\n", 0) == 0);
    // one header plus one line per row
    CHECK(std::count(csv.begin(), csv.end(), '\n') ==
          static_cast<long>(record.rows.size()) + 1);

    const auto dir = std::filesystem::temp_directory_path() / "chatty_run_record_test";
    std::filesystem::remove_all(dir);
    save_run_record(record, dir.string());
    CHECK(std::filesystem::exists(dir / "metrics.csv"));
    CHECK(std::filesystem::exists(dir / "run.json"));
    CHECK(std::filesystem::exists(dir / "snapshot_0.csv"));
    CHECK(std::filesystem::exists(dir / "snapshot_5.csv"));
    CHECK(std::filesystem::exists(dir / "snapshot_10.csv"));

    std::ifstream snap(dir / "snapshot_0.csv");
    std::string header;
    REQUIRE(std::getline(snap, header));
    CHECK(header == "z0,z1");
    std::size_t lines = 0;
    std::string line;
    while (std::getline(snap, line)) {
        if (!line.empty()) ++lines;
    }
    CHECK(lines == static_cast<std::size_t>(pair.target_x.rows()));
    std::filesystem::remove_all(dir);
}

TEST_CASE("transport variants and single-transport mode stay trainable") {
    const DomainPair pair = gen_moons(30.0, 0.1, 40, 8);
    TrainConfig base = small_cfg();
    base.iterations = 10;
    base.eval_every = 5;
    base.lambda2 = 0.1;

    for (const TlVariant variant : {TlVariant::plain, TlVariant::cosine, TlVariant::embedded}) {
        TrainConfig cfg = base;
        cfg.tl_variant = variant;
        const RunRecord record = run(pair, cfg);
        for (const MetricsRow& row : record.rows) {
            CHECK(std::isfinite(row.l_tl));
            CHECK(std::isfinite(row.l_total));
        }
    }

    TrainConfig single = base;
    single.dual_transport = false;
    single.lambda = 1.0;
    const RunRecord rs = run(pair, single);
    CHECK(std::isfinite(rs.rows.back().l_total));
    // self-spread keeps a live transport signal in single mode
    CHECK(rs.rows.back().l_tl >= 0.0);

    TrainConfig single_off = single;
    single_off.single_mode_tl = false;
    const RunRecord ro = run(pair, single_off);
    for (const MetricsRow& row : ro.rows) {
        CHECK(row.l_tl == 0.0);
    }
}
