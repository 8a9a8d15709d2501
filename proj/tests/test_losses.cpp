#include <cmath>
#include <optional>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"

#include "chatty/errors.hpp"
#include "chatty/losses.hpp"
#include "chatty/rng.hpp"
#include "chatty/tape.hpp"

using namespace chatty;

namespace {

Mat make_mat(std::initializer_list<std::initializer_list<Real>> rows) {
    const Index r = static_cast<Index>(rows.size());
    const Index c = static_cast<Index>(rows.begin()->size());
    Mat m(r, c);
    Index i = 0;
    for (const auto& row : rows) {
        Index j = 0;
        for (Real v : row) m(i, j++) = v;
        ++i;
    }
    return m;
}

Mat column(std::initializer_list<Real> values) {
    Mat m(static_cast<Index>(values.size()), 1);
    Index i = 0;
    for (Real v : values) m(i++, 0) = v;
    return m;
}

}  // namespace

TEST_CASE("cross entropy: confident correct logits cost almost nothing") {
    Tape tape;
    const Mat logits = make_mat({{30.0, 0.0, 0.0}, {0.0, 30.0, 0.0}});
    CHECK(cross_entropy(tape.constant(logits), {0, 1}).scalar() < 1e-6);
}

TEST_CASE("cross entropy: uniform logits cost ln(c)") {
    Tape tape;
    const Mat logits = Mat::Zero(3, 4);
    CHECK(cross_entropy(tape.constant(logits), {0, 1, 3}).scalar() ==
          doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("cross entropy matches the scalar oracle") {
    Rng rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        const Index b = 1 + static_cast<Index>(rng.uniform_int(6));
        const Index c = 2 + static_cast<Index>(rng.uniform_int(5));
        const Mat logits = oracle::random_mat(rng, b, c, -5.0, 5.0);
        std::vector<int> y;
        for (Index i = 0; i < b; ++i) y.push_back(static_cast<int>(rng.uniform_int(c)));
        Tape tape;
        CHECK(cross_entropy(tape.constant(logits), y).scalar() ==
              doctest::Approx(oracle::cross_entropy(logits, y)).epsilon(1e-10));
    }
}

TEST_CASE("cross entropy rejects bad labels and bad counts") {
    Tape tape;
    const Mat logits = Mat::Zero(2, 3);
    CHECK_THROWS_AS(cross_entropy(tape.constant(logits), {0, 3}), IndexError);
    CHECK_THROWS_AS(cross_entropy(tape.constant(logits), {0, -1}), IndexError);
    CHECK_THROWS_AS(cross_entropy(tape.constant(logits), {0}), ShapeError);
}

TEST_CASE("adversarial loss: an undecided discriminator scores 2 ln 2") {
    Tape tape;
    const Mat half = Mat::Constant(5, 1, 0.5);
    CHECK(adversarial_loss(tape.constant(half), tape.constant(half)).scalar() ==
          doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("adversarial loss: perfect discrimination is nearly free") {
    Tape tape;
    const Mat src = Mat::Constant(3, 1, 1.0);
    const Mat tgt = Mat::Constant(3, 1, 0.0);
    CHECK(adversarial_loss(tape.constant(src), tape.constant(tgt)).scalar() < 1e-6);
}

TEST_CASE("adversarial loss matches the scalar oracle on mixed batches") {
    Rng rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        const Index bs = 1 + static_cast<Index>(rng.uniform_int(5));
        const Index bt = 1 + static_cast<Index>(rng.uniform_int(5));
        std::vector<Real> ds, dt;
        for (Index i = 0; i < bs; ++i) ds.push_back(rng.uniform(0.0, 1.0));
        for (Index i = 0; i < bt; ++i) dt.push_back(rng.uniform(0.0, 1.0));
        Mat ms(bs, 1), mt(bt, 1);
        for (Index i = 0; i < bs; ++i) ms(i, 0) = ds[static_cast<std::size_t>(i)];
        for (Index i = 0; i < bt; ++i) mt(i, 0) = dt[static_cast<std::size_t>(i)];
        Tape tape;
        CHECK(adversarial_loss(tape.constant(ms), tape.constant(mt)).scalar() ==
              doctest::Approx(oracle::adversarial(ds, dt)).epsilon(1e-12));
    }
}

TEST_CASE("adversarial loss rejects values outside [0,1] and non-columns") {
    Tape tape;
    const Mat ok = column({0.5, 0.5});
    CHECK_THROWS_AS(adversarial_loss(tape.constant(column({1.2, 0.5})), tape.constant(ok)),
                    DomainError);
    CHECK_THROWS_AS(adversarial_loss(tape.constant(ok), tape.constant(column({-0.1, 0.5}))),
                    DomainError);
    CHECK_THROWS_AS(adversarial_loss(tape.constant(Mat::Constant(2, 2, 0.5)), tape.constant(ok)),
                    ShapeError);
}

TEST_CASE("transport yield: identity transports give the identity") {
    Tape tape;
    const Mat eye = Mat::Identity(2, 2);
    const Mat y = transport_yield(tape.constant(eye), tape.constant(eye)).value();
    CHECK((y - eye).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("transport yield: all-ones transports give the row-dot matrix") {
    Tape tape;
    const Mat ones = Mat::Ones(2, 2);
    const Mat y = transport_yield(tape.constant(ones), tape.constant(ones)).value();
    CHECK((y - Mat::Constant(2, 2, 2.0)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("transport yield is linear in the class matrix") {
    Rng rng(17);
    const Mat t1 = oracle::random_mat(rng, 3, 4);
    const Mat t2 = oracle::random_mat(rng, 3, 4);
    const Mat eye2 = 2.0 * Mat::Identity(4, 4);
    Tape tape;
    const Mat base = transport_yield(tape.constant(t1), tape.constant(t2)).value();
    const Mat doubled = transport_yield(tape.constant(t1), tape.constant(t2), eye2).value();
    CHECK((doubled - 2.0 * base).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("transport loss edge values") {
    Tape tape;
    SUBCASE("a single sample has no off-diagonal mass") {
        const Mat t = make_mat({{3.0, -2.0}});
        CHECK(transport_loss(transport_yield(tape.constant(t), tape.constant(t))).scalar() == 0.0);
    }
    SUBCASE("identity yield") {
        CHECK(transport_loss(tape.constant(Mat(Mat::Identity(2, 2)))).scalar() == 0.0);
    }
    SUBCASE("uniform yield of twos") {
        CHECK(transport_loss(tape.constant(Mat(Mat::Constant(2, 2, 2.0)))).scalar() == 4.0);
    }
    SUBCASE("antisymmetric yield cancels") {
        CHECK(transport_loss(tape.constant(make_mat({{0.0, 1.0}, {-1.0, 0.0}}))).scalar() == 0.0);
    }
    SUBCASE("non-square yield is rejected") {
        CHECK_THROWS_AS(transport_loss(tape.constant(Mat::Zero(2, 3))), ShapeError);
    }
}

TEST_CASE("transport loss matches the triple-loop oracle") {
    Rng rng(53);
    for (int trial = 0; trial < 30; ++trial) {
        const Index b = 1 + static_cast<Index>(rng.uniform_int(6));
        const Index c = 1 + static_cast<Index>(rng.uniform_int(5));
        const Mat t1 = oracle::random_mat(rng, b, c, -2.0, 2.0);
        const Mat t2 = oracle::random_mat(rng, b, c, -2.0, 2.0);
        Tape tape;
        const Real got =
            transport_loss(transport_yield(tape.constant(t1), tape.constant(t2))).scalar();
        CHECK(got == doctest::Approx(oracle::transport_plain(t1, t2)).epsilon(1e-10));

        const Mat info = oracle::random_mat(rng, c, c, -1.0, 1.0);
        Tape tape2;
        const Real got_info =
            transport_loss(transport_yield(tape2.constant(t1), tape2.constant(t2), info)).scalar();
        CHECK(got_info == doctest::Approx(oracle::transport_plain(t1, t2, &info)).epsilon(1e-10));
    }
}

TEST_CASE("transport loss gradient has the sign-times-hollow-matrix form") {
    // d|sum(Y)-trace(Y)|/dT1 = s * (J - I) * T2 with s the sign of the spread.
    const Mat t1 = make_mat({{1.0, 0.0}, {0.5, 2.0}});
    const Mat t2 = make_mat({{2.0, 1.0}, {0.0, 1.0}});
    Tape tape;
    Node loss = transport_loss(transport_yield(tape.leaf(t1), tape.leaf(t2)));
    tape.backward(loss);
    const Mat hollow = Mat::Ones(2, 2) - Mat::Identity(2, 2);
    const Real spread = (t1 * t2.transpose()).sum() - (t1 * t2.transpose()).trace();
    const Real s = spread > 0.0 ? 1.0 : -1.0;
    CHECK((*tape.grad_of(t1) - s * hollow * t2).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((*tape.grad_of(t2) - s * hollow.transpose() * t1).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("cosine transport loss: orthogonal cross pairs score zero") {
    Tape tape;
    const Mat t1 = make_mat({{1.0, 0.0}, {0.0, 1.0}});
    const Mat t2 = make_mat({{1.0, 0.0}, {0.0, 1.0}});
    // Off-diagonal pairs (row i of t1 vs row j of t2, i != j) are orthogonal.
    CHECK(transport_loss_cos(tape.constant(t1), tape.constant(t2)).scalar() <= 1e-7);
}

TEST_CASE("cosine transport loss: identical unit rows score about B(B-1)/... ") {
    Tape tape;
    const Mat t = make_mat({{3.0, 4.0}, {3.0, 4.0}});
    // Both off-diagonal cosines are 1, so the loss is 2 up to the norm epsilon.
    CHECK(transport_loss_cos(tape.constant(t), tape.constant(t)).scalar() ==
          doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("cosine transport loss matches the scalar oracle") {
    Rng rng(71);
    for (int trial = 0; trial < 20; ++trial) {
        const Mat t1 = oracle::random_mat(rng, 4, 3, -2.0, 2.0);
        const Mat t2 = oracle::random_mat(rng, 4, 3, -2.0, 2.0);
        Tape tape;
        CHECK(transport_loss_cos(tape.constant(t1), tape.constant(t2)).scalar() ==
              doctest::Approx(oracle::transport_cos(t1, t2)).epsilon(1e-9));
    }
}

TEST_CASE("cosine transport loss ignores positive row rescaling") {
    Rng rng(72);
    const Mat t1 = oracle::random_mat(rng, 3, 3);
    const Mat t2 = oracle::random_mat(rng, 3, 3);
    Tape tape;
    const Real base = transport_loss_cos(tape.constant(t1), tape.constant(t2)).scalar();
    Tape tape2;
    const Real scaled =
        transport_loss_cos(tape2.constant(Mat(5.0 * t1)), tape2.constant(Mat(0.25 * t2))).scalar();
    CHECK(scaled == doctest::Approx(base).epsilon(1e-6));
}

TEST_CASE("cosine transport loss survives an all-zero row") {
    Tape tape;
    const Mat t1 = make_mat({{0.0, 0.0}, {1.0, 2.0}});
    const Mat t2 = make_mat({{1.0, 1.0}, {0.0, 0.0}});
    Node loss = transport_loss_cos(tape.leaf(t1), tape.leaf(t2));
    CHECK(std::isfinite(loss.scalar()));
    tape.backward(loss);
    CHECK(all_finite(*tape.grad_of(t1)));
    CHECK(all_finite(*tape.grad_of(t2)));
}

TEST_CASE("embedded transport loss specializes to the plain one at M = I") {
    Rng rng(81);
    const Mat t1 = oracle::random_mat(rng, 3, 4);
    const Mat t2 = oracle::random_mat(rng, 3, 4);
    Tape tape;
    const Real plain =
        transport_loss(transport_yield(tape.constant(t1), tape.constant(t2))).scalar();
    Tape tape2;
    const Real embedded =
        transport_loss_embedded(tape2.constant(t1), tape2.constant(t2), Mat::Identity(4, 4))
            .scalar();
    CHECK(embedded == doctest::Approx(plain).epsilon(1e-12));
}

TEST_CASE("embedded transport loss: a zero embedding kills the loss") {
    Rng rng(82);
    Tape tape;
    const Mat t1 = oracle::random_mat(rng, 3, 4);
    const Mat t2 = oracle::random_mat(rng, 3, 4);
    CHECK(transport_loss_embedded(tape.constant(t1), tape.constant(t2), Mat::Zero(4, 4)).scalar() ==
          0.0);
}

TEST_CASE("embedded transport loss matches the triple-loop oracle") {
    Rng rng(83);
    for (int trial = 0; trial < 20; ++trial) {
        const Mat t1 = oracle::random_mat(rng, 3, 4, -2.0, 2.0);
        const Mat t2 = oracle::random_mat(rng, 3, 4, -2.0, 2.0);
        const Mat embed = oracle::random_mat(rng, 4, 4, -1.0, 1.0);
        Tape tape;
        CHECK(transport_loss_embedded(tape.constant(t1), tape.constant(t2), embed).scalar() ==
              doctest::Approx(oracle::transport_plain(t1, t2, &embed)).epsilon(1e-10));
    }
}

TEST_CASE("class-confusion loss: one-hot rows cost nothing") {
    Tape tape;
    const Mat z = make_mat({{80.0, 0.0, 0.0}, {0.0, 80.0, 0.0}, {0.0, 0.0, 80.0}});
    CHECK(mcc_loss(tape.constant(z), 1.0).scalar() < 1e-9);
}

TEST_CASE("class-confusion loss: uniform rows cost (c-1)/c") {
    for (Index c = 2; c <= 6; ++c) {
        Tape tape;
        const Mat z = Mat::Zero(5, c);
        const Real want = static_cast<Real>(c - 1) / static_cast<Real>(c);
        CHECK(mcc_loss(tape.constant(z), 2.5).scalar() == doctest::Approx(want).epsilon(1e-9));
    }
}

TEST_CASE("class-confusion loss matches the scalar oracle") {
    Rng rng(91);
    for (int trial = 0; trial < 25; ++trial) {
        const Index b = 2 + static_cast<Index>(rng.uniform_int(7));
        const Index c = 2 + static_cast<Index>(rng.uniform_int(4));
        const Mat z = oracle::random_mat(rng, b, c, -3.0, 3.0);
        const Real temperature = rng.uniform(0.7, 3.0);
        Tape tape;
        CHECK(mcc_loss(tape.constant(z), temperature).scalar() ==
              doctest::Approx(oracle::mcc(z, temperature)).epsilon(1e-9));
    }
}

TEST_CASE("class-confusion loss stays inside [0, 1]") {
    Rng rng(92);
    for (int trial = 0; trial < 20; ++trial) {
        const Mat z = oracle::random_mat(rng, 6, 4, -10.0, 10.0);
        Tape tape;
        const Real v = mcc_loss(tape.constant(z), 2.5).scalar();
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("class-confusion loss ignores per-row logit shifts") {
    Rng rng(93);
    const Mat z = oracle::random_mat(rng, 5, 3, -2.0, 2.0);
    Mat shifted = z;
    for (Index i = 0; i < z.rows(); ++i) shifted.row(i).array() += rng.uniform(-30.0, 30.0);
    Tape tape;
    const Real a = mcc_loss(tape.constant(z), 2.0).scalar();
    Tape tape2;
    const Real b = mcc_loss(tape2.constant(shifted), 2.0).scalar();
    CHECK(a == doctest::Approx(b).epsilon(1e-10));
}

TEST_CASE("class-confusion loss rejects a non-positive temperature") {
    Tape tape;
    CHECK_THROWS_AS(mcc_loss(tape.constant(Mat::Zero(2, 2)), 0.0), ParamError);
}

TEST_CASE("total loss composes terms with the configured weights") {
    Tape tape;
    Node l_c = tape.constant_scalar(0.7);
    Node l_adv = tape.constant_scalar(1.3);
    Node l_tl = tape.constant_scalar(4.0);
    Node l_mcc = tape.constant_scalar(0.25);

    SUBCASE("zero weights leave exactly the classification term") {
        LossWeights w;
        w.lambda1 = 0.0;
        w.lambda2 = 0.0;
        LossBreakdown out;
        Node total = total_loss(l_c, l_adv, l_tl, std::nullopt, w, &out);
        CHECK(total.scalar() == 0.7);
        CHECK(out.l_total == 0.7);
        CHECK(out.l_mcc == 0.0);
    }
    SUBCASE("the transport term scales linearly in lambda2") {
        LossWeights w;
        w.lambda1 = 0.5;
        w.lambda2 = 0.01;
        const Real base = total_loss(l_c, l_adv, l_tl, std::nullopt, w).scalar();
        w.lambda2 = 0.02;
        const Real doubled = total_loss(l_c, l_adv, l_tl, std::nullopt, w).scalar();
        CHECK(doubled - base == doctest::Approx(0.01 * 4.0).epsilon(1e-12));
    }
    SUBCASE("the confusion term is added unweighted when present") {
        LossWeights w;
        w.lambda1 = 1.0;
        w.lambda2 = 0.0;
        LossBreakdown out;
        Node total = total_loss(l_c, l_adv, l_tl, l_mcc, w, &out);
        CHECK(total.scalar() == doctest::Approx(0.7 + 1.3 + 0.25).epsilon(1e-15));
        CHECK(out.l_mcc == 0.25);
        CHECK(out.l_total == total.scalar());
    }
}

TEST_CASE("loss weights validate their contract") {
    LossWeights w;
    CHECK_NOTHROW(w.validate(3));
    SUBCASE("negative adversarial weight") {
        w.lambda1 = -0.1;
        CHECK_THROWS_AS(w.validate(3), ParamError);
    }
    SUBCASE("negative transport weight") {
        w.lambda2 = -1.0;
        CHECK_THROWS_AS(w.validate(3), ParamError);
    }
    SUBCASE("non-positive temperature") {
        w.temperature = 0.0;
        CHECK_THROWS_AS(w.validate(3), ParamError);
    }
    SUBCASE("class matrix of the wrong shape") {
        w.class_info = Mat::Identity(2, 2);
        CHECK_THROWS_AS(w.validate(3), ShapeError);
    }
    SUBCASE("published preset weights are accepted") {
        w.lambda2 = 0.0016;
        CHECK_NOTHROW(w.validate(31));
        w.lambda2 = 0.0002;
        CHECK_NOTHROW(w.validate(65));
    }
}

TEST_CASE("every loss term is finite on random but in-contract inputs") {
    Rng rng(101);
    for (int trial = 0; trial < 10; ++trial) {
        Tape tape;
        const Mat logits = oracle::random_mat(rng, 4, 3, -20.0, 20.0);
        std::vector<int> y = {0, 2, 1, 1};
        const Mat probs = oracle::random_mat(rng, 4, 1, 0.0, 1.0);
        const Mat t1 = oracle::random_mat(rng, 4, 3, -5.0, 5.0);
        const Mat t2 = oracle::random_mat(rng, 4, 3, -5.0, 5.0);

        CHECK(std::isfinite(cross_entropy(tape.constant(logits), y).scalar()));
        CHECK(std::isfinite(
            adversarial_loss(tape.constant(probs), tape.constant(probs)).scalar()));
        CHECK(std::isfinite(
            transport_loss(transport_yield(tape.constant(t1), tape.constant(t2))).scalar()));
        CHECK(std::isfinite(transport_loss_cos(tape.constant(t1), tape.constant(t2)).scalar()));
        CHECK(std::isfinite(mcc_loss(tape.constant(logits), 2.5).scalar()));
    }
}
