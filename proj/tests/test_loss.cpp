#include <doctest.h>

#include <cmath>

#include "medood/loss.hpp"
#include "medood/rng.hpp"

using namespace medood;

namespace {

double rel_err(double a, double b) {
    const double scale = std::max({std::abs(a), std::abs(b), 1e-8});
    return std::abs(a - b) / scale;
}

// Central finite difference of dice_loss in one coordinate.
double dice_fd(std::vector<double> pred, const std::uint8_t* gt, std::size_t i, double smooth) {
    const double h = 1e-6;
    pred[i] += h;
    const double up = dice_loss(pred.data(), gt, pred.size(), smooth);
    pred[i] -= 2 * h;
    const double down = dice_loss(pred.data(), gt, pred.size(), smooth);
    return (up - down) / (2 * h);
}

}  // namespace

TEST_CASE("dice loss worked values") {
    // All-one prediction over 4 pixels against an empty mask, smooth 1.
    std::vector<double> ones(4, 1.0);
    CHECK(dice_loss(ones.data(), nullptr, 4, 1.0) == 0.8);

    // All-zero prediction against the all-zero mask is a perfect OoD output.
    std::vector<double> zeros(4, 0.0);
    CHECK(dice_loss(zeros.data(), nullptr, 4, 1.0) == 0.0);

    // Binary prediction equal to a nonempty mask: loss vanishes up to smoothing.
    std::vector<double> pred = {1.0, 0.0, 1.0, 0.0};
    std::vector<std::uint8_t> gt = {1, 0, 1, 0};
    CHECK(dice_loss(pred.data(), gt.data(), 4, 1.0) == 0.0);
    const double s = 0.5;
    CHECK(dice_loss(pred.data(), gt.data(), 4, s) <= s / (2.0 * 2.0 + s));
}

TEST_CASE("dice loss stays in [0, 1)") {
    Rng rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> pred(16);
        std::vector<std::uint8_t> gt(16);
        for (auto& v : pred) v = rng.next_double();
        for (auto& v : gt) v = rng.next_double() < 0.4 ? 1 : 0;
        const double loss = dice_loss(pred.data(), gt.data(), 16, 1.0);
        CHECK(loss >= 0.0);
        CHECK(loss < 1.0);
    }
}

TEST_CASE("dice gradient matches central differences") {
    Rng rng(23);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> pred(16);
        std::vector<std::uint8_t> gt(16);
        for (auto& v : pred) v = 0.05 + 0.9 * rng.next_double();
        for (auto& v : gt) v = rng.next_double() < 0.5 ? 1 : 0;
        const std::uint8_t* g = trial % 2 ? gt.data() : nullptr;

        std::vector<double> grad(16, 0.0);
        dice_loss_grad(pred.data(), g, 16, 1.0, 1.0, grad.data());
        for (std::size_t i = 0; i < 16; ++i)
            CHECK(rel_err(grad[i], dice_fd(pred, g, i, 1.0)) < 1e-6);

        // The scale factor multiplies, and the gradient accumulates.
        std::vector<double> scaled(16, 0.0);
        dice_loss_grad(pred.data(), g, 16, 1.0, 2.5, scaled.data());
        dice_loss_grad(pred.data(), g, 16, 1.0, 2.5, scaled.data());
        for (std::size_t i = 0; i < 16; ++i)
            CHECK(scaled[i] == doctest::Approx(5.0 * grad[i]).epsilon(1e-12));
    }
}

TEST_CASE("mask overload matches the raw pointer form") {
    Rng rng(5);
    std::vector<float> pred(9);
    for (auto& v : pred) v = static_cast<float>(rng.next_double());
    BinaryMask gt(3, 3);
    gt.d = {1, 0, 0, 1, 1, 0, 0, 0, 1};
    CHECK(dice_loss(pred, gt, 1.0) == dice_loss(pred.data(), gt.d.data(), 9, 1.0));
}

namespace {

// Probability maps engineered so each (sample, class) hits an exact dice loss:
// ID classes carry value a on the two ground-truth pixels, OoD classes a single
// pixel summing to the target mass.
struct WorkedBatch {
    Tensor4<double> probs{2, 2, 2, 2};
    std::vector<ClassMasks> gts;
    std::vector<std::uint8_t> is_ood{0, 1};

    WorkedBatch() {
        ClassMasks id_gt(2, BinaryMask(2, 2));
        id_gt[0].d = {1, 1, 0, 0};
        id_gt[1].d = {0, 0, 1, 1};
        ClassMasks ood_gt(2, BinaryMask(2, 2));
        gts = {id_gt, ood_gt};

        // dice 0.4: (4a+1)/(2a+3) = 0.6 -> a = 2/7; dice 0.2 -> a = 7/12.
        probs.at(0, 0, 0, 0) = 2.0 / 7.0;
        probs.at(0, 0, 0, 1) = 2.0 / 7.0;
        probs.at(0, 1, 1, 0) = 7.0 / 12.0;
        probs.at(0, 1, 1, 1) = 7.0 / 12.0;
        // OoD dice 0.1: 1 - 1/(m+1) -> mass 1/9; dice 0.3 -> mass 3/7.
        probs.at(1, 0, 0, 0) = 1.0 / 9.0;
        probs.at(1, 1, 0, 0) = 3.0 / 7.0;
    }
};

}  // namespace

TEST_CASE("segmentation loss reproduces the mixed-batch arithmetic") {
    WorkedBatch batch;
    const double loss = seg_loss(batch.probs, batch.gts, batch.is_ood, 1.0, 1.0);
    // (0.4 + 0.1 + 0.2 + 0.3) / 2.
    CHECK(loss == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("segmentation loss is linear in lambda over OoD samples") {
    WorkedBatch batch;
    batch.is_ood = {1, 1};
    const double base = seg_loss(batch.probs, batch.gts, batch.is_ood, 1.0, 1.0);
    const double doubled = seg_loss(batch.probs, batch.gts, batch.is_ood, 2.0, 1.0);
    CHECK(doubled == doctest::Approx(2.0 * base).epsilon(1e-12));
    CHECK(seg_loss(batch.probs, batch.gts, batch.is_ood, 0.0, 1.0) == 0.0);
}

TEST_CASE("a perfect batch scores zero") {
    Tensor4<double> probs(2, 1, 2, 2);
    ClassMasks id_gt = {BinaryMask(2, 2)};
    id_gt[0].d = {1, 0, 0, 1};
    probs.at(0, 0, 0, 0) = 1.0;
    probs.at(0, 0, 1, 1) = 1.0;
    // Sample 1 is OoD with an all-zero prediction.
    std::vector<ClassMasks> gts = {id_gt, {BinaryMask(2, 2)}};
    CHECK(seg_loss(probs, gts, {0, 1}, 1.0, 1.0) == 0.0);
}

TEST_CASE("the loss splits by role") {
    Rng rng(41);
    const int n = 4, c = 3;
    Tensor4<double> probs(n, c, 4, 4);
    for (auto& v : probs.d) v = rng.next_double();
    std::vector<ClassMasks> gts;
    std::vector<std::uint8_t> is_ood = {0, 1, 0, 1};
    for (int i = 0; i < n; ++i) {
        ClassMasks masks;
        for (int cls = 0; cls < c; ++cls) {
            BinaryMask m(4, 4);
            if (!is_ood[i])
                for (auto& v : m.d) v = rng.next_double() < 0.4 ? 1 : 0;
            masks.push_back(std::move(m));
        }
        gts.push_back(std::move(masks));
    }
    const double lambda = 1.7;
    const double mixed = seg_loss(probs, gts, is_ood, lambda, 1.0);

    auto sub_batch = [&](std::uint8_t role) {
        Tensor4<double> p(2, c, 4, 4);
        std::vector<ClassMasks> g;
        int out = 0;
        for (int i = 0; i < n; ++i) {
            if (is_ood[i] != role) continue;
            std::copy(probs.sample(i), probs.sample(i) + probs.sample_size(), p.sample(out++));
            g.push_back(gts[i]);
        }
        return std::make_pair(p, g);
    };
    auto [id_probs, id_gts] = sub_batch(0);
    auto [ood_probs, ood_gts] = sub_batch(1);
    const double id_part = seg_loss(id_probs, id_gts, {0, 0}, lambda, 1.0);
    const double ood_part = seg_loss(ood_probs, ood_gts, {1, 1}, 1.0, 1.0);
    CHECK(mixed == doctest::Approx(id_part + lambda * ood_part).epsilon(1e-12));
}

TEST_CASE("segmentation loss gradient matches central differences") {
    Rng rng(59);
    const int n = 3, c = 2;
    Tensor4<double> probs(n, c, 4, 4);
    for (auto& v : probs.d) v = 0.05 + 0.9 * rng.next_double();
    std::vector<ClassMasks> gts;
    std::vector<std::uint8_t> is_ood = {0, 1, 0};
    for (int i = 0; i < n; ++i) {
        ClassMasks masks;
        for (int cls = 0; cls < c; ++cls) {
            BinaryMask m(4, 4);
            if (!is_ood[i])
                for (auto& v : m.d) v = rng.next_double() < 0.5 ? 1 : 0;
            masks.push_back(std::move(m));
        }
        gts.push_back(std::move(masks));
    }
    const double lambda = 0.8;
    Tensor4<double> grad;
    seg_loss(probs, gts, is_ood, lambda, 1.0, &grad);
    REQUIRE(grad.d.size() == probs.d.size());

    const double h = 1e-6;
    double worst = 0.0;
    for (std::size_t i = 0; i < probs.d.size(); ++i) {
        Tensor4<double> shifted = probs;
        shifted.d[i] += h;
        const double up = seg_loss(shifted, gts, is_ood, lambda, 1.0);
        shifted.d[i] -= 2 * h;
        const double down = seg_loss(shifted, gts, is_ood, lambda, 1.0);
        worst = std::max(worst, rel_err(grad.d[i], (up - down) / (2 * h)));
    }
    CHECK(worst < 1e-4);
    CHECK(worst < 1e-6);  // double precision should do much better

    // The gradient buffer is overwritten, not accumulated.
    Tensor4<double> grad2 = grad;
    seg_loss(probs, gts, is_ood, lambda, 1.0, &grad2);
    CHECK(grad2.d == grad.d);
}
