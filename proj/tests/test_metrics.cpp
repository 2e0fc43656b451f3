#include <doctest.h>

#include "medood/metrics.hpp"
#include "medood/rng.hpp"
#include "test_support.hpp"

using namespace medood;
using testsup::mask_of;

namespace {

BinaryMask random_mask(int h, int w, double density, Rng& rng) {
    BinaryMask m(h, w);
    for (auto& v : m.d) v = rng.next_double() < density ? 1 : 0;
    return m;
}

}  // namespace

TEST_CASE("class_iou basics") {
    const BinaryMask a = mask_of(4, 4, {0, 1, 5});
    CHECK(class_iou(a, a) == 1.0);
    CHECK(class_iou(BinaryMask(4, 4), BinaryMask(4, 4)) == 1.0);  // both empty
    // 100 px each, 50 overlapping -> 50 / 150.
    std::vector<std::size_t> gt_on(100), pred_on(100);
    for (std::size_t i = 0; i < 100; ++i) {
        gt_on[i] = i;
        pred_on[i] = 50 + i;
    }
    const double iou = class_iou(mask_of(10, 20, pred_on), mask_of(10, 20, gt_on));
    CHECK(iou == 50.0 / 150.0);
}

TEST_CASE("iou and dice are symmetric and bounded") {
    Rng rng(2);
    for (int i = 0; i < 50; ++i) {
        const BinaryMask a = random_mask(6, 6, 0.4, rng);
        const BinaryMask b = random_mask(6, 6, 0.4, rng);
        const double iou = class_iou(a, b);
        const double dice = class_dice(a, b);
        CHECK(iou == class_iou(b, a));
        CHECK(dice == class_dice(b, a));
        CHECK(iou >= 0.0);
        CHECK(iou <= 1.0);
        CHECK(dice >= 0.0);
        CHECK(dice <= 1.0);
        if (a.count() + b.count() > 0)
            CHECK(dice == doctest::Approx(2.0 * iou / (1.0 + iou)).epsilon(1e-12));
    }
}

TEST_CASE("metric equals one exactly when prediction matches ground truth") {
    Rng rng(3);
    const BinaryMask a = random_mask(5, 5, 0.5, rng);
    BinaryMask b = a;
    CHECK(class_iou(a, b) == 1.0);
    b.d[7] ^= 1;
    CHECK(class_iou(a, b) < 1.0);
}

TEST_CASE("shape mismatch is rejected") {
    CHECK_THROWS(class_iou(BinaryMask(2, 2), BinaryMask(2, 3)));
    CHECK_THROWS(class_dice(BinaryMask(4, 4), BinaryMask(2, 2)));
}

TEST_CASE("patch_miou averages over the class list") {
    const int h = 4, w = 4;
    SUBCASE("all classes exact") {
        ClassMasks pred, gt;
        for (int c = 0; c < 6; ++c) {
            pred.push_back(mask_of(h, w, {static_cast<std::size_t>(c)}));
            gt.push_back(mask_of(h, w, {static_cast<std::size_t>(c)}));
        }
        CHECK(patch_miou(pred, gt) == 1.0);
    }
    SUBCASE("all-empty prediction, two classes present") {
        ClassMasks pred(6, BinaryMask(h, w)), gt(6, BinaryMask(h, w));
        gt[0] = mask_of(h, w, {0, 1});
        gt[3] = mask_of(h, w, {5});
        CHECK(patch_miou(pred, gt) == 4.0 / 6.0);
    }
    SUBCASE("one class at a third, five empty-empty") {
        ClassMasks pred(6, BinaryMask(h, w)), gt(6, BinaryMask(h, w));
        pred[2] = mask_of(h, w, {0, 1});
        gt[2] = mask_of(h, w, {1, 2});  // intersection 1, union 3
        CHECK(patch_miou(pred, gt) == doctest::Approx((5.0 + 1.0 / 3.0) / 6.0).epsilon(1e-12));
    }
}

TEST_CASE("patch_dsc mirrors the iou conventions") {
    const int h = 10, w = 20;
    std::vector<std::size_t> gt_on(100), pred_on(100);
    for (std::size_t i = 0; i < 100; ++i) {
        gt_on[i] = i;
        pred_on[i] = 50 + i;
    }
    ClassMasks pred = {mask_of(h, w, pred_on)};
    ClassMasks gt = {mask_of(h, w, gt_on)};
    CHECK(patch_dsc(pred, gt) == 0.5);  // 100 / 200
    CHECK(patch_dsc({BinaryMask(h, w)}, {BinaryMask(h, w)}) == 1.0);
    CHECK(patch_dsc(pred, pred) == 1.0);
    CHECK_THROWS(patch_dsc(pred, ClassMasks(2, BinaryMask(h, w))));
}

TEST_CASE("aggregate averages per-patch reports") {
    const ClassList classes({"a", "b"});
    ClassMasks exact = {mask_of(2, 2, {0}), mask_of(2, 2, {1})};
    ClassMasks half = {mask_of(2, 2, {0}), BinaryMask(2, 2)};
    ClassMasks gt = exact;

    const PatchMetrics p1 = evaluate_patch("p1", exact, gt);
    const PatchMetrics p2 = evaluate_patch("p2", half, gt);
    CHECK(p1.miou == 1.0);
    CHECK(p2.miou == 0.5);

    const MetricsReport report = aggregate({p1, p2}, classes);
    CHECK(report.miou == 0.75);
    CHECK(report.patch_count == 2);
    CHECK(report.per_class_iou.at("a") == 1.0);
    CHECK(report.per_class_iou.at("b") == 0.5);

    const MetricsReport single = aggregate({p2}, classes);
    CHECK(single.miou == p2.miou);
    CHECK(single.dsc == p2.dsc);

    // Input order must not matter: patches are sorted by id internally.
    const MetricsReport swapped = aggregate({p2, p1}, classes);
    CHECK(swapped.miou == report.miou);
    CHECK(swapped.per_class_iou == report.per_class_iou);

    CHECK_THROWS(aggregate({}, classes));
}

TEST_CASE("all-empty predictor scores the closed-form absent-class mean") {
    const ClassList classes({"a", "b", "c"});
    Rng rng(8);
    std::vector<PatchMetrics> reports;
    double oracle = 0.0;
    for (int i = 0; i < 12; ++i) {
        ClassMasks gt, pred;
        int absent = 0;
        for (int c = 0; c < 3; ++c) {
            BinaryMask m = random_mask(4, 4, rng.next_double() * 0.5, rng);
            if (m.count() == 0) ++absent;
            gt.push_back(std::move(m));
            pred.push_back(BinaryMask(4, 4));
        }
        oracle += static_cast<double>(absent) / 3.0;
        reports.push_back(evaluate_patch("p" + std::to_string(i), pred, gt));
    }
    oracle /= 12.0;
    const MetricsReport report = aggregate(reports, classes);
    CHECK(report.miou == doctest::Approx(oracle).epsilon(1e-12));
}
