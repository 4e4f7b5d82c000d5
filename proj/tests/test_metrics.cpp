#include <vector>

#include "cegate/metrics.hpp"
#include "cegate/rng.hpp"
#include "doctest.h"

using namespace cegate;

TEST_CASE("perfect prediction gives mIoU 1") {
    std::vector<int> y = {0, 1, 2, 3, 4, 2, 1, 0};
    IouReport r = mean_iou(y, y, 5);
    CHECK(r.miou == 1.0);
    for (std::size_t c = 0; c < 5; ++c)
        CHECK(r.per_class[c] == 1.0);
}

TEST_CASE("disjoint single classes give mIoU 0") {
    std::vector<int> truth(10, 0), pred(10, 1);
    IouReport r = mean_iou(truth, pred, 2);
    CHECK(r.miou == 0.0);
    CHECK(r.per_class[0] == 0.0);
    CHECK(r.per_class[1] == 0.0);
}

TEST_CASE("classes absent from both sides are excluded from the mean") {
    std::vector<int> truth = {0, 0, 1, 1};
    std::vector<int> pred = {0, 1, 1, 1};
    IouReport r = mean_iou(truth, pred, 5);
    CHECK(r.class_present[0]);
    CHECK(r.class_present[1]);
    for (std::size_t c = 2; c < 5; ++c) {
        CHECK(!r.class_present[c]);
        CHECK(r.per_class[c] == -1.0);
    }
    // class 0: TP 1, FP 0, FN 1 -> 1/2; class 1: TP 2, FP 1, FN 0 -> 2/3
    CHECK(r.per_class[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(r.per_class[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(r.miou == doctest::Approx((0.5 + 2.0 / 3.0) / 2.0).epsilon(1e-15));
}

TEST_CASE("random 2-class case matches a hand confusion-matrix oracle") {
    Rng rng(31);
    std::vector<int> truth, pred;
    for (int i = 0; i < 500; ++i) {
        truth.push_back(static_cast<int>(rng.below(2)));
        pred.push_back(static_cast<int>(rng.below(2)));
    }
    IouReport r = mean_iou(truth, pred, 2);

    double n[2][2] = {{0, 0}, {0, 0}};
    for (std::size_t i = 0; i < truth.size(); ++i) n[truth[i]][pred[i]] += 1.0;
    double iou0 = n[0][0] / (n[0][0] + n[0][1] + n[1][0]);
    double iou1 = n[1][1] / (n[1][1] + n[1][0] + n[0][1]);
    CHECK(std::abs(r.per_class[0] - iou0) < 1e-12);
    CHECK(std::abs(r.per_class[1] - iou1) < 1e-12);
    CHECK(std::abs(r.miou - 0.5 * (iou0 + iou1)) < 1e-12);
}

TEST_CASE("confusion matrix accumulates across batches") {
    ConfusionMatrix cm(3);
    std::vector<int> t1 = {0, 1}, p1 = {0, 2};
    std::vector<int> t2 = {2, 2}, p2 = {2, 0};
    cm.add(t1, p1);
    cm.add(t2, p2);
    CHECK(cm.count(0, 0) == 1);
    CHECK(cm.count(1, 2) == 1);
    CHECK(cm.count(2, 2) == 1);
    CHECK(cm.count(2, 0) == 1);
    CHECK(cm.false_positive(0) == 1);
    CHECK(cm.false_negative(2) == 1);
}

TEST_CASE("confusion matrix input validation") {
    ConfusionMatrix cm(3);
    std::vector<int> truth = {0, 1}, short_pred = {0};
    CHECK_THROWS_AS(cm.add(truth, short_pred), std::invalid_argument);
    std::vector<int> bad = {0, 3};
    CHECK_THROWS_AS(cm.add(truth, bad), std::out_of_range);
    std::vector<int> neg = {0, -1};
    CHECK_THROWS_AS(cm.add(neg, truth), std::out_of_range);
}

TEST_CASE("iou_report rejects an empty matrix") {
    ConfusionMatrix cm(4);
    CHECK_THROWS_AS(iou_report(cm), std::invalid_argument);
}
