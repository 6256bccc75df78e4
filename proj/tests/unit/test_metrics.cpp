#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "hdc/errors.hpp"
#include "hdc/metrics.hpp"
#include "hdc/rng.hpp"

using namespace hdc;
using namespace hdc::metrics;

namespace {

BinaryMask rect(std::size_t h, std::size_t w, std::size_t y0, std::size_t x0, std::size_t y1, std::size_t x1) {
    BinaryMask m(h, w);
    for (std::size_t y = y0; y < y1; ++y)
        for (std::size_t x = x0; x < x1; ++x) m.set(y, x);
    return m;
}

LabelMap labels_from(const BinaryMask& m, std::size_t h, std::size_t w) {
    LabelMap l(h, w);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) l(y, x) = m.get(y, x) ? 1 : 0;
    return l;
}

}  // namespace

TEST(Dice, Examples) {
    const auto a = rect(4, 4, 1, 0, 2, 4);
    BinaryMask b(4, 4);
    b.set(1, 0);
    b.set(1, 1);
    b.set(2, 0);
    b.set(2, 1);
    EXPECT_EQ(dice(a, a), 1.0);
    EXPECT_EQ(dice(a, rect(4, 4, 3, 0, 4, 4)), 0.0);
    EXPECT_EQ(dice(a, b), 0.5);
    EXPECT_THROW(dice(a, BinaryMask(5, 4)), ContractError);
}

TEST(Boundary, FilledSquare) {
    const auto m = rect(8, 8, 2, 2, 6, 6);
    EXPECT_EQ(m.boundary().size(), 12u);  // 4x4 square minus its 2x2 interior
    EXPECT_EQ(rect(4, 4, 0, 0, 4, 4).boundary().size(), 12u);  // image border counts as outside
}

TEST(Hausdorff, Examples) {
    const auto a = rect(10, 10, 2, 2, 6, 6);
    EXPECT_EQ(hausdorff(a, a).value, 0.0);
    const std::pair<int, int> p[] = {{0, 0}}, q[] = {{3, 4}};
    EXPECT_EQ(hausdorff(BinaryMask::from_points(8, 8, p), BinaryMask::from_points(8, 8, q)).value, 5.0);
}

TEST(Hausdorff, PercentileDropsOutlier) {
    std::vector<std::pair<int, int>> la, lb;
    for (int c = 0; c < 99; ++c) {
        la.emplace_back(5, c);
        lb.emplace_back(6, c);
    }
    la.emplace_back(16, 50);
    const auto a = BinaryMask::from_points(20, 100, la), b = BinaryMask::from_points(20, 100, lb);
    ASSERT_EQ(a.boundary().size(), 100u);
    EXPECT_EQ(hausdorff(a, b).value, 10.0);
    EXPECT_LE(hausdorff(a, b, 95).value, 1.0);
}

TEST(NearestRank, ByHand) {
    std::vector<double> v;
    for (int i = 1; i <= 20; ++i) v.push_back(i);
    EXPECT_EQ(nearest_rank(v, 95), 19.0);
    EXPECT_EQ(nearest_rank(v, 100), 20.0);
    EXPECT_EQ(nearest_rank({3.0}, 50), 3.0);
}

TEST(Asd, Examples) {
    const auto a = rect(10, 10, 2, 2, 6, 6);
    EXPECT_EQ(asd(a, a).value, 0.0);
    const std::pair<int, int> p[] = {{1, 1}}, q[] = {{4, 5}};
    EXPECT_EQ(asd(BinaryMask::from_points(8, 8, p), BinaryMask::from_points(8, 8, q)).value, 5.0);
    std::vector<std::pair<int, int>> la, lb;
    for (int r = 1; r <= 10; ++r) {
        la.emplace_back(r, 2);
        lb.emplace_back(r, 5);
    }
    EXPECT_EQ(asd(BinaryMask::from_points(12, 12, la), BinaryMask::from_points(12, 12, lb)).value, 3.0);
}

TEST(Distances, EmptyMaskIsDegenerate) {
    const auto a = rect(6, 8, 1, 1, 3, 3);
    const BinaryMask empty(6, 8);
    const auto d = hausdorff(a, empty);
    EXPECT_TRUE(d.degenerate);
    EXPECT_EQ(d.value, std::hypot(6.0, 8.0));
    EXPECT_TRUE(asd(empty, a).degenerate);
}

TEST(Distances, RandomProperties) {
    SeededRng rng(5);
    for (int n = 0; n < 300; ++n) {
        auto r = [&](std::size_t lim) { return std::size_t(rng.below(lim)); };
        const std::size_t y0 = r(10), x0 = r(10), y1 = y0 + 1 + r(10), x1 = x0 + 1 + r(10);
        const std::size_t v0 = r(10), u0 = r(10), v1 = v0 + 1 + r(10), u1 = u0 + 1 + r(10);
        const auto a = rect(24, 24, y0, x0, y1, x1), b = rect(24, 24, v0, u0, v1, u1);
        EXPECT_EQ(dice(a, b), dice(b, a));
        EXPECT_EQ(hausdorff(a, b).value, hausdorff(b, a).value);
        EXPECT_LE(hausdorff(a, b, 95).value, hausdorff(a, b).value);
        EXPECT_NEAR(asd(a, b).value, asd(b, a).value, 1e-12);
        // Translating both masks together leaves every distance unchanged.
        const auto a2 = rect(24, 24, y0 + 2, x0 + 1, y1 + 2, x1 + 1), b2 = rect(24, 24, v0 + 2, u0 + 1, v1 + 2, u1 + 1);
        EXPECT_EQ(hausdorff(a, b).value, hausdorff(a2, b2).value);
    }
}

TEST(Report, PerfectAndEmptyPredictions) {
    const auto truth_mask = rect(16, 16, 4, 4, 10, 12);
    const std::vector<LabelMap> truth(3, labels_from(truth_mask, 16, 16));
    const auto perfect = evaluate_predictions("test", truth, truth, 2);
    ASSERT_EQ(perfect.rows.size(), 2u);
    EXPECT_EQ(perfect.mean().dsc, 1.0);
    EXPECT_EQ(perfect.mean().hd, 0.0);
    EXPECT_EQ(perfect.mean().asd, 0.0);

    const std::vector<LabelMap> background(3, LabelMap(16, 16));
    const auto empty = evaluate_predictions("val", background, truth, 2);
    EXPECT_EQ(empty.rows[0].dsc, 0.0);
    EXPECT_EQ(empty.rows[0].degenerate_count, 3u);
    EXPECT_EQ(empty.split, "val");
}

TEST(Report, MacroMeanAndCsv) {
    LabelMap t(16, 16), p(16, 16);
    for (std::size_t y = 2; y < 8; ++y)
        for (std::size_t x = 2; x < 8; ++x) t(y, x) = 1, p(y, x + 1) = 1;
    for (std::size_t y = 10; y < 14; ++y)
        for (std::size_t x = 9; x < 15; ++x) t(y, x) = 2, p(y + 1, x) = 2;
    const std::vector<LabelMap> truth{t}, pred{p};
    const auto r = evaluate_predictions("test", pred, truth, 3);
    ASSERT_EQ(r.rows.size(), 3u);
    EXPECT_EQ(r.rows[0].label, "1");
    EXPECT_EQ(r.rows[1].label, "2");
    EXPECT_NEAR(r.mean().dsc, (r.rows[0].dsc + r.rows[1].dsc) / 2, 1e-15);
    EXPECT_NEAR(r.mean().hd95, (r.rows[0].hd95 + r.rows[1].hd95) / 2, 1e-15);

    std::istringstream csv(r.to_csv(true));
    std::string line;
    std::getline(csv, line);
    EXPECT_EQ(line, kMetricCsvHeader);
    std::getline(csv, line);
    EXPECT_EQ(line.rfind("test,1,", 0), 0u);
    int rows = 0;
    while (std::getline(csv, line)) ++rows;
    EXPECT_EQ(rows, 2);
}
