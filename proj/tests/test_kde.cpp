#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "fdiag/kde.hpp"

using namespace fdiag;

namespace {

double sample_std(const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

std::vector<Point2> gaussian_cloud(std::size_t n, Point2 centre, double sx, double sy, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    std::vector<Point2> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back({centre.x + sx * z(gen), centre.y + sy * z(gen)});
    return out;
}

// Reference density of a single isotropic Gaussian kernel.
double gauss2(double dx, double dy, double s2) {
    return std::exp(-0.5 * (dx * dx + dy * dy) / s2) / (2.0 * std::numbers::pi * s2);
}

DensityGrid grid_of(AxisRange xr, AxisRange yr, std::size_t nx, std::size_t ny, double fill) {
    return DensityGrid{xr, yr, nx, ny, std::vector<double>(nx * ny, fill)};
}

}  // namespace

TEST(Bandwidth, RuleOfThumbUsesSampleStdAndSampleSize) {
    auto pts = gaussian_cloud(100, {0, 0}, 3.0, 0.5, 1);
    // Rescale so each axis has sample std exactly 1.
    std::vector<double> xs, ys;
    for (auto& p : pts) {
        xs.push_back(p.x);
        ys.push_back(p.y);
    }
    const double sx = sample_std(xs), sy = sample_std(ys);
    for (auto& p : pts) {
        p.x /= sx;
        p.y /= sy;
    }
    const auto h = select_bandwidth(pts, RuleOfThumb{});
    const double want = std::pow(100.0, -1.0 / 3.0);
    EXPECT_NEAR(h.xx(), want, 1e-12);
    EXPECT_NEAR(h.yy(), want, 1e-12);
    EXPECT_EQ(h.xy(), 0.0);

    // Doubling one axis quadruples its variance entry.
    for (auto& p : pts) p.y *= 2.0;
    const auto h2 = select_bandwidth(pts, RuleOfThumb{});
    EXPECT_NEAR(h2.yy(), 4.0 * want, 1e-12);
}

TEST(Bandwidth, FixedDiagonalSquaresWidths) {
    const std::vector<Point2> pts{{0, 0}, {1, 1}};
    const auto h = select_bandwidth(pts, FixedDiagonal{0.1, 0.2});
    EXPECT_DOUBLE_EQ(h.xx(), 0.01);
    EXPECT_DOUBLE_EQ(h.yy(), 0.04);
    EXPECT_EQ(h.xy(), 0.0);
    EXPECT_THROW(select_bandwidth(pts, FixedDiagonal{0.0, 0.2}), std::invalid_argument);
}

TEST(Bandwidth, DegenerateInputsThrow) {
    const std::vector<Point2> same{{1, 2}, {1, 2}};
    EXPECT_THROW(select_bandwidth(same, RuleOfThumb{}), std::invalid_argument);
    const std::vector<Point2> one{{1, 2}};
    EXPECT_THROW(select_bandwidth(one, RuleOfThumb{}), std::invalid_argument);
    const std::vector<Point2> flat_y{{1, 2}, {3, 2}, {5, 2}};
    EXPECT_THROW(select_bandwidth(flat_y, RuleOfThumb{}), std::invalid_argument);
    EXPECT_THROW(BandwidthMatrix(1.0, 2.0, 1.0), std::invalid_argument);
    EXPECT_THROW(BandwidthMatrix(-1.0, 0.0, 1.0), std::invalid_argument);
}

TEST(Evaluate, SinglePointAtCentreIsOneOverTwoPi) {
    const KdeModel m({{0.0, 0.0}}, BandwidthMatrix::diagonal(1.0, 1.0));
    EXPECT_NEAR(m.evaluate({0.0, 0.0}), 1.0 / (2.0 * std::numbers::pi), 1e-15);
    EXPECT_LT(m.evaluate({50.0, 50.0}), 1e-300);
    EXPECT_NEAR(m.normalization(), 1.0 / (2.0 * std::numbers::pi), 1e-15);
}

TEST(Evaluate, MatchesDirectSumWithCorrelatedBandwidth) {
    const BandwidthMatrix h(2.0, 0.6, 1.0);
    const std::vector<Point2> pts{{0, 0}, {1, -1}, {2.5, 0.5}};
    const KdeModel m(pts, h);
    const double det = 2.0 * 1.0 - 0.36;
    for (Point2 x : {Point2{0.3, 0.2}, Point2{-1.0, 2.0}, Point2{2.0, 0.0}}) {
        double sum = 0.0;
        for (auto p : pts) {
            const double dx = x.x - p.x, dy = x.y - p.y;
            // Explicit 2x2 inverse.
            const double q = (1.0 * dx * dx - 2.0 * 0.6 * dx * dy + 2.0 * dy * dy) / det;
            sum += std::exp(-0.5 * q);
        }
        const double want = sum / (3.0 * 2.0 * std::numbers::pi * std::sqrt(det));
        EXPECT_NEAR(m.evaluate(x), want, 1e-15);
    }
}

TEST(Evaluate, SymmetricPairAtMidpoint) {
    const double s2 = 0.25;
    const KdeModel m({{-1.0, 0.0}, {1.0, 0.0}}, BandwidthMatrix::diagonal(s2, s2));
    // Each kernel contributes gauss2(1, 0); the 1/N factor halves their sum.
    EXPECT_NEAR(m.evaluate({0.0, 0.0}), gauss2(1.0, 0.0, s2), 1e-15);
    EXPECT_NEAR(m.evaluate({0.0, 0.3}), m.evaluate({0.0, -0.3}), 1e-15);
}

TEST(Evaluate, EmptyModelRejected) {
    EXPECT_THROW(KdeModel({}, BandwidthMatrix::diagonal(1, 1)), std::invalid_argument);
}

TEST(Grid, TwoByTwoMatchesPointwise) {
    const auto pts = gaussian_cloud(30, {1, 2}, 1, 1, 3);
    const KdeModel m(pts, BandwidthMatrix::diagonal(0.3, 0.4));
    const auto g = evaluate_grid(m, {0, 3}, {1, 4}, 2, 2);
    ASSERT_EQ(g.values.size(), 4u);
    EXPECT_EQ(g.at(0, 0), m.evaluate({0, 1}));
    EXPECT_EQ(g.at(0, 1), m.evaluate({0, 4}));
    EXPECT_EQ(g.at(1, 0), m.evaluate({3, 1}));
    EXPECT_EQ(g.at(1, 1), m.evaluate({3, 4}));
}

TEST(Grid, RowMajorLayoutAndThreadInvariance) {
    const auto pts = gaussian_cloud(200, {0, 0}, 1, 2, 4);
    const KdeModel m(pts, select_bandwidth(pts, RuleOfThumb{}));
    const auto a = evaluate_grid(m, {-3, 3}, {-6, 6}, 17, 11, 1);
    const auto b = evaluate_grid(m, {-3, 3}, {-6, 6}, 17, 11, 4);
    EXPECT_EQ(a.values, b.values);
    EXPECT_EQ(a.values[3 * 11 + 5], m.evaluate({a.x_at(3), a.y_at(5)}));
    EXPECT_DOUBLE_EQ(a.x_at(16), 3.0);
    EXPECT_DOUBLE_EQ(a.y_at(0), -6.0);
}

TEST(Grid, IntegratesToOneOverCoveringRange) {
    const auto pts = gaussian_cloud(300, {5, -2}, 1.5, 0.7, 5);
    const KdeModel m(pts, select_bandwidth(pts, RuleOfThumb{}));
    const auto [xr, yr] = covering_ranges(m, 8.0);
    const auto g = evaluate_grid(m, xr, yr, 200, 200);
    EXPECT_NEAR(trapezoid_integral(g), 1.0, 0.01);
    for (double v : g.values) EXPECT_GE(v, 0.0);
}

TEST(Grid, SinglePointGridIsSymmetric) {
    const KdeModel m({{0, 0}}, BandwidthMatrix::diagonal(1, 1));
    const auto g = evaluate_grid(m, {-2, 2}, {-2, 2}, 9, 9);
    for (std::size_t i = 0; i < 9; ++i)
        for (std::size_t j = 0; j < 9; ++j) {
            EXPECT_DOUBLE_EQ(g.at(i, j), g.at(8 - i, j));
            EXPECT_DOUBLE_EQ(g.at(i, j), g.at(i, 8 - j));
            EXPECT_DOUBLE_EQ(g.at(i, j), g.at(j, i));
        }
}

TEST(Grid, DegenerateRangesThrow) {
    const KdeModel m({{0, 0}}, BandwidthMatrix::diagonal(1, 1));
    EXPECT_THROW(evaluate_grid(m, {1, 1}, {0, 1}, 4, 4), std::invalid_argument);
    EXPECT_THROW(evaluate_grid(m, {0, 1}, {0, 1}, 1, 4), std::invalid_argument);
}

TEST(Modes, SingleGaussianHasOneModeAtNearestNode) {
    const KdeModel m({{0.3, -0.2}}, BandwidthMatrix::diagonal(1, 1));
    const auto g = evaluate_grid(m, {-4, 4}, {-4, 4}, 81, 81);
    const auto modes = find_modes(g, 3);
    ASSERT_EQ(modes.size(), 1u);
    EXPECT_NEAR(modes[0].location.x, 0.3, 1e-9);
    EXPECT_NEAR(modes[0].location.y, -0.2, 1e-9);
    EXPECT_EQ(modes[0].density, g.at(modes[0].i, modes[0].j));
}

TEST(Modes, TwoWellSeparatedGaussians) {
    const double s2 = 0.25;  // sigma 0.5, centres 6 sigma apart
    std::vector<Point2> pts{{0, 0}, {0, 0}, {0, 0}, {3, 0}};
    const KdeModel m(pts, BandwidthMatrix::diagonal(s2, s2));
    const auto g = evaluate_grid(m, {-2, 5}, {-2, 2}, 71, 41);
    const auto modes = find_modes(g, 3);
    ASSERT_EQ(modes.size(), 2u);
    // Heavier component first.
    EXPECT_NEAR(modes[0].location.x, 0.0, 1e-9);
    EXPECT_NEAR(modes[1].location.x, 3.0, 1e-9);
    EXPECT_GT(modes[0].density, modes[1].density);

    // A separation wider than the gap keeps only the stronger one.
    EXPECT_EQ(find_modes(g, 40).size(), 1u);
}

TEST(Modes, PlateauReportsFirstNodeInScanOrder) {
    auto g = grid_of({0, 4}, {0, 4}, 5, 5, 0.0);
    for (std::size_t i = 1; i <= 3; ++i)
        for (std::size_t j = 1; j <= 2; ++j) g.values[i * 5 + j] = 1.0;
    const auto modes = find_modes(g, 0);
    ASSERT_EQ(modes.size(), 1u);
    EXPECT_EQ(modes[0].i, 1u);
    EXPECT_EQ(modes[0].j, 1u);
}

TEST(Modes, TiesSortedByScanOrder) {
    auto g = grid_of({0, 8}, {0, 8}, 9, 9, 0.0);
    g.values[6 * 9 + 2] = 2.0;
    g.values[1 * 9 + 7] = 2.0;
    g.values[4 * 9 + 4] = 3.0;
    const auto modes = find_modes(g, 1);
    // The zero background is a plateau whose first node also counts.
    ASSERT_EQ(modes.size(), 4u);
    EXPECT_EQ(modes[0].i, 4u);
    EXPECT_EQ(modes[1].i, 1u);
    EXPECT_EQ(modes[2].i, 6u);
    EXPECT_EQ(modes[3].i, 0u);
    EXPECT_EQ(modes[3].j, 0u);
}

TEST(Modes, RelativeFloorDropsWeakBumps) {
    auto g = grid_of({0, 8}, {0, 8}, 9, 9, 0.0);
    g.values[4 * 9 + 4] = 100.0;
    g.values[1 * 9 + 6] = 0.5;
    g.values[7 * 9 + 7] = 5.0;
    // Zero floor keeps everything, the background plateau included.
    EXPECT_EQ(find_modes(g, 1, 0.0).size(), 4u);
    const auto modes = find_modes(g, 1, 0.01);
    ASSERT_EQ(modes.size(), 2u);
    EXPECT_EQ(modes[1].i, 7u);
    // Exactly at the floor is kept.
    EXPECT_EQ(find_modes(g, 1, 0.05).size(), 2u);
    EXPECT_EQ(find_modes(g, 1, 1.0).size(), 1u);
    EXPECT_THROW(find_modes(g, 1, -0.1), std::invalid_argument);
    EXPECT_THROW(find_modes(g, 1, 1.5), std::invalid_argument);
    EXPECT_THROW(find_modes(g, 1, std::nan("")), std::invalid_argument);
}

TEST(Ise, IdenticalGridsGiveZero) {
    const auto pts = gaussian_cloud(50, {0, 0}, 1, 1, 6);
    const KdeModel m(pts, select_bandwidth(pts, RuleOfThumb{}));
    const auto g = evaluate_grid(m, {-4, 4}, {-4, 4}, 33, 33);
    EXPECT_EQ(integrated_squared_error(g, g), 0.0);
    EXPECT_NEAR(integrated_squared_error(m, g), 0.0, 1e-30);
}

TEST(Ise, ConstantOffsetGivesSquareTimesArea) {
    const auto ref = grid_of({0, 2}, {0, 3}, 11, 21, 0.7);
    auto est = ref;
    for (auto& v : est.values) v += 0.1;
    EXPECT_NEAR(integrated_squared_error(est, ref), 0.01 * 6.0, 1e-12);
}

TEST(Ise, MisalignedGridsThrow) {
    const auto a = grid_of({0, 1}, {0, 1}, 5, 5, 0.0);
    const auto b = grid_of({0, 1}, {0, 1}, 5, 6, 0.0);
    const auto c = grid_of({0, 2}, {0, 1}, 5, 5, 0.0);
    EXPECT_THROW(integrated_squared_error(a, b), std::invalid_argument);
    EXPECT_THROW(integrated_squared_error(a, c), std::invalid_argument);
}

TEST(Ise, RuleOfThumbBeatsOversmoothing) {
    const auto pts = gaussian_cloud(10000, {0, 0}, 1, 1, 7);
    DensityGrid truth{{-5, 5}, {-5, 5}, 81, 81, {}};
    for (std::size_t i = 0; i < 81; ++i)
        for (std::size_t j = 0; j < 81; ++j) truth.values.push_back(gauss2(truth.x_at(i), truth.y_at(j), 1.0));
    const auto h = select_bandwidth(pts, RuleOfThumb{});
    const KdeModel good(pts, h);
    const KdeModel wide(pts, BandwidthMatrix::diagonal(100.0 * h.xx(), 100.0 * h.yy()));
    const double e_good = integrated_squared_error(good, truth);
    const double e_wide = integrated_squared_error(wide, truth);
    EXPECT_LT(e_good, e_wide);
}

TEST(Invariance, PermutationAndTranslation) {
    auto pts = gaussian_cloud(60, {0, 0}, 1, 2, 8);
    const auto h = select_bandwidth(pts, RuleOfThumb{});
    const KdeModel m(pts, h);
    auto reversed = pts;
    std::reverse(reversed.begin(), reversed.end());
    const KdeModel r(reversed, select_bandwidth(reversed, RuleOfThumb{}));
    EXPECT_NEAR(r.bandwidth().xx(), h.xx(), 1e-12);
    auto shifted = pts;
    for (auto& p : shifted) {
        p.x += 10.0;
        p.y -= 4.0;
    }
    const auto hs = select_bandwidth(shifted, RuleOfThumb{});
    EXPECT_NEAR(hs.xx(), h.xx(), 1e-9);
    EXPECT_NEAR(hs.yy(), h.yy(), 1e-9);
    const KdeModel s(shifted, h);
    for (Point2 x : {Point2{0, 0}, Point2{1, -1}, Point2{-0.5, 2}}) {
        EXPECT_NEAR(r.evaluate(x), m.evaluate(x), 1e-12 * m.evaluate(x) + 1e-300);
        EXPECT_NEAR(s.evaluate({x.x + 10.0, x.y - 4.0}), m.evaluate(x), 1e-12 * m.evaluate(x) + 1e-300);
    }
}
