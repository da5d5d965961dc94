#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "fdiag/mode_clustering.hpp"

using namespace fdiag;

namespace {

std::vector<Point2> blob(std::size_t n, Point2 c, double s, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> z(0.0, s);
    std::vector<Point2> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back({c.x + z(gen), c.y + z(gen)});
    return out;
}

std::vector<Point2> two_blobs(std::size_t n_each, Point2 a, Point2 b, double s, std::uint64_t seed) {
    auto out = blob(n_each, a, s, seed);
    const auto second = blob(n_each, b, s, seed + 1);
    out.insert(out.end(), second.begin(), second.end());
    return out;
}

// Brute-force optimal cost over all k-subsets, k <= 2.
double brute_cost(const std::vector<Point2>& pts, std::size_t k) {
    double best = std::numeric_limits<double>::infinity();
    auto cost = [&](std::vector<std::size_t> meds) {
        double total = 0.0;
        for (const auto& p : pts) {
            double d = std::numeric_limits<double>::infinity();
            for (auto m : meds) d = std::min(d, distance(p, pts[m]));
            total += d;
        }
        return total;
    };
    for (std::size_t a = 0; a < pts.size(); ++a) {
        if (k == 1) {
            best = std::min(best, cost({a}));
            continue;
        }
        for (std::size_t b = a + 1; b < pts.size(); ++b) best = std::min(best, cost({a, b}));
    }
    return best;
}

ClaraConfig clara_config(std::size_t k, std::size_t sample, std::size_t restarts, std::uint64_t seed) {
    ClaraConfig c;
    c.k = k;
    c.sample_size = sample;
    c.n_restarts = restarts;
    c.rng_seed = seed;
    return c;
}

}  // namespace

TEST(ExactKmedoids, FourCollinearPointsTwoClusters) {
    const std::vector<Point2> pts{{0, 0}, {1, 0}, {10, 0}, {11, 0}};
    const auto r = exact_kmedoids(pts, 2);
    // {0, 2} is the first of the optimal subsets in lexicographic order.
    EXPECT_EQ(r.medoids, (std::vector<std::size_t>{0, 2}));
    EXPECT_EQ(r.assignments, (std::vector<std::size_t>{0, 0, 1, 1}));
    EXPECT_DOUBLE_EQ(r.total_cost, 2.0);
}

TEST(ExactKmedoids, SingleMedoidIsGeometricMedianCandidate) {
    const std::vector<Point2> pts{{0, 0}, {1, 0}, {2, 0}, {3, 0}, {100, 0}};
    const auto r = exact_kmedoids(pts, 1);
    EXPECT_EQ(r.medoids, (std::vector<std::size_t>{2}));
    EXPECT_DOUBLE_EQ(r.total_cost, 2 + 1 + 0 + 1 + 98);
}

TEST(ExactKmedoids, MatchesBruteForceOracle) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto pts = two_blobs(12, {0, 0}, {1.5, 1.0}, 0.8, 100 + seed);
        for (std::size_t k : {1u, 2u}) EXPECT_NEAR(exact_kmedoids(pts, k).total_cost, brute_cost(pts, k), 1e-12);
    }
}

TEST(ExactKmedoids, RejectsBadKAndLargeEnumerations) {
    const std::vector<Point2> pts{{0, 0}, {1, 1}};
    EXPECT_THROW(exact_kmedoids(pts, 0), std::invalid_argument);
    EXPECT_THROW(exact_kmedoids(pts, 3), std::invalid_argument);
    const auto many = blob(61, {0, 0}, 1.0, 1);  // C(61, 2) = 1830 > 1770
    EXPECT_THROW(exact_kmedoids(many, 2), std::invalid_argument);
    const auto sixty = blob(60, {0, 0}, 1.0, 1);
    EXPECT_NO_THROW(exact_kmedoids(sixty, 2));
}

TEST(Clara, FullSampleFindsOptimumOnSeparatedClusters) {
    const auto pts = two_blobs(25, {0, 0}, {5, 5}, 0.5, 7);
    const auto exact = exact_kmedoids(pts, 2);
    const auto r = clara(pts, clara_config(2, 100, 5, 3));
    EXPECT_EQ(r.medoids, exact.medoids);
    EXPECT_DOUBLE_EQ(r.total_cost, exact.total_cost);
}

TEST(Clara, DeterministicForSeedAndThreads) {
    const auto pts = two_blobs(400, {0.3, 0.5}, {1.2, 0.6}, 0.15, 9);
    auto cfg = clara_config(2, 0, 20, 42);
    const auto a = clara(pts, cfg);
    const auto b = clara(pts, cfg);
    cfg.threads = 4;
    const auto c = clara(pts, cfg);
    EXPECT_EQ(a.medoids, b.medoids);
    EXPECT_EQ(a.medoids, c.medoids);
    EXPECT_EQ(a.assignments, c.assignments);
    EXPECT_EQ(a.total_cost, c.total_cost);
}

TEST(Clara, MedoidsAreInputPointsAndAssignmentsAreNearest) {
    const auto pts = two_blobs(300, {0, 0}, {2, 1}, 0.4, 11);
    const auto r = clara(pts, clara_config(3, 50, 10, 5));
    ASSERT_EQ(r.medoids.size(), 3u);
    EXPECT_TRUE(std::is_sorted(r.medoids.begin(), r.medoids.end()));
    double total = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const double mine = distance(pts[i], pts[r.medoids[r.assignments[i]]]);
        for (auto m : r.medoids) EXPECT_LE(mine, distance(pts[i], pts[m]));
        total += mine;
    }
    EXPECT_NEAR(total, r.total_cost, 1e-9 * total);
}

TEST(Clara, MoreRestartsNeverHurt) {
    const auto pts = two_blobs(300, {0, 0}, {0.8, 0.4}, 0.5, 13);
    const auto few = clara(pts, clara_config(2, 30, 1, 8));
    const auto many = clara(pts, clara_config(2, 30, 30, 8));
    // Restart 0 is shared, so the 30-restart best cannot be worse.
    EXPECT_LE(many.total_cost, few.total_cost);
}

TEST(Clara, TooFewDistinctPointsThrows) {
    const std::vector<Point2> same(10, Point2{1, 1});
    EXPECT_THROW(clara(same, clara_config(2, 0, 5, 0)), std::invalid_argument);
}

TEST(Trajectory, LowModeHasSmallerDensity) {
    std::map<SpeedLimit, std::vector<Point2>> segs;
    segs[SpeedLimit::L40] = two_blobs(100, {0.3, 0.4}, {2.0, 0.5}, 0.05, 1);
    segs[SpeedLimit::L60] = two_blobs(100, {0.4, 0.5}, {1.5, 0.7}, 0.05, 2);
    const auto t = mode_trajectory(segs, clara_config(0, 0, 10, 1));
    ASSERT_EQ(t.entries.size(), 2u);
    EXPECT_EQ(t.entries[0].limit, SpeedLimit::L40);
    EXPECT_EQ(t.entries[1].limit, SpeedLimit::L60);
    for (const auto& e : t.entries) {
        EXPECT_LT(e.low.location.x, e.high.location.x);
        EXPECT_EQ(e.low.members + e.high.members, 200u);
        EXPECT_GT(e.low.spread, 0.0);
    }
    EXPECT_NEAR(t.entries[0].low.location.x, 0.3, 0.05);
    EXPECT_NEAR(t.entries[0].high.location.x, 2.0, 0.05);

    const auto shift = relative_density_change(t);
    ASSERT_TRUE(shift);
    EXPECT_NEAR(shift->high_density_change,
                (t.entries[1].high.location.x - t.entries[0].high.location.x) / t.entries[0].high.location.x, 1e-15);
}

TEST(Trajectory, IdenticalSegmentsGiveIdenticalEntries) {
    const auto pts = two_blobs(120, {0.2, 0.3}, {1.8, 0.4}, 0.1, 3);
    std::map<SpeedLimit, std::vector<Point2>> segs{{SpeedLimit::L50, pts}, {SpeedLimit::L70, pts}};
    const auto t = mode_trajectory(segs, clara_config(2, 0, 10, 4));
    ASSERT_EQ(t.entries.size(), 2u);
    EXPECT_EQ(t.entries[0].low.location, t.entries[1].low.location);
    EXPECT_EQ(t.entries[0].high.location, t.entries[1].high.location);
    const auto shift = relative_density_change(t);
    ASSERT_TRUE(shift);
    EXPECT_EQ(shift->low_density_change, 0.0);
    EXPECT_EQ(shift->high_density_change, 0.0);
}

TEST(Trajectory, DegenerateSegmentsAreSkipped) {
    std::map<SpeedLimit, std::vector<Point2>> segs;
    segs[SpeedLimit::L40] = std::vector<Point2>(5, Point2{1, 1});
    segs[SpeedLimit::L50] = two_blobs(50, {0.2, 0.3}, {1.8, 0.4}, 0.1, 5);
    const auto t = mode_trajectory(segs, clara_config(2, 0, 5, 0));
    ASSERT_EQ(t.entries.size(), 1u);
    EXPECT_EQ(t.skipped.count(SpeedLimit::L40), 1u);
    EXPECT_FALSE(relative_density_change(t));
}

TEST(Trajectory, RelativeChangeIgnoresNational) {
    ModeTrajectory t;
    auto entry = [](SpeedLimit l, double low, double high) {
        TrajectoryEntry e;
        e.limit = l;
        e.low.location = {low, 0.0};
        e.high.location = {high, 0.0};
        return e;
    };
    t.entries = {entry(SpeedLimit::L40, 0.5, 2.0), entry(SpeedLimit::L70, 0.4, 1.0),
                 entry(SpeedLimit::National, 9.0, 9.0)};
    const auto s = relative_density_change(t);
    ASSERT_TRUE(s);
    EXPECT_DOUBLE_EQ(s->low_density_change, -0.2);
    EXPECT_DOUBLE_EQ(s->high_density_change, -0.5);
    t.entries.erase(t.entries.begin());
    EXPECT_FALSE(relative_density_change(t));
}

TEST(DistanceDistribution, QuantilesOfKnownDistances) {
    const std::vector<Point2> pts{{0, 0}, {1, 0}, {0, 2}, {-3, 0}, {0, -4}, {50, 50}};
    const auto r = assign_to_medoids(pts, {0, 5});
    const auto d = distance_distribution(pts, r, 0);
    EXPECT_EQ(d.sorted, (std::vector<double>{0, 1, 2, 3, 4}));
    EXPECT_DOUBLE_EQ(d.q50, 2.0);
    EXPECT_DOUBLE_EQ(d.q90, 3.6);
    EXPECT_NEAR(d.q99, 3.96, 1e-12);

    const auto single = distance_distribution(pts, r, 1);
    EXPECT_EQ(single.sorted, std::vector<double>{0.0});
    EXPECT_EQ(single.q99, 0.0);
    EXPECT_THROW(distance_distribution(pts, r, 2), std::invalid_argument);
}

TEST(DistanceDistribution, HeavyTailStretchesUpperQuantiles) {
    std::mt19937_64 gen(17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> z(0.0, 1.0);
    auto cloud = [&](bool pareto) {
        std::vector<Point2> pts{{0, 0}};
        for (int i = 0; i < 5000; ++i) {
            const double r = pareto ? std::pow(1.0 - u(gen), -1.0 / 1.5) : std::abs(z(gen));
            const double a = 2.0 * 3.141592653589793 * u(gen);
            pts.push_back({r * std::cos(a), r * std::sin(a)});
        }
        return pts;
    };
    const auto heavy = cloud(true), light = cloud(false);
    const auto dh = distance_distribution(heavy, assign_to_medoids(heavy, {0}), 0);
    const auto dl = distance_distribution(light, assign_to_medoids(light, {0}), 0);
    EXPECT_GT(dh.q99 / dh.q50, 2.0 * dl.q99 / dl.q50);
}
