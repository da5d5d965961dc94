#include "fdiag/mode_clustering.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "fdiag/parallel.hpp"
#include "fdiag/rng.hpp"
#include "fdiag/stats.hpp"

namespace fdiag {

namespace {

std::size_t count_distinct(std::span<const Point2> points) {
    std::vector<Point2> copy(points.begin(), points.end());
    std::sort(copy.begin(), copy.end(), [](const Point2& a, const Point2& b) {
        return a.x < b.x || (a.x == b.x && a.y < b.y);
    });
    return static_cast<std::size_t>(std::unique(copy.begin(), copy.end()) - copy.begin());
}

/// C(n, k), or limit + 1 once it exceeds limit.
std::size_t bounded_binomial(std::size_t n, std::size_t k, std::size_t limit) {
    k = std::min(k, n - k);
    long double c = 1.0L;
    for (std::size_t i = 1; i <= k; ++i) {
        c = c * static_cast<long double>(n - k + i) / static_cast<long double>(i);
        if (c > static_cast<long double>(limit)) return limit + 1;
    }
    return static_cast<std::size_t>(std::llround(c));
}

/// Steepest-descent swap search on a dense distance matrix. `medoids` are
/// positions in [0, n) and are updated in place; returns the final cost.
double swap_search(const std::vector<double>& dist, std::size_t n, std::vector<std::size_t>& medoids) {
    const std::size_t k = medoids.size();
    auto cost_of = [&](const std::vector<std::size_t>& meds) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t m : meds) best = std::min(best, dist[i * n + m]);
            total += best;
        }
        return total;
    };
    double current = cost_of(medoids);
    std::vector<char> is_medoid(n, 0);
    for (std::size_t m : medoids) is_medoid[m] = 1;
    std::vector<std::size_t> trial = medoids;
    while (true) {
        double best_cost = current;
        std::size_t best_slot = k, best_candidate = n;
        for (std::size_t slot = 0; slot < k; ++slot) {
            for (std::size_t cand = 0; cand < n; ++cand) {
                if (is_medoid[cand]) continue;
                trial = medoids;
                trial[slot] = cand;
                const double c = cost_of(trial);
                if (c < best_cost) {
                    best_cost = c;
                    best_slot = slot;
                    best_candidate = cand;
                }
            }
        }
        if (best_slot == k || !(best_cost < current - 1e-12 * std::abs(current))) break;
        is_medoid[medoids[best_slot]] = 0;
        is_medoid[best_candidate] = 1;
        medoids[best_slot] = best_candidate;
        current = best_cost;
    }
    return current;
}

}  // namespace

MedoidResult assign_to_medoids(std::span<const Point2> points, std::vector<std::size_t> medoids) {
    std::sort(medoids.begin(), medoids.end());
    MedoidResult r;
    r.medoids = std::move(medoids);
    r.assignments.resize(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t slot = 0;
        for (std::size_t s = 0; s < r.medoids.size(); ++s) {
            const double d = distance(points[i], points[r.medoids[s]]);
            if (d < best) {
                best = d;
                slot = s;
            }
        }
        r.assignments[i] = slot;
        r.total_cost += best;
    }
    return r;
}

MedoidResult exact_kmedoids(std::span<const Point2> points, std::size_t k) {
    const std::size_t n = points.size();
    if (k < 1 || k > n) throw std::invalid_argument("exact_kmedoids: k must lie in [1, N]");
    if (bounded_binomial(n, k, kExactCombinationLimit) > kExactCombinationLimit)
        throw std::invalid_argument("exact_kmedoids: " + std::to_string(n) +
                                    " points is too many for exhaustive search; use clara");
    std::vector<std::size_t> combo(k);
    std::iota(combo.begin(), combo.end(), 0);
    MedoidResult best;
    bool have_best = false;
    while (true) {
        MedoidResult r = assign_to_medoids(points, combo);
        if (!have_best || r.total_cost < best.total_cost) {
            best = std::move(r);
            have_best = true;
        }
        // Next combination in lexicographic order.
        std::size_t pos = k;
        while (pos > 0 && combo[pos - 1] == n - k + pos - 1) --pos;
        if (pos == 0) break;
        ++combo[pos - 1];
        for (std::size_t j = pos; j < k; ++j) combo[j] = combo[j - 1] + 1;
    }
    return best;
}

MedoidResult clara(std::span<const Point2> points, const ClaraConfig& config) {
    const std::size_t n = points.size();
    const std::size_t k = config.k;
    if (k < 1) throw std::invalid_argument("clara: k must be positive");
    if (config.n_restarts < 1) throw std::invalid_argument("clara: need at least one restart");
    if (count_distinct(points) < k) throw std::invalid_argument("clara: fewer than k distinct points");
    const std::size_t sample_size = std::min(std::max(config.effective_sample_size(), k), n);

    std::vector<MedoidResult> results(config.n_restarts);
    parallel_for(config.n_restarts, config.threads, [&](std::size_t restart) {
        Rng rng(derive_seed(config.rng_seed, restart));
        std::vector<std::size_t> sample(n);
        std::iota(sample.begin(), sample.end(), 0);
        if (sample_size < n) {
            for (std::size_t i = 0; i < sample_size; ++i) std::swap(sample[i], sample[i + rng.index(n - i)]);
            sample.resize(sample_size);
            std::sort(sample.begin(), sample.end());
        }
        const std::size_t s = sample.size();
        std::vector<double> dist(s * s);
        for (std::size_t a = 0; a < s; ++a)
            for (std::size_t b = 0; b < s; ++b) dist[a * s + b] = distance(points[sample[a]], points[sample[b]]);

        // Random distinct initial medoids (positions within the sample).
        std::vector<std::size_t> order(s);
        std::iota(order.begin(), order.end(), 0);
        for (std::size_t i = 0; i < k; ++i) std::swap(order[i], order[i + rng.index(s - i)]);
        std::vector<std::size_t> medoids(order.begin(), order.begin() + static_cast<long>(k));
        swap_search(dist, s, medoids);

        std::vector<std::size_t> full(k);
        for (std::size_t i = 0; i < k; ++i) full[i] = sample[medoids[i]];
        results[restart] = assign_to_medoids(points, full);
    });

    std::size_t best = 0;
    for (std::size_t r = 1; r < results.size(); ++r)
        if (results[r].total_cost < results[best].total_cost) best = r;
    return results[best];
}

ModeTrajectory mode_trajectory(const std::map<SpeedLimit, std::vector<Point2>>& segments, ClaraConfig config) {
    config.k = 2;
    ModeTrajectory out;
    for (const auto& [limit, points] : segments) {
        if (count_distinct(points) < 2) {
            out.skipped[limit] = "segment has fewer than two distinct points";
            continue;
        }
        const MedoidResult r = clara(points, config);
        std::array<ModeEstimate, 2> modes;
        for (std::size_t slot = 0; slot < 2; ++slot) {
            modes[slot].medoid_index = r.medoids[slot];
            modes[slot].location = points[r.medoids[slot]];
        }
        for (std::size_t i = 0; i < points.size(); ++i) {
            auto& m = modes[r.assignments[i]];
            const double d = distance(points[i], m.location);
            m.spread += d * d;
            ++m.members;
        }
        for (auto& m : modes) m.spread = std::sqrt(m.spread / static_cast<double>(m.members));
        if (modes[0].location.x == modes[1].location.x) {
            out.skipped[limit] = "medoids share the same density";
            continue;
        }
        const bool first_is_low = modes[0].location.x < modes[1].location.x;
        out.entries.push_back({limit, first_is_low ? modes[0] : modes[1], first_is_low ? modes[1] : modes[0]});
    }
    return out;
}

std::optional<ModeShift> relative_density_change(const ModeTrajectory& trajectory) {
    std::vector<const TrajectoryEntry*> variable;
    for (const auto& e : trajectory.entries)
        if (e.limit != SpeedLimit::National) variable.push_back(&e);
    if (variable.size() < 2) return std::nullopt;
    const auto& first = *variable.front();
    const auto& last = *variable.back();
    return ModeShift{(last.low.location.x - first.low.location.x) / first.low.location.x,
                     (last.high.location.x - first.high.location.x) / first.high.location.x};
}

DistanceDistribution distance_distribution(std::span<const Point2> points, const MedoidResult& result,
                                           std::size_t cluster_index) {
    if (cluster_index >= result.medoids.size())
        throw std::invalid_argument("distance_distribution: cluster index out of range");
    DistanceDistribution out;
    const Point2 medoid = points[result.medoids[cluster_index]];
    for (std::size_t i = 0; i < points.size(); ++i)
        if (result.assignments[i] == cluster_index) out.sorted.push_back(distance(points[i], medoid));
    if (out.sorted.empty()) throw std::invalid_argument("distance_distribution: empty cluster");
    std::sort(out.sorted.begin(), out.sorted.end());
    out.q50 = quantile_sorted(out.sorted, 0.5);
    out.q90 = quantile_sorted(out.sorted, 0.9);
    out.q99 = quantile_sorted(out.sorted, 0.99);
    return out;
}

}  // namespace fdiag
