#pragma once

// Locating the low- and high-density modes of a flow-density diagram with
// k-medoids (exhaustive and CLARA) on dimensionless coordinates.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fdiag/geometry.hpp"
#include "fdiag/traffic_data.hpp"

namespace fdiag {

struct MedoidResult {
    /// Indices into the input, ascending.
    std::vector<std::size_t> medoids;
    /// For each input point, the position in `medoids` of its nearest medoid
    /// (ties to the lower position).
    std::vector<std::size_t> assignments;
    double total_cost = 0.0;
};

/// Assigns every point to its nearest medoid and sums the Euclidean distances.
MedoidResult assign_to_medoids(std::span<const Point2> points, std::vector<std::size_t> medoids);

/// Largest number of medoid sets exact_kmedoids will enumerate (C(60, 2)).
inline constexpr std::size_t kExactCombinationLimit = 1770;

/// Globally optimal medoids by enumerating every k-subset in lexicographic
/// order; the first optimal subset wins. Throws std::invalid_argument when the
/// enumeration exceeds kExactCombinationLimit (use clara) or k is not in [1, N].
MedoidResult exact_kmedoids(std::span<const Point2> points, std::size_t k);

struct ClaraConfig {
    std::size_t k = 2;
    /// 0 selects the default 200 + 2k.
    std::size_t sample_size = 0;
    std::size_t n_restarts = 50;
    std::uint64_t rng_seed = 0;
    unsigned threads = 1;

    std::size_t effective_sample_size() const { return sample_size == 0 ? 200 + 2 * k : sample_size; }
};

/// CLARA: each restart draws min(sample_size, N) points, runs swap-based
/// k-medoids on them from random initial medoids, then scores the resulting
/// medoids on the full data set. Best total cost wins, ties to the earlier
/// restart. Throws std::invalid_argument with fewer than k distinct points.
MedoidResult clara(std::span<const Point2> points, const ClaraConfig& config);

struct ModeEstimate {
    Point2 location;        // medoid, scaled coordinates
    double spread = 0.0;    // sqrt(mean squared member-to-medoid distance)
    std::size_t members = 0;
    std::size_t medoid_index = 0;
};

struct TrajectoryEntry {
    SpeedLimit limit = SpeedLimit::National;
    ModeEstimate low;
    ModeEstimate high;
};

struct ModeTrajectory {
    std::vector<TrajectoryEntry> entries;  // in SpeedLimit order
    std::map<SpeedLimit, std::string> skipped;
};

/// k = 2 clustering of every segment (expects scaled points). The medoid with
/// the smaller density is labelled low. Segments with fewer than two distinct
/// points are skipped and reported.
ModeTrajectory mode_trajectory(const std::map<SpeedLimit, std::vector<Point2>>& segments, ClaraConfig config);

/// (last - first) / first for the density of the low and high modes, taken
/// over the variable-limit entries (40 to 70 mph; National is ignored);
/// nullopt with fewer than two such entries.
struct ModeShift {
    double low_density_change = 0.0;
    double high_density_change = 0.0;
};
std::optional<ModeShift> relative_density_change(const ModeTrajectory& trajectory);

struct DistanceDistribution {
    std::vector<double> sorted;  // member-to-medoid distances, ascending
    double q50 = 0.0;
    double q90 = 0.0;
    double q99 = 0.0;
};

/// Throws std::invalid_argument for an out-of-range or empty cluster.
DistanceDistribution distance_distribution(std::span<const Point2> points, const MedoidResult& result,
                                           std::size_t cluster_index);

}  // namespace fdiag
