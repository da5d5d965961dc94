#pragma once

// Hierarchical agglomerative clustering (Ward linkage, Euclidean distance)
// of per-link fitted parameter vectors.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fdiag/stats.hpp"
#include "fdiag/traffic_data.hpp"

namespace fdiag {

struct ParameterVector {
    std::string link_id;
    std::vector<double> values;
};

/// Divides every feature by its maximum over all vectors. Throws
/// std::invalid_argument for mismatched dimensions or a non-positive maximum.
std::vector<ParameterVector> rescale_by_feature_max(std::span<const ParameterVector> vectors);

/// One agglomeration step. Leaves are labelled 0..N-1 in input order; the
/// cluster created by merge m gets label N + m. a < b.
struct Merge {
    std::size_t a = 0;
    std::size_t b = 0;
    /// Ward cost |A||B| / (|A| + |B|) * ||centroid_A - centroid_B||^2.
    double height = 0.0;
    std::size_t size = 0;

    friend bool operator==(const Merge&, const Merge&) = default;
};

struct Dendrogram {
    std::size_t n_leaves = 0;
    std::vector<Merge> merges;  // N - 1 entries
};

/// Ward agglomeration via the Lance–Williams update. Equal costs go to the
/// lexicographically smallest (a, b) label pair. Throws std::invalid_argument
/// for fewer than two vectors or mismatched dimensions.
Dendrogram hac_ward(std::span<const ParameterVector> vectors);
Dendrogram hac_ward(std::span<const std::vector<double>> vectors);

/// Cluster id per leaf after undoing the last k - 1 merges. Ids are numbered
/// 0..k-1 in order of each cluster's smallest leaf. Throws std::invalid_argument
/// unless 1 <= k <= N.
std::vector<std::size_t> cut(const Dendrogram& dendrogram, std::size_t k);

struct ClusterSummary {
    std::size_t label = 0;
    std::vector<std::string> members;
    /// One summary per feature, on the unscaled values.
    std::vector<FiveNumberSummary> parameters;
    /// Per member link, aligned with `members`.
    std::vector<EventGroupCounts> events;
};

/// `assignments[i]` is the cluster of `raw[i]`. Event counts come from the
/// series with the matching link id (zero when absent).
std::vector<ClusterSummary> summarize(std::span<const std::size_t> assignments,
                                      std::span<const ParameterVector> raw,
                                      std::span<const LinkSeries> series);

}  // namespace fdiag
