#pragma once

// Multi-start bounded least-squares fitting of flux functions to
// flow-density points, goodness-of-fit metrics and model ranking.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fdiag/fd_models.hpp"
#include "fdiag/traffic_data.hpp"

namespace fdiag {

struct FitConfig {
    std::size_t n_starts = 100;
    std::uint64_t rng_seed = 0;
    /// Objective evaluations allowed per start for the simplex stage.
    std::size_t max_iterations = 4000;
    /// Relative objective decrease below which a start counts as converged.
    double tolerance = 1e-10;
    /// Search box; derived from the data with default_bounds when absent.
    std::optional<ParamBounds> bounds;
    /// Worker threads for the starts (0 = hardware concurrency).
    unsigned threads = 0;
};

struct Goodness {
    double sse = 0.0;
    double rmse = 0.0;
    /// Absent when every observed flow is identical (SST = 0).
    std::optional<double> r_squared;
};

struct FitResult {
    FdModelParams best_params;
    double sse = 0.0;
    double rmse = 0.0;
    std::optional<double> r_squared;
    /// Final SSE of every start, in start order.
    std::vector<double> start_objectives;
    std::vector<bool> start_converged;
    std::size_t converged_starts = 0;

    FdModelKind kind() const { return best_params.kind(); }
};

/// Raised when no start converges. Carries the per-start diagnostics.
class FitError : public std::runtime_error {
public:
    FitError(const std::string& what, std::vector<double> start_objectives)
        : std::runtime_error(what), start_objectives_(std::move(start_objectives)) {}
    const std::vector<double>& start_objectives() const { return start_objectives_; }

private:
    std::vector<double> start_objectives_;
};

DataSummary summarize_points(std::span<const FlowDensityPoint> points);

/// sse, rmse = sqrt(sse / N) and r^2 = 1 - sse / SST. Requires N >= 2.
Goodness goodness(const FdModelParams& params, std::span<const FlowDensityPoint> points);

/// Throws std::invalid_argument for degenerate data (too few points or fewer
/// than two distinct densities) and FitError when no start converges.
FitResult fit(FdModelKind kind, std::span<const FlowDensityPoint> points, const FitConfig& config);

struct FitFailure {
    FdModelKind kind;
    std::string reason;
};

struct ModelComparison {
    /// Ascending RMSE; equal RMSE ordered by parameter count, then by kind order.
    std::vector<FitResult> ranked;
    std::vector<FitFailure> failures;
};

ModelComparison compare_models(std::span<const FlowDensityPoint> points, std::span<const FdModelKind> kinds,
                               const FitConfig& config);

struct SegmentedFit {
    std::map<SpeedLimit, ModelComparison> results;
    /// Segments that did not meet the fit preconditions, with the reason.
    std::map<SpeedLimit, std::string> skipped;
};

SegmentedFit fit_segmented(const std::map<SpeedLimit, std::vector<FlowDensityPoint>>& segments,
                           std::span<const FdModelKind> kinds, const FitConfig& config);

}  // namespace fdiag
