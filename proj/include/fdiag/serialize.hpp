#pragma once

// JSON and CSV encodings of the analysis results.

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fdiag/fd_models.hpp"
#include "fdiag/fit_engine.hpp"
#include "fdiag/kde.hpp"
#include "fdiag/link_clustering.hpp"
#include "fdiag/mode_clustering.hpp"
#include "fdiag/synthgen.hpp"

namespace fdiag {

using Json = nlohmann::ordered_json;

/// {"model": "<tag>", "params": {"<name>": value, ...}}
Json params_to_json(const FdModelParams& params);
/// Throws std::invalid_argument on an unknown tag, missing or extra parameter.
FdModelParams params_from_json(const Json& j);

/// {model, params{...}, sse, rmse, r2, n_starts, converged}; r2 is null when undefined.
Json fit_result_to_json(const FitResult& r);

/// Header `link_id,model,rmse,r2,sse` is written by the caller once.
void write_ranking_rows(std::ostream& out, const std::string& link_id, std::span<const FitResult> ranked);

/// CSV `x,y,density`, x outer, y inner.
void write_grid_csv(std::ostream& out, const DensityGrid& grid);
/// Axis metadata, ordering note, bandwidth and the row-major values.
Json grid_to_json(const DensityGrid& grid, const BandwidthMatrix& bandwidth);
Json modes_to_json(std::span<const GridMode> modes);

/// Array of {a, b, height, size}.
Json dendrogram_to_json(const Dendrogram& d);

/// {"<limit>": {"low": {density, flow, std}, "high": {...}}, ...}; density and
/// flow are converted back to veh/km and veh/h with `scale`, std stays dimensionless.
Json trajectory_to_json(const ModeTrajectory& t, const PointScale& scale);

Json summaries_to_json(std::span<const ClusterSummary> summaries, std::span<const std::string_view> feature_names);

/// Parses the synth command's dataset description. Throws std::invalid_argument.
DatasetSpec dataset_spec_from_json(const Json& j);
/// truth.json: generating parameters and noise level per link.
Json truth_to_json(const DatasetSpec& spec, const SynthDataset& data);

}  // namespace fdiag
