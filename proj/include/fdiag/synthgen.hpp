#pragma once

// Seeded synthetic flow-density data with known ground truth.
//
// Randomness comes from fdiag::Rng (std::mt19937_64 with hand-written
// uniform/normal conversions), seeded per link and per segment through
// derive_seed, so fixtures are identical on every platform.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "fdiag/fd_models.hpp"
#include "fdiag/traffic_data.hpp"

namespace fdiag {

struct UniformDensity {
    double min = 0.0;
    double max = 1.0;
};

struct DensityMode {
    double center = 0.0;
    double jitter = 0.0;  // std of the Gaussian jitter, veh/km
    double weight = 0.5;
};

/// Two point masses with Gaussian jitter; the low component is drawn with
/// probability low.weight.
struct ModeMixture {
    DensityMode low;
    DensityMode high;
};

using DensityLaw = std::variant<UniformDensity, ModeMixture>;

/// Replacement mode centres for one speed-limit segment.
struct ModeCenters {
    double low = 0.0;
    double high = 0.0;
};

struct SynthSpec {
    FdModelParams truth{FdModelKind::DaganzoNewell, {4000.0, 40.0, 120.0}};
    DensityLaw law = UniformDensity{0.0, 120.0};
    /// Flow noise std as a fraction of the model's capacity on [0, density cap].
    double noise_fraction = 0.0;
    std::size_t n = 500;
    std::uint64_t seed = 0;
    /// Upper density for sampling and capacity; defaults to rho_max, or
    /// 3 * rho_crit for models without one.
    std::optional<double> density_cap;
    /// Per-limit mode centres (mixture law only). Empty means one National segment.
    std::map<SpeedLimit, ModeCenters> shifts;
    std::string link_id = "synthetic";
    Timestamp start = std::chrono::sys_days{std::chrono::year{2024} / 1 / 1};
};

/// Throws std::invalid_argument describing the first problem found.
void validate_spec(const SynthSpec& spec);
double density_cap(const SynthSpec& spec);

struct SynthOutput {
    std::vector<FlowDensityPoint> points;  // one per minute from spec.start
    FdModelParams truth;
    double capacity = 0.0;
    double noise_std = 0.0;
};

/// Density from the law (clamped to [1e-6 cap, cap]); flow = flux + noise,
/// clamped at 0; speed = flow / density.
SynthOutput generate(const SynthSpec& spec);

struct SegmentedSynth {
    std::map<SpeedLimit, std::vector<FlowDensityPoint>> segments;
    /// Observations and sign readings laid out as consecutive blocks, one per
    /// segment in SpeedLimit order, each block opened by a batch of sign readings.
    LinkSeries series;
    FdModelParams truth;
};

/// Every segment reuses spec.seed, so equal centres give identical clouds.
SegmentedSynth generate_segmented(const SynthSpec& spec, int signs_per_batch = 3);

/// Multi-link dataset description, read from JSON by the CLI.
struct LinkSynthSpec {
    SynthSpec spec;
    std::optional<LinkGeometry> geometry;
    std::map<EventCategory, std::size_t> events;
};

struct DatasetSpec {
    std::uint64_t seed = 0;
    std::vector<LinkSynthSpec> links;
};

struct SynthDataset {
    std::vector<LinkSeries> series;
    std::vector<SynthOutput> truth;  // aligned with `series`
};

/// Link i is generated with seed derive_seed(dataset seed, i); per-link seeds are ignored.
SynthDataset generate_dataset(const DatasetSpec& spec);

}  // namespace fdiag
