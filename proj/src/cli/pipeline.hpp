#pragma once

// Analysis stages shared by the subcommands. Each stage computes per-link
// results (possibly in parallel) and writes them in link_id order.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fdiag/fit_engine.hpp"
#include "fdiag/kde.hpp"
#include "fdiag/link_clustering.hpp"
#include "fdiag/mode_clustering.hpp"
#include "fdiag/serialize.hpp"
#include "fdiag/traffic_data.hpp"

namespace fdiag::cli {

/// Input or validation problem; maps to exit code 2.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Numerical failure (no converged fit, degenerate clustering); exit code 3.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Dataset {
    std::filesystem::path dir;
    std::vector<std::filesystem::path> files;  // files actually read, in fixed order
    IngestResult data;
};

/// Ingests `dir`, keeping only the links named in `filter` when it is
/// non-empty. Unknown ids and an empty result raise InputError.
Dataset load_dataset(const std::filesystem::path& dir, const std::vector<std::string>& filter);

/// Tracks every file written under one root so the manifest can list them.
class OutputSet {
public:
    explicit OutputSet(std::filesystem::path root);
    void write(const std::filesystem::path& relative, const std::string& content);
    void write_json(const std::filesystem::path& relative, const Json& j);
    const std::filesystem::path& root() const { return root_; }
    /// (relative path, FNV-1a hash) in write order.
    const std::vector<std::pair<std::string, std::string>>& files() const { return files_; }

private:
    std::filesystem::path root_;
    std::vector<std::pair<std::string, std::string>> files_;
};

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

// fit

struct FitStageOptions {
    std::vector<FdModelKind> kinds;
    FitConfig config;
    bool by_limit = false;
    unsigned threads = 1;
};

struct LinkFit {
    std::string link_id;
    std::size_t n_points = 0;
    ModelComparison overall;
    std::optional<SegmentedFit> segmented;
};

std::vector<LinkFit> run_fit_stage(const Dataset& ds, const FitStageOptions& opt);
/// ranking.csv and fit_<link>.json under `dir`. Returns the relative paths.
std::vector<std::string> write_fit_stage(OutputSet& out, const std::filesystem::path& dir,
                                         const std::vector<LinkFit>& fits, const std::string& manifest);

// kde

struct KdeStageOptions {
    std::size_t n_x = 256;
    std::size_t n_y = 256;
    std::size_t min_separation = 3;
    double widths = 4.0;  // grid margin in kernel standard deviations
    unsigned threads = 1;
    double min_relative_density = 0.01;
};

struct LinkKde {
    std::string link_id;
    PointScale scale;
    BandwidthMatrix bandwidth{1.0, 0.0, 1.0};
    DensityGrid grid;
    std::vector<GridMode> modes;
};

std::vector<LinkKde> run_kde_stage(const Dataset& ds, const KdeStageOptions& opt);
std::vector<std::string> write_kde_stage(OutputSet& out, const std::filesystem::path& dir,
                                         const std::vector<LinkKde>& kdes, const std::string& manifest);

// modes

struct ModesStageOptions {
    ClaraConfig clara;
    bool by_limit = true;
    unsigned threads = 1;
};

struct SegmentDistances {
    std::string segment;
    DistanceDistribution low;
    DistanceDistribution high;
};

struct LinkModes {
    std::string link_id;
    PointScale scale;
    ModeTrajectory trajectory;
    std::optional<ModeShift> shift;
    std::vector<SegmentDistances> distances;
};

std::vector<LinkModes> run_modes_stage(const Dataset& ds, const ModesStageOptions& opt);
std::vector<std::string> write_modes_stage(OutputSet& out, const std::filesystem::path& dir,
                                           const std::vector<LinkModes>& modes, bool by_limit,
                                           const std::string& manifest);
/// "all" for the unsegmented run, otherwise the limit tag.
std::string segment_name(SpeedLimit limit, bool by_limit);

// cluster-links

struct ClusterStageOptions {
    FdModelKind kind = FdModelKind::DaganzoNewell;
    std::size_t k = 3;
    bool per_lane = false;
    bool scaled_summaries = false;  // five-number summaries on the rescaled features
};

struct ClusterOutcome {
    std::vector<ParameterVector> raw;  // links that entered the clustering
    Dendrogram dendrogram;
    std::vector<std::size_t> assignments;
    std::vector<ClusterSummary> summaries;
    std::map<std::string, std::string> excluded;  // link id -> reason
};

/// Fits `opt.kind` on every link (per lane when requested) and clusters the
/// fitted parameter vectors.
std::vector<LinkFit> fits_for_clustering(const Dataset& ds, const ClusterStageOptions& opt, FitConfig config,
                                         unsigned threads);
ClusterOutcome run_cluster_stage(const Dataset& ds, const std::vector<LinkFit>& fits, const ClusterStageOptions& opt);
std::vector<std::string> write_cluster_stage(OutputSet& out, const std::filesystem::path& dir,
                                             const ClusterOutcome& c, const ClusterStageOptions& opt,
                                             const std::string& manifest);

}  // namespace fdiag::cli
