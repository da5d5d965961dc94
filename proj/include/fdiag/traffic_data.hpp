#pragma once

// Road/link/observation data model, CSV ingestion and the derivations that
// turn raw minute-level speed/flow readings into flow-density diagrams.

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fdiag/geometry.hpp"

namespace fdiag {

using Timestamp = std::chrono::sys_seconds;

/// Parses `YYYY-MM-DDTHH:MM:SSZ` (UTC, seconds resolution).
std::optional<Timestamp> parse_timestamp(std::string_view text);
std::string format_timestamp(Timestamp t);

struct LinkGeometry {
    double length_m = 0.0;
    int lanes = 1;
};

struct Link {
    std::string id;
    /// Absent when no links table was supplied for this link.
    std::optional<LinkGeometry> geometry;
};

struct Observation {
    Timestamp timestamp{};
    double speed_kmh = 0.0;
    double flow_vph = 0.0;
};

struct FlowDensityPoint {
    double density = 0.0;  // veh/km
    double flow = 0.0;     // veh/h
    double speed = 0.0;    // km/h
    Timestamp timestamp{};
};

enum class EventCategory { Accident, VehicleObstruction, GeneralObstruction, AbnormalTraffic, Other };

std::string_view category_tag(EventCategory c);
std::optional<EventCategory> parse_category(std::string_view tag);

struct EventRecord {
    std::string link_id;
    EventCategory category = EventCategory::Other;
    Timestamp start{};
    Timestamp end{};
};

struct SignReading {
    std::string link_id;
    Timestamp timestamp{};
    std::string sign_id;
    int limit_mph = 70;
};

/// Active speed-limit state of a link. Ordered from most to least restrictive,
/// with National (no restriction displayed) last.
enum class SpeedLimit { L40, L50, L60, L70, National };

inline constexpr SpeedLimit kVariableLimits[] = {SpeedLimit::L40, SpeedLimit::L50,
                                                 SpeedLimit::L60, SpeedLimit::L70};

/// Displayed value in mph; nullopt for National.
std::optional<int> limit_mph(SpeedLimit s);
/// Conversion table used throughout the analysis: 40/50/60/70 mph map to
/// 64.4/80.5/96.6/112.7 km/h. nullopt for National.
std::optional<double> limit_kmh(SpeedLimit s);
std::string_view limit_tag(SpeedLimit s);  // "40", "50", "60", "70", "national"
std::optional<SpeedLimit> parse_limit_tag(std::string_view tag);
std::optional<SpeedLimit> limit_from_mph(int mph);

struct LinkSeries {
    Link link;
    std::vector<Observation> observations;  // strictly increasing timestamps
    std::vector<EventRecord> events;
    std::vector<SignReading> signs;  // sorted by (timestamp, sign_id)
};

inline constexpr double kDefaultMinSpeed = 1.0;  // km/h

/// density = flow / speed; nullopt when speed < min_speed.
std::optional<FlowDensityPoint> compute_density(const Observation& obs,
                                                double min_speed = kDefaultMinSpeed);

std::vector<FlowDensityPoint> density_points(const LinkSeries& series,
                                             double min_speed = kDefaultMinSpeed);

/// Row-level ingestion failure. `line` is 1-based and counts the header.
class DataError : public std::runtime_error {
public:
    DataError(std::string file, std::size_t line, std::string field, const std::string& what);

    const std::string& file() const { return file_; }
    std::size_t line() const { return line_; }
    const std::string& field() const { return field_; }

private:
    std::string file_;
    std::size_t line_;
    std::string field_;
};

struct IngestSources {
    std::filesystem::path timeseries;
    std::optional<std::filesystem::path> events;
    std::optional<std::filesystem::path> signs;
    std::optional<std::filesystem::path> links;

    /// timeseries.csv plus whichever of events.csv, signs.csv, links.csv exist.
    static IngestSources from_directory(const std::filesystem::path& dir);
};

struct IngestResult {
    std::vector<LinkSeries> series;  // sorted by link id; only links with observations
    std::vector<std::string> unusable_links;  // known links without observations
    std::vector<std::string> warnings;
};

/// Stream-level ingestion; names are used in diagnostics only.
struct IngestStreams {
    std::istream* timeseries = nullptr;
    std::istream* events = nullptr;
    std::istream* signs = nullptr;
    std::istream* links = nullptr;
};

IngestResult ingest(const IngestStreams& streams);
IngestResult ingest(const IngestSources& sources);

void write_timeseries_csv(std::ostream& out, std::span<const LinkSeries> series);
void write_events_csv(std::ostream& out, std::span<const LinkSeries> series);
void write_signs_csv(std::ostream& out, std::span<const LinkSeries> series);
void write_links_csv(std::ostream& out, std::span<const LinkSeries> series);
/// Writes the four canonical CSV files into `dir`.
void write_dataset(const std::filesystem::path& dir, std::span<const LinkSeries> series);

/// Mean of the displayed limits snapped to the nearest of 40/50/60/70 mph;
/// exact ties go to the lower limit. Empty input means National.
/// Throws std::invalid_argument for a reading outside the feasible set.
SpeedLimit resolve_speed_limit(std::span<const SignReading> readings_at_instant);

/// Splits retained points by the limit in force at their timestamp. The most
/// recent batch of sign readings (same timestamp) holds until the next batch.
std::map<SpeedLimit, std::vector<FlowDensityPoint>> segment_by_limit(
    const LinkSeries& series, double min_speed = kDefaultMinSpeed);

/// Characteristic scales for making diagrams dimensionless.
struct PointScale {
    double max_speed = 1.0;
    double max_flow = 1.0;
    double rho_crit = 1.0;  // density of the maximum-flow observation

    static PointScale from_points(std::span<const FlowDensityPoint> points);
};

struct ScaledPoint {
    double density = 0.0;
    double flow = 0.0;
    double speed = 0.0;

    Point2 plane() const { return {density, flow}; }
};

std::vector<ScaledPoint> scale_points(std::span<const FlowDensityPoint> points, const PointScale& scale);
std::vector<Point2> to_plane(std::span<const ScaledPoint> points);

std::size_t count_events(const LinkSeries& series, const std::set<EventCategory>& categories);

struct EventGroupCounts {
    std::size_t accidents_obstructions = 0;
    std::size_t abnormal_traffic = 0;
};

/// Accidents plus vehicle and general obstructions, and abnormal traffic, as
/// two separate groups.
EventGroupCounts count_event_groups(const LinkSeries& series);

}  // namespace fdiag
