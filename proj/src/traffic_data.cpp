#include "fdiag/traffic_data.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <tuple>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "fdiag/format.hpp"

namespace fdiag {

namespace {

constexpr std::string_view kTimeseriesHeader = "timestamp,link_id,speed_kmh,flow_vph";
constexpr std::string_view kEventsHeader = "link_id,category,start,end";
constexpr std::string_view kSignsHeader = "link_id,timestamp,sign_id,limit_mph";
constexpr std::string_view kLinksHeader = "link_id,length_m,lanes";

bool parse_fixed_int(std::string_view s, int& out) {
    if (s.empty()) return false;
    for (char c : s)
        if (c < '0' || c > '9') return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return fields;
}

std::optional<double> parse_double(std::string_view s) {
    if (s.empty()) return std::nullopt;
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return value;
}

/// Line-oriented CSV reader with a fixed header. Blank lines are skipped.
class CsvTable {
public:
    CsvTable(std::istream& in, std::string name, std::string_view header, std::size_t n_fields)
        : in_(in), name_(std::move(name)), n_fields_(n_fields) {
        std::string line;
        if (!std::getline(in_, line)) {
            empty_ = true;
            return;
        }
        strip_cr(line);
        line_no_ = 1;
        if (line != header)
            throw DataError(name_, 1, "header",
                            "expected header '" + std::string(header) + "', got '" + line + "'");
    }

    bool empty() const { return empty_; }
    const std::string& name() const { return name_; }
    std::size_t line_no() const { return line_no_; }

    /// Next non-blank row, split into exactly n_fields fields.
    bool next(std::vector<std::string_view>& fields) {
        if (empty_) return false;
        while (std::getline(in_, current_)) {
            ++line_no_;
            strip_cr(current_);
            if (current_.empty()) continue;
            fields = split_commas(current_);
            if (fields.size() != n_fields_)
                throw DataError(name_, line_no_, "row",
                                "expected " + std::to_string(n_fields_) + " fields, got " +
                                    std::to_string(fields.size()));
            return true;
        }
        return false;
    }

    [[noreturn]] void fail(std::string_view field, const std::string& what) const {
        throw DataError(name_, line_no_, std::string(field), what);
    }

    Timestamp timestamp(std::string_view text, std::string_view field) const {
        auto t = parse_timestamp(text);
        if (!t) fail(field, "invalid ISO-8601 UTC timestamp '" + std::string(text) + "'");
        return *t;
    }

    double non_negative(std::string_view text, std::string_view field) const {
        auto v = parse_double(text);
        if (!v || !std::isfinite(*v)) fail(field, "not a finite number: '" + std::string(text) + "'");
        if (*v < 0.0) fail(field, "negative value " + std::string(text));
        return *v;
    }

    std::string id(std::string_view text, std::string_view field) const {
        if (text.empty()) fail(field, "empty identifier");
        return std::string(text);
    }

private:
    static void strip_cr(std::string& s) {
        if (!s.empty() && s.back() == '\r') s.pop_back();
    }

    std::istream& in_;
    std::string name_;
    std::size_t n_fields_;
    std::size_t line_no_ = 0;
    bool empty_ = false;
    std::string current_;
};

struct PendingSeries {
    Link link;
    bool has_link_row = false;
    std::vector<std::pair<Observation, std::size_t>> observations;  // with source line
    std::vector<EventRecord> events;
    std::vector<std::pair<SignReading, std::size_t>> signs;
};

constexpr std::array<std::string_view, 5> kCategoryTags = {
    "accident", "vehicle_obstruction", "general_obstruction", "abnormal_traffic", "other"};

}  // namespace

std::optional<Timestamp> parse_timestamp(std::string_view s) {
    // YYYY-MM-DDTHH:MM:SSZ
    if (s.size() != 20 || s[4] != '-' || s[7] != '-' || s[10] != 'T' || s[13] != ':' ||
        s[16] != ':' || s[19] != 'Z')
        return std::nullopt;
    int y, mo, d, h, mi, se;
    if (!parse_fixed_int(s.substr(0, 4), y) || !parse_fixed_int(s.substr(5, 2), mo) ||
        !parse_fixed_int(s.substr(8, 2), d) || !parse_fixed_int(s.substr(11, 2), h) ||
        !parse_fixed_int(s.substr(14, 2), mi) || !parse_fixed_int(s.substr(17, 2), se))
        return std::nullopt;
    const std::chrono::year_month_day ymd{std::chrono::year{y},
                                          std::chrono::month{static_cast<unsigned>(mo)},
                                          std::chrono::day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || h > 23 || mi > 59 || se > 59) return std::nullopt;
    return std::chrono::sys_days{ymd} + std::chrono::hours{h} + std::chrono::minutes{mi} +
           std::chrono::seconds{se};
}

std::string format_timestamp(Timestamp t) {
    const auto day = std::chrono::floor<std::chrono::days>(t);
    const std::chrono::year_month_day ymd{day};
    const std::chrono::hh_mm_ss hms{t - day};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                  static_cast<int>(hms.seconds().count()));
    return buf;
}

std::string_view category_tag(EventCategory c) { return kCategoryTags[static_cast<std::size_t>(c)]; }

std::optional<EventCategory> parse_category(std::string_view tag) {
    for (std::size_t i = 0; i < kCategoryTags.size(); ++i)
        if (kCategoryTags[i] == tag) return static_cast<EventCategory>(i);
    return std::nullopt;
}

std::optional<int> limit_mph(SpeedLimit s) {
    switch (s) {
        case SpeedLimit::L40: return 40;
        case SpeedLimit::L50: return 50;
        case SpeedLimit::L60: return 60;
        case SpeedLimit::L70: return 70;
        case SpeedLimit::National: return std::nullopt;
    }
    return std::nullopt;
}

std::optional<double> limit_kmh(SpeedLimit s) {
    switch (s) {
        case SpeedLimit::L40: return 64.4;
        case SpeedLimit::L50: return 80.5;
        case SpeedLimit::L60: return 96.6;
        case SpeedLimit::L70: return 112.7;
        case SpeedLimit::National: return std::nullopt;
    }
    return std::nullopt;
}

std::string_view limit_tag(SpeedLimit s) {
    switch (s) {
        case SpeedLimit::L40: return "40";
        case SpeedLimit::L50: return "50";
        case SpeedLimit::L60: return "60";
        case SpeedLimit::L70: return "70";
        case SpeedLimit::National: return "national";
    }
    return "national";
}

std::optional<SpeedLimit> parse_limit_tag(std::string_view tag) {
    for (SpeedLimit s : {SpeedLimit::L40, SpeedLimit::L50, SpeedLimit::L60, SpeedLimit::L70,
                         SpeedLimit::National})
        if (limit_tag(s) == tag) return s;
    return std::nullopt;
}

std::optional<SpeedLimit> limit_from_mph(int mph) {
    for (SpeedLimit s : kVariableLimits)
        if (limit_mph(s) == mph) return s;
    return std::nullopt;
}

std::optional<FlowDensityPoint> compute_density(const Observation& obs, double min_speed) {
    if (!(min_speed > 0.0)) throw std::invalid_argument("compute_density: min_speed must be positive");
    if (!(obs.speed_kmh >= min_speed)) return std::nullopt;
    return FlowDensityPoint{obs.flow_vph / obs.speed_kmh, obs.flow_vph, obs.speed_kmh, obs.timestamp};
}

std::vector<FlowDensityPoint> density_points(const LinkSeries& series, double min_speed) {
    std::vector<FlowDensityPoint> out;
    out.reserve(series.observations.size());
    for (const auto& obs : series.observations)
        if (auto p = compute_density(obs, min_speed)) out.push_back(*p);
    return out;
}

DataError::DataError(std::string file, std::size_t line, std::string field, const std::string& what)
    : std::runtime_error(file + ":" + std::to_string(line) + ": " + field + ": " + what),
      file_(std::move(file)),
      line_(line),
      field_(std::move(field)) {}

IngestSources IngestSources::from_directory(const std::filesystem::path& dir) {
    IngestSources s;
    s.timeseries = dir / "timeseries.csv";
    auto optional_file = [&](const char* name) -> std::optional<std::filesystem::path> {
        auto p = dir / name;
        if (std::filesystem::exists(p)) return p;
        return std::nullopt;
    };
    s.events = optional_file("events.csv");
    s.signs = optional_file("signs.csv");
    s.links = optional_file("links.csv");
    return s;
}

IngestResult ingest(const IngestStreams& streams) {
    if (streams.timeseries == nullptr) throw std::invalid_argument("ingest: timeseries stream required");
    IngestResult result;
    std::map<std::string, PendingSeries> pending;
    std::set<std::string> known_links;
    std::vector<std::string_view> f;

    if (streams.links != nullptr) {
        CsvTable table(*streams.links, "links.csv", kLinksHeader, 3);
        if (table.empty()) result.warnings.push_back("links.csv is empty");
        while (table.next(f)) {
            std::string id = table.id(f[0], "link_id");
            auto length = parse_double(f[1]);
            if (!length || !std::isfinite(*length) || *length <= 0.0)
                table.fail("length_m", "length must be a positive number: '" + std::string(f[1]) + "'");
            int lanes = 0;
            if (!parse_fixed_int(f[2], lanes) || lanes < 1)
                table.fail("lanes", "lanes must be a positive integer: '" + std::string(f[2]) + "'");
            auto& p = pending[id];
            if (p.has_link_row) table.fail("link_id", "duplicate link id '" + id + "'");
            p.has_link_row = true;
            p.link = Link{id, LinkGeometry{*length, lanes}};
            known_links.insert(id);
        }
    }

    {
        CsvTable table(*streams.timeseries, "timeseries.csv", kTimeseriesHeader, 4);
        if (table.empty()) result.warnings.push_back("timeseries.csv is empty");
        while (table.next(f)) {
            Observation obs;
            obs.timestamp = table.timestamp(f[0], "timestamp");
            std::string id = table.id(f[1], "link_id");
            obs.speed_kmh = table.non_negative(f[2], "speed_kmh");
            obs.flow_vph = table.non_negative(f[3], "flow_vph");
            auto& p = pending[id];
            p.link.id = id;
            p.observations.emplace_back(obs, table.line_no());
        }
    }

    if (streams.events != nullptr) {
        CsvTable table(*streams.events, "events.csv", kEventsHeader, 4);
        while (table.next(f)) {
            EventRecord ev;
            ev.link_id = table.id(f[0], "link_id");
            auto cat = parse_category(f[1]);
            if (!cat) table.fail("category", "unknown event category '" + std::string(f[1]) + "'");
            ev.category = *cat;
            ev.start = table.timestamp(f[2], "start");
            ev.end = table.timestamp(f[3], "end");
            if (ev.end < ev.start) table.fail("end", "event ends before it starts");
            known_links.insert(ev.link_id);
            auto& p = pending[ev.link_id];
            p.link.id = ev.link_id;
            p.events.push_back(std::move(ev));
        }
    }

    if (streams.signs != nullptr) {
        CsvTable table(*streams.signs, "signs.csv", kSignsHeader, 4);
        while (table.next(f)) {
            SignReading s;
            s.link_id = table.id(f[0], "link_id");
            s.timestamp = table.timestamp(f[1], "timestamp");
            s.sign_id = table.id(f[2], "sign_id");
            if (!parse_fixed_int(f[3], s.limit_mph) || !limit_from_mph(s.limit_mph))
                table.fail("limit_mph", "limit must be one of 40, 50, 60, 70: '" + std::string(f[3]) + "'");
            known_links.insert(s.link_id);
            auto& p = pending[s.link_id];
            p.link.id = s.link_id;
            p.signs.emplace_back(std::move(s), table.line_no());
        }
    }

    for (auto& [id, p] : pending) {
        if (p.observations.empty()) {
            if (known_links.count(id)) result.unusable_links.push_back(id);
            continue;
        }
        std::stable_sort(p.observations.begin(), p.observations.end(),
                         [](const auto& a, const auto& b) { return a.first.timestamp < b.first.timestamp; });
        for (std::size_t i = 1; i < p.observations.size(); ++i) {
            if (p.observations[i].first.timestamp == p.observations[i - 1].first.timestamp) {
                const std::size_t line = std::max(p.observations[i].second, p.observations[i - 1].second);
                throw DataError("timeseries.csv", line, "timestamp",
                                "duplicate observation for link '" + id + "' at " +
                                    format_timestamp(p.observations[i].first.timestamp));
            }
        }
        std::stable_sort(p.signs.begin(), p.signs.end(), [](const auto& a, const auto& b) {
            return std::tie(a.first.timestamp, a.first.sign_id) < std::tie(b.first.timestamp, b.first.sign_id);
        });
        for (std::size_t i = 1; i < p.signs.size(); ++i) {
            const auto& a = p.signs[i - 1].first;
            const auto& b = p.signs[i].first;
            if (a.timestamp == b.timestamp && a.sign_id == b.sign_id)
                throw DataError("signs.csv", std::max(p.signs[i].second, p.signs[i - 1].second), "sign_id",
                                "duplicate reading for sign '" + b.sign_id + "'");
        }
        std::stable_sort(p.events.begin(), p.events.end(), [](const EventRecord& a, const EventRecord& b) {
            return std::tie(a.start, a.end, a.category) < std::tie(b.start, b.end, b.category);
        });

        LinkSeries s;
        s.link = p.link;
        if (streams.links != nullptr && !p.has_link_row)
            result.warnings.push_back("link '" + id + "' has observations but no row in links.csv");
        s.observations.reserve(p.observations.size());
        for (auto& [obs, line] : p.observations) s.observations.push_back(obs);
        for (auto& [sign, line] : p.signs) s.signs.push_back(std::move(sign));
        s.events = std::move(p.events);
        result.series.push_back(std::move(s));
    }
    return result;
}

IngestResult ingest(const IngestSources& sources) {
    auto open = [](const std::filesystem::path& p) {
        auto in = std::make_unique<std::ifstream>(p, std::ios::binary);
        if (!*in) throw DataError(p.filename().string(), 0, "file", "cannot open " + p.string());
        return in;
    };
    auto ts = open(sources.timeseries);
    std::unique_ptr<std::ifstream> ev, sg, ln;
    IngestStreams streams;
    streams.timeseries = ts.get();
    if (sources.events) streams.events = (ev = open(*sources.events)).get();
    if (sources.signs) streams.signs = (sg = open(*sources.signs)).get();
    if (sources.links) streams.links = (ln = open(*sources.links)).get();
    return ingest(streams);
}

void write_timeseries_csv(std::ostream& out, std::span<const LinkSeries> series) {
    out << kTimeseriesHeader << '\n';
    for (const auto& s : series)
        for (const auto& o : s.observations)
            out << format_timestamp(o.timestamp) << ',' << s.link.id << ',' << format_number(o.speed_kmh)
                << ',' << format_number(o.flow_vph) << '\n';
}

void write_events_csv(std::ostream& out, std::span<const LinkSeries> series) {
    out << kEventsHeader << '\n';
    for (const auto& s : series)
        for (const auto& e : s.events)
            out << e.link_id << ',' << category_tag(e.category) << ',' << format_timestamp(e.start) << ','
                << format_timestamp(e.end) << '\n';
}

void write_signs_csv(std::ostream& out, std::span<const LinkSeries> series) {
    out << kSignsHeader << '\n';
    for (const auto& s : series)
        for (const auto& r : s.signs)
            out << r.link_id << ',' << format_timestamp(r.timestamp) << ',' << r.sign_id << ','
                << r.limit_mph << '\n';
}

void write_links_csv(std::ostream& out, std::span<const LinkSeries> series) {
    out << kLinksHeader << '\n';
    for (const auto& s : series)
        if (s.link.geometry)
            out << s.link.id << ',' << format_number(s.link.geometry->length_m) << ','
                << s.link.geometry->lanes << '\n';
}

void write_dataset(const std::filesystem::path& dir, std::span<const LinkSeries> series) {
    std::filesystem::create_directories(dir);
    auto write = [&](const char* name, auto&& writer) {
        std::ofstream out(dir / name, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
        writer(out, series);
    };
    write("timeseries.csv", write_timeseries_csv);
    write("events.csv", write_events_csv);
    write("signs.csv", write_signs_csv);
    write("links.csv", write_links_csv);
}

SpeedLimit resolve_speed_limit(std::span<const SignReading> readings) {
    if (readings.empty()) return SpeedLimit::National;
    long long sum = 0;
    for (const auto& r : readings) {
        if (!limit_from_mph(r.limit_mph))
            throw std::invalid_argument("sign reading outside feasible set: " + std::to_string(r.limit_mph));
        if (r.link_id != readings.front().link_id || r.timestamp != readings.front().timestamp)
            throw std::invalid_argument("resolve_speed_limit: readings must share link and timestamp");
        sum += r.limit_mph;
    }
    const auto n = static_cast<long long>(readings.size());
    // |mean - L| compared as |sum - L*n| to stay in exact integer arithmetic.
    SpeedLimit best = SpeedLimit::L40;
    long long best_gap = -1;
    for (SpeedLimit s : kVariableLimits) {
        const long long gap = std::llabs(sum - static_cast<long long>(*limit_mph(s)) * n);
        if (best_gap < 0 || gap < best_gap) {
            best = s;
            best_gap = gap;
        }
    }
    return best;
}

std::map<SpeedLimit, std::vector<FlowDensityPoint>> segment_by_limit(const LinkSeries& series,
                                                                      double min_speed) {
    struct Batch {
        Timestamp at;
        SpeedLimit limit;
    };
    std::vector<Batch> batches;
    for (std::size_t i = 0; i < series.signs.size();) {
        std::size_t j = i;
        while (j < series.signs.size() && series.signs[j].timestamp == series.signs[i].timestamp) ++j;
        batches.push_back({series.signs[i].timestamp,
                           resolve_speed_limit(std::span(series.signs).subspan(i, j - i))});
        i = j;
    }

    std::map<SpeedLimit, std::vector<FlowDensityPoint>> segments;
    std::size_t next_batch = 0;
    SpeedLimit current = SpeedLimit::National;
    for (const auto& obs : series.observations) {
        while (next_batch < batches.size() && batches[next_batch].at <= obs.timestamp)
            current = batches[next_batch++].limit;
        if (auto p = compute_density(obs, min_speed)) segments[current].push_back(*p);
    }
    return segments;
}

PointScale PointScale::from_points(std::span<const FlowDensityPoint> points) {
    if (points.empty()) throw std::invalid_argument("PointScale: no points");
    PointScale s{0.0, -1.0, 0.0};
    for (const auto& p : points) {
        s.max_speed = std::max(s.max_speed, p.speed);
        if (p.flow > s.max_flow) {
            s.max_flow = p.flow;
            s.rho_crit = p.density;
        }
    }
    if (!(s.max_speed > 0.0 && s.max_flow > 0.0 && s.rho_crit > 0.0))
        throw std::invalid_argument("PointScale: degenerate data (non-positive scale)");
    return s;
}

std::vector<ScaledPoint> scale_points(std::span<const FlowDensityPoint> points, const PointScale& scale) {
    if (!(scale.max_speed > 0.0) || !(scale.max_flow > 0.0) || !(scale.rho_crit > 0.0))
        throw std::invalid_argument("scale_points: scales must be positive");
    std::vector<ScaledPoint> out;
    out.reserve(points.size());
    for (const auto& p : points)
        out.push_back({p.density / scale.rho_crit, p.flow / scale.max_flow, p.speed / scale.max_speed});
    return out;
}

std::vector<Point2> to_plane(std::span<const ScaledPoint> points) {
    std::vector<Point2> out;
    out.reserve(points.size());
    for (const auto& p : points) out.push_back(p.plane());
    return out;
}

std::size_t count_events(const LinkSeries& series, const std::set<EventCategory>& categories) {
    return static_cast<std::size_t>(std::count_if(series.events.begin(), series.events.end(),
                                                  [&](const EventRecord& e) { return categories.count(e.category) > 0; }));
}

EventGroupCounts count_event_groups(const LinkSeries& series) {
    return {count_events(series, {EventCategory::Accident, EventCategory::VehicleObstruction,
                                  EventCategory::GeneralObstruction}),
            count_events(series, {EventCategory::AbnormalTraffic})};
}

}  // namespace fdiag
