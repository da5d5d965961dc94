#include "fdiag/serialize.hpp"

#include <ostream>
#include <set>
#include <stdexcept>

#include "fdiag/format.hpp"

namespace fdiag {

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument(what);
}

double number(const Json& j, const char* key, const std::string& where) {
    require(j.contains(key) && j.at(key).is_number(), where + ": '" + key + "' must be a number");
    return j.at(key).get<double>();
}

void only_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    require(j.is_object(), where + " must be an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, value] : j.items()) require(ok.count(key) > 0, where + ": unknown key '" + key + "'");
}

DensityMode mode_from_json(const Json& j, const std::string& where) {
    only_keys(j, {"center", "jitter", "weight"}, where);
    return {number(j, "center", where), number(j, "jitter", where), number(j, "weight", where)};
}

Json mode_estimate_json(const ModeEstimate& m, const PointScale& scale) {
    Json j;
    j["density"] = m.location.x * scale.rho_crit;
    j["flow"] = m.location.y * scale.max_flow;
    j["std"] = m.spread;
    j["members"] = m.members;
    j["scaled"] = {{"density", m.location.x}, {"flow", m.location.y}};
    return j;
}

}  // namespace

Json params_to_json(const FdModelParams& params) {
    Json values = Json::object();
    const auto names = parameter_names(params.kind());
    for (std::size_t i = 0; i < names.size(); ++i) values[std::string(names[i])] = params.values()[i];
    return Json{{"model", std::string(model_tag(params.kind()))}, {"params", values}};
}

FdModelParams params_from_json(const Json& j) {
    require(j.is_object() && j.contains("model") && j.at("model").is_string(), "model: missing 'model' tag");
    const auto kind = parse_model_tag(j.at("model").get<std::string>());
    require(kind.has_value(), "model: unknown model '" + j.at("model").get<std::string>() + "'");
    require(j.contains("params") && j.at("params").is_object(), "model: missing 'params' object");
    const Json& p = j.at("params");
    std::vector<double> values;
    for (std::string_view name : parameter_names(*kind)) values.push_back(number(p, std::string(name).c_str(), "params"));
    require(p.size() == values.size(), "params: unexpected parameter for " + std::string(model_tag(*kind)));
    return FdModelParams(*kind, std::move(values));
}

Json fit_result_to_json(const FitResult& r) {
    Json j = params_to_json(r.best_params);
    j["sse"] = r.sse;
    j["rmse"] = r.rmse;
    j["r2"] = r.r_squared ? Json(*r.r_squared) : Json(nullptr);
    j["n_starts"] = r.start_objectives.size();
    j["converged"] = r.converged_starts;
    return j;
}

void write_ranking_rows(std::ostream& out, const std::string& link_id, std::span<const FitResult> ranked) {
    for (const auto& r : ranked)
        out << link_id << ',' << model_tag(r.kind()) << ',' << format_number(r.rmse) << ','
            << (r.r_squared ? format_number(*r.r_squared) : std::string()) << ',' << format_number(r.sse) << '\n';
}

void write_grid_csv(std::ostream& out, const DensityGrid& grid) {
    out << "x,y,density\n";
    for (std::size_t i = 0; i < grid.n_x; ++i)
        for (std::size_t j = 0; j < grid.n_y; ++j)
            out << format_number(grid.x_at(i)) << ',' << format_number(grid.y_at(j)) << ','
                << format_number(grid.at(i, j)) << '\n';
}

Json grid_to_json(const DensityGrid& grid, const BandwidthMatrix& bandwidth) {
    Json j;
    j["x_range"] = {grid.x_range.min, grid.x_range.max};
    j["y_range"] = {grid.y_range.min, grid.y_range.max};
    j["n_x"] = grid.n_x;
    j["n_y"] = grid.n_y;
    j["ordering"] = "row-major, x outer: values[i * n_y + j] = density(x_i, y_j)";
    j["bandwidth"] = {{"xx", bandwidth.xx()}, {"xy", bandwidth.xy()}, {"yy", bandwidth.yy()}};
    j["values"] = grid.values;
    return j;
}

Json modes_to_json(std::span<const GridMode> modes) {
    Json arr = Json::array();
    for (const auto& m : modes) arr.push_back({{"x", m.location.x}, {"y", m.location.y}, {"density", m.density}});
    return arr;
}

Json dendrogram_to_json(const Dendrogram& d) {
    Json arr = Json::array();
    for (const auto& m : d.merges) arr.push_back({{"a", m.a}, {"b", m.b}, {"height", m.height}, {"size", m.size}});
    return arr;
}

Json trajectory_to_json(const ModeTrajectory& t, const PointScale& scale) {
    Json j = Json::object();
    for (const auto& e : t.entries)
        j[std::string(limit_tag(e.limit))] = {{"low", mode_estimate_json(e.low, scale)},
                                              {"high", mode_estimate_json(e.high, scale)}};
    return j;
}

Json summaries_to_json(std::span<const ClusterSummary> summaries, std::span<const std::string_view> feature_names) {
    Json arr = Json::array();
    for (const auto& s : summaries) {
        Json params = Json::object();
        for (std::size_t f = 0; f < s.parameters.size(); ++f) {
            const auto& q = s.parameters[f];
            const std::string name = f < feature_names.size() ? std::string(feature_names[f]) : "f" + std::to_string(f);
            params[name] = {{"min", q.min}, {"q1", q.q1}, {"median", q.median}, {"q3", q.q3}, {"max", q.max}};
        }
        Json events = Json::array();
        for (std::size_t i = 0; i < s.members.size(); ++i)
            events.push_back({{"link_id", s.members[i]},
                              {"accidents_obstructions", s.events[i].accidents_obstructions},
                              {"abnormal_traffic", s.events[i].abnormal_traffic}});
        arr.push_back({{"cluster", s.label}, {"members", s.members}, {"parameters", params}, {"events", events}});
    }
    return arr;
}

DatasetSpec dataset_spec_from_json(const Json& j) {
    only_keys(j, {"seed", "start", "links"}, "spec");
    DatasetSpec spec;
    if (j.contains("seed")) {
        require(j.at("seed").is_number_unsigned(), "spec: 'seed' must be a non-negative integer");
        spec.seed = j.at("seed").get<std::uint64_t>();
    }
    Timestamp start = SynthSpec{}.start;
    if (j.contains("start")) {
        require(j.at("start").is_string(), "spec: 'start' must be a timestamp string");
        auto t = parse_timestamp(j.at("start").get<std::string>());
        require(t.has_value(), "spec: invalid 'start' timestamp");
        start = *t;
    }
    require(j.contains("links") && j.at("links").is_array() && !j.at("links").empty(),
            "spec: 'links' must be a non-empty array");
    std::set<std::string> ids;
    for (const Json& l : j.at("links")) {
        only_keys(l, {"link_id", "length_m", "lanes", "model", "n", "noise", "density", "density_cap", "shifts", "events"},
                  "link");
        LinkSynthSpec link;
        SynthSpec& s = link.spec;
        require(l.contains("link_id") && l.at("link_id").is_string() && !l.at("link_id").get<std::string>().empty(),
                "link: 'link_id' must be a non-empty string");
        s.link_id = l.at("link_id").get<std::string>();
        require(s.link_id.find(',') == std::string::npos, "link: 'link_id' may not contain commas");
        require(ids.insert(s.link_id).second, "link: duplicate link_id '" + s.link_id + "'");
        const std::string where = "link '" + s.link_id + "'";
        s.start = start;
        require(l.contains("model"), where + ": missing 'model'");
        s.truth = params_from_json(l.at("model"));
        if (l.contains("n")) {
            require(l.at("n").is_number_unsigned() && l.at("n").get<std::size_t>() > 0, where + ": 'n' must be positive");
            s.n = l.at("n").get<std::size_t>();
        }
        if (l.contains("noise")) s.noise_fraction = number(l, "noise", where);
        if (l.contains("density_cap")) s.density_cap = number(l, "density_cap", where);
        if (l.contains("density")) {
            const Json& d = l.at("density");
            require(d.is_object() && d.contains("type") && d.at("type").is_string(), where + ": density needs a 'type'");
            const std::string type = d.at("type").get<std::string>();
            if (type == "uniform") {
                only_keys(d, {"type", "min", "max"}, where + " density");
                s.law = UniformDensity{number(d, "min", where), number(d, "max", where)};
            } else if (type == "mixture") {
                only_keys(d, {"type", "low", "high"}, where + " density");
                require(d.contains("low") && d.contains("high"), where + ": mixture needs 'low' and 'high'");
                s.law = ModeMixture{mode_from_json(d.at("low"), where + " low"), mode_from_json(d.at("high"), where + " high")};
            } else {
                require(false, where + ": unknown density type '" + type + "'");
            }
        } else {
            s.law = UniformDensity{0.0, density_cap(s)};
        }
        if (l.contains("shifts")) {
            require(l.at("shifts").is_object(), where + ": 'shifts' must be an object");
            for (const auto& [key, value] : l.at("shifts").items()) {
                auto limit = parse_limit_tag(key);
                require(limit.has_value(), where + ": unknown speed limit '" + key + "'");
                only_keys(value, {"low", "high"}, where + " shift");
                s.shifts[*limit] = {number(value, "low", where), number(value, "high", where)};
            }
        }
        if (l.contains("events")) {
            require(l.at("events").is_object(), where + ": 'events' must be an object");
            for (const auto& [key, value] : l.at("events").items()) {
                auto category = parse_category(key);
                require(category.has_value(), where + ": unknown event category '" + key + "'");
                require(value.is_number_unsigned(), where + ": event counts must be non-negative integers");
                link.events[*category] = value.get<std::size_t>();
            }
        }
        if (l.contains("length_m") || l.contains("lanes")) {
            LinkGeometry g;
            g.length_m = number(l, "length_m", where);
            require(l.contains("lanes") && l.at("lanes").is_number_integer(), where + ": 'lanes' must be an integer");
            g.lanes = l.at("lanes").get<int>();
            require(g.length_m > 0.0 && g.lanes >= 1, where + ": geometry needs length_m > 0 and lanes >= 1");
            link.geometry = g;
        }
        validate_spec(s);
        spec.links.push_back(std::move(link));
    }
    return spec;
}

Json truth_to_json(const DatasetSpec& spec, const SynthDataset& data) {
    Json links = Json::array();
    for (std::size_t i = 0; i < data.series.size(); ++i) {
        const auto& t = data.truth[i];
        Json entry = params_to_json(t.truth);
        entry["link_id"] = data.series[i].link.id;
        entry["capacity"] = t.capacity;
        entry["noise_std"] = t.noise_std;
        entry["n_points"] = t.points.size();
        links.push_back(entry);
    }
    return Json{{"seed", spec.seed}, {"links", links}};
}

}  // namespace fdiag
