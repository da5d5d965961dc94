#include "cli/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "fdiag/format.hpp"
#include "fdiag/parallel.hpp"

namespace fdiag::cli {

namespace fs = std::filesystem;

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

Dataset load_dataset(const fs::path& dir, const std::vector<std::string>& filter) {
    if (!fs::is_directory(dir)) throw InputError("data directory '" + dir.string() + "' does not exist");
    Dataset ds;
    ds.dir = dir;
    const auto sources = IngestSources::from_directory(dir);
    if (!fs::exists(sources.timeseries))
        throw InputError("data directory '" + dir.string() + "' has no timeseries.csv");
    ds.files.push_back(sources.timeseries);
    for (const auto& p : {sources.events, sources.signs, sources.links})
        if (p) ds.files.push_back(*p);
    ds.data = ingest(sources);
    if (!filter.empty()) {
        std::set<std::string> wanted(filter.begin(), filter.end());
        std::vector<LinkSeries> kept;
        for (auto& s : ds.data.series)
            if (wanted.erase(s.link.id)) kept.push_back(std::move(s));
        if (!wanted.empty()) throw InputError("unknown link id '" + *wanted.begin() + "'");
        ds.data.series = std::move(kept);
    }
    if (ds.data.series.empty()) throw InputError("no usable links in '" + dir.string() + "'");
    return ds;
}

OutputSet::OutputSet(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

void OutputSet::write(const fs::path& relative, const std::string& content) {
    const fs::path full = root_ / relative;
    if (full.has_parent_path()) fs::create_directories(full.parent_path());
    std::ofstream f(full, std::ios::binary | std::ios::trunc);
    if (!f) throw InputError("cannot write " + full.string());
    f << content;
    if (!f) throw InputError("failed writing " + full.string());
    files_.emplace_back(relative.generic_string(), hex64(fnv1a(content)));
}

void OutputSet::write_json(const fs::path& relative, const Json& j) { write(relative, j.dump(2) + "\n"); }

namespace {

std::string rel(const fs::path& dir, const std::string& name) { return (dir / name).generic_string(); }

std::string link_file(const char* prefix, const std::string& link_id, const char* ext) {
    return std::string(prefix) + link_id + ext;
}

Json failures_json(const std::vector<FitFailure>& failures) {
    Json arr = Json::array();
    for (const auto& f : failures) arr.push_back({{"model", std::string(model_tag(f.kind))}, {"reason", f.reason}});
    return arr;
}

Json comparison_json(const ModelComparison& c) {
    Json ranked = Json::array();
    for (const auto& r : c.ranked) ranked.push_back(fit_result_to_json(r));
    return {{"ranked", ranked}, {"failures", failures_json(c.failures)}};
}

}  // namespace

std::string segment_name(SpeedLimit limit, bool by_limit) {
    return by_limit ? std::string(limit_tag(limit)) : std::string("all");
}

std::vector<LinkFit> run_fit_stage(const Dataset& ds, const FitStageOptions& opt) {
    const auto& series = ds.data.series;
    std::vector<LinkFit> out(series.size());
    FitConfig config = opt.config;
    config.threads = 1;
    parallel_for(series.size(), opt.threads, [&](std::size_t i) {
        const auto points = density_points(series[i]);
        LinkFit& f = out[i];
        f.link_id = series[i].link.id;
        f.n_points = points.size();
        f.overall = compare_models(points, opt.kinds, config);
        if (opt.by_limit) f.segmented = fit_segmented(segment_by_limit(series[i]), opt.kinds, config);
    });
    return out;
}

std::vector<std::string> write_fit_stage(OutputSet& out, const fs::path& dir, const std::vector<LinkFit>& fits,
                                         const std::string& manifest) {
    std::vector<std::string> written;
    std::ostringstream ranking;
    ranking << "link_id,model,rmse,r2,sse\n";
    for (const auto& f : fits) write_ranking_rows(ranking, f.link_id, f.overall.ranked);
    out.write(dir / "ranking.csv", ranking.str());
    written.push_back(rel(dir, "ranking.csv"));
    for (const auto& f : fits) {
        Json j;
        j["manifest"] = manifest;
        j["link_id"] = f.link_id;
        j["n_points"] = f.n_points;
        j["overall"] = comparison_json(f.overall);
        if (f.segmented) {
            Json seg = Json::object();
            for (const auto& [limit, c] : f.segmented->results) seg[std::string(limit_tag(limit))] = comparison_json(c);
            Json skipped = Json::object();
            for (const auto& [limit, why] : f.segmented->skipped) skipped[std::string(limit_tag(limit))] = why;
            j["by_limit"] = seg;
            j["skipped_segments"] = skipped;
        }
        const std::string name = link_file("fit_", f.link_id, ".json");
        out.write_json(dir / name, j);
        written.push_back(rel(dir, name));
    }
    return written;
}

std::vector<LinkKde> run_kde_stage(const Dataset& ds, const KdeStageOptions& opt) {
    const auto& series = ds.data.series;
    std::vector<LinkKde> out(series.size());
    const unsigned inner = series.size() == 1 ? opt.threads : 1;
    parallel_for(series.size(), series.size() == 1 ? 1 : opt.threads, [&](std::size_t i) {
        const auto points = density_points(series[i]);
        if (points.size() < 2) throw InputError("link " + series[i].link.id + " has fewer than two usable points");
        LinkKde& k = out[i];
        k.link_id = series[i].link.id;
        k.scale = PointScale::from_points(points);
        auto plane = to_plane(scale_points(points, k.scale));
        try {
            k.bandwidth = select_bandwidth(plane, RuleOfThumb{});
        } catch (const std::invalid_argument& e) {
            throw NumericalError("link " + k.link_id + ": " + e.what());
        }
        KdeModel model(std::move(plane), k.bandwidth);
        const auto [xr, yr] = covering_ranges(model, opt.widths);
        k.grid = evaluate_grid(model, xr, yr, opt.n_x, opt.n_y, inner);
        k.modes = find_modes(k.grid, opt.min_separation, opt.min_relative_density);
    });
    return out;
}

std::vector<std::string> write_kde_stage(OutputSet& out, const fs::path& dir, const std::vector<LinkKde>& kdes,
                                         const std::string& manifest) {
    std::vector<std::string> written;
    for (const auto& k : kdes) {
        std::ostringstream csv;
        write_grid_csv(csv, k.grid);
        const std::string grid_csv = link_file("kde_", k.link_id, ".csv");
        out.write(dir / grid_csv, csv.str());

        Json j = grid_to_json(k.grid, k.bandwidth);
        Json envelope;
        envelope["manifest"] = manifest;
        envelope["link_id"] = k.link_id;
        envelope["scale"] = {{"rho_crit", k.scale.rho_crit}, {"max_flow", k.scale.max_flow}};
        for (auto& [key, value] : j.items()) envelope[key] = value;
        const std::string grid_json = link_file("kde_", k.link_id, ".json");
        out.write_json(dir / grid_json, envelope);

        std::ostringstream modes;
        modes << "rank,x,y,density,density_vkm,flow_vph\n";
        for (std::size_t r = 0; r < k.modes.size(); ++r) {
            const auto& m = k.modes[r];
            modes << r + 1 << ',' << format_number(m.location.x) << ',' << format_number(m.location.y) << ','
                  << format_number(m.density) << ',' << format_number(m.location.x * k.scale.rho_crit) << ','
                  << format_number(m.location.y * k.scale.max_flow) << '\n';
        }
        const std::string modes_csv = link_file("modes_", k.link_id, ".csv");
        out.write(dir / modes_csv, modes.str());
        for (const auto& n : {grid_csv, grid_json, modes_csv}) written.push_back(rel(dir, n));
    }
    return written;
}

std::vector<LinkModes> run_modes_stage(const Dataset& ds, const ModesStageOptions& opt) {
    const auto& series = ds.data.series;
    std::vector<LinkModes> out(series.size());
    ClaraConfig clara_config = opt.clara;
    clara_config.k = 2;
    clara_config.threads = 1;
    parallel_for(series.size(), opt.threads, [&](std::size_t i) {
        LinkModes& m = out[i];
        m.link_id = series[i].link.id;
        const auto points = density_points(series[i]);
        if (points.empty()) throw InputError("link " + m.link_id + " has no usable points");
        m.scale = PointScale::from_points(points);
        std::map<SpeedLimit, std::vector<FlowDensityPoint>> raw;
        if (opt.by_limit)
            raw = segment_by_limit(series[i]);
        else
            raw[SpeedLimit::National] = points;
        std::map<SpeedLimit, std::vector<Point2>> segments;
        for (const auto& [limit, pts] : raw) segments[limit] = to_plane(scale_points(pts, m.scale));
        m.trajectory = mode_trajectory(segments, clara_config);
        m.shift = relative_density_change(m.trajectory);
        for (const auto& e : m.trajectory.entries) {
            const auto& pts = segments.at(e.limit);
            const MedoidResult r = clara(pts, clara_config);
            const std::size_t low_slot = pts[r.medoids[0]].x < pts[r.medoids[1]].x ? 0 : 1;
            m.distances.push_back({segment_name(e.limit, opt.by_limit), distance_distribution(pts, r, low_slot),
                                   distance_distribution(pts, r, 1 - low_slot)});
        }
    });
    return out;
}

std::vector<std::string> write_modes_stage(OutputSet& out, const fs::path& dir, const std::vector<LinkModes>& modes,
                                           bool by_limit, const std::string& manifest) {
    std::vector<std::string> written;
    auto quantiles = [](const DistanceDistribution& d) { return Json{{"q50", d.q50}, {"q90", d.q90}, {"q99", d.q99}}; };
    for (const auto& m : modes) {
        Json j;
        j["manifest"] = manifest;
        j["link_id"] = m.link_id;
        j["scale"] = {{"rho_crit", m.scale.rho_crit}, {"max_flow", m.scale.max_flow}};
        Json traj = trajectory_to_json(m.trajectory, m.scale);
        if (!by_limit && traj.contains("national")) traj = Json{{"all", traj.at("national")}};
        j["trajectory"] = traj;
        Json skipped = Json::object();
        for (const auto& [limit, why] : m.trajectory.skipped) skipped[segment_name(limit, by_limit)] = why;
        j["skipped_segments"] = skipped;
        j["relative_change"] = m.shift ? Json{{"low", m.shift->low_density_change}, {"high", m.shift->high_density_change}}
                                       : Json(nullptr);
        Json dist = Json::object();
        for (const auto& d : m.distances) dist[d.segment] = {{"low", quantiles(d.low)}, {"high", quantiles(d.high)}};
        j["distance_quantiles"] = dist;
        const std::string name = link_file("modes_", m.link_id, ".json");
        out.write_json(dir / name, j);

        std::ostringstream csv;
        csv << "segment,mode,distance\n";
        for (const auto& d : m.distances) {
            for (double v : d.low.sorted) csv << d.segment << ",low," << format_number(v) << '\n';
            for (double v : d.high.sorted) csv << d.segment << ",high," << format_number(v) << '\n';
        }
        const std::string dname = link_file("distances_", m.link_id, ".csv");
        out.write(dir / dname, csv.str());
        written.push_back(rel(dir, name));
        written.push_back(rel(dir, dname));
    }
    return written;
}

std::vector<LinkFit> fits_for_clustering(const Dataset& ds, const ClusterStageOptions& opt, FitConfig config,
                                         unsigned threads) {
    const auto& series = ds.data.series;
    std::vector<LinkFit> out(series.size());
    config.threads = 1;
    const FdModelKind kinds[] = {opt.kind};
    parallel_for(series.size(), threads, [&](std::size_t i) {
        auto points = density_points(series[i]);
        LinkFit& f = out[i];
        f.link_id = series[i].link.id;
        if (opt.per_lane) {
            if (!series[i].link.geometry)
                throw InputError("link " + f.link_id + " has no lane count; --per-lane needs links.csv");
            const double lanes = series[i].link.geometry->lanes;
            for (auto& p : points) {
                p.density /= lanes;
                p.flow /= lanes;
            }
        }
        f.n_points = points.size();
        f.overall = compare_models(points, kinds, config);
    });
    return out;
}

ClusterOutcome run_cluster_stage(const Dataset& ds, const std::vector<LinkFit>& fits, const ClusterStageOptions& opt) {
    ClusterOutcome c;
    for (const auto& f : fits) {
        const FitResult* found = nullptr;
        for (const auto& r : f.overall.ranked)
            if (r.kind() == opt.kind) found = &r;
        if (found == nullptr) {
            std::string why = "model not fitted";
            for (const auto& fail : f.overall.failures)
                if (fail.kind == opt.kind) why = fail.reason;
            c.excluded[f.link_id] = why;
            continue;
        }
        const auto v = found->best_params.values();
        c.raw.push_back({f.link_id, std::vector<double>(v.begin(), v.end())});
    }
    if (c.raw.empty()) throw NumericalError("no link could be fitted for clustering");
    if (opt.k < 1) throw InputError("--k must be at least 1");
    if (opt.k > c.raw.size())
        throw InputError("--k " + std::to_string(opt.k) + " exceeds the " + std::to_string(c.raw.size()) +
                         " links available for clustering");

    std::vector<ParameterVector> scaled;
    try {
        scaled = rescale_by_feature_max(c.raw);
    } catch (const std::invalid_argument& e) {
        throw NumericalError(e.what());
    }
    if (scaled.size() >= 2) {
        c.dendrogram = hac_ward(scaled);
        c.assignments = cut(c.dendrogram, opt.k);
    } else {
        c.dendrogram = {1, {}};
        c.assignments = {0};
    }
    c.summaries = summarize(c.assignments, opt.scaled_summaries ? scaled : c.raw, ds.data.series);
    return c;
}

std::vector<std::string> write_cluster_stage(OutputSet& out, const fs::path& dir, const ClusterOutcome& c,
                                             const ClusterStageOptions& opt, const std::string& manifest) {
    const auto names = parameter_names(opt.kind);

    Json leaves = Json::array();
    for (const auto& p : c.raw) leaves.push_back(p.link_id);
    Json dendrogram;
    dendrogram["manifest"] = manifest;
    dendrogram["model"] = std::string(model_tag(opt.kind));
    dendrogram["leaves"] = leaves;
    dendrogram["merges"] = dendrogram_to_json(c.dendrogram);
    out.write_json(dir / "dendrogram.json", dendrogram);

    std::ostringstream assignments;
    assignments << "link_id,cluster\n";
    for (std::size_t i = 0; i < c.raw.size(); ++i) assignments << c.raw[i].link_id << ',' << c.assignments[i] << '\n';
    out.write(dir / "assignments.csv", assignments.str());

    std::ostringstream params;
    params << "link_id";
    for (auto n : names) params << ',' << n;
    params << '\n';
    for (const auto& p : c.raw) {
        params << p.link_id;
        for (double v : p.values) params << ',' << format_number(v);
        params << '\n';
    }
    out.write(dir / "parameters.csv", params.str());

    Json summaries;
    summaries["manifest"] = manifest;
    summaries["model"] = std::string(model_tag(opt.kind));
    summaries["units"] = opt.per_lane ? "per lane" : "per link";
    summaries["parameter_scale"] = opt.scaled_summaries ? "rescaled" : "raw";
    summaries["clusters"] = summaries_to_json(c.summaries, names);
    Json excluded = Json::object();
    for (const auto& [id, why] : c.excluded) excluded[id] = why;
    summaries["excluded"] = excluded;
    out.write_json(dir / "summaries.json", summaries);
    return {rel(dir, "dendrogram.json"), rel(dir, "assignments.csv"), rel(dir, "parameters.csv"),
            rel(dir, "summaries.json")};
}

}  // namespace fdiag::cli
