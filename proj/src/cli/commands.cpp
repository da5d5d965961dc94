#include "cli/commands.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "cli/pipeline.hpp"
#include "fdiag/format.hpp"

namespace fdiag::cli {

namespace fs = std::filesystem;

namespace {

struct CommonOptions {
    std::string data_dir;
    std::string out_dir;
    std::vector<std::string> links;
    std::uint64_t seed = 0;
    unsigned threads = 0;
};

struct Options {
    CommonOptions common;
    // synth
    std::string spec_file;
    bool seed_given = false;
    std::string config_file;
    // fit / cluster-links / report
    std::string model = "all";
    std::string cluster_model = "daganzo_newell";
    std::size_t starts = 100;
    bool by_limit = false;
    // kde
    std::string grid = "256x256";
    std::string report_grid = "128x128";
    std::size_t min_separation = 3;
    double mode_floor = 0.01;
    double widths = 4.0;
    // modes
    std::size_t restarts = 50;
    std::size_t sample_size = 0;
    // cluster-links
    std::size_t k = 3;
    bool per_lane = false;
    bool scaled_summaries = false;
};

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw InputError("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::pair<std::size_t, std::size_t> parse_grid(const std::string& text) {
    const auto x = text.find('x');
    std::size_t nx = 0, ny = 0;
    try {
        if (x == std::string::npos) throw std::invalid_argument("no separator");
        std::size_t used = 0;
        nx = std::stoul(text.substr(0, x), &used);
        if (used != x) throw std::invalid_argument("trailing text");
        ny = std::stoul(text.substr(x + 1), &used);
        if (used != text.size() - x - 1) throw std::invalid_argument("trailing text");
    } catch (const std::exception&) {
        throw InputError("--grid must look like 256x256, got '" + text + "'");
    }
    if (nx < 2 || ny < 2) throw InputError("--grid needs at least 2 nodes per axis");
    return {nx, ny};
}

FdModelKind parse_model(const std::string& tag) {
    auto kind = parse_model_tag(tag);
    if (!kind) throw InputError("unknown model '" + tag + "'");
    return *kind;
}

std::vector<FdModelKind> parse_models(const std::string& tag) {
    if (tag == "all") return {kAllModelKinds.begin(), kAllModelKinds.end()};
    return {parse_model(tag)};
}

std::string now_utc() {
    const auto now = std::chrono::time_point_cast<std::chrono::seconds>(std::chrono::system_clock::now());
    return format_timestamp(now);
}

/// Collects the pieces of manifest.json for one invocation.
class Manifest {
public:
    Manifest(std::string command, Json config) : command_(std::move(command)), config_(std::move(config)) {
        started_ = std::chrono::steady_clock::now();
        started_utc_ = now_utc();
    }

    void add_input(const fs::path& p) {
        const std::string bytes = read_file(p);
        inputs_.push_back({{"path", p.generic_string()}, {"fnv1a", hex64(fnv1a(bytes))}});
        input_hash_ = fnv1a(p.filename().generic_string() + '\n' + bytes, input_hash_);
    }
    void set_seeds(Json seeds) { seeds_ = std::move(seeds); }
    void warn(std::string w) { warnings_.push_back(std::move(w)); }

    /// Hash of the command, the resolved configuration and the input bytes.
    /// Paths and thread counts do not enter it, so reruns elsewhere agree.
    std::string hash() const {
        std::uint64_t h = fnv1a(command_ + '\n' + config_.dump() + '\n' + seeds_.dump());
        h = fnv1a(hex64(input_hash_), h);
        return hex64(h);
    }

    void write(OutputSet& out) const {
        Json j;
        j["command"] = command_;
        j["version"] = kToolVersion;
        j["config_hash"] = hash();
        j["config"] = config_;
        j["seeds"] = seeds_;
        j["inputs"] = inputs_;
        Json outputs = Json::array();
        for (const auto& [path, h] : out.files()) outputs.push_back({{"path", path}, {"fnv1a", h}});
        j["outputs"] = outputs;
        j["warnings"] = warnings_;
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
        j["wall_clock"] = {{"started_utc", started_utc_}, {"elapsed_seconds", elapsed}};
        std::ofstream f(out.root() / "manifest.json", std::ios::binary | std::ios::trunc);
        f << j.dump(2) << '\n';
        if (!f) throw InputError("cannot write manifest.json");
    }

private:
    std::string command_;
    Json config_;
    Json seeds_ = Json::object();
    Json inputs_ = Json::array();
    std::vector<std::string> warnings_;
    std::uint64_t input_hash_ = 0xcbf29ce484222325ULL;
    std::chrono::steady_clock::time_point started_;
    std::string started_utc_;
};

std::string dataset_csv(void (*writer)(std::ostream&, std::span<const LinkSeries>),
                        std::span<const LinkSeries> series) {
    std::ostringstream ss;
    writer(ss, series);
    return ss.str();
}

void write_dataset_files(OutputSet& out, std::span<const LinkSeries> series) {
    out.write("timeseries.csv", dataset_csv(write_timeseries_csv, series));
    out.write("events.csv", dataset_csv(write_events_csv, series));
    out.write("signs.csv", dataset_csv(write_signs_csv, series));
    out.write("links.csv", dataset_csv(write_links_csv, series));
}

void report_warnings(const Dataset& ds, Manifest& m, std::ostream& err) {
    for (const auto& w : ds.data.warnings) {
        err << "warning: " << w << '\n';
        m.warn(w);
    }
}

Json links_json(const Dataset& ds) {
    Json ids = Json::array();
    for (const auto& s : ds.data.series) ids.push_back(s.link.id);
    return ids;
}

FitConfig fit_config(const Options& o) {
    FitConfig c;
    c.n_starts = o.starts;
    c.rng_seed = o.common.seed;
    return c;
}

ClaraConfig clara_config(const Options& o) {
    ClaraConfig c;
    c.k = 2;
    c.n_restarts = o.restarts;
    c.sample_size = o.sample_size;
    c.rng_seed = o.common.seed;
    return c;
}

void check_positive(std::size_t v, const char* flag) {
    if (v == 0) throw InputError(std::string(flag) + " must be positive");
}

void check_kde_options(const Options& o) {
    if (!(o.widths > 0.0)) throw InputError("--widths must be positive");
    if (!(o.mode_floor >= 0.0 && o.mode_floor <= 1.0)) throw InputError("--mode-floor must lie in [0, 1]");
}

// ingest

int cmd_ingest(const Options& o, std::ostream& out, std::ostream& err) {
    const Dataset ds = load_dataset(o.common.data_dir, o.common.links);
    std::size_t observations = 0;
    for (const auto& s : ds.data.series) observations += s.observations.size();
    for (const auto& w : ds.data.warnings) err << "warning: " << w << '\n';
    for (const auto& id : ds.data.unusable_links) err << "warning: link " << id << " has no observations\n";
    out << ds.data.series.size() << " links usable, " << observations << " observations\n";
    if (o.common.out_dir.empty()) return 0;

    Manifest m("ingest", Json{{"links", o.common.links}});
    for (const auto& f : ds.files) m.add_input(f);
    for (const auto& w : ds.data.warnings) m.warn(w);
    OutputSet outputs(o.common.out_dir);
    write_dataset_files(outputs, ds.data.series);
    Json summary;
    summary["manifest"] = m.hash();
    summary["usable_links"] = links_json(ds);
    summary["unusable_links"] = ds.data.unusable_links;
    summary["observations"] = observations;
    outputs.write_json("ingest_summary.json", summary);
    m.write(outputs);
    return 0;
}

// synth

int cmd_synth(const Options& o, std::ostream& out, std::ostream&) {
    Json spec_json;
    try {
        spec_json = Json::parse(read_file(o.spec_file));
    } catch (const Json::parse_error& e) {
        throw InputError(o.spec_file + ": " + e.what());
    }
    DatasetSpec spec = dataset_spec_from_json(spec_json);
    if (o.seed_given) spec.seed = o.common.seed;
    const SynthDataset data = generate_dataset(spec);

    Manifest m("synth", Json{{"seed", spec.seed}});
    m.add_input(o.spec_file);
    m.set_seeds({{"dataset", spec.seed}});
    OutputSet outputs(o.common.out_dir);
    write_dataset_files(outputs, data.series);
    Json truth = truth_to_json(spec, data);
    truth["manifest"] = m.hash();
    outputs.write_json("truth.json", truth);
    m.write(outputs);
    out << "wrote " << data.series.size() << " links to " << o.common.out_dir << '\n';
    return 0;
}

// fit

int failed_links(const std::vector<LinkFit>& fits, std::ostream& err) {
    int failed = 0;
    for (const auto& f : fits)
        if (f.overall.ranked.empty()) {
            err << "error: no model converged on link " << f.link_id;
            if (!f.overall.failures.empty()) err << " (" << f.overall.failures.front().reason << ")";
            err << '\n';
            ++failed;
        }
    return failed;
}

int cmd_fit(const Options& o, std::ostream& out, std::ostream& err) {
    check_positive(o.starts, "--starts");
    const auto kinds = parse_models(o.model);
    const Dataset ds = load_dataset(o.common.data_dir, o.common.links);
    Manifest m("fit", Json{{"links", links_json(ds)}, {"model", o.model}, {"starts", o.starts}, {"by_limit", o.by_limit}});
    for (const auto& f : ds.files) m.add_input(f);
    m.set_seeds({{"fit", o.common.seed}});
    report_warnings(ds, m, err);

    FitStageOptions opt{kinds, fit_config(o), o.by_limit, o.common.threads};
    const auto fits = run_fit_stage(ds, opt);
    OutputSet outputs(o.common.out_dir);
    write_fit_stage(outputs, "", fits, m.hash());
    m.write(outputs);
    const int failed = failed_links(fits, err);
    out << "fitted " << fits.size() - static_cast<std::size_t>(failed) << " of " << fits.size() << " links\n";
    return failed > 0 ? 3 : 0;
}

// kde

int cmd_kde(const Options& o, std::ostream& out, std::ostream& err) {
    const auto [nx, ny] = parse_grid(o.grid);
    check_kde_options(o);
    const Dataset ds = load_dataset(o.common.data_dir, o.common.links);
    Manifest m("kde", Json{{"links", links_json(ds)},
                           {"grid", o.grid},
                           {"min_separation", o.min_separation},
                           {"mode_floor", o.mode_floor},
                           {"widths", o.widths}});
    for (const auto& f : ds.files) m.add_input(f);
    report_warnings(ds, m, err);
    KdeStageOptions opt{nx, ny, o.min_separation, o.widths, o.common.threads, o.mode_floor};
    const auto kdes = run_kde_stage(ds, opt);
    OutputSet outputs(o.common.out_dir);
    write_kde_stage(outputs, "", kdes, m.hash());
    m.write(outputs);
    for (const auto& k : kdes) out << k.link_id << ": " << k.modes.size() << " modes\n";
    return 0;
}

// modes

void report_skipped(const std::vector<LinkModes>& modes, bool by_limit, Manifest& m, std::ostream& err) {
    for (const auto& lm : modes)
        for (const auto& [limit, why] : lm.trajectory.skipped) {
            const std::string w = "link " + lm.link_id + " segment " + segment_name(limit, by_limit) + " skipped: " + why;
            err << "warning: " << w << '\n';
            m.warn(w);
        }
}

int cmd_modes(const Options& o, std::ostream& out, std::ostream& err) {
    check_positive(o.restarts, "--restarts");
    if (o.sample_size == 1) throw InputError("--sample-size must be 0 (default) or at least 2");
    const Dataset ds = load_dataset(o.common.data_dir, o.common.links);
    Manifest m("modes", Json{{"links", links_json(ds)},
                             {"by_limit", o.by_limit},
                             {"restarts", o.restarts},
                             {"sample_size", o.sample_size}});
    for (const auto& f : ds.files) m.add_input(f);
    m.set_seeds({{"clara", o.common.seed}});
    report_warnings(ds, m, err);
    ModesStageOptions opt{clara_config(o), o.by_limit, o.common.threads};
    const auto modes = run_modes_stage(ds, opt);
    report_skipped(modes, o.by_limit, m, err);
    OutputSet outputs(o.common.out_dir);
    write_modes_stage(outputs, "", modes, o.by_limit, m.hash());
    m.write(outputs);
    for (const auto& lm : modes) out << lm.link_id << ": " << lm.trajectory.entries.size() << " segments\n";
    return 0;
}

// cluster-links

int cmd_cluster_links(const Options& o, std::ostream& out, std::ostream& err) {
    check_positive(o.starts, "--starts");
    check_positive(o.k, "--k");
    ClusterStageOptions copt{parse_model(o.cluster_model), o.k, o.per_lane, o.scaled_summaries};
    const Dataset ds = load_dataset(o.common.data_dir, o.common.links);
    if (o.k > ds.data.series.size())
        throw InputError("--k " + std::to_string(o.k) + " exceeds the " + std::to_string(ds.data.series.size()) +
                         " links available");
    Manifest m("cluster-links", Json{{"links", links_json(ds)},
                                     {"model", o.cluster_model},
                                     {"k", o.k},
                                     {"starts", o.starts},
                                     {"per_lane", o.per_lane},
                                     {"scaled_summaries", o.scaled_summaries}});
    for (const auto& f : ds.files) m.add_input(f);
    m.set_seeds({{"fit", o.common.seed}});
    report_warnings(ds, m, err);
    const auto fits = fits_for_clustering(ds, copt, fit_config(o), o.common.threads);
    const ClusterOutcome c = run_cluster_stage(ds, fits, copt);
    for (const auto& [id, why] : c.excluded) {
        err << "warning: link " << id << " excluded: " << why << '\n';
        m.warn("link " + id + " excluded: " + why);
    }
    OutputSet outputs(o.common.out_dir);
    write_cluster_stage(outputs, "", c, copt, m.hash());
    m.write(outputs);
    out << c.raw.size() << " links in " << o.k << " clusters\n";
    return 0;
}

// report

int cmd_report(const Options& o, std::ostream& out, std::ostream& err) {
    check_positive(o.starts, "--starts");
    check_positive(o.restarts, "--restarts");
    check_positive(o.k, "--k");
    const auto kinds = parse_models(o.model);
    const auto [nx, ny] = parse_grid(o.report_grid);
    check_kde_options(o);
    ClusterStageOptions copt{parse_model(o.cluster_model), o.k, o.per_lane, o.scaled_summaries};
    const Dataset ds = load_dataset(o.common.data_dir, o.common.links);
    if (o.k > ds.data.series.size())
        throw InputError("--k " + std::to_string(o.k) + " exceeds the " + std::to_string(ds.data.series.size()) +
                         " links available");
    Manifest m("report", Json{{"links", links_json(ds)},
                              {"model", o.model},
                              {"cluster_model", o.cluster_model},
                              {"starts", o.starts},
                              {"restarts", o.restarts},
                              {"sample_size", o.sample_size},
                              {"grid", o.report_grid},
                              {"min_separation", o.min_separation},
                              {"mode_floor", o.mode_floor},
                              {"widths", o.widths},
                              {"k", o.k},
                              {"per_lane", o.per_lane},
                              {"scaled_summaries", o.scaled_summaries}});
    for (const auto& f : ds.files) m.add_input(f);
    m.set_seeds({{"fit", o.common.seed}, {"clara", o.common.seed}});
    report_warnings(ds, m, err);
    const std::string hash = m.hash();
    const unsigned threads = o.common.threads;

    const auto fits = run_fit_stage(ds, {kinds, fit_config(o), false, threads});
    const auto kdes = run_kde_stage(ds, {nx, ny, o.min_separation, o.widths, threads, o.mode_floor});
    const auto modes = run_modes_stage(ds, {clara_config(o), true, threads});
    report_skipped(modes, true, m, err);
    const bool reuse = !o.per_lane && std::find(kinds.begin(), kinds.end(), copt.kind) != kinds.end();
    const auto cluster_fits = reuse ? fits : fits_for_clustering(ds, copt, fit_config(o), threads);
    const ClusterOutcome clusters = run_cluster_stage(ds, cluster_fits, copt);
    for (const auto& [id, why] : clusters.excluded) m.warn("link " + id + " excluded from clustering: " + why);

    OutputSet outputs(o.common.out_dir);
    Json artifacts;
    artifacts["fit"] = write_fit_stage(outputs, "fit", fits, hash);
    artifacts["kde"] = write_kde_stage(outputs, "kde", kdes, hash);
    artifacts["modes"] = write_modes_stage(outputs, "modes", modes, true, hash);
    artifacts["clusters"] = write_cluster_stage(outputs, "clusters", clusters, copt, hash);

    std::ostringstream rmse;
    rmse << "link_id,model,rank,rmse\n";
    std::map<std::string, std::size_t> best_counts;
    for (const auto& f : fits) {
        for (std::size_t r = 0; r < f.overall.ranked.size(); ++r)
            rmse << f.link_id << ',' << model_tag(f.overall.ranked[r].kind()) << ',' << r + 1 << ','
                 << format_number(f.overall.ranked[r].rmse) << '\n';
        if (!f.overall.ranked.empty()) ++best_counts[std::string(model_tag(f.overall.ranked.front().kind()))];
    }
    outputs.write("rmse_by_link.csv", rmse.str());

    std::ostringstream traj;
    traj << "link_id,segment,mode,density_vkm,flow_vph,std\n";
    Json shifts = Json::object();
    for (const auto& lm : modes) {
        for (const auto& e : lm.trajectory.entries)
            for (const auto& [label, est] : {std::pair{"low", &e.low}, std::pair{"high", &e.high}})
                traj << lm.link_id << ',' << limit_tag(e.limit) << ',' << label << ','
                     << format_number(est->location.x * lm.scale.rho_crit) << ','
                     << format_number(est->location.y * lm.scale.max_flow) << ',' << format_number(est->spread) << '\n';
        shifts[lm.link_id] =
            lm.shift ? Json{{"low", lm.shift->low_density_change}, {"high", lm.shift->high_density_change}}
                     : Json(nullptr);
    }
    outputs.write("mode_trajectories.csv", traj.str());

    const auto names = parameter_names(copt.kind);
    std::ostringstream boxes;
    boxes << "cluster,parameter,min,q1,median,q3,max\n";
    for (const auto& s : clusters.summaries)
        for (std::size_t f = 0; f < s.parameters.size(); ++f) {
            const auto& q = s.parameters[f];
            boxes << s.label << ',' << names[f] << ',' << format_number(q.min) << ',' << format_number(q.q1) << ','
                  << format_number(q.median) << ',' << format_number(q.q3) << ',' << format_number(q.max) << '\n';
        }
    outputs.write("cluster_boxes.csv", boxes.str());

    std::ostringstream events;
    events << "link_id,cluster,accidents_obstructions,abnormal_traffic\n";
    for (const auto& s : clusters.summaries)
        for (std::size_t i = 0; i < s.members.size(); ++i)
            events << s.members[i] << ',' << s.label << ',' << s.events[i].accidents_obstructions << ','
                   << s.events[i].abnormal_traffic << '\n';
    outputs.write("event_counts.csv", events.str());

    Json report;
    report["manifest"] = hash;
    report["version"] = kToolVersion;
    report["links"] = links_json(ds);
    artifacts["tables"] = {"rmse_by_link.csv", "mode_trajectories.csv", "cluster_boxes.csv", "event_counts.csv"};
    report["artifacts"] = artifacts;
    Json best = Json::object();
    for (const auto& [tag, n] : best_counts) best[tag] = n;
    report["best_model_counts"] = best;
    report["mode_shifts"] = shifts;
    Json assignments = Json::object();
    for (std::size_t i = 0; i < clusters.raw.size(); ++i) assignments[clusters.raw[i].link_id] = clusters.assignments[i];
    report["clusters"] = {{"model", std::string(model_tag(copt.kind))}, {"k", o.k}, {"assignments", assignments}};
    outputs.write_json("report.json", report);
    m.write(outputs);

    const int failed = failed_links(fits, err);
    out << "report for " << ds.data.series.size() << " links written to " << o.common.out_dir << '\n';
    return failed > 0 ? 3 : 0;
}

void add_common(CLI::App* sub, Options& o, bool needs_data, bool needs_out) {
    sub->add_option("--config", o.config_file, "TOML/INI file with option defaults; command-line flags win");
    auto* d = sub->add_option("--data-dir", o.common.data_dir, "Dataset directory (timeseries.csv, ...)");
    if (needs_data) d->required();
    auto* out = sub->add_option("--out-dir", o.common.out_dir, "Output directory");
    if (needs_out) out->required();
    sub->add_option("--links", o.common.links, "Comma-separated link ids to keep")->delimiter(',');
    sub->add_option("--threads", o.common.threads, "Worker threads (0 = all cores)");
}

void add_seed(CLI::App* sub, Options& o) { sub->add_option("--seed", o.common.seed, "Random seed"); }

/// Fills options not given on the command line from `o.config_file`. Keys are
/// long option names without dashes, either top-level or under a [<command>] section.
void apply_config_file(CLI::App* sub, const Options& o) {
    if (o.config_file.empty()) return;
    if (!fs::is_regular_file(o.config_file)) throw InputError("config file '" + o.config_file + "' not found");
    std::vector<CLI::ConfigItem> items;
    try {
        items = CLI::ConfigTOML().from_file(o.config_file);
    } catch (const CLI::Error& e) {
        throw InputError(o.config_file + ": " + e.what());
    }
    for (const auto& item : items) {
        if (item.name == "++" || item.name == "--") continue;
        if (!item.parents.empty() && !(item.parents.size() == 1 && item.parents[0] == sub->get_name())) continue;
        CLI::Option* opt = item.name == "config" ? nullptr : sub->get_option_no_throw("--" + item.name);
        if (opt == nullptr) throw InputError(o.config_file + ": unknown option '" + item.name + "' for " + sub->get_name());
        if (opt->count() > 0) continue;
        opt->add_result(item.inputs);
        opt->run_callback();
    }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Fundamental-diagram analysis of motorway link data", "fdiag"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);
    Options o;

    auto* ingest_cmd = app.add_subcommand("ingest", "Validate a dataset directory");
    add_common(ingest_cmd, o, true, false);

    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset from a JSON description");
    synth_cmd->add_option("spec", o.spec_file, "Dataset description (JSON)")->required();
    synth_cmd->add_option("--out-dir", o.common.out_dir, "Output directory")->required();
    auto* synth_seed = synth_cmd->add_option("--seed", o.common.seed, "Override the description's seed");

    auto* fit_cmd = app.add_subcommand("fit", "Fit fundamental-diagram models per link");
    add_common(fit_cmd, o, true, true);
    add_seed(fit_cmd, o);
    fit_cmd->add_option("--model", o.model, "Model tag or 'all'");
    fit_cmd->add_option("--starts", o.starts, "Random starts per fit");
    fit_cmd->add_flag("--by-limit", o.by_limit, "Also fit each speed-limit segment");

    auto* kde_cmd = app.add_subcommand("kde", "Kernel density grid and modes per link");
    add_common(kde_cmd, o, true, true);
    kde_cmd->add_option("--grid", o.grid, "Grid resolution NXxNY");
    kde_cmd->add_option("--min-separation", o.min_separation, "Mode suppression radius in grid cells");
    kde_cmd->add_option("--mode-floor", o.mode_floor, "Drop maxima below this fraction of the peak density");
    kde_cmd->add_option("--widths", o.widths, "Grid margin in kernel standard deviations");

    auto* modes_cmd = app.add_subcommand("modes", "Low/high-density modes via k-medoids");
    add_common(modes_cmd, o, true, true);
    add_seed(modes_cmd, o);
    modes_cmd->add_flag("--by-limit", o.by_limit, "Track the modes across speed-limit segments");
    modes_cmd->add_option("--restarts", o.restarts, "CLARA restarts");
    modes_cmd->add_option("--sample-size", o.sample_size, "CLARA sample size (0 = 200 + 2k)");

    auto* cluster_cmd = app.add_subcommand("cluster-links", "Ward clustering of fitted link parameters");
    add_common(cluster_cmd, o, true, true);
    add_seed(cluster_cmd, o);
    cluster_cmd->add_option("--k", o.k, "Number of clusters");
    cluster_cmd->add_option("--model", o.cluster_model, "Model whose parameters are clustered");
    cluster_cmd->add_option("--starts", o.starts, "Random starts per fit");
    cluster_cmd->add_flag("--per-lane", o.per_lane, "Fit on per-lane flow and density (needs links.csv)");
    cluster_cmd->add_flag("--scaled-summaries", o.scaled_summaries, "Summarise rescaled instead of raw parameters");

    auto* report_cmd = app.add_subcommand("report", "Run every stage and write plot-ready tables");
    add_common(report_cmd, o, true, true);
    add_seed(report_cmd, o);
    report_cmd->add_option("--model", o.model, "Models to rank: tag or 'all'");
    report_cmd->add_option("--cluster-model", o.cluster_model, "Model whose parameters are clustered");
    report_cmd->add_option("--starts", o.starts, "Random starts per fit");
    report_cmd->add_option("--restarts", o.restarts, "CLARA restarts");
    report_cmd->add_option("--sample-size", o.sample_size, "CLARA sample size (0 = 200 + 2k)");
    report_cmd->add_option("--grid", o.report_grid, "KDE grid resolution NXxNY");
    report_cmd->add_option("--min-separation", o.min_separation, "KDE mode suppression radius in grid cells");
    report_cmd->add_option("--mode-floor", o.mode_floor, "Drop KDE maxima below this fraction of the peak density");
    report_cmd->add_option("--widths", o.widths, "KDE grid margin in kernel standard deviations");
    report_cmd->add_option("--k", o.k, "Number of link clusters");
    report_cmd->add_flag("--per-lane", o.per_lane, "Cluster per-lane fits");
    report_cmd->add_flag("--scaled-summaries", o.scaled_summaries, "Summarise rescaled instead of raw parameters");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }
    o.seed_given = synth_seed->count() > 0;

    try {
        try {
            apply_config_file(app.get_subcommands().front(), o);
        } catch (const CLI::ParseError& e) {
            throw InputError(o.config_file + ": " + e.what());
        }
        if (*ingest_cmd) return cmd_ingest(o, out, err);
        if (*synth_cmd) return cmd_synth(o, out, err);
        if (*fit_cmd) return cmd_fit(o, out, err);
        if (*kde_cmd) return cmd_kde(o, out, err);
        if (*modes_cmd) return cmd_modes(o, out, err);
        if (*cluster_cmd) return cmd_cluster_links(o, out, err);
        if (*report_cmd) return cmd_report(o, out, err);
    } catch (const DataError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const InputError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 3;
    }
    return 2;
}

}  // namespace fdiag::cli
