// Acceptance runner: one PASS/FAIL line per criterion, non-zero exit when any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include <json.hpp>

#include "cli/commands.hpp"
#include "fdiag/fit_engine.hpp"
#include "fdiag/kde.hpp"
#include "fdiag/link_clustering.hpp"
#include "fdiag/mode_clustering.hpp"
#include "fdiag/synthgen.hpp"
#include "fdiag/traffic_data.hpp"
#include "../oracles.hpp"

namespace fs = std::filesystem;
using namespace fdiag;
using Json = nlohmann::ordered_json;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

FitConfig fit_config(std::size_t starts, std::uint64_t seed) {
    FitConfig c;
    c.n_starts = starts;
    c.rng_seed = seed;
    c.threads = 0;
    return c;
}

SynthSpec uniform_spec(const FdModelParams& truth, std::size_t n, double noise, std::uint64_t seed) {
    SynthSpec s;
    s.truth = truth;
    s.n = n;
    s.noise_fraction = noise;
    s.seed = seed;
    s.law = UniformDensity{0.0, density_cap(s)};
    return s;
}

bool is_triangular(FdModelKind k) { return k == FdModelKind::DaganzoNewell || k == FdModelKind::ContinuousTriangle; }

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("fdiag_acceptance_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

// 1. Noiseless recovery of every model.
Verdict parameter_recovery() {
    const std::vector<FdModelParams> truths{
        FdModelParams(FdModelKind::Greenshields, {100.0, 150.0}),
        FdModelParams(FdModelKind::Greenberg, {40.0, 150.0}),
        FdModelParams(FdModelKind::Northwestern, {110.0, 40.0}),
        FdModelParams(FdModelKind::Newell, {110.0, 140.0, 2500.0}),
        FdModelParams(FdModelKind::Logistic, {110.0, 45.0, 8.0}),
        FdModelParams(FdModelKind::DaganzoNewell, {4000.0, 40.0, 120.0}),
        FdModelParams(FdModelKind::ContinuousTriangle, {1000.0, 8.0, 0.3, 140.0})};
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    double worst_rel = 0.0, worst_rmse = 0.0;
    std::string bad;
    for (std::size_t m = 0; m < truths.size(); ++m) {
        const auto data = generate(uniform_spec(truths[m], 500, 0.0, 1000 + m));
        const auto r = fit(truths[m].kind(), data.points, fit_config(100, 7 + m));
        double rel = 0.0;
        for (std::size_t i = 0; i < truths[m].values().size(); ++i)
            rel = std::max(rel, std::abs(r.best_params.values()[i] - truths[m].values()[i]) /
                                    std::abs(truths[m].values()[i]));
        worst_rel = std::max(worst_rel, rel);
        worst_rmse = std::max(worst_rmse, r.rmse);
        if (!(rel <= 1e-4 && r.rmse < 1e-6)) {
            ok = false;
            bad += std::string(bad.empty() ? "" : ",") + std::string(model_tag(truths[m].kind()));
        }
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ok = ok && secs < 60.0;
    return {ok, "max rel err " + fmt("%.2e", worst_rel) + ", max rmse " + fmt("%.2e", worst_rmse) + ", " +
                    fmt("%.1f", secs) + " s" + (bad.empty() ? "" : ", failed: " + bad)};
}

// 2. Triangular forms win on triangular data.
Verdict model_selection() {
    const FdModelParams truth(FdModelKind::DaganzoNewell, {4000.0, 40.0, 120.0});
    int wins = 0;
    for (std::uint64_t trial = 0; trial < 100; ++trial) {
        const auto data = generate(uniform_spec(truth, 300, 0.05, 2000 + trial));
        const auto c = compare_models(data.points, kAllModelKinds, fit_config(20, trial));
        if (!c.ranked.empty() && is_triangular(c.ranked.front().kind())) ++wins;
    }
    return {wins >= 95, std::to_string(wins) + "/100 runs ranked a triangular form first"};
}

// 3. Noise narrows the spread between best and worst model.
Verdict segmented_contrast() {
    const FdModelParams truth(FdModelKind::DaganzoNewell, {4000.0, 40.0, 120.0});
    auto gap = [&](double noise, std::uint64_t seed) {
        const auto data = generate(uniform_spec(truth, 300, noise, seed));
        const auto c = compare_models(data.points, kAllModelKinds, fit_config(10, seed));
        return (c.ranked.back().rmse - c.ranked.front().rmse) / c.ranked.front().rmse;
    };
    int hits = 0;
    for (std::uint64_t trial = 0; trial < 100; ++trial)
        if (gap(0.20, 3000 + trial) < gap(0.02, 4000 + trial)) ++hits;
    return {hits >= 90, std::to_string(hits) + "/100 trials with a smaller normalised gap at 20% noise"};
}

// 4. KDE integrates to one.
Verdict kde_normalization() {
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> u(0.2, 3.0);
    std::normal_distribution<double> z(0.0, 1.0);
    double lo = 1e9, hi = -1e9;
    for (int d = 0; d < 20; ++d) {
        // Random scales, correlation in (-0.8, 0.8) and centre.
        const double sx = u(gen), sy = u(gen), rho = 0.8 * (u(gen) - 1.6) / 1.4;
        const Point2 c{10.0 * u(gen), -5.0 * u(gen)};
        std::vector<Point2> pts;
        for (int i = 0; i < 200; ++i) {
            const double a = z(gen), b = z(gen);
            pts.push_back({c.x + sx * a, c.y + sy * (rho * a + std::sqrt(1 - rho * rho) * b)});
        }
        const KdeModel m(pts, select_bandwidth(pts, RuleOfThumb{}));
        const auto [xr, yr] = covering_ranges(m, 8.0);
        const double integral = trapezoid_integral(evaluate_grid(m, xr, yr, 256, 256));
        lo = std::min(lo, integral);
        hi = std::max(hi, integral);
    }
    return {lo >= 0.99 && hi <= 1.01, "integrals in [" + fmt("%.5f", lo) + ", " + fmt("%.5f", hi) + "]"};
}

// 5. Two well-separated Gaussians give two modes near their means.
Verdict kde_bimodality() {
    int good = 0, two = 0, loose = 0;
    std::string first_bad;
    for (std::uint64_t trial = 0; trial < 100; ++trial) {
        std::mt19937_64 gen(6000 + trial);
        std::normal_distribution<double> z(0.0, 1.0);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        const double sigma = 0.5 + u(gen);
        const double angle = 2.0 * 3.141592653589793 * u(gen);
        const double sep = (6.0 + 2.0 * u(gen)) * sigma;
        const Point2 a{u(gen), u(gen)}, b{a.x + sep * std::cos(angle), a.y + sep * std::sin(angle)};
        std::vector<Point2> pts;
        for (int i = 0; i < 500; ++i) pts.push_back({a.x + sigma * z(gen), a.y + sigma * z(gen)});
        for (int i = 0; i < 500; ++i) pts.push_back({b.x + sigma * z(gen), b.y + sigma * z(gen)});
        const auto h = select_bandwidth(pts, RuleOfThumb{});
        const KdeModel m(pts, h);
        const auto [xr, yr] = covering_ranges(m, 4.0);
        // Same suppression settings as the kde command's defaults.
        const auto modes = find_modes(evaluate_grid(m, xr, yr, 256, 256), 3, 0.01);
        auto near = [&](const Point2& mean) {
            for (const auto& md : modes)
                if (std::abs(md.location.x - mean.x) <= 0.5 * h.sigma_x() &&
                    std::abs(md.location.y - mean.y) <= 0.5 * h.sigma_y())
                    return true;
            return false;
        };
        // Looser reading, reported only: Euclidean distance within half the larger width.
        auto near_loose = [&](const Point2& mean) {
            const double r = 0.5 * std::max(h.sigma_x(), h.sigma_y());
            for (const auto& md : modes)
                if (std::hypot(md.location.x - mean.x, md.location.y - mean.y) <= r) return true;
            return false;
        };
        two += modes.size() == 2;
        loose += modes.size() == 2 && near_loose(a) && near_loose(b);
        if (modes.size() == 2 && near(a) && near(b))
            ++good;
        else if (first_bad.empty())
            first_bad = ", first failure: trial " + std::to_string(trial) + " with " + std::to_string(modes.size()) +
                        " modes";
    }
    return {good == 100, std::to_string(good) + "/100 trials with both modes within half a bandwidth per axis (" +
                             std::to_string(two) + "/100 with exactly 2 modes, " + std::to_string(loose) +
                             "/100 within half the larger width)" + first_bad};
}

// 6. CLARA against exhaustive k-medoids.
Verdict clara_oracle() {
    int full_equal = 0, half_close = 0;
    for (std::uint64_t inst = 0; inst < 50; ++inst) {
        std::mt19937_64 gen(7000 + inst);
        std::normal_distribution<double> z(0.0, 1.0);
        std::uniform_int_distribution<int> size(20, 60);
        std::uniform_real_distribution<double> u(1.0, 5.0);
        const int n = size(gen);
        const double d = u(gen);
        std::vector<Point2> pts;
        for (int i = 0; i < n; ++i) pts.push_back(i % 2 ? Point2{z(gen), z(gen)} : Point2{d + z(gen), d + z(gen)});
        const double exact = exact_kmedoids(pts, 2).total_cost;
        ClaraConfig c;
        c.k = 2;
        c.rng_seed = inst;
        c.sample_size = static_cast<std::size_t>(n);
        if (std::abs(clara(pts, c).total_cost - exact) <= 1e-12 * exact) ++full_equal;
        c.sample_size = static_cast<std::size_t>(n) / 2;
        if (clara(pts, c).total_cost <= 1.05 * exact) ++half_close;
    }
    return {full_equal == 50 && half_close >= 48, "full sample equal in " + std::to_string(full_equal) +
                                                      "/50, half sample within 5% in " + std::to_string(half_close) +
                                                      "/50"};
}

// 7. Ward against brute-force agglomeration.
Verdict ward_oracle() {
    int identical = 0;
    std::mt19937_64 gen(8);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    for (int inst = 0; inst < 100; ++inst) {
        const std::size_t n = 2 + static_cast<std::size_t>(inst) % 7, dim = 1 + static_cast<std::size_t>(inst) % 4;
        std::vector<std::vector<double>> x(n, std::vector<double>(dim));
        for (auto& v : x)
            for (auto& e : v) e = u(gen);
        const auto got = hac_ward(x), want = oracle::brute_ward(x);
        bool same = got.merges.size() == want.merges.size();
        for (std::size_t m = 0; same && m < got.merges.size(); ++m)
            same = got.merges[m].a == want.merges[m].a && got.merges[m].b == want.merges[m].b &&
                   got.merges[m].size == want.merges[m].size &&
                   std::abs(got.merges[m].height - want.merges[m].height) <= 1e-9 * (1.0 + want.merges[m].height);
        identical += same;
    }
    const auto d = hac_ward(std::vector<std::vector<double>>{{0.0}, {1.0}, {10.0}});
    const bool fixture = d.merges[0].a == 0 && d.merges[0].b == 1 && d.merges[0].height == 0.5;
    return {identical == 100 && fixture, std::to_string(identical) + "/100 merge sequences identical, {0,1,10} first height " +
                                             fmt("%.17g", d.merges[0].height)};
}

// 8. Speed-limit snapping and km/h table.
Verdict segmentation_snapping() {
    std::size_t mismatches = 0;
    const std::size_t visited = oracle::for_each_sign_multiset(6, [&](const std::vector<int>& values) {
        std::vector<SignReading> readings;
        for (std::size_t i = 0; i < values.size(); ++i) readings.push_back({"L", {}, "S" + std::to_string(i), values[i]});
        if (limit_mph(resolve_speed_limit(readings)) != oracle::nearest_limit_lower_tie(values)) ++mismatches;
    });
    const bool table = limit_kmh(SpeedLimit::L40) == 64.4 && limit_kmh(SpeedLimit::L50) == 80.5 &&
                       limit_kmh(SpeedLimit::L60) == 96.6 && limit_kmh(SpeedLimit::L70) == 112.7 &&
                       !limit_kmh(SpeedLimit::National);
    return {mismatches == 0 && visited == 209 && table, std::to_string(visited) + " multisets, " +
                                                            std::to_string(mismatches) + " mismatches, km/h table " +
                                                            (table ? "matches" : "differs")};
}

// 9. Density derivation property.
Verdict density_pipeline() {
    std::mt19937_64 gen(9);
    std::uniform_real_distribution<double> speed(0.0, 160.0), flow(0.0, 9000.0), low(0.0, 2.0);
    std::size_t violations = 0, retained = 0;
    for (int i = 0; i < 100000; ++i) {
        const Observation obs{{}, i % 10 == 0 ? low(gen) : speed(gen), flow(gen)};
        const auto p = compute_density(obs);
        if (p) {
            ++retained;
            if (!(std::abs(p->density * obs.speed_kmh - obs.flow_vph) <= 1e-6 * std::max(1.0, obs.flow_vph)))
                ++violations;
        } else if (!(obs.speed_kmh < kDefaultMinSpeed)) {
            ++violations;
        }
    }
    return {violations == 0, std::to_string(retained) + " retained, " + std::to_string(violations) + " violations"};
}

// 10. Report reruns are byte-identical.
Verdict end_to_end_determinism() {
    const fs::path fixture = fs::path(FDIAG_FIXTURE_DIR) / "synthetic";
    const auto a = scratch("report_a"), b = scratch("report_b");
    std::ostringstream out, err;
    for (const auto& dir : {a, b}) {
        const int code = cli::run({"report", "--data-dir", fixture.string(), "--out-dir", dir.string(), "--seed", "11"},
                                  out, err);
        if (code != 0) return {false, "report exited with " + std::to_string(code) + ": " + err.str()};
    }
    std::size_t files = 0, differing = 0;
    for (const auto& e : fs::recursive_directory_iterator(a)) {
        if (!e.is_regular_file() || e.path().filename() == "manifest.json") continue;
        ++files;
        const auto rel = fs::relative(e.path(), a);
        if (!fs::exists(b / rel) || slurp(e.path()) != slurp(b / rel)) ++differing;
    }
    for (const auto& e : fs::recursive_directory_iterator(b))
        if (e.is_regular_file() && !fs::exists(a / fs::relative(e.path(), b))) ++differing;
    return {files > 0 && differing == 0, std::to_string(files) + " files compared, " + std::to_string(differing) +
                                             " differ"};
}

// 11. Constructed mode shifts are recovered by the modes command.
Verdict mode_trajectory_oracle() {
    const std::map<SpeedLimit, ModeCenters> shifts{{SpeedLimit::L40, {20.0, 90.0}},
                                                   {SpeedLimit::L50, {17.0, 75.0}},
                                                   {SpeedLimit::L60, {14.5, 60.0}},
                                                   {SpeedLimit::L70, {12.0, 45.0}}};
    const double true_low = (12.0 - 20.0) / 20.0, true_high = (45.0 - 90.0) / 90.0;
    int good = 0;
    std::string detail;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        SynthSpec s;
        s.truth = FdModelParams(FdModelKind::DaganzoNewell, {4000.0, 40.0, 200.0});
        s.law = ModeMixture{{20.0, 2.0, 0.5}, {90.0, 2.0, 0.5}};
        s.noise_fraction = 0.02;
        s.n = 400;
        s.seed = 11000 + seed;
        s.shifts = shifts;
        s.link_id = "V1";
        const auto gen = generate_segmented(s);
        const auto dir = scratch("modes_" + std::to_string(seed));
        write_dataset(dir / "data", std::vector<LinkSeries>{gen.series});
        std::ostringstream out, err;
        const int code = cli::run({"modes", "--data-dir", (dir / "data").string(), "--out-dir", (dir / "out").string(),
                                   "--by-limit", "--seed", std::to_string(seed)},
                                  out, err);
        if (code != 0) return {false, "modes exited with " + std::to_string(code) + ": " + err.str()};
        const auto j = Json::parse(slurp(dir / "out" / "modes_V1.json"));
        bool monotone = true;
        double previous = std::numeric_limits<double>::infinity();
        for (const char* key : {"40", "50", "60", "70"}) {
            if (!j["trajectory"].contains(key)) {
                monotone = false;
                break;
            }
            const double high = j["trajectory"][key]["high"]["density"].get<double>();
            monotone = monotone && high < previous;
            previous = high;
        }
        const double low = j["relative_change"]["low"].get<double>();
        const double high = j["relative_change"]["high"].get<double>();
        const bool close = std::abs(low - true_low) <= 0.1 * std::abs(true_low) &&
                           std::abs(high - true_high) <= 0.1 * std::abs(true_high);
        if (monotone && close) ++good;
        if (seed == 0)
            detail = "seed 0: low " + fmt("%.4f", low) + " (true " + fmt("%.4f", true_low) + "), high " +
                     fmt("%.4f", high) + " (true " + fmt("%.4f", true_high) + ")";
    }
    return {good == 5, std::to_string(good) + "/5 constructions recovered; " + detail};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
        {"parameter recovery", parameter_recovery},
        {"model selection", model_selection},
        {"segmented-fit contrast", segmented_contrast},
        {"KDE normalization", kde_normalization},
        {"KDE bimodality", kde_bimodality},
        {"CLARA vs exact", clara_oracle},
        {"Ward HAC oracle", ward_oracle},
        {"speed-limit snapping", segmentation_snapping},
        {"density pipeline", density_pipeline},
        {"end-to-end determinism", end_to_end_determinism},
        {"mode trajectory", mode_trajectory_oracle},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::cout << (v.pass ? "PASS" : "FAIL") << "  " << i + 1 << ". " << criteria[i].first << ": " << v.detail
                  << " [" << fmt("%.1f", secs) << " s]" << std::endl;
        failed += !v.pass;
    }
    return failed == 0 ? 0 : 1;
}
