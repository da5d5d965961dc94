#include "fdiag/fit_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "fdiag/optimize.hpp"
#include "fdiag/parallel.hpp"
#include "fdiag/rng.hpp"

namespace fdiag {

namespace {

constexpr double kUnitLower = 1e-9;

/// Maps the unit cube onto the parameter box: theta = low + u * (high - low).
class BoxMap {
public:
    explicit BoxMap(const ParamBounds& bounds) : bounds_(bounds) {}

    void to_params(std::span<const double> u, double* out) const {
        for (std::size_t i = 0; i < u.size(); ++i) {
            const auto [lo, hi] = bounds_.box[i];
            out[i] = lo + u[i] * (hi - lo);
        }
    }

private:
    const ParamBounds& bounds_;
};

void check_fit_inputs(FdModelKind kind, std::span<const FlowDensityPoint> points) {
    const std::size_t d = parameter_count(kind);
    if (points.size() < d + 1)
        throw std::invalid_argument("fit: need at least " + std::to_string(d + 1) + " points for " +
                                    std::string(model_tag(kind)));
    const double first = points.front().density;
    const bool distinct = std::any_of(points.begin(), points.end(),
                                      [&](const FlowDensityPoint& p) { return p.density != first; });
    if (!distinct) throw std::invalid_argument("fit: data needs at least two distinct densities");
    for (const auto& p : points)
        if (!std::isfinite(p.density) || !std::isfinite(p.flow) || p.density < 0.0)
            throw std::invalid_argument("fit: non-finite or negative point");
}

double sum_squared_errors(FdModelKind kind, const double* params, std::span<const FlowDensityPoint> points) {
    double sse = 0.0;
    for (const auto& p : points) {
        const double e = p.flow - flux_raw(kind, params, p.density);
        sse += e * e;
    }
    return sse;
}

struct StartOutcome {
    std::vector<double> params;
    double sse = std::numeric_limits<double>::infinity();
    bool converged = false;
};

}  // namespace

DataSummary summarize_points(std::span<const FlowDensityPoint> points) {
    DataSummary s;
    for (const auto& p : points) {
        s.max_flow_obs = std::max(s.max_flow_obs, p.flow);
        s.max_density_obs = std::max(s.max_density_obs, p.density);
        s.max_speed_obs = std::max(s.max_speed_obs, p.speed);
    }
    return s;
}

Goodness goodness(const FdModelParams& params, std::span<const FlowDensityPoint> points) {
    if (points.size() < 2) throw std::invalid_argument("goodness: need at least two points");
    double mean = 0.0;
    for (const auto& p : points) mean += p.flow;
    mean /= static_cast<double>(points.size());
    double sst = 0.0;
    for (const auto& p : points) sst += (p.flow - mean) * (p.flow - mean);
    Goodness g;
    g.sse = sum_squared_errors(params.kind(), params.values().data(), points);
    g.rmse = std::sqrt(g.sse / static_cast<double>(points.size()));
    if (sst > 0.0) g.r_squared = 1.0 - g.sse / sst;
    return g;
}

FitResult fit(FdModelKind kind, std::span<const FlowDensityPoint> points, const FitConfig& config) {
    if (config.n_starts < 1) throw std::invalid_argument("fit: n_starts must be at least 1");
    if (!(config.tolerance > 0.0)) throw std::invalid_argument("fit: tolerance must be positive");
    check_fit_inputs(kind, points);

    const ParamBounds bounds = config.bounds ? *config.bounds : default_bounds(kind, summarize_points(points));
    const std::size_t d = parameter_count(kind);
    if (bounds.box.size() != d) throw std::invalid_argument("fit: bounds do not match the model");
    for (const auto& [lo, hi] : bounds.box)
        if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi))
            throw std::invalid_argument("fit: every bound needs low < high");
    const BoxMap map(bounds);

    // Work on SSE / sum(flow^2) so tolerances are unit free.
    double scale = 0.0;
    for (const auto& p : points) scale += p.flow * p.flow;
    if (!(scale > 0.0)) scale = 1.0;

    std::vector<StartOutcome> outcomes(config.n_starts);
    parallel_for(config.n_starts, config.threads, [&](std::size_t start) {
        Rng rng(derive_seed(config.rng_seed, start));
        std::vector<double> u0(d);
        for (double& u : u0) u = std::max(kUnitLower, rng.uniform_open_low());

        std::vector<double> theta(d);
        auto objective = [&](std::span<const double> u) {
            map.to_params(u, theta.data());
            return sum_squared_errors(kind, theta.data(), points) / scale;
        };
        NelderMeadOptions nm;
        nm.max_evaluations = config.max_iterations;
        nm.f_tolerance = config.tolerance;
        nm.lower = kUnitLower;
        BoxMinimum simplex = nelder_mead_box(objective, u0, nm);

        const double inv_root_scale = 1.0 / std::sqrt(scale);
        std::vector<double> theta_lm(d);
        auto residuals = [&](std::span<const double> u, std::span<double> r) {
            map.to_params(u, theta_lm.data());
            for (std::size_t i = 0; i < points.size(); ++i)
                r[i] = (points[i].flow - flux_raw(kind, theta_lm.data(), points[i].density)) * inv_root_scale;
        };
        LeastSquaresOptions lm;
        lm.lower = kUnitLower;
        BoxMinimum polished = levenberg_marquardt_box(residuals, points.size(), simplex.x, lm);
        const BoxMinimum& best = polished.value < simplex.value ? polished : simplex;

        StartOutcome& out = outcomes[start];
        out.params.resize(d);
        map.to_params(best.x, out.params.data());
        out.sse = sum_squared_errors(kind, out.params.data(), points);
        if (!std::isfinite(out.sse)) out.sse = std::numeric_limits<double>::infinity();
        out.converged = (simplex.converged || polished.converged) && std::isfinite(out.sse);
    });

    FitResult result{FdModelParams(kind, std::vector<double>(d, 0.0)), 0, 0, std::nullopt, {}, {}, 0};
    std::size_t best_index = config.n_starts;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        result.start_objectives.push_back(outcomes[i].sse);
        result.start_converged.push_back(outcomes[i].converged);
        if (!outcomes[i].converged) continue;
        ++result.converged_starts;
        if (best_index == config.n_starts || outcomes[i].sse < outcomes[best_index].sse) best_index = i;
    }
    if (best_index == config.n_starts)
        throw FitError("fit: no start converged for " + std::string(model_tag(kind)), result.start_objectives);

    result.best_params = FdModelParams(kind, outcomes[best_index].params);
    const Goodness g = goodness(result.best_params, points);
    result.sse = g.sse;
    result.rmse = g.rmse;
    result.r_squared = g.r_squared;
    return result;
}

ModelComparison compare_models(std::span<const FlowDensityPoint> points, std::span<const FdModelKind> kinds,
                               const FitConfig& config) {
    ModelComparison out;
    std::set<FdModelKind> seen;
    for (FdModelKind kind : kinds) {
        if (!seen.insert(kind).second) continue;
        try {
            out.ranked.push_back(fit(kind, points, config));
        } catch (const std::exception& e) {
            out.failures.push_back({kind, e.what()});
        }
    }
    std::stable_sort(out.ranked.begin(), out.ranked.end(), [](const FitResult& a, const FitResult& b) {
        if (a.rmse != b.rmse) return a.rmse < b.rmse;
        return parameter_count(a.kind()) < parameter_count(b.kind());
    });
    return out;
}

SegmentedFit fit_segmented(const std::map<SpeedLimit, std::vector<FlowDensityPoint>>& segments,
                           std::span<const FdModelKind> kinds, const FitConfig& config) {
    SegmentedFit out;
    std::size_t needed = 0;
    for (FdModelKind k : kinds) needed = std::max(needed, parameter_count(k) + 1);
    for (const auto& [limit, points] : segments) {
        if (points.size() < needed) {
            out.skipped[limit] = "segment has " + std::to_string(points.size()) + " points, need " +
                                 std::to_string(needed);
            continue;
        }
        auto comparison = compare_models(points, kinds, config);
        if (comparison.ranked.empty()) {
            out.skipped[limit] = comparison.failures.empty() ? "no models requested" : comparison.failures.front().reason;
            continue;
        }
        out.results.emplace(limit, std::move(comparison));
    }
    return out;
}

}  // namespace fdiag
