#include "fdiag/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <tuple>

#include "fdiag/rng.hpp"

namespace fdiag {

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument("synth spec: " + what);
}

Observation to_observation(const FlowDensityPoint& p) { return {p.timestamp, p.speed, p.flow}; }

}  // namespace

double density_cap(const SynthSpec& spec) {
    if (spec.density_cap) return *spec.density_cap;
    if (auto jam = spec.truth.rho_max()) return *jam;
    return 3.0 * spec.truth.get("rho_crit");
}

void validate_spec(const SynthSpec& spec) {
    const auto violations = validate(spec.truth);
    require(violations.empty(), "invalid model parameters (" + (violations.empty() ? "" : violations.front()) + ")");
    require(spec.n >= 1, "n must be at least 1");
    require(std::isfinite(spec.noise_fraction) && spec.noise_fraction >= 0.0, "noise fraction must be >= 0");
    const double cap = density_cap(spec);
    require(std::isfinite(cap) && cap > 0.0, "density cap must be positive");
    if (const auto* u = std::get_if<UniformDensity>(&spec.law)) {
        require(u->min >= 0.0 && u->min < u->max && u->max <= cap, "uniform density range must lie in [0, cap]");
    } else {
        const auto& m = std::get<ModeMixture>(spec.law);
        require(m.low.weight >= 0.0 && m.high.weight >= 0.0 && std::abs(m.low.weight + m.high.weight - 1.0) <= 1e-9,
                "mixture weights must be non-negative and sum to 1");
        require(m.low.jitter >= 0.0 && m.high.jitter >= 0.0, "jitter must be non-negative");
        for (const auto& c : {m.low.center, m.high.center})
            require(c >= 0.0 && c <= cap, "mode centres must lie in [0, cap]");
    }
    if (!spec.shifts.empty()) {
        require(std::holds_alternative<ModeMixture>(spec.law), "mode shifts need a mixture density law");
        for (const auto& [limit, centers] : spec.shifts)
            require(centers.low >= 0.0 && centers.low <= cap && centers.high >= 0.0 && centers.high <= cap,
                    "shifted mode centres must lie in [0, cap]");
    }
}

SynthOutput generate(const SynthSpec& spec) {
    validate_spec(spec);
    const double cap = density_cap(spec);
    const double floor = 1e-6 * cap;
    SynthOutput out{{}, spec.truth, capacity(spec.truth, cap), 0.0};
    out.noise_std = spec.noise_fraction * out.capacity;
    Rng rng(spec.seed);
    out.points.reserve(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) {
        double rho;
        if (const auto* u = std::get_if<UniformDensity>(&spec.law)) {
            rho = u->min + (u->max - u->min) * rng.uniform_open_low();
        } else {
            const auto& m = std::get<ModeMixture>(spec.law);
            const DensityMode& mode = rng.uniform() < m.low.weight ? m.low : m.high;
            rho = mode.center + mode.jitter * rng.normal();
        }
        rho = std::clamp(rho, floor, cap);
        const double noise = out.noise_std * rng.normal();
        const double flow = std::max(0.0, flux(spec.truth, rho) + noise);
        const double speed = flow > 0.0 ? flow / rho : 0.0;
        out.points.push_back({rho, flow, speed, spec.start + std::chrono::minutes(i)});
    }
    return out;
}

SegmentedSynth generate_segmented(const SynthSpec& spec, int signs_per_batch) {
    validate_spec(spec);
    if (signs_per_batch < 1) throw std::invalid_argument("generate_segmented: need at least one sign per batch");
    SegmentedSynth out{{}, {}, spec.truth};
    out.series.link.id = spec.link_id;

    std::vector<std::pair<SpeedLimit, SynthSpec>> blocks;
    if (spec.shifts.empty()) {
        blocks.emplace_back(SpeedLimit::National, spec);
    } else {
        // National first: once a sign is shown there is no reading that restores it.
        std::vector<SpeedLimit> order;
        if (spec.shifts.count(SpeedLimit::National)) order.push_back(SpeedLimit::National);
        for (SpeedLimit s : kVariableLimits)
            if (spec.shifts.count(s)) order.push_back(s);
        for (SpeedLimit s : order) {
            SynthSpec block = spec;
            block.shifts.clear();
            auto& law = std::get<ModeMixture>(block.law);
            law.low.center = spec.shifts.at(s).low;
            law.high.center = spec.shifts.at(s).high;
            blocks.emplace_back(s, block);
        }
    }

    Timestamp cursor = spec.start;
    for (auto& [limit, block] : blocks) {
        block.start = cursor;
        SynthOutput generated = generate(block);
        if (auto mph = limit_mph(limit))
            for (int k = 0; k < signs_per_batch; ++k)
                out.series.signs.push_back({spec.link_id, cursor, "S" + std::to_string(k + 1), *mph});
        for (const auto& p : generated.points) out.series.observations.push_back(to_observation(p));
        cursor += std::chrono::minutes(block.n);
        out.segments[limit] = std::move(generated.points);
    }
    return out;
}

SynthDataset generate_dataset(const DatasetSpec& spec) {
    SynthDataset out;
    for (std::size_t i = 0; i < spec.links.size(); ++i) {
        const LinkSynthSpec& link = spec.links[i];
        SynthSpec s = link.spec;
        s.seed = derive_seed(spec.seed, i);

        LinkSeries series;
        SynthOutput truth{{}, s.truth, 0.0, 0.0};
        if (s.shifts.empty()) {
            truth = generate(s);
            series.link.id = s.link_id;
            for (const auto& p : truth.points) series.observations.push_back(to_observation(p));
        } else {
            SegmentedSynth seg = generate_segmented(s);
            series = std::move(seg.series);
            truth.capacity = capacity(s.truth, density_cap(s));
            truth.noise_std = s.noise_fraction * truth.capacity;
            for (auto& [limit, pts] : seg.segments) truth.points.insert(truth.points.end(), pts.begin(), pts.end());
        }
        series.link.geometry = link.geometry;

        if (!link.events.empty() && !series.observations.empty()) {
            Rng rng(derive_seed(s.seed, 0xE7E7));
            const auto span_minutes = static_cast<std::size_t>(
                std::chrono::duration_cast<std::chrono::minutes>(series.observations.back().timestamp -
                                                                 series.observations.front().timestamp)
                    .count() + 1);
            for (const auto& [category, count] : link.events) {
                for (std::size_t e = 0; e < count; ++e) {
                    const auto begin = series.observations.front().timestamp +
                                       std::chrono::minutes(static_cast<long>(rng.index(span_minutes)));
                    const auto length = std::chrono::minutes(10 + static_cast<long>(rng.index(111)));
                    series.events.push_back({s.link_id, category, begin, begin + length});
                }
            }
            std::stable_sort(series.events.begin(), series.events.end(), [](const EventRecord& a, const EventRecord& b) {
                return std::tie(a.start, a.end, a.category) < std::tie(b.start, b.end, b.category);
            });
        }
        out.series.push_back(std::move(series));
        out.truth.push_back(std::move(truth));
    }
    return out;
}

}  // namespace fdiag
