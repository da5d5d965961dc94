#include "fdiag/fd_models.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fdiag {

namespace {

constexpr std::string_view kGreenshieldsNames[] = {"v_free", "rho_max"};
constexpr std::string_view kGreenbergNames[] = {"v_capacity", "rho_max"};
constexpr std::string_view kNorthwesternNames[] = {"v_free", "rho_crit"};
constexpr std::string_view kNewellNames[] = {"v_free", "rho_max", "c1"};
constexpr std::string_view kLogisticNames[] = {"v_free", "rho_crit", "c2"};
constexpr std::string_view kDaganzoNewellNames[] = {"MaxFlow", "rho_crit", "rho_max"};
constexpr std::string_view kContinuousTriangleNames[] = {"alpha", "lambda", "p", "rho_max"};

}  // namespace

std::string_view model_tag(FdModelKind kind) {
    switch (kind) {
        case FdModelKind::Greenshields: return "greenshields";
        case FdModelKind::Greenberg: return "greenberg";
        case FdModelKind::Northwestern: return "northwestern";
        case FdModelKind::Newell: return "newell";
        case FdModelKind::Logistic: return "logistic";
        case FdModelKind::DaganzoNewell: return "daganzo_newell";
        case FdModelKind::ContinuousTriangle: return "continuous_triangle";
    }
    return "";
}

std::optional<FdModelKind> parse_model_tag(std::string_view tag) {
    for (FdModelKind k : kAllModelKinds)
        if (model_tag(k) == tag) return k;
    return std::nullopt;
}

std::span<const std::string_view> parameter_names(FdModelKind kind) {
    switch (kind) {
        case FdModelKind::Greenshields: return kGreenshieldsNames;
        case FdModelKind::Greenberg: return kGreenbergNames;
        case FdModelKind::Northwestern: return kNorthwesternNames;
        case FdModelKind::Newell: return kNewellNames;
        case FdModelKind::Logistic: return kLogisticNames;
        case FdModelKind::DaganzoNewell: return kDaganzoNewellNames;
        case FdModelKind::ContinuousTriangle: return kContinuousTriangleNames;
    }
    return {};
}

std::size_t parameter_count(FdModelKind kind) { return parameter_names(kind).size(); }

FdModelParams::FdModelParams(FdModelKind kind, std::vector<double> values)
    : kind_(kind), values_(std::move(values)) {
    if (values_.size() != parameter_count(kind))
        throw std::invalid_argument(std::string(model_tag(kind)) + " expects " +
                                    std::to_string(parameter_count(kind)) + " parameters, got " +
                                    std::to_string(values_.size()));
}

double FdModelParams::get(std::string_view name) const {
    const auto names = parameter_names(kind_);
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return values_[i];
    throw std::out_of_range(std::string(model_tag(kind_)) + " has no parameter '" + std::string(name) + "'");
}

std::optional<double> FdModelParams::rho_max() const {
    const auto names = parameter_names(kind_);
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == "rho_max") return values_[i];
    return std::nullopt;
}

double flux_raw(FdModelKind kind, const double* v, double rho) {
    switch (kind) {
        case FdModelKind::Greenshields: {
            if (rho >= v[1]) return 0.0;
            return rho * v[0] * (1.0 - rho / v[1]);
        }
        case FdModelKind::Greenberg: {
            if (rho == 0.0) return 0.0;
            return rho * v[0] * std::log(v[1] / rho);
        }
        case FdModelKind::Northwestern: {
            const double r = rho / v[1];
            return rho * v[0] * std::exp(-0.5 * r * r);
        }
        case FdModelKind::Newell: {
            if (rho == 0.0 || rho >= v[1]) return 0.0;
            return rho * v[0] * (1.0 - std::exp(-(v[2] / v[0]) * (1.0 / rho - 1.0 / v[1])));
        }
        case FdModelKind::Logistic: {
            return rho * v[0] / (1.0 + std::exp((rho - v[1]) / v[2]));
        }
        case FdModelKind::DaganzoNewell: {
            const double max_flow = v[0], crit = v[1], jam = v[2];
            if (rho <= crit) return max_flow * rho / crit;
            if (rho <= jam) return max_flow * (jam - rho) / (jam - crit);
            return 0.0;
        }
        case FdModelKind::ContinuousTriangle: {
            const double alpha = v[0], lambda = v[1], p = v[2], jam = v[3];
            const double a = std::sqrt(1.0 + (lambda * p) * (lambda * p));
            const double b = std::sqrt(1.0 + (lambda * (1.0 - p)) * (lambda * (1.0 - p)));
            const double x = rho / jam;
            const double y = lambda * (x - p);
            return alpha * (a + (b - a) * x - std::sqrt(1.0 + y * y));
        }
    }
    return 0.0;
}

double flux(const FdModelParams& params, double rho) {
    if (!(rho >= 0.0)) throw std::domain_error("flux: density must be non-negative");
    return flux_raw(params.kind(), params.values().data(), rho);
}

std::vector<std::string> validate(const FdModelParams& params) {
    std::vector<std::string> violations;
    const auto names = parameter_names(params.kind());
    const auto values = params.values();
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (!std::isfinite(values[i])) {
            violations.push_back(std::string(names[i]) + " finite");
            continue;
        }
        if (names[i] == "p") {
            if (!(values[i] > 0.0 && values[i] < 1.0)) violations.push_back("0 < p < 1");
        } else if (!(values[i] > 0.0)) {
            violations.push_back(std::string(names[i]) + " > 0");
        }
    }
    if (params.kind() == FdModelKind::DaganzoNewell && !(params.get("rho_crit") < params.get("rho_max")))
        violations.push_back("rho_crit < rho_max");
    return violations;
}

ParamBounds default_bounds(FdModelKind kind, const DataSummary& s) {
    if (!(s.max_flow_obs > 0.0) || !(s.max_density_obs > 0.0) || !(s.max_speed_obs > 0.0) ||
        !std::isfinite(s.max_flow_obs) || !std::isfinite(s.max_density_obs) || !std::isfinite(s.max_speed_obs))
        throw std::invalid_argument("default_bounds: data summary must be positive and finite");
    ParamBounds bounds;
    for (std::string_view name : parameter_names(kind)) {
        std::pair<double, double> box;
        if (name == "v_free" || name == "v_capacity") box = {0.0, 1.5 * s.max_speed_obs};
        else if (name == "rho_max") box = {s.max_density_obs, 5.0 * s.max_density_obs};
        else if (name == "rho_crit" || name == "c2") box = {0.0, s.max_density_obs};
        else if (name == "c1") box = {0.0, 10.0 * s.max_flow_obs};
        else if (name == "MaxFlow") box = {0.0, 1.5 * s.max_flow_obs};
        else if (name == "alpha") box = {0.0, 20.0 * s.max_flow_obs};
        else if (name == "lambda") box = {0.0, 50.0};
        else if (name == "p") box = {0.0, 0.999};
        bounds.box.push_back(box);
    }
    return bounds;
}

double capacity(const FdModelParams& params, double rho_upper) {
    if (!(rho_upper > 0.0)) throw std::invalid_argument("capacity: upper density must be positive");
    if (params.kind() == FdModelKind::DaganzoNewell && params.get("rho_crit") <= rho_upper)
        return params.get("MaxFlow");
    constexpr int kNodes = 2001;
    const double step = rho_upper / (kNodes - 1);
    int best = 0;
    double best_value = flux(params, 0.0);
    for (int i = 1; i < kNodes; ++i) {
        const double v = flux(params, i * step);
        if (v > best_value) {
            best_value = v;
            best = i;
        }
    }
    double lo = std::max(0.0, (best - 1) * step);
    double hi = std::min(rho_upper, (best + 1) * step);
    const double ratio = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = hi - ratio * (hi - lo), d = lo + ratio * (hi - lo);
    double fc = flux(params, c), fd = flux(params, d);
    for (int it = 0; it < 100 && hi - lo > 1e-12 * rho_upper; ++it) {
        if (fc > fd) {
            hi = d;
            d = c;
            fd = fc;
            c = hi - ratio * (hi - lo);
            fc = flux(params, c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + ratio * (hi - lo);
            fd = flux(params, d);
        }
    }
    return std::max({best_value, fc, fd});
}

}  // namespace fdiag
