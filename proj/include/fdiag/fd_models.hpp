#pragma once

// Flow-density flux functions (fundamental diagrams).

#include <array>
#include <cstddef>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace fdiag {

enum class FdModelKind {
    Greenshields,
    Greenberg,
    Northwestern,
    Newell,
    Logistic,
    DaganzoNewell,
    ContinuousTriangle,
};

inline constexpr std::array<FdModelKind, 7> kAllModelKinds = {
    FdModelKind::Greenshields, FdModelKind::Greenberg,     FdModelKind::Northwestern,
    FdModelKind::Newell,       FdModelKind::Logistic,      FdModelKind::DaganzoNewell,
    FdModelKind::ContinuousTriangle};

/// Lowercase tag used in files and on the command line, e.g. "daganzo_newell".
std::string_view model_tag(FdModelKind kind);
std::optional<FdModelKind> parse_model_tag(std::string_view tag);

/// Canonical parameter names in storage order:
///   greenshields        v_free, rho_max
///   greenberg           v_capacity, rho_max
///   northwestern        v_free, rho_crit
///   newell              v_free, rho_max, c1
///   logistic            v_free, rho_crit, c2
///   daganzo_newell      MaxFlow, rho_crit, rho_max
///   continuous_triangle alpha, lambda, p, rho_max
std::span<const std::string_view> parameter_names(FdModelKind kind);
std::size_t parameter_count(FdModelKind kind);

class FdModelParams {
public:
    /// Throws std::invalid_argument if the number of values does not match the kind.
    FdModelParams(FdModelKind kind, std::vector<double> values);
    FdModelParams(FdModelKind kind, std::initializer_list<double> values)
        : FdModelParams(kind, std::vector<double>(values)) {}

    FdModelKind kind() const { return kind_; }
    std::span<const double> values() const { return values_; }
    /// Throws std::out_of_range for a name the model does not have.
    double get(std::string_view name) const;
    std::optional<double> rho_max() const;

    friend bool operator==(const FdModelParams&, const FdModelParams&) = default;

private:
    FdModelKind kind_;
    std::vector<double> values_;
};

/// Flow (veh/h) at density rho (veh/km). Throws std::domain_error for rho < 0.
/// Greenberg and Newell take their continuous limit 0 at rho = 0.
/// DaganzoNewell, Greenshields and Newell are clamped to 0 beyond rho_max.
double flux(const FdModelParams& params, double rho);

/// Unchecked evaluation on raw parameter storage, for inner loops.
double flux_raw(FdModelKind kind, const double* v, double rho);

/// Names of every violated parameter invariant (empty when valid).
std::vector<std::string> validate(const FdModelParams& params);

struct DataSummary {
    double max_flow_obs = 0.0;
    double max_density_obs = 0.0;
    double max_speed_obs = 0.0;
};

/// Box for each parameter, in storage order. A box is the half-open interval
/// (low, high]: the lower end is never a valid value, the upper end is.
struct ParamBounds {
    std::vector<std::pair<double, double>> box;
};

/// Search box derived from the data. Every interior point is a valid
/// parameter set. Throws std::invalid_argument for a non-positive summary.
ParamBounds default_bounds(FdModelKind kind, const DataSummary& summary);

/// Maximum of flux over [0, rho_upper], located on a fine grid and refined by
/// golden-section search. Exact for DaganzoNewell.
double capacity(const FdModelParams& params, double rho_upper);

}  // namespace fdiag
