#include "fdiag/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fdiag {

double quantile_sorted(std::span<const double> sorted, double q) {
    if (sorted.empty()) throw std::invalid_argument("quantile of empty sample");
    if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("quantile level outside [0, 1]");
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

FiveNumberSummary five_number_summary(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    return {quantile_sorted(values, 0.0), quantile_sorted(values, 0.25),
            quantile_sorted(values, 0.5), quantile_sorted(values, 0.75),
            quantile_sorted(values, 1.0)};
}

}  // namespace fdiag
