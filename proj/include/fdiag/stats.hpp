#pragma once

#include <span>
#include <vector>

namespace fdiag {

/// Linear-interpolation quantile (Hyndman–Fan type 7) of an ascending sample.
double quantile_sorted(std::span<const double> sorted, double q);

struct FiveNumberSummary {
    double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
};

FiveNumberSummary five_number_summary(std::vector<double> values);

}  // namespace fdiag
