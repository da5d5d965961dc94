#pragma once

// Local minimizers over the box [lower, 1]^d used by the fitting engine.
// Points outside the box are projected onto it before evaluation.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace fdiag {

struct BoxMinimum {
    std::vector<double> x;
    double value = 0.0;
    std::size_t evaluations = 0;
    bool converged = false;
};

struct NelderMeadOptions {
    std::size_t max_evaluations = 4000;
    /// Stop when (worst - best) <= f_tolerance * |best| ...
    double f_tolerance = 1e-10;
    /// ... or when every vertex is within x_tolerance of the best one.
    double x_tolerance = 1e-12;
    double initial_step = 0.1;
    double lower = 1e-9;
};

using ScalarObjective = std::function<double(std::span<const double>)>;

/// Nelder–Mead simplex with one restart from the converged vertex.
BoxMinimum nelder_mead_box(const ScalarObjective& objective, std::vector<double> x0,
                           const NelderMeadOptions& options);

struct LeastSquaresOptions {
    std::size_t max_iterations = 200;
    double f_tolerance = 1e-15;
    double fd_step = 1e-7;
    double lower = 1e-9;
};

/// Fills `residuals` (size fixed by the caller) at x.
using ResidualFunction = std::function<void(std::span<const double> x, std::span<double> residuals)>;

/// Projected Levenberg–Marquardt on 0.5 * sum of squared residuals, reported
/// as the plain sum of squares. Jacobian by finite differences.
BoxMinimum levenberg_marquardt_box(const ResidualFunction& residuals, std::size_t n_residuals,
                                   std::vector<double> x0, const LeastSquaresOptions& options);

}  // namespace fdiag
