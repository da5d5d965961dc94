#pragma once

// Two-dimensional Gaussian kernel density estimation.

#include <cstddef>
#include <span>
#include <variant>
#include <vector>

#include "fdiag/geometry.hpp"

namespace fdiag {

/// Symmetric positive-definite 2x2 kernel covariance.
class BandwidthMatrix {
public:
    /// Throws std::invalid_argument unless the matrix is symmetric positive definite.
    BandwidthMatrix(double xx, double xy, double yy);
    static BandwidthMatrix diagonal(double xx, double yy) { return {xx, 0.0, yy}; }

    double xx() const { return xx_; }
    double xy() const { return xy_; }
    double yy() const { return yy_; }
    double determinant() const { return xx_ * yy_ - xy_ * xy_; }
    /// Quadratic form d' * inverse * d.
    double mahalanobis_sq(double dx, double dy) const;
    /// Per-axis kernel standard deviations sqrt(xx), sqrt(yy).
    double sigma_x() const;
    double sigma_y() const;

private:
    double xx_, xy_, yy_;
    double inv_xx_, inv_xy_, inv_yy_;
};

/// Normal-reference rule for d = 2: diagonal with entries (sigma_i * N^(-1/6))^2.
struct RuleOfThumb {};
/// diag(h1^2, h2^2).
struct FixedDiagonal {
    double h1 = 0.0;
    double h2 = 0.0;
};
using BandwidthMethod = std::variant<RuleOfThumb, FixedDiagonal>;

/// Throws std::invalid_argument for fewer than two points or a zero-variance axis
/// (rule of thumb), or non-positive fixed widths.
BandwidthMatrix select_bandwidth(std::span<const Point2> points, const BandwidthMethod& method);

class KdeModel {
public:
    /// Throws std::invalid_argument for an empty point set.
    KdeModel(std::vector<Point2> points, BandwidthMatrix bandwidth);

    /// (1 / (N (2 pi) |Sigma|^(1/2))) * sum_i exp(-1/2 (x - X_i)' Sigma^-1 (x - X_i))
    double evaluate(Point2 x) const;

    const std::vector<Point2>& points() const { return points_; }
    const BandwidthMatrix& bandwidth() const { return bandwidth_; }
    double normalization() const { return normalization_; }

private:
    std::vector<Point2> points_;
    BandwidthMatrix bandwidth_;
    double normalization_;
};

struct AxisRange {
    double min = 0.0;
    double max = 1.0;

    friend bool operator==(const AxisRange&, const AxisRange&) = default;
};

/// Values on an n_x by n_y lattice of nodes x_i = x.min + i * dx, y_j likewise.
/// Stored row-major with x as the outer index: values[i * n_y + j] = p(x_i, y_j).
struct DensityGrid {
    AxisRange x_range;
    AxisRange y_range;
    std::size_t n_x = 0;
    std::size_t n_y = 0;
    std::vector<double> values;

    double x_at(std::size_t i) const;
    double y_at(std::size_t j) const;
    double dx() const { return (x_range.max - x_range.min) / static_cast<double>(n_x - 1); }
    double dy() const { return (y_range.max - y_range.min) / static_cast<double>(n_y - 1); }
    double at(std::size_t i, std::size_t j) const { return values[i * n_y + j]; }
    bool aligned_with(const DensityGrid& other) const;
};

/// Throws std::invalid_argument for degenerate ranges or fewer than 2 nodes per axis.
DensityGrid evaluate_grid(const KdeModel& model, AxisRange x_range, AxisRange y_range, std::size_t n_x,
                          std::size_t n_y, unsigned threads = 1);

/// Range covering every point's coordinate +/- `widths` kernel standard deviations.
std::pair<AxisRange, AxisRange> covering_ranges(const KdeModel& model, double widths);

/// 2-D trapezoid rule over the grid.
double trapezoid_integral(const DensityGrid& grid);

struct GridMode {
    Point2 location;
    double density = 0.0;
    std::size_t i = 0;  // x index
    std::size_t j = 0;  // y index
};

/// Local maxima over 8-neighbourhoods: a node qualifies when it is strictly
/// greater than neighbours earlier in scan order (x outer, y inner) and not
/// smaller than later ones, so a flat plateau reports its first node. Maxima
/// within `min_separation` cells (Chebyshev) of a stronger, already accepted
/// one are dropped, as are maxima below `min_relative_density` times the
/// largest grid value (isolated tail points on a narrow axis otherwise show up
/// as modes). Sorted by density descending, ties by scan order.
std::vector<GridMode> find_modes(const DensityGrid& grid, std::size_t min_separation,
                                 double min_relative_density = 0.0);

/// Trapezoid integral of (estimate - reference)^2. Throws std::invalid_argument
/// when the grids are not aligned.
double integrated_squared_error(const DensityGrid& estimate, const DensityGrid& reference);
/// Evaluates the model on the reference grid's nodes first.
double integrated_squared_error(const KdeModel& model, const DensityGrid& reference);

}  // namespace fdiag
