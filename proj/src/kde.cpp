#include "fdiag/kde.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "fdiag/parallel.hpp"

namespace fdiag {

BandwidthMatrix::BandwidthMatrix(double xx, double xy, double yy) : xx_(xx), xy_(xy), yy_(yy) {
    if (!std::isfinite(xx) || !std::isfinite(xy) || !std::isfinite(yy))
        throw std::invalid_argument("bandwidth matrix must be finite");
    const double det = xx * yy - xy * xy;
    if (!(xx > 0.0) || !(det > 0.0)) throw std::invalid_argument("bandwidth matrix must be positive definite");
    inv_xx_ = yy / det;
    inv_xy_ = -xy / det;
    inv_yy_ = xx / det;
}

double BandwidthMatrix::mahalanobis_sq(double dx, double dy) const {
    return inv_xx_ * dx * dx + 2.0 * inv_xy_ * dx * dy + inv_yy_ * dy * dy;
}

double BandwidthMatrix::sigma_x() const { return std::sqrt(xx_); }
double BandwidthMatrix::sigma_y() const { return std::sqrt(yy_); }

BandwidthMatrix select_bandwidth(std::span<const Point2> points, const BandwidthMethod& method) {
    if (const auto* fixed = std::get_if<FixedDiagonal>(&method)) {
        if (!(fixed->h1 > 0.0) || !(fixed->h2 > 0.0))
            throw std::invalid_argument("fixed bandwidths must be positive");
        return BandwidthMatrix::diagonal(fixed->h1 * fixed->h1, fixed->h2 * fixed->h2);
    }
    const std::size_t n = points.size();
    if (n < 2) throw std::invalid_argument("bandwidth selection needs at least two points");
    double mx = 0.0, my = 0.0;
    for (const auto& p : points) {
        mx += p.x;
        my += p.y;
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double vx = 0.0, vy = 0.0;
    for (const auto& p : points) {
        vx += (p.x - mx) * (p.x - mx);
        vy += (p.y - my) * (p.y - my);
    }
    vx /= static_cast<double>(n - 1);
    vy /= static_cast<double>(n - 1);
    if (!(vx > 0.0) || !(vy > 0.0)) throw std::invalid_argument("bandwidth selection: an axis has zero variance");
    const double factor = std::pow(static_cast<double>(n), -1.0 / 6.0);
    const double hx = std::sqrt(vx) * factor, hy = std::sqrt(vy) * factor;
    return BandwidthMatrix::diagonal(hx * hx, hy * hy);
}

KdeModel::KdeModel(std::vector<Point2> points, BandwidthMatrix bandwidth)
    : points_(std::move(points)), bandwidth_(bandwidth) {
    if (points_.empty()) throw std::invalid_argument("KdeModel needs at least one point");
    normalization_ = 1.0 / (static_cast<double>(points_.size()) * 2.0 * std::numbers::pi *
                            std::sqrt(bandwidth_.determinant()));
}

double KdeModel::evaluate(Point2 x) const {
    double sum = 0.0;
    for (const auto& p : points_) sum += std::exp(-0.5 * bandwidth_.mahalanobis_sq(x.x - p.x, x.y - p.y));
    return normalization_ * sum;
}

double DensityGrid::x_at(std::size_t i) const {
    return i + 1 == n_x ? x_range.max : x_range.min + static_cast<double>(i) * dx();
}

double DensityGrid::y_at(std::size_t j) const {
    return j + 1 == n_y ? y_range.max : y_range.min + static_cast<double>(j) * dy();
}

bool DensityGrid::aligned_with(const DensityGrid& other) const {
    return n_x == other.n_x && n_y == other.n_y && x_range == other.x_range && y_range == other.y_range &&
           values.size() == other.values.size();
}

DensityGrid evaluate_grid(const KdeModel& model, AxisRange x_range, AxisRange y_range, std::size_t n_x,
                          std::size_t n_y, unsigned threads) {
    if (!(x_range.min < x_range.max) || !(y_range.min < y_range.max))
        throw std::invalid_argument("evaluate_grid: degenerate axis range");
    if (n_x < 2 || n_y < 2) throw std::invalid_argument("evaluate_grid: need at least 2 nodes per axis");
    DensityGrid grid{x_range, y_range, n_x, n_y, std::vector<double>(n_x * n_y)};
    parallel_for(n_x, threads, [&](std::size_t i) {
        const double x = grid.x_at(i);
        for (std::size_t j = 0; j < n_y; ++j) grid.values[i * n_y + j] = model.evaluate({x, grid.y_at(j)});
    });
    return grid;
}

std::pair<AxisRange, AxisRange> covering_ranges(const KdeModel& model, double widths) {
    AxisRange xr{model.points().front().x, model.points().front().x};
    AxisRange yr{model.points().front().y, model.points().front().y};
    for (const auto& p : model.points()) {
        xr.min = std::min(xr.min, p.x);
        xr.max = std::max(xr.max, p.x);
        yr.min = std::min(yr.min, p.y);
        yr.max = std::max(yr.max, p.y);
    }
    const double wx = widths * model.bandwidth().sigma_x(), wy = widths * model.bandwidth().sigma_y();
    return {{xr.min - wx, xr.max + wx}, {yr.min - wy, yr.max + wy}};
}

double trapezoid_integral(const DensityGrid& grid) {
    double sum = 0.0;
    for (std::size_t i = 0; i < grid.n_x; ++i) {
        const double wx = (i == 0 || i + 1 == grid.n_x) ? 0.5 : 1.0;
        for (std::size_t j = 0; j < grid.n_y; ++j) {
            const double wy = (j == 0 || j + 1 == grid.n_y) ? 0.5 : 1.0;
            sum += wx * wy * grid.at(i, j);
        }
    }
    return sum * grid.dx() * grid.dy();
}

std::vector<GridMode> find_modes(const DensityGrid& grid, std::size_t min_separation, double min_relative_density) {
    if (!(min_relative_density >= 0.0 && min_relative_density <= 1.0))
        throw std::invalid_argument("find_modes: min_relative_density must lie in [0, 1]");
    std::vector<GridMode> candidates;
    const auto nx = static_cast<long>(grid.n_x), ny = static_cast<long>(grid.n_y);
    for (long i = 0; i < nx; ++i) {
        for (long j = 0; j < ny; ++j) {
            const double v = grid.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
            bool is_max = true;
            for (long di = -1; di <= 1 && is_max; ++di) {
                for (long dj = -1; dj <= 1; ++dj) {
                    if (di == 0 && dj == 0) continue;
                    const long a = i + di, b = j + dj;
                    if (a < 0 || b < 0 || a >= nx || b >= ny) continue;
                    const double w = grid.at(static_cast<std::size_t>(a), static_cast<std::size_t>(b));
                    const bool earlier = di < 0 || (di == 0 && dj < 0);
                    if (earlier ? !(v > w) : v < w) {
                        is_max = false;
                        break;
                    }
                }
            }
            if (is_max)
                candidates.push_back({{grid.x_at(static_cast<std::size_t>(i)), grid.y_at(static_cast<std::size_t>(j))},
                                      v,
                                      static_cast<std::size_t>(i),
                                      static_cast<std::size_t>(j)});
        }
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const GridMode& a, const GridMode& b) { return a.density > b.density; });
    std::vector<GridMode> accepted;
    const double floor = candidates.empty() ? 0.0 : min_relative_density * candidates.front().density;
    for (const auto& c : candidates) {
        if (c.density < floor) break;
        const bool suppressed = std::any_of(accepted.begin(), accepted.end(), [&](const GridMode& m) {
            const auto di = static_cast<std::size_t>(std::labs(static_cast<long>(m.i) - static_cast<long>(c.i)));
            const auto dj = static_cast<std::size_t>(std::labs(static_cast<long>(m.j) - static_cast<long>(c.j)));
            return std::max(di, dj) <= min_separation;
        });
        if (!suppressed) accepted.push_back(c);
    }
    return accepted;
}

double integrated_squared_error(const DensityGrid& estimate, const DensityGrid& reference) {
    if (!estimate.aligned_with(reference)) throw std::invalid_argument("integrated_squared_error: grids not aligned");
    DensityGrid diff = reference;
    for (std::size_t k = 0; k < diff.values.size(); ++k) {
        const double d = estimate.values[k] - reference.values[k];
        diff.values[k] = d * d;
    }
    return trapezoid_integral(diff);
}

double integrated_squared_error(const KdeModel& model, const DensityGrid& reference) {
    const DensityGrid estimate = evaluate_grid(model, reference.x_range, reference.y_range, reference.n_x, reference.n_y);
    return integrated_squared_error(estimate, reference);
}

}  // namespace fdiag
