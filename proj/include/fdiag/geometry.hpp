#pragma once

#include <cmath>

namespace fdiag {

/// A point in the (density, flow) plane; x is density, y is flow.
struct Point2 {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point2&, const Point2&) = default;
};

inline double distance(const Point2& a, const Point2& b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

}  // namespace fdiag
