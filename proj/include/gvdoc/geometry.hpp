#pragma once

#include <algorithm>
#include <array>
#include <cmath>

namespace gvdoc {

// Axis-aligned box, (x1, y1) top-left, (x2, y2) bottom-right, y grows down.
struct BBox {
    double x1 = 0.0, y1 = 0.0, x2 = 0.0, y2 = 0.0;

    double width() const { return x2 - x1; }
    double height() const { return y2 - y1; }
    double cx() const { return 0.5 * (x1 + x2); }
    double cy() const { return 0.5 * (y1 + y2); }
    double diagonal() const { return std::hypot(width(), height()); }

    bool valid() const { return x1 <= x2 && y1 <= y2; }

    bool contains(const BBox& inner, double eps) const {
        return inner.x1 >= x1 - eps && inner.y1 >= y1 - eps &&
               inner.x2 <= x2 + eps && inner.y2 <= y2 + eps;
    }

    BBox united(const BBox& o) const {
        return {std::min(x1, o.x1), std::min(y1, o.y1), std::max(x2, o.x2), std::max(y2, o.y2)};
    }

    // Corners in TL, TR, BL, BR order as (x, y) pairs.
    std::array<std::array<double, 2>, 4> corners() const {
        return {{{x1, y1}, {x2, y1}, {x1, y2}, {x2, y2}}};
    }

    bool operator==(const BBox& o) const = default;
};

inline double center_distance(const BBox& a, const BBox& b) {
    return std::hypot(a.cx() - b.cx(), a.cy() - b.cy());
}

// True when the box and the closed disc (center, radius) share at least one
// point; touching counts.
inline bool box_intersects_circle(const BBox& box, double cx, double cy, double radius) {
    double px = std::clamp(cx, box.x1, box.x2);
    double py = std::clamp(cy, box.y1, box.y2);
    double dx = px - cx, dy = py - cy;
    return dx * dx + dy * dy <= radius * radius;
}

}  // namespace gvdoc
