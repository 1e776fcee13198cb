#pragma once

#include <algorithm>
#include <cmath>

namespace qdmeta {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
    friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
    friend Vec2 operator*(double s, Vec2 v) { return {s * v.x, s * v.y}; }
    friend bool operator==(Vec2 a, Vec2 b) { return a.x == b.x && a.y == b.y; }
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }

inline double norm(Vec2 v) { return std::sqrt(v.x * v.x + v.y * v.y); }

inline double distance(Vec2 a, Vec2 b) { return norm(a - b); }

/// Twice the signed area of triangle (a, b, c); > 0 when c lies left of a->b.
inline double cross3(Vec2 a, Vec2 b, Vec2 c) {
    return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}

namespace detail {

// For q known collinear with segment [p, r]: does q lie within its bounding box?
inline bool in_bounds(Vec2 p, Vec2 q, Vec2 r) {
    return std::min(p.x, r.x) <= q.x && q.x <= std::max(p.x, r.x) &&
           std::min(p.y, r.y) <= q.y && q.y <= std::max(p.y, r.y);
}

} // namespace detail

/// Exact intersection test for zero-width closed segments [p1,q1] and [p2,q2].
/// Touching endpoints and collinear overlap count as intersections.
inline bool segments_intersect(Vec2 p1, Vec2 q1, Vec2 p2, Vec2 q2) {
    const double d1 = cross3(p2, q2, p1);
    const double d2 = cross3(p2, q2, q1);
    const double d3 = cross3(p1, q1, p2);
    const double d4 = cross3(p1, q1, q2);

    if (((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) &&
        ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)))
        return true;

    if (d1 == 0.0 && detail::in_bounds(p2, p1, q2)) return true;
    if (d2 == 0.0 && detail::in_bounds(p2, q1, q2)) return true;
    if (d3 == 0.0 && detail::in_bounds(p1, p2, q1)) return true;
    if (d4 == 0.0 && detail::in_bounds(p1, q2, q1)) return true;
    return false;
}

} // namespace qdmeta
