#pragma once

#include <cmath>

namespace ablab {

/// Plain 2D vector used for points and directions alike.
struct Vec2 {
    double x{0.0};
    double y{0.0};

    constexpr Vec2() = default;
    constexpr Vec2(double x_, double y_) : x(x_), y(y_) {}

    constexpr Vec2 operator+(const Vec2& r) const { return {x + r.x, y + r.y}; }
    constexpr Vec2 operator-(const Vec2& r) const { return {x - r.x, y - r.y}; }
    constexpr Vec2 operator-() const { return {-x, -y}; }
    constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
    constexpr Vec2 operator/(double s) const { return {x / s, y / s}; }
    friend constexpr Vec2 operator*(double s, const Vec2& v) { return {v.x * s, v.y * s}; }

    Vec2& operator+=(const Vec2& r) { x += r.x; y += r.y; return *this; }
    Vec2& operator-=(const Vec2& r) { x -= r.x; y -= r.y; return *this; }
    Vec2& operator*=(double s) { x *= s; y *= s; return *this; }

    constexpr bool operator==(const Vec2&) const = default;
};

constexpr double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }

/// z-component of the planar cross product.
constexpr double cross(const Vec2& a, const Vec2& b) { return a.x * b.y - a.y * b.x; }

inline double norm(const Vec2& v) { return std::hypot(v.x, v.y); }

/// Counterclockwise quarter turn.
constexpr Vec2 perp(const Vec2& v) { return {-v.y, v.x}; }

inline Vec2 normalized(const Vec2& v) {
    const double n = norm(v);
    return n > 0.0 ? v / n : Vec2{};
}

inline Vec2 from_angle(double theta) { return {std::cos(theta), std::sin(theta)}; }

/// Signed angle swept by the direction from `c` as a point moves from `a` to `b`
/// along the straight segment; lies in (-pi, pi) whenever `c` is off the segment.
inline double subtended_angle(const Vec2& c, const Vec2& a, const Vec2& b) {
    const Vec2 da = a - c;
    const Vec2 db = b - c;
    return std::atan2(cross(da, db), dot(da, db));
}

/// Distance from point `p` to the closed segment [a, b].
inline double segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
    const Vec2 ab = b - a;
    const double len2 = dot(ab, ab);
    double t = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
    t = t < 0.0 ? 0.0 : (t > 1.0 ? 1.0 : t);
    return norm(p - (a + ab * t));
}

}  // namespace ablab
