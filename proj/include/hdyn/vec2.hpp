#pragma once
#include <cmath>

namespace hdyn {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2() = default;
    Vec2(double x_, double y_) : x(x_), y(y_) {}

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    Vec2 operator/(double s) const { return {x / s, y / s}; }
    Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
    Vec2& operator-=(const Vec2& o) { x -= o.x; y -= o.y; return *this; }
    Vec2& operator*=(double s) { x *= s; y *= s; return *this; }

    double dot(const Vec2& o) const { return x * o.x + y * o.y; }
    double squared_norm() const { return x * x + y * y; }
    double norm() const { return std::sqrt(squared_norm()); }
};

inline Vec2 operator*(double s, const Vec2& v) { return v * s; }

// Wrap a coordinate into [0, box). Robust to values a few boxes away.
inline double wrap_coord(double v, double box) {
    double w = std::fmod(v, box);
    if (w < 0.0) w += box;
    // fmod of a tiny negative can land exactly on box after the correction
    if (w >= box) w -= box;
    return w;
}

inline Vec2 wrap(const Vec2& p, double box) {
    return {wrap_coord(p.x, box), wrap_coord(p.y, box)};
}

// Displacement to - from under the minimum-image convention: each component
// is shifted by multiples of box into [-box/2, box/2).
inline double min_image_coord(double d, double box) {
    d -= box * std::round(d / box);
    return d;
}

inline Vec2 min_image(const Vec2& d, double box) {
    return {min_image_coord(d.x, box), min_image_coord(d.y, box)};
}

// Displacement from -> to, honoring periodicity when box > 0.
inline Vec2 displacement(const Vec2& from, const Vec2& to, bool periodic, double box) {
    Vec2 d = to - from;
    return periodic ? min_image(d, box) : d;
}

}  // namespace hdyn
