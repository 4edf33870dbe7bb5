#include "mpath/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace mpath {

namespace {
double cross2(const Vec2& u, const Vec2& v) { return u.x() * v.y() - u.y() * v.x(); }
}  // namespace

std::optional<double> crossing(const Vec2& p, const Vec2& q, const Segment& s) {
    const Vec2 r = q - p, e = s.b - s.a;
    const double den = cross2(r, e);
    if (std::abs(den) < 1e-15) return std::nullopt;
    const Vec2 ap = s.a - p;
    const double t_path = cross2(ap, e) / den;
    const double t_wall = cross2(ap, r) / den;
    constexpr double eps = 1e-12;
    if (t_path <= eps || t_path >= 1.0 - eps) return std::nullopt;
    if (t_wall < 0.0 || t_wall > 1.0) return std::nullopt;
    return t_wall;
}

Vec2 mirror(const Vec2& point, const Segment& wall) {
    const Vec2 e = (wall.b - wall.a).normalized();
    const Vec2 d = point - wall.a;
    const Vec2 along = e * d.dot(e);
    return wall.a + 2.0 * along - d;
}

int side(const Vec2& point, const Segment& wall) {
    const double c = cross2(wall.b - wall.a, point - wall.a);
    return c > 0.0 ? 1 : (c < 0.0 ? -1 : 0);
}

double point_segment_distance(const Vec2& p, const Segment& s) {
    const Vec2 e = s.b - s.a;
    const double t = std::clamp((p - s.a).dot(e) / e.squaredNorm(), 0.0, 1.0);
    return (p - (s.a + t * e)).norm();
}

bool blocked(const Vec2& p, const Vec2& q, const std::vector<Segment>& walls, const std::vector<int>& skip) {
    for (int w = 0; w < static_cast<int>(walls.size()); ++w) {
        if (std::find(skip.begin(), skip.end(), w) != skip.end()) continue;
        if (crossing(p, q, walls[static_cast<std::size_t>(w)])) return true;
    }
    return false;
}

}  // namespace mpath
