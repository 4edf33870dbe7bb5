#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

namespace mpath {

using Vec2 = Eigen::Vector2d;

struct Segment {
    Vec2 a;
    Vec2 b;
};

// Parameter t along segment s where the open segment (p, q) crosses it, if any.
std::optional<double> crossing(const Vec2& p, const Vec2& q, const Segment& s);

Vec2 mirror(const Vec2& point, const Segment& wall);

// Side of the infinite line through the wall: +1, -1 or 0.
int side(const Vec2& point, const Segment& wall);

double point_segment_distance(const Vec2& p, const Segment& s);

// True when the open segment p->q crosses any wall except those listed in skip.
bool blocked(const Vec2& p, const Vec2& q, const std::vector<Segment>& walls,
             const std::vector<int>& skip = {});

}  // namespace mpath
