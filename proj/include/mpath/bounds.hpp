#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "mpath/geometry.hpp"

namespace mpath {

using Fisher2 = Eigen::Matrix2d;
using Fisher4 = Eigen::Matrix4d;  // [p; v]

// visible[n][j]
using VisibilitySchedule = std::vector<std::vector<bool>>;

// Unit-bearing outer product from anchor to agent.
Eigen::Matrix2d ranging_direction(const Vec2& p, const Vec2& anchor);

// Position information from LOS ranging; invisible anchors contribute nothing.
Fisher2 sp_crlb(std::span<const double> amplitudes, const Vec2& p, std::span<const Vec2> anchors,
                const std::vector<bool>& visible, double rms_bandwidth, double c);

// sqrt(tr J^-1); infinity when singular.
double rmse_bound(const Fisher2& j);

struct MotionModel {
    double accel_std = 2.0;
    double dt = 0.1;
    double velocity_prior_std = 6.0;
};

Eigen::Matrix4d cv_transition(double dt);
Eigen::Matrix<double, 4, 2> cv_noise_gain(double dt);

// Regularized inverse: (J + eps I)^-1.
Eigen::Matrix4d regularized_inverse(const Eigen::Matrix4d& j, double eps = 1e-12);

// One information recursion step with position-block measurement information j_s.
Fisher4 p_crlb_step(const Fisher4& prev, const Fisher2& j_s, const MotionModel& m);

// Initial information: position block from j_s, velocity block from the velocity prior.
Fisher4 p_crlb_init(const Fisher2& j_s, const MotionModel& m);

// Position-block bound sqrt(tr [J^-1]_pp).
double position_bound(const Fisher4& j);

struct BoundCurves {
    std::vector<double> sp_crlb, p_crlb, p_crlb_los;
};

// amplitudes[n][j], positions[n], schedule[n][j]
BoundCurves bound_curves(const std::vector<std::vector<double>>& amplitudes, const std::vector<Vec2>& positions,
                         std::span<const Vec2> anchors, const VisibilitySchedule& schedule, double rms_bandwidth,
                         double c, const MotionModel& m);

void write_bounds_csv(std::ostream& os, const BoundCurves& b);

}  // namespace mpath
