#include "mpath/bounds.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/LU>

namespace mpath {

Eigen::Matrix2d ranging_direction(const Vec2& p, const Vec2& anchor) {
    const Vec2 d = p - anchor;
    const double r = d.norm();
    if (!(r > 0.0)) throw std::domain_error("ranging_direction: agent on anchor");
    const Vec2 e = d / r;
    return e * e.transpose();
}

Fisher2 sp_crlb(std::span<const double> amplitudes, const Vec2& p, std::span<const Vec2> anchors,
                const std::vector<bool>& visible, double rms_bandwidth, double c) {
    if (amplitudes.size() != anchors.size() || visible.size() != anchors.size())
        throw std::invalid_argument("sp_crlb: size mismatch");
    const double k = 8.0 * std::numbers::pi * std::numbers::pi * rms_bandwidth * rms_bandwidth / (c * c);
    Fisher2 j = Fisher2::Zero();
    for (std::size_t a = 0; a < anchors.size(); ++a)
        if (visible[a]) j += k * amplitudes[a] * amplitudes[a] * ranging_direction(p, anchors[a]);
    return j;
}

double rmse_bound(const Fisher2& j) {
    const double det = j.determinant();
    if (!(det > 1e-12 * std::max(1.0, j.trace() * j.trace()))) return std::numeric_limits<double>::infinity();
    return std::sqrt(j.trace() / det);
}

Eigen::Matrix4d cv_transition(double dt) {
    Eigen::Matrix4d a = Eigen::Matrix4d::Identity();
    a(0, 2) = a(1, 3) = dt;
    return a;
}

Eigen::Matrix<double, 4, 2> cv_noise_gain(double dt) {
    Eigen::Matrix<double, 4, 2> b = Eigen::Matrix<double, 4, 2>::Zero();
    b(0, 0) = b(1, 1) = 0.5 * dt * dt;
    b(2, 0) = b(3, 1) = dt;
    return b;
}

Eigen::Matrix4d regularized_inverse(const Eigen::Matrix4d& j, double eps) {
    return (j + eps * Eigen::Matrix4d::Identity()).ldlt().solve(Eigen::Matrix4d::Identity());
}

Fisher4 p_crlb_step(const Fisher4& prev, const Fisher2& j_s, const MotionModel& m) {
    const Eigen::Matrix4d a = cv_transition(m.dt);
    const auto b = cv_noise_gain(m.dt);
    const Eigen::Matrix4d cov = a * regularized_inverse(prev) * a.transpose() +
                                m.accel_std * m.accel_std * b * b.transpose();
    Fisher4 j = regularized_inverse(cov);
    j.topLeftCorner<2, 2>() += j_s;
    return 0.5 * (j + j.transpose());
}

Fisher4 p_crlb_init(const Fisher2& j_s, const MotionModel& m) {
    Fisher4 j = Fisher4::Zero();
    j.topLeftCorner<2, 2>() = j_s;
    j.bottomRightCorner<2, 2>() = Eigen::Matrix2d::Identity() / (m.velocity_prior_std * m.velocity_prior_std);
    return j;
}

double position_bound(const Fisher4& j) {
    // Schur complement of the velocity block
    const Eigen::Matrix2d jvv = j.bottomRightCorner<2, 2>() + 1e-12 * Eigen::Matrix2d::Identity();
    const Eigen::Matrix2d eff =
        j.topLeftCorner<2, 2>() - j.topRightCorner<2, 2>() * jvv.ldlt().solve(j.bottomLeftCorner<2, 2>());
    const double det = eff.determinant();
    if (!(det > 0.0)) return std::numeric_limits<double>::infinity();
    const double t = eff.trace() / det;
    if (!std::isfinite(t) || t > 1e10) return std::numeric_limits<double>::infinity();
    return std::sqrt(t);
}

BoundCurves bound_curves(const std::vector<std::vector<double>>& amplitudes, const std::vector<Vec2>& positions,
                         std::span<const Vec2> anchors, const VisibilitySchedule& schedule, double rms_bandwidth,
                         double c, const MotionModel& m) {
    const std::size_t n = positions.size();
    if (amplitudes.size() != n || schedule.size() != n) throw std::invalid_argument("bound_curves: length mismatch");
    BoundCurves out;
    const std::vector<bool> all(anchors.size(), true);
    Fisher4 jp, jl;
    for (std::size_t k = 0; k < n; ++k) {
        const Fisher2 js = sp_crlb(amplitudes[k], positions[k], anchors, schedule[k], rms_bandwidth, c);
        const Fisher2 jsl = sp_crlb(amplitudes[k], positions[k], anchors, all, rms_bandwidth, c);
        jp = k == 0 ? p_crlb_init(js, m) : p_crlb_step(jp, js, m);
        jl = k == 0 ? p_crlb_init(jsl, m) : p_crlb_step(jl, jsl, m);
        out.sp_crlb.push_back(rmse_bound(js));
        out.p_crlb.push_back(position_bound(jp));
        out.p_crlb_los.push_back(position_bound(jl));
    }
    return out;
}

void write_bounds_csv(std::ostream& os, const BoundCurves& b) {
    os << "n,sp_crlb_m,p_crlb_m,p_crlb_los_m\n";
    for (std::size_t k = 0; k < b.sp_crlb.size(); ++k)
        os << k << ',' << b.sp_crlb[k] << ',' << b.p_crlb[k] << ',' << b.p_crlb_los[k] << '\n';
}

}  // namespace mpath
