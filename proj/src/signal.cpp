#include "mpath/signal.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <unsupported/Eigen/FFT>

namespace mpath {

namespace {

constexpr double kPi = std::numbers::pi;

double rrc_raw(double t, double rolloff, double symbol_time) {
    const double x = t / symbol_time;
    const double b = rolloff;
    if (std::abs(x) < 1e-10) return 1.0 - b + 4.0 * b / kPi;
    if (b > 0.0 && std::abs(1.0 - 16.0 * b * b * x * x) < 1e-9) {
        const double a = kPi / (4.0 * b);
        return b / std::numbers::sqrt2 * ((1.0 + 2.0 / kPi) * std::sin(a) + (1.0 - 2.0 / kPi) * std::cos(a));
    }
    const double num = std::sin(kPi * x * (1.0 - b)) + 4.0 * b * x * std::cos(kPi * x * (1.0 + b));
    const double den = kPi * x * (1.0 - 16.0 * b * b * x * x);
    return num / den;
}

double fft_rms_bandwidth(const Pulse& p) {
    constexpr int n = 1 << 16;
    const double dt = p.symbol_time() / 32.0;
    std::vector<double> x(n);
    for (int k = 0; k < n; ++k) x[static_cast<std::size_t>(k)] = p((k - n / 2) * dt);
    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> spec;
    fft.fwd(spec, x);
    double num = 0.0, den = 0.0;
    for (int k = 0; k < n; ++k) {
        const double f = (k < n / 2 ? k : k - n) / (n * dt);
        const double pw = std::norm(spec[static_cast<std::size_t>(k)]);
        num += f * f * pw;
        den += pw;
    }
    return std::sqrt(num / den);
}

void check_delay(const SignalConfig& cfg, double tau) {
    const double slack = 1e-9 * cfg.sample_interval;
    if (!(tau >= -slack && tau <= cfg.max_delay() + slack)) throw std::out_of_range("delay outside the sampling window");
}

}  // namespace

Pulse::Pulse(double rolloff, double symbol_time, double sample_interval)
    : rolloff_(rolloff), symbol_time_(symbol_time), sample_interval_(sample_interval) {
    if (!(rolloff >= 0.0 && rolloff <= 1.0) || !(symbol_time > 0.0) || !(sample_interval > 0.0))
        throw std::invalid_argument("make_rrc_pulse: parameter out of domain");
    const int half = static_cast<int>(std::ceil(8.0 * symbol_time / sample_interval));
    samples_.resize(static_cast<std::size_t>(2 * half + 1));
    for (int k = -half; k <= half; ++k) samples_[static_cast<std::size_t>(k + half)] = (*this)(k * sample_interval);
    rms_bandwidth_ = fft_rms_bandwidth(*this);
}

double Pulse::operator()(double t) const {
    const double peak = 1.0 - rolloff_ + 4.0 * rolloff_ / kPi;
    return rrc_raw(t, rolloff_, symbol_time_) / peak;
}

Pulse make_rrc_pulse(double rolloff, double symbol_time, double sample_interval) {
    return Pulse(rolloff, symbol_time, sample_interval);
}

void s_vec_into(const Pulse& pulse, const SignalConfig& cfg, double tau, Eigen::Ref<Eigen::VectorXd> out) {
    check_delay(cfg, tau);
    for (int k = 0; k < cfg.num_samples; ++k) out[k] = pulse(k * cfg.sample_interval - tau);
}

Eigen::VectorXd s_vec(const Pulse& pulse, const SignalConfig& cfg, double tau) {
    Eigen::VectorXd v(cfg.num_samples);
    s_vec_into(pulse, cfg, tau, v);
    return v;
}

double dps_shape(double delta, double fall, double rise) {
    if (delta <= 0.0) return 0.0;
    return (fall + rise) / (fall * fall) * (-std::expm1(-delta / rise)) * std::exp(-delta / fall);
}

double normalized_dps(double d, const Vec2& p_agent, const Vec2& p_anchor, double bias, double fall, double rise) {
    if (!(fall > 0.0) || !(rise > 0.0) || bias < 0.0) throw std::invalid_argument("dps: parameter out of domain");
    return dps_shape(d - (p_agent - p_anchor).norm() - bias, fall, rise);
}

double dps(double d, const Vec2& p_agent, const Vec2& p_anchor, const DpsParams& params) {
    if (params.power < 0.0) throw std::invalid_argument("dps: negative power");
    return params.power * normalized_dps(d, p_agent, p_anchor, params.bias, params.fall, params.rise);
}

Snapshot synth_deterministic(const Pulse& pulse, const SignalConfig& cfg, const std::vector<PathComponent>& components,
                             double sigma, Rng& rng) {
    Snapshot snap{Eigen::VectorXcd::Zero(cfg.num_samples), sigma};
    Eigen::VectorXd s(cfg.num_samples);
    for (const auto& c : components) {
        s_vec_into(pulse, cfg, c.delay, s);
        snap.r += c.amplitude * s.cast<cplx>();
    }
    if (sigma > 0.0) {
        const double sd = sigma / std::numbers::sqrt2;
        for (int k = 0; k < cfg.num_samples; ++k) snap.r[k] += cplx(sd * std_normal(rng), sd * std_normal(rng));
    }
    return snap;
}

namespace {
// Dense delay grid at T_s/4 over [0, max_delay].
int dense_grid_size(const SignalConfig& cfg) { return 4 * (cfg.num_samples - 1) + 1; }
}  // namespace

Snapshot synth_stochastic(const Pulse& pulse, const SignalConfig& cfg, const std::optional<PathComponent>& los,
                          const DpsParams& dense, const Vec2& p_agent, const Vec2& p_anchor, double sigma, Rng& rng) {
    std::vector<PathComponent> comps;
    if (los) comps.push_back(*los);
    Snapshot snap = synth_deterministic(pulse, cfg, comps, sigma, rng);
    if (dense.power == 0.0) return snap;
    const double dtau = cfg.sample_interval / 4.0;
    const double dd = cfg.c * dtau;
    Eigen::VectorXd s(cfg.num_samples);
    for (int k = 0; k < dense_grid_size(cfg); ++k) {
        const double tau = k * dtau;
        const double var = dps(cfg.c * tau, p_agent, p_anchor, dense) * dd;
        if (var <= 0.0) continue;
        const double sd = std::sqrt(0.5 * var);
        const cplx nu(sd * std_normal(rng), sd * std_normal(rng));
        s_vec_into(pulse, cfg, tau, s);
        snap.r += nu * s.cast<cplx>();
    }
    return snap;
}

Eigen::MatrixXd dense_covariance(const Pulse& pulse, const SignalConfig& cfg, const DpsParams& dense,
                                 const Vec2& p_agent, const Vec2& p_anchor, double sigma) {
    Eigen::MatrixXd c = sigma * sigma * Eigen::MatrixXd::Identity(cfg.num_samples, cfg.num_samples);
    const double dtau = cfg.sample_interval / 4.0;
    const double dd = cfg.c * dtau;
    Eigen::VectorXd s(cfg.num_samples);
    for (int k = 0; k < dense_grid_size(cfg); ++k) {
        const double tau = k * dtau;
        const double var = dps(cfg.c * tau, p_agent, p_anchor, dense) * dd;
        if (var <= 0.0) continue;
        s_vec_into(pulse, cfg, tau, s);
        c.noalias() += var * s * s.transpose();
    }
    return c;
}

double calibrate_amplitude(const Eigen::VectorXd& s, const Eigen::MatrixXd& cov, double u) {
    const double q = s.dot(cov.llt().solve(s));
    return u / std::sqrt(q);
}

MirrorResult mirror_mpcs(const std::vector<Segment>& walls, const Vec2& p_agent, const Vec2& p_anchor, int max_order,
                         const PathLoss& loss) {
    if (max_order < 0 || max_order > 3) throw std::invalid_argument("mirror_mpcs: max_order must be in [0, 3]");
    for (const auto& w : walls)
        if (point_segment_distance(p_agent, w) < 1e-9 || point_segment_distance(p_anchor, w) < 1e-9)
            throw std::invalid_argument("mirror_mpcs: degenerate geometry (node on a wall)");

    const double u_ref = std::pow(10.0, loss.snr_ref_db / 20.0);
    auto amplitude = [&](double dist, int order) {
        return u_ref * loss.ref_distance / dist * std::pow(10.0, -loss.reflection_loss_db * order / 20.0);
    };

    MirrorResult out{!blocked(p_agent, p_anchor, walls), {}};
    if (out.los_visible) {
        const double d = (p_agent - p_anchor).norm();
        out.paths.push_back({d, amplitude(d, 0), 0});
    }

    const int nw = static_cast<int>(walls.size());
    std::vector<int> seq;
    std::vector<Vec2> images{p_anchor};

    auto validate = [&]() -> bool {
        // Walk back from the agent to the anchor through the reflection points.
        Vec2 from = p_agent;
        int prev_wall = -1;
        for (int i = static_cast<int>(seq.size()) - 1; i >= 0; --i) {
            const int w = seq[static_cast<std::size_t>(i)];
            const Segment& wall = walls[static_cast<std::size_t>(w)];
            const Vec2& img = images[static_cast<std::size_t>(i) + 1];
            auto t = crossing(from, img, wall);
            if (!t) return false;
            const Vec2 hit = wall.a + *t * (wall.b - wall.a);
            std::vector<int> skip{w};
            if (prev_wall >= 0) skip.push_back(prev_wall);
            if (blocked(from, hit, walls, skip)) return false;
            from = hit;
            prev_wall = w;
        }
        return !blocked(from, p_anchor, walls, {prev_wall});
    };

    auto recurse = [&](auto&& self, int depth) -> void {
        if (depth == max_order) return;
        for (int w = 0; w < nw; ++w) {
            if (!seq.empty() && seq.back() == w) continue;
            seq.push_back(w);
            images.push_back(mirror(images.back(), walls[static_cast<std::size_t>(w)]));
            if (validate()) {
                const double d = (p_agent - images.back()).norm();
                out.paths.push_back({d, amplitude(d, depth + 1), depth + 1});
            }
            self(self, depth + 1);
            seq.pop_back();
            images.pop_back();
        }
    };
    recurse(recurse, 0);
    return out;
}

}  // namespace mpath
