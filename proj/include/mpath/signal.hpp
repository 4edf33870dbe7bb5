#pragma once

#include <complex>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "mpath/geometry.hpp"
#include "mpath/rng.hpp"

namespace mpath {

inline constexpr double kSpeedOfLight = 299792458.0;

using cplx = std::complex<double>;

// Sampling grid t_k = k * T_s, k = 0..N_s-1; delays live in [0, (N_s-1) T_s].
struct SignalConfig {
    int num_samples = 161;
    double sample_interval = 1.25e-9;
    double c = kSpeedOfLight;

    double max_delay() const { return (num_samples - 1) * sample_interval; }
    double d_max() const { return c * max_delay(); }
};

// Root-raised-cosine pulse with unit peak.
class Pulse {
public:
    Pulse(double rolloff, double symbol_time, double sample_interval);

    double operator()(double t) const;
    double rolloff() const { return rolloff_; }
    double symbol_time() const { return symbol_time_; }
    double sample_interval() const { return sample_interval_; }
    // Center-tapped samples at multiples of T_s over +-8 symbol times.
    const std::vector<double>& samples() const { return samples_; }
    // RMS bandwidth in Hz (FFT quadrature over a long, densely sampled span).
    double rms_bandwidth() const { return rms_bandwidth_; }

private:
    double rolloff_;
    double symbol_time_;
    double sample_interval_;
    std::vector<double> samples_;
    double rms_bandwidth_ = 0.0;
};

Pulse make_rrc_pulse(double rolloff, double symbol_time, double sample_interval);

// Real baseband vector [s(t_k - tau)]_k.
Eigen::VectorXd s_vec(const Pulse& pulse, const SignalConfig& cfg, double tau);
void s_vec_into(const Pulse& pulse, const SignalConfig& cfg, double tau, Eigen::Ref<Eigen::VectorXd> out);

struct DpsParams {
    double power;  // Omega
    double rise;   // gamma_r [m]
    double fall;   // gamma_f [m]
    double bias;   // b [m]
};

// Double-exponential shape as a function of the excess distance delta = d - d_LOS - b.
double dps_shape(double delta, double fall, double rise);

double dps(double d, const Vec2& p_agent, const Vec2& p_anchor, const DpsParams& params);
double normalized_dps(double d, const Vec2& p_agent, const Vec2& p_anchor, double bias, double fall, double rise);

struct Snapshot {
    Eigen::VectorXcd r;
    double sigma;
};

struct PathComponent {
    double delay;
    cplx amplitude;
};

Snapshot synth_deterministic(const Pulse& pulse, const SignalConfig& cfg, const std::vector<PathComponent>& components,
                             double sigma, Rng& rng);

Snapshot synth_stochastic(const Pulse& pulse, const SignalConfig& cfg, const std::optional<PathComponent>& los,
                          const DpsParams& dense, const Vec2& p_agent, const Vec2& p_anchor, double sigma, Rng& rng);

// Covariance of dense multipath plus AWGN on the dense delay grid used by synth_stochastic.
Eigen::MatrixXd dense_covariance(const Pulse& pulse, const SignalConfig& cfg, const DpsParams& dense,
                                 const Vec2& p_agent, const Vec2& p_anchor, double sigma);

// |alpha| giving normalized amplitude u under covariance C: u^2 = |alpha|^2 s^T C^-1 s.
double calibrate_amplitude(const Eigen::VectorXd& s, const Eigen::MatrixXd& cov, double u);

struct PathLoss {
    double snr_ref_db = 20.0;  // u^2 at the reference distance
    double ref_distance = 1.0;
    double reflection_loss_db = 3.0;
};

struct GeoPath {
    double distance;   // path length [m]
    double amplitude;  // normalized amplitude u
    int order;         // 0 = LOS
};

struct MirrorResult {
    bool los_visible;
    std::vector<GeoPath> paths;
};

MirrorResult mirror_mpcs(const std::vector<Segment>& walls, const Vec2& p_agent, const Vec2& p_anchor, int max_order,
                         const PathLoss& loss = {});

}  // namespace mpath
