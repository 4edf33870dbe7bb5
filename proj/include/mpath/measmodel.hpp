#pragma once

#include <span>
#include <vector>

#include "mpath/ceda.hpp"
#include "mpath/geometry.hpp"

namespace mpath {

struct AnchorState {
    double amplitude = 0.0;  // u
    double dnr = 0.0;        // omega
    double bias = 0.0;       // b [m]
    double fall = 1.0;       // gamma_f [m]
};

struct AugAgentState {
    Vec2 position = Vec2::Zero();
    Vec2 velocity = Vec2::Zero();
    double rise = 1.0;  // gamma_r [m]
};

struct NlosZeta {
    double dnr;
    double bias;
    double fall;
    double rise;
};

inline NlosZeta zeta_of(const AnchorState& y, double rise) { return {y.dnr, y.bias, y.fall, rise}; }

struct LosPmf {
    std::vector<double> support;
    std::vector<double> weights;

    static LosPmf uniform(std::vector<double> support);
    static LosPmf fixed(double q);
    double mean() const;
};

// Parameters shared by every likelihood evaluation.
struct ModelConstants {
    double threshold = 1.77;      // gamma
    int num_samples = 161;        // N_s
    double rms_bandwidth = 0.0;   // beta_bw [Hz]
    double c = 299792458.0;
    double d_max = 60.0;
};

struct LhfOptions {
    bool nonuniform_nlos = true;     // distance-dependent NLOS scale; otherwise s_u^2 = 1/2
    bool uniform_delay = true;       // NLOS distance LHF 1/d_max; otherwise Q0-normalized
    bool gaussian_los_ampl = true;   // truncated Gaussian instead of truncated Rice
    int quad_points = 30;            // K_T
};

double sigma_d(double u, double rms_bandwidth, double c);
double sigma_u(double u, int num_samples);

double los_dist_lhf(double z_d, const Vec2& p, const Vec2& anchor, double u, double rms_bandwidth, double c);
double los_ampl_lhf(double z_u, double u, double threshold, int num_samples, bool gaussian_approx);

// Squared NLOS scale s_u^2 = (omega^2 * S_bar + 1) / 2.
double nlos_scale2(double z_d, const Vec2& p, const Vec2& anchor, const NlosZeta& zeta);
double nlos_scale(double z_d, const Vec2& p, const Vec2& anchor, const NlosZeta& zeta);
double nlos_ampl_lhf(double z_u, double z_d, const Vec2& p, const Vec2& anchor, const NlosZeta& zeta, double threshold);

struct Q0Result {
    double value;
    bool degenerate;  // onset >= d_max, two-point rule used
};
Q0Result q0_norm(const Vec2& p, const Vec2& anchor, const NlosZeta& zeta, double threshold, double d_max,
                 int quad_points);
double nlos_dist_lhf(double z_d, const Vec2& p, const Vec2& anchor, const NlosZeta& zeta, double threshold,
                     double d_max, bool uniform_mode, int quad_points = 30);

double detection_prob(double u, double threshold, int num_samples);
double assoc_prior(int a, int num_meas, double u, double q, double threshold, int num_samples);

// Sum over associations of the pseudo-LHF, factored as
//   sum_a g(a; q) = exp(log_nlos) * (1 - q * pd * (1 - R/M)),   R = sum_m L_m / NL_m,
// which is linear in q. M = 0 gives R/M := 0 and log_nlos = 0.
struct LhfTerms {
    double log_nlos = 0.0;        // sum_m log NL_m
    double pd = 0.0;              // detection probability P_D(u)
    double log_ratio_mean = -INFINITY;  // log(R / M)

    // log of sum_a g(a; q)
    double log_marginal(double q) const;
};

LhfTerms lhf_terms(std::span<const Measurement> z, const Vec2& p, const Vec2& anchor, const AnchorState& y,
                   double rise, const ModelConstants& k, const LhfOptions& opt);

// Pseudo-LHF for a single association a (0 = LOS not detected), product form.
double pseudo_lhf(std::span<const Measurement> z, const Vec2& p, const Vec2& anchor, const AnchorState& y, double rise,
                  int a, double q, const ModelConstants& k, const LhfOptions& opt);

}  // namespace mpath
