#include "mpath/measmodel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "mpath/mathdist.hpp"
#include "mpath/signal.hpp"

namespace mpath {

namespace {
constexpr double kLogSqrt2Pi = 0.91893853320467274178;
}

LosPmf LosPmf::uniform(std::vector<double> support) {
    LosPmf p;
    p.weights.assign(support.size(), 1.0 / static_cast<double>(support.size()));
    p.support = std::move(support);
    return p;
}

LosPmf LosPmf::fixed(double q) { return LosPmf{{q}, {1.0}}; }

double LosPmf::mean() const {
    return std::inner_product(support.begin(), support.end(), weights.begin(), 0.0);
}

double sigma_d(double u, double rms_bandwidth, double c) {
    if (!(u > 0.0)) throw std::domain_error("sigma_d: amplitude must be positive");
    return c / (std::sqrt(8.0) * std::numbers::pi * rms_bandwidth * u);
}

double sigma_u(double u, int num_samples) { return std::sqrt(0.5 + u * u / (4.0 * num_samples)); }

double los_dist_lhf(double z_d, const Vec2& p, const Vec2& anchor, double u, double rms_bandwidth, double c) {
    const double sd = sigma_d(u, rms_bandwidth, c);
    const double e = (z_d - (p - anchor).norm()) / sd;
    return std::exp(-0.5 * e * e - kLogSqrt2Pi) / sd;
}

double los_ampl_lhf(double z_u, double u, double threshold, int num_samples, bool gaussian_approx) {
    if (z_u < threshold) return 0.0;
    const double su = sigma_u(u, num_samples);
    if (gaussian_approx) return pdf(TruncGaussian{u, su, threshold}, z_u);
    return pdf(TruncRice{su, u, threshold}, z_u);
}

double nlos_scale2(double z_d, const Vec2& p, const Vec2& anchor, const NlosZeta& zeta) {
    const double delta = z_d - (p - anchor).norm() - zeta.bias;
    return 0.5 * (zeta.dnr * zeta.dnr * dps_shape(delta, zeta.fall, zeta.rise) + 1.0);
}

double nlos_scale(double z_d, const Vec2& p, const Vec2& anchor, const NlosZeta& zeta) {
    return std::sqrt(nlos_scale2(z_d, p, anchor, zeta));
}

double nlos_ampl_lhf(double z_u, double z_d, const Vec2& p, const Vec2& anchor, const NlosZeta& zeta,
                     double threshold) {
    return pdf(TruncRayleigh{nlos_scale(z_d, p, anchor, zeta), threshold}, z_u);
}

Q0Result q0_norm(const Vec2& p, const Vec2& anchor, const NlosZeta& zeta, double threshold, double d_max,
                 int quad_points) {
    if (quad_points < 3) throw std::invalid_argument("q0_norm: need at least 3 support points");
    const double g2 = threshold * threshold;
    const double d_los = (p - anchor).norm();
    auto f = [&](double d) {
        const double s2 = 0.5 * (zeta.dnr * zeta.dnr * dps_shape(d - d_los - zeta.bias, zeta.fall, zeta.rise) + 1.0);
        return std::exp(-g2 / (2.0 * s2));
    };
    const double onset = std::max(d_los + zeta.bias, 1e-9);
    if (onset >= d_max) return {0.5 * d_max * (f(0.0) + f(d_max)), true};

    // d_0 = 0, d_1 = onset, then offsets from the onset log-spaced up to d_{K_T} = d_max
    const double span = d_max - onset;
    const double first = 2e-3 * span;
    double sum = 0.5 * onset * (f(0.0) + f(onset));
    double prev_d = onset, prev_f = f(onset);
    for (int k = 2; k <= quad_points; ++k) {
        const double d =
            (k == quad_points) ? d_max : onset + first * std::pow(span / first, static_cast<double>(k - 2) / (quad_points - 2));
        const double fd = f(d);
        sum += 0.5 * (d - prev_d) * (fd + prev_f);
        prev_d = d;
        prev_f = fd;
    }
    return {sum, false};
}

double nlos_dist_lhf(double z_d, const Vec2& p, const Vec2& anchor, const NlosZeta& zeta, double threshold,
                     double d_max, bool uniform_mode, int quad_points) {
    if (z_d < 0.0 || z_d > d_max) throw std::out_of_range("nlos_dist_lhf: distance outside [0, d_max]");
    if (uniform_mode) return 1.0 / d_max;
    const double s2 = nlos_scale2(z_d, p, anchor, zeta);
    return std::exp(-threshold * threshold / (2.0 * s2)) / q0_norm(p, anchor, zeta, threshold, d_max, quad_points).value;
}

double detection_prob(double u, double threshold, int num_samples) {
    const double su = sigma_u(u, num_samples);
    return marcum_q1(u / su, threshold / su);
}

double assoc_prior(int a, int num_meas, double u, double q, double threshold, int num_samples) {
    if (a < 0 || a > num_meas || !(q > 0.0 && q <= 1.0)) throw std::domain_error("assoc_prior: argument out of domain");
    const double pe = detection_prob(u, threshold, num_samples) * q;
    return a == 0 ? 1.0 - pe : pe / num_meas;
}

double LhfTerms::log_marginal(double q) const {
    const double x = q * pd;
    double tail;
    if (log_ratio_mean == -INFINITY) {
        tail = std::log1p(-x);
    } else if (log_ratio_mean > 0.0) {
        tail = log_ratio_mean + std::log(x + (1.0 - x) * std::exp(-log_ratio_mean));
    } else {
        tail = std::log1p(-x * (-std::expm1(log_ratio_mean)));
    }
    return log_nlos + tail;
}

namespace {

struct NlosLog {
    double amplitude;
    double distance;
};

// log NL_m split into its amplitude and distance factors
NlosLog nlos_log(const Measurement& m, double d_los, const AnchorState& y, double rise, const ModelConstants& k,
                 const LhfOptions& opt, double log_q0) {
    double s2 = 0.5;
    if (opt.nonuniform_nlos)
        s2 = 0.5 * (y.dnr * y.dnr * dps_shape(m.distance - d_los - y.bias, y.fall, rise) + 1.0);
    const double g2 = k.threshold * k.threshold;
    NlosLog out{};
    out.amplitude = std::log(m.amplitude / s2) - (m.amplitude * m.amplitude - g2) / (2.0 * s2);
    out.distance = opt.uniform_delay ? -std::log(k.d_max) : -g2 / (2.0 * s2) - log_q0;
    return out;
}

double los_log(const Measurement& m, double d_los, double u, double sd, double su, double log_amp_norm,
               const ModelConstants& k, const LhfOptions& opt) {
    const double e = (m.distance - d_los) / sd;
    const double ld = -0.5 * e * e - kLogSqrt2Pi - std::log(sd);
    double la;
    if (opt.gaussian_los_ampl) {
        const double ea = (m.amplitude - u) / su;
        la = -0.5 * ea * ea - log_amp_norm;
    } else {
        la = std::log(pdf(TruncRice{su, u, k.threshold}, m.amplitude));
    }
    return ld + la;
}

double log_q0_for(const Vec2& p, const Vec2& anchor, const AnchorState& y, double rise, const ModelConstants& k,
                  const LhfOptions& opt) {
    if (opt.uniform_delay) return 0.0;
    const NlosZeta zeta = opt.nonuniform_nlos ? zeta_of(y, rise) : NlosZeta{0.0, y.bias, y.fall, rise};
    return std::log(q0_norm(p, anchor, zeta, k.threshold, k.d_max, opt.quad_points).value);
}

}  // namespace

LhfTerms lhf_terms(std::span<const Measurement> z, const Vec2& p, const Vec2& anchor, const AnchorState& y,
                   double rise, const ModelConstants& k, const LhfOptions& opt) {
    LhfTerms t;
    const double u = y.amplitude;
    t.pd = detection_prob(u, k.threshold, k.num_samples);
    if (z.empty()) return t;

    const double d_los = (p - anchor).norm();
    const double su = sigma_u(u, k.num_samples);
    const bool los_possible = u > 1e-12;
    const double sd = los_possible ? sigma_d(u, k.rms_bandwidth, k.c) : 0.0;
    const double log_amp_norm = kLogSqrt2Pi + std::log(su * gauss_q((k.threshold - u) / su));
    const double log_q0 = log_q0_for(p, anchor, y, rise, k, opt);

    double max_lr = -INFINITY;
    thread_local std::vector<double> lr;
    lr.resize(z.size());
    for (std::size_t m = 0; m < z.size(); ++m) {
        const NlosLog nl = nlos_log(z[m], d_los, y, rise, k, opt, log_q0);
        const double lnl = nl.amplitude + nl.distance;
        t.log_nlos += lnl;
        lr[m] = los_possible ? los_log(z[m], d_los, u, sd, su, log_amp_norm, k, opt) - lnl : -INFINITY;
        max_lr = std::max(max_lr, lr[m]);
    }
    if (max_lr == -INFINITY) return t;
    double acc = 0.0;
    for (double v : lr) acc += std::exp(v - max_lr);
    t.log_ratio_mean = max_lr + std::log(acc / static_cast<double>(z.size()));
    return t;
}

double pseudo_lhf(std::span<const Measurement> z, const Vec2& p, const Vec2& anchor, const AnchorState& y, double rise,
                  int a, double q, const ModelConstants& k, const LhfOptions& opt) {
    const int m_count = static_cast<int>(z.size());
    const double h = assoc_prior(a, m_count, y.amplitude, q, k.threshold, k.num_samples);
    const NlosZeta zeta = opt.nonuniform_nlos ? zeta_of(y, rise) : NlosZeta{0.0, y.bias, y.fall, rise};
    double g = h;
    for (int m = 0; m < m_count; ++m) {
        const Measurement& zm = z[static_cast<std::size_t>(m)];
        if (m + 1 == a) {
            g *= los_dist_lhf(zm.distance, p, anchor, y.amplitude, k.rms_bandwidth, k.c) *
                 los_ampl_lhf(zm.amplitude, y.amplitude, k.threshold, k.num_samples, opt.gaussian_los_ampl);
        } else {
            g *= nlos_ampl_lhf(zm.amplitude, zm.distance, p, anchor, zeta, k.threshold) *
                 nlos_dist_lhf(zm.distance, p, anchor, zeta, k.threshold, k.d_max, opt.uniform_delay, opt.quad_points);
        }
    }
    return g;
}

}  // namespace mpath
