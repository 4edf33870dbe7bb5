#include "mpath/mathdist.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace mpath {

namespace {

constexpr double kSeriesSwitch = 15.0;

double i0_series(double x) {
    const double q = 0.25 * x * x;
    double term = 1.0, sum = 1.0;
    for (int k = 1; k < 500; ++k) {
        term *= q / (static_cast<double>(k) * k);
        sum += term;
        if (term < 1e-17 * sum) break;
    }
    return sum;
}

// sum_k ((2k-1)!!)^2 / (k! 8^k x^k), stopped at the smallest term
double i0_asymptotic_sum(double x) {
    double term = 1.0, sum = 1.0;
    for (int k = 1; k < 200; ++k) {
        const double next = term * (2.0 * k - 1.0) * (2.0 * k - 1.0) / (8.0 * k * x);
        if (next >= term) break;
        term = next;
        sum += term;
        if (term < 1e-17 * sum) break;
    }
    return sum;
}

double log_i0(double x) {
    x = std::abs(x);
    return std::log(bessel_i0e(x)) + x;
}

// Scaled modified Bessel functions exp(-x) I_k(x), k = 0..kmax, by Miller's backward recurrence.
void scaled_bessel_i_sequence(double x, int kmax, std::vector<double>& out) {
    out.assign(static_cast<std::size_t>(kmax) + 1, 0.0);
    const int start = 2 * ((kmax + static_cast<int>(std::sqrt(40.0 * (kmax + 1)))) / 2) + 20;
    double next = 0.0, cur = 1e-300;
    for (int k = start; k >= 1; --k) {
        const double prev = (2.0 * k / x) * cur + next;
        next = cur;
        cur = prev;
        if (k - 1 <= kmax) out[static_cast<std::size_t>(k - 1)] = cur;
        if (std::abs(cur) > 1e250) {
            cur *= 1e-250;
            next *= 1e-250;
            for (int m = k - 1; m <= kmax; ++m) out[static_cast<std::size_t>(m)] *= 1e-250;
        }
    }
    const double norm = bessel_i0e(x) / out[0];
    for (auto& v : out) v *= norm;
}

double marcum_q1_quadrature(double a, double b) {
    auto rice = [a](double x) { return x * std::exp(-0.5 * (x - a) * (x - a)) * bessel_i0e(a * x); };
    if (b >= a) {
        const double hi = a + 40.0;
        if (b >= hi) return 0.0;
        return std::clamp(integrate(rice, b, hi, 1e-14), 0.0, 1.0);
    }
    const double lo = std::max(0.0, a - 40.0);
    if (b <= lo) return 1.0;
    return std::clamp(1.0 - integrate(rice, lo, b, 1e-14), 0.0, 1.0);
}

}  // namespace

double bessel_i0(double x) {
    x = std::abs(x);
    if (x < kSeriesSwitch) return i0_series(x);
    return std::exp(x) / std::sqrt(2.0 * std::numbers::pi * x) * i0_asymptotic_sum(x);
}

double bessel_i0e(double x) {
    x = std::abs(x);
    if (x < kSeriesSwitch) return std::exp(-x) * i0_series(x);
    return i0_asymptotic_sum(x) / std::sqrt(2.0 * std::numbers::pi * x);
}

double gauss_q(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

namespace {

// exp((a-b)^2/2) Q1(a, b) for 0 < a < b
double scaled_upper_tail(double a, double b) {
    if (a > 50.0 && b > 50.0) {
        auto rice = [a, b](double x) {
            return x * std::exp(-0.5 * ((x - a) * (x - a) - (b - a) * (b - a))) * bessel_i0e(a * x);
        };
        return integrate(rice, b, b + 40.0, 1e-14);
    }
    const double x = a * b;
    const int kmax = 30 + static_cast<int>(std::ceil(std::sqrt(80.0 * x)));
    thread_local std::vector<double> ik;
    scaled_bessel_i_sequence(x, kmax, ik);
    const double r = a / b;
    double rk = 1.0, sum = 0.0;
    for (int k = 0; k <= kmax; ++k) {
        const double t = rk * ik[static_cast<std::size_t>(k)];
        sum += t;
        if (t < 1e-14 * sum && k > 2) break;
        rk *= r;
    }
    return sum;
}

}  // namespace

double marcum_q1(double a, double b) {
    a = std::abs(a);
    b = std::abs(b);
    if (b == 0.0) return 1.0;
    if (a == 0.0) return std::exp(-0.5 * b * b);
    if (a > 50.0 && b > 50.0) return marcum_q1_quadrature(a, b);

    const double pre = std::exp(-0.5 * (a - b) * (a - b));
    if (pre == 0.0) return a < b ? 0.0 : 1.0;
    if (a < b) return std::clamp(pre * scaled_upper_tail(a, b), 0.0, 1.0);

    const double x = a * b;
    const int kmax = 30 + static_cast<int>(std::ceil(std::sqrt(80.0 * x)));
    thread_local std::vector<double> ik;
    scaled_bessel_i_sequence(x, kmax, ik);
    double sum = 0.0;
    const double r = b / a;
    double rk = r;
    for (int k = 1; k <= kmax; ++k) {
        const double t = rk * ik[static_cast<std::size_t>(k)];
        sum += t;
        if (t < 1e-14 * sum && k > 2) break;
        rk *= r;
    }
    return std::clamp(1.0 - pre * sum, 0.0, 1.0);
}

double log_marcum_q1(double a, double b) {
    a = std::abs(a);
    b = std::abs(b);
    if (b == 0.0) return 0.0;
    if (a == 0.0) return -0.5 * b * b;
    if (a < b) return -0.5 * (a - b) * (a - b) + std::log(scaled_upper_tail(a, b));
    return std::log(marcum_q1(a, b));
}

double pdf(const TruncRayleigh& d, double x) {
    if (!(d.scale > 0.0) || d.threshold < 0.0) throw std::invalid_argument("TruncRayleigh: invalid parameters");
    if (x < d.threshold) return 0.0;
    const double s2 = d.scale * d.scale;
    return x / s2 * std::exp(-(x * x - d.threshold * d.threshold) / (2.0 * s2));
}

double log_pdf(const TruncRayleigh& d, double x) {
    if (!(d.scale > 0.0) || d.threshold < 0.0) throw std::invalid_argument("TruncRayleigh: invalid parameters");
    if (x < d.threshold || x <= 0.0) return -INFINITY;
    const double s2 = d.scale * d.scale;
    return std::log(x / s2) - (x * x - d.threshold * d.threshold) / (2.0 * s2);
}

double pdf(const TruncRice& d, double x) {
    if (!(d.scale > 0.0) || d.noncentrality < 0.0 || d.threshold < 0.0)
        throw std::invalid_argument("TruncRice: invalid parameters");
    if (x < d.threshold) return 0.0;
    if (d.noncentrality == 0.0) return pdf(TruncRayleigh{d.scale, d.threshold}, x);
    const double s = d.scale, u = d.noncentrality, s2 = s * s;
    const double mass = marcum_q1(u / s, d.threshold / s);
    if (mass <= 0.0) return 0.0;
    const double z = x * u / s2;
    // exp(-(x^2+u^2)/2s^2) I0(xu/s^2) = exp(-(x-u)^2/2s^2) i0e(z)
    return x / s2 * std::exp(-(x - u) * (x - u) / (2.0 * s2)) * bessel_i0e(z) / mass;
}

double pdf(const TruncGaussian& d, double x) {
    if (!(d.stddev > 0.0)) throw std::invalid_argument("TruncGaussian: invalid parameters");
    if (x < d.threshold) return 0.0;
    const double z = (x - d.mean) / d.stddev;
    const double mass = gauss_q((d.threshold - d.mean) / d.stddev);
    return std::exp(-0.5 * z * z) / (std::sqrt(2.0 * std::numbers::pi) * d.stddev * mass);
}

double log_pdf(const TruncGaussian& d, double x) {
    if (!(d.stddev > 0.0)) throw std::invalid_argument("TruncGaussian: invalid parameters");
    if (x < d.threshold) return -INFINITY;
    const double z = (x - d.mean) / d.stddev;
    const double mass = gauss_q((d.threshold - d.mean) / d.stddev);
    return -0.5 * z * z - std::log(std::sqrt(2.0 * std::numbers::pi) * d.stddev * mass);
}

double sample(const TruncRayleigh& d, Rng& rng) {
    const double u = uniform01(rng);
    return std::sqrt(d.threshold * d.threshold - 2.0 * d.scale * d.scale * std::log(u));
}

double sample_rice(double noncentrality, double scale, Rng& rng) {
    const double re = noncentrality + scale * std_normal(rng);
    const double im = scale * std_normal(rng);
    return std::hypot(re, im);
}

double sample(const TruncRice& d, Rng& rng) {
    if (d.noncentrality == 0.0) return sample(TruncRayleigh{d.scale, d.threshold}, rng);
    const double a = d.noncentrality / d.scale;
    const double mass = marcum_q1(a, d.threshold / d.scale);
    if (mass >= 0.05) {
        for (;;) {
            const double x = sample_rice(d.noncentrality, d.scale, rng);
            if (x >= d.threshold) return x;
        }
    }
    // Inverse CDF of the conditional tail by bisection on Q1.
    const double target = (1.0 - uniform01(rng)) * mass;
    double lo = d.threshold, hi = d.threshold + d.scale;
    while (marcum_q1(a, hi / d.scale) > target) hi += 2.0 * (hi - d.threshold);
    for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        (marcum_q1(a, mid / d.scale) > target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

double sample(const TruncGaussian& d, Rng& rng) {
    const double a = (d.threshold - d.mean) / d.stddev;
    if (gauss_q(a) >= 0.1) {
        for (;;) {
            const double z = std_normal(rng);
            if (z >= a) return d.mean + d.stddev * z;
        }
    }
    // Exponential proposal for the far tail (a > 1.28 here).
    const double alpha = 0.5 * (a + std::sqrt(a * a + 4.0));
    for (;;) {
        const double z = a - std::log(uniform01(rng)) / alpha;
        if (uniform01(rng) <= std::exp(-0.5 * (z - alpha) * (z - alpha))) return d.mean + d.stddev * z;
    }
}

double ml_trunc_rayleigh_scale(std::span<const double> samples, double threshold) {
    double sum_sq = 0.0;
    std::size_t n = 0;
    for (double x : samples)
        if (x > threshold) {
            sum_sq += x * x;
            ++n;
        }
    if (n == 0) throw std::invalid_argument("ml_trunc_rayleigh_scale: no samples above threshold");
    const double s2 = sum_sq / (2.0 * static_cast<double>(n)) - 0.5 * threshold * threshold;
    if (!(s2 > 0.0)) throw std::domain_error("ml_trunc_rayleigh_scale: non-positive estimate");
    return std::sqrt(s2);
}

RiceScaleFit ml_trunc_rice_scale(std::span<const double> samples, double threshold, double ratio) {
    std::vector<double> xs;
    for (double x : samples)
        if (x >= threshold) xs.push_back(x);
    if (xs.empty()) throw std::invalid_argument("ml_trunc_rice_scale: no samples above threshold");

    double mean_sq = 0.0;
    for (double x : xs) mean_sq += x * x;
    mean_sq /= static_cast<double>(xs.size());
    const double ref = std::max(std::sqrt(mean_sq), threshold);

    auto loglik = [&](double s) -> double {
        const double u = ratio * s, s2 = s * s;
        double ll = -static_cast<double>(xs.size()) * log_marcum_q1(u / s, threshold / s);
        if (!std::isfinite(ll)) return -INFINITY;
        for (double x : xs) {
            if (x <= 0.0) return -INFINITY;
            ll += std::log(x / s2) - (x * x + u * u) / (2.0 * s2) + log_i0(x * u / s2);
        }
        return ll;
    };

    constexpr int grid = 80;
    const double lo = 1e-3 * ref, hi = 10.0 * ref;
    const double step = std::log(hi / lo) / (grid - 1);
    int best = 0;
    double best_ll = -INFINITY;
    for (int k = 0; k < grid; ++k) {
        const double ll = loglik(lo * std::exp(step * k));
        if (ll > best_ll) {
            best_ll = ll;
            best = k;
        }
    }
    if (best == 0 || best == grid - 1) return {lo * std::exp(step * best), true};

    // golden-section refinement inside the neighbouring grid cells (log scale)
    double a = std::log(lo) + step * (best - 1), b = std::log(lo) + step * (best + 1);
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = loglik(std::exp(c)), fd = loglik(std::exp(d));
    for (int it = 0; it < 40; ++it) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = loglik(std::exp(c));
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = loglik(std::exp(d));
        }
    }
    return {std::exp(0.5 * (a + b)), false};
}

}  // namespace mpath
