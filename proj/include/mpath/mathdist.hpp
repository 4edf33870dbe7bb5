#pragma once

#include <span>

#include "mpath/rng.hpp"

namespace mpath {

struct TruncRayleigh {
    double scale;
    double threshold;
};

struct TruncRice {
    double scale;
    double noncentrality;
    double threshold;
};

struct TruncGaussian {
    double mean;
    double stddev;
    double threshold;
};

double bessel_i0(double x);
// exp(-|x|) * I0(x)
double bessel_i0e(double x);

double marcum_q1(double a, double b);
// log Q1(a, b) without underflow in the far tail.
double log_marcum_q1(double a, double b);

// Upper tail of the standard normal.
double gauss_q(double x);

double pdf(const TruncRayleigh& d, double x);
double pdf(const TruncRice& d, double x);
double pdf(const TruncGaussian& d, double x);

double log_pdf(const TruncRayleigh& d, double x);
double log_pdf(const TruncGaussian& d, double x);

double sample(const TruncRayleigh& d, Rng& rng);
double sample(const TruncRice& d, Rng& rng);
double sample(const TruncGaussian& d, Rng& rng);

// Untruncated Rice(u, s) draw: |u + s (n1 + i n2)|.
double sample_rice(double noncentrality, double scale, Rng& rng);

double ml_trunc_rayleigh_scale(std::span<const double> samples, double threshold);

struct RiceScaleFit {
    double scale;
    bool low_confidence;
};

// Grid-search ML fit of TruncRice(x; s, u = ratio*s, threshold).
RiceScaleFit ml_trunc_rice_scale(std::span<const double> samples, double threshold,
                                 double ratio = 1.0);

// Adaptive Simpson on [a, b]; used where a deterministic integral is part of the model.
template <class F>
double integrate(F&& f, double a, double b, double tol = 1e-12, int max_depth = 50);

}  // namespace mpath

#include "mpath/detail/integrate.hpp"
