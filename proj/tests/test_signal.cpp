#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/LU>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "mpath/signal.hpp"

using namespace mpath;

namespace {

constexpr double kPi = std::numbers::pi;

template <class F>
double gk(F f, double a, double b) {
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-13);
}

// Raised-cosine spectrum |P(f)|^2 of the root-raised-cosine pulse.
double rc_spectrum(double f, double rolloff, double t) {
    const double af = std::abs(f), f1 = (1 - rolloff) / (2 * t), f2 = (1 + rolloff) / (2 * t);
    if (af <= f1) return 1.0;
    if (af >= f2) return 0.0;
    return 0.5 * (1 + std::cos(kPi * t / rolloff * (af - f1)));
}

// Normalized autocorrelation of the root-raised-cosine pulse (a raised-cosine pulse).
double rc_pulse(double lag, double rolloff, double t) {
    const double x = lag / t;
    const double sinc = std::abs(x) < 1e-12 ? 1.0 : std::sin(kPi * x) / (kPi * x);
    const double den = 1 - 4 * rolloff * rolloff * x * x;
    if (std::abs(den) < 1e-10) return kPi / 4 * sinc;
    return sinc * std::cos(kPi * rolloff * x) / den;
}

const Pulse& reference_pulse() {
    static const Pulse p = make_rrc_pulse(0.6, 2e-9, 1.25e-9);
    return p;
}

}  // namespace

TEST_CASE("sinc pulse zeros") {
    const Pulse p = make_rrc_pulse(0.0, 2e-9, 1e-9);
    CHECK(p(0.0) == doctest::Approx(1.0));
    for (int k = 1; k < 10; ++k) {
        CHECK(std::abs(p(k * 2e-9)) < 1e-12);
        CHECK(std::abs(p(-k * 2e-9)) < 1e-12);
    }
}

TEST_CASE("pulse peak, symmetry and singular points") {
    const Pulse& p = reference_pulse();
    CHECK(p(0.0) == doctest::Approx(1.0).epsilon(1e-14));
    const double ts = 2e-9 / (4 * 0.6);
    CHECK(std::isfinite(p(ts)));
    CHECK(std::isfinite(p(-ts)));
    CHECK(p(ts) == doctest::Approx(p(ts * (1 + 1e-7))).epsilon(1e-5));
    for (double t = 0.0; t < 2e-8; t += 1.7e-10) CHECK(p(t) == doctest::Approx(p(-t)).epsilon(1e-14));
    CHECK_THROWS_AS(make_rrc_pulse(1.2, 2e-9, 1e-9), std::invalid_argument);
    CHECK_THROWS_AS(make_rrc_pulse(0.5, 0.0, 1e-9), std::invalid_argument);
}

TEST_CASE("RMS bandwidth matches the raised-cosine spectrum") {
    const double t = 2e-9, b = 0.6, f2 = (1 + b) / (2 * t);
    const double num = gk([&](double f) { return f * f * rc_spectrum(f, b, t); }, 0.0, f2);
    const double den = gk([&](double f) { return rc_spectrum(f, b, t); }, 0.0, f2);
    const double beta = std::sqrt(num / den);
    CHECK(reference_pulse().rms_bandwidth() == doctest::Approx(beta).epsilon(0.005));
    CHECK(beta == doctest::Approx(158.4e6).epsilon(0.002));
}

TEST_CASE("signal vector grid and shifts") {
    const SignalConfig cfg;
    CHECK(cfg.d_max() == doctest::Approx(59.958).epsilon(1e-4));
    const Pulse& p = reference_pulse();
    const Eigen::VectorXd s0 = s_vec(p, cfg, 0.0);
    CHECK(s0[0] == doctest::Approx(1.0));
    for (int m : {1, 7, 40}) {
        const Eigen::VectorXd sm = s_vec(p, cfg, m * cfg.sample_interval);
        for (int k = m; k < cfg.num_samples; ++k) CHECK(std::abs(sm[k] - s0[k - m]) < 1e-12);
    }
    CHECK_THROWS_AS(s_vec(p, cfg, -1e-9), std::out_of_range);
    CHECK_THROWS_AS(s_vec(p, cfg, cfg.max_delay() + 1e-9), std::out_of_range);
}

TEST_CASE("signal vector autocorrelation matches the continuous pulse") {
    const SignalConfig cfg;
    const Pulse& p = reference_pulse();
    const double tau = 100e-9;
    const Eigen::VectorXd a = s_vec(p, cfg, tau);
    for (double lag : {0.1e-9, 0.4e-9, 1.0e-9, 2.3e-9, 5.0e-9}) {
        const Eigen::VectorXd b = s_vec(p, cfg, tau + lag);
        CHECK(std::abs(a.dot(b) / a.squaredNorm() - rc_pulse(lag, 0.6, 2e-9)) < 1e-6);
    }
}

TEST_CASE("signal vector energy is delay invariant away from edges") {
    const SignalConfig cfg;
    const Pulse& p = reference_pulse();
    const double ref = s_vec(p, cfg, 100e-9).norm();
    for (double tau = 30e-9; tau < 170e-9; tau += 0.37e-9) CHECK(std::abs(s_vec(p, cfg, tau).norm() / ref - 1) < 1e-3);
}

TEST_CASE("DPS shape and conservation") {
    const Vec2 agent(3.0, 4.0), anchor(0.0, 0.0);
    const DpsParams d{2.5, 0.7, 6.0, 0.7};
    CHECK(dps(5.0 + 0.7, agent, anchor, d) < 1e-12);
    CHECK(dps(5.0, agent, anchor, d) == 0.0);

    Rng rng(1);
    for (int k = 0; k < 100; ++k) {
        const DpsParams q{0.1 + 10 * uniform01(rng), 0.05 + 3 * uniform01(rng), 0.5 + 10 * uniform01(rng),
                          2 * uniform01(rng)};
        const double onset = 5.0 + q.bias;
        auto f = [&](double x) { return dps(onset + x, agent, anchor, q); };
        double total = 0.0;
        for (double a = 0.0; a < 80 * (q.fall + q.rise); a += q.rise + q.fall) total += gk(f, a, a + q.rise + q.fall);
        CHECK(total == doctest::Approx(q.power).epsilon(1e-6));
        const double om = 0.5 + uniform01(rng);
        const double x = onset + 3 * uniform01(rng);
        CHECK(normalized_dps(x, agent, anchor, q.bias, q.fall, q.rise) ==
              doctest::Approx(dps(x, agent, anchor, {om, q.rise, q.fall, q.bias}) / om));
    }
    CHECK_THROWS_AS(dps(1.0, agent, anchor, {-1.0, 1.0, 1.0, 0.0}), std::invalid_argument);
    CHECK_THROWS_AS(normalized_dps(1.0, agent, anchor, 0.0, 0.0, 1.0), std::invalid_argument);
}

TEST_CASE("DPS peak location") {
    for (auto [rise, fall] : {std::pair{0.7, 6.0}, std::pair{0.5, 6.0}, std::pair{2.0, 3.0}}) {
        double best = 0.0, arg = 0.0;
        for (double x = 1e-5; x < 20.0; x += 1e-5) {
            const double v = dps_shape(x, fall, rise);
            if (v > best) best = v, arg = x;
        }
        CHECK(arg == doctest::Approx(rise * std::log(1 + fall / rise)).epsilon(1e-4));
    }
}

TEST_CASE("DPS with vanishing rise is a single exponential") {
    const double fall = 6.0;
    for (double x : {0.5, 2.0, 9.0}) CHECK(dps_shape(x, fall, 1e-9) == doctest::Approx(std::exp(-x / fall) / fall).epsilon(1e-8));
}

TEST_CASE("deterministic synthesis") {
    const SignalConfig cfg;
    const Pulse& p = reference_pulse();
    Rng rng(3);
    const cplx alpha(0.3, -1.2);
    const Snapshot clean = synth_deterministic(p, cfg, {{40e-9, alpha}}, 0.0, rng);
    const Eigen::VectorXd s = s_vec(p, cfg, 40e-9);
    for (int k = 0; k < cfg.num_samples; ++k) CHECK(std::abs(clean.r[k] - alpha * s[k]) < 1e-15);

    double energy = 0.0;
    for (int d = 0; d < 100; ++d) energy += synth_deterministic(p, cfg, {}, 1.0, rng).r.squaredNorm() / cfg.num_samples;
    CHECK(energy / 100 == doctest::Approx(1.0).epsilon(0.05));

    const double t1 = 30e-9, t2 = t1 + 4 * 2e-9 * 4;
    const Snapshot two = synth_deterministic(p, cfg, {{t1, {8, 0}}, {t2, {0, 6}}}, 1.0, rng);
    std::vector<double> mf;
    std::vector<double> taus;
    for (double t = 0.0; t <= cfg.max_delay(); t += cfg.sample_interval / 8) {
        taus.push_back(t);
        mf.push_back(std::abs(s_vec(p, cfg, t).cast<cplx>().dot(two.r)));
    }
    auto peak_near = [&](double t0) {
        double best = -1, arg = 0;
        for (std::size_t i = 0; i < taus.size(); ++i)
            if (std::abs(taus[i] - t0) < 4e-9 && mf[i] > best) best = mf[i], arg = taus[i];
        return arg;
    };
    CHECK(std::abs(peak_near(t1) - t1) < cfg.sample_interval);
    CHECK(std::abs(peak_near(t2) - t2) < cfg.sample_interval);
    CHECK_THROWS_AS(synth_deterministic(p, cfg, {{-5e-9, {1, 0}}}, 1.0, rng), std::out_of_range);
}

TEST_CASE("stochastic synthesis without dense power equals deterministic synthesis") {
    const SignalConfig cfg;
    const Pulse& p = reference_pulse();
    Rng a(9), b(9);
    const PathComponent los{20e-9, {3, 1}};
    const Snapshot x = synth_stochastic(p, cfg, los, {0.0, 0.7, 6.0, 0.7}, {3, 0}, {0, 0}, 1.0, a);
    const Snapshot y = synth_deterministic(p, cfg, {los}, 1.0, b);
    CHECK((x.r - y.r).norm() == 0.0);
}

TEST_CASE("dense covariance matches the continuous integral") {
    SignalConfig cfg;
    cfg.num_samples = 61;
    const Pulse& p = reference_pulse();
    const DpsParams d{40.0, 0.7, 6.0, 0.7};
    const Vec2 agent(3, 0), anchor(0, 0);
    const Eigen::MatrixXd c = dense_covariance(p, cfg, d, agent, anchor, 1.0);
    for (auto [i, j] : {std::pair{15, 15}, std::pair{15, 17}, std::pair{20, 25}, std::pair{30, 30}}) {
        auto f = [&](double dist) {
            const double tau = dist / cfg.c;
            return dps(dist, agent, anchor, d) * p(i * cfg.sample_interval - tau) * p(j * cfg.sample_interval - tau);
        };
        double ref = i == j ? 1.0 : 0.0;
        const double onset = 3.7;
        for (double a = onset; a < cfg.d_max(); a += 0.5) ref += gk(f, a, std::min(a + 0.5, cfg.d_max()));
        CHECK(c(i, j) == doctest::Approx(ref).epsilon(0.01));
    }
}

TEST_CASE("stochastic synthesis covariance") {
    SignalConfig cfg;
    cfg.num_samples = 61;
    const Pulse& p = reference_pulse();
    const DpsParams d{400.0, 0.1, 0.4, 0.3};
    const Vec2 agent(3, 0), anchor(0, 0);
    const Eigen::MatrixXd c = dense_covariance(p, cfg, d, agent, anchor, 0.3);
    Rng rng(12);
    const int draws = 2000;
    Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(cfg.num_samples, cfg.num_samples);
    for (int k = 0; k < draws; ++k) {
        const Snapshot s = synth_stochastic(p, cfg, std::nullopt, d, agent, anchor, 0.3, rng);
        acc.noalias() += s.r * s.r.adjoint();
    }
    acc /= draws;
    CHECK((acc - c.cast<cplx>()).norm() / c.norm() < 0.05);
}

TEST_CASE("LOS amplitude calibration under a colored covariance") {
    SignalConfig cfg;
    cfg.num_samples = 61;
    const Pulse& p = reference_pulse();
    const Eigen::MatrixXd c = dense_covariance(p, cfg, {40.0, 0.7, 6.0, 0.7}, {3, 0}, {0, 0}, 1.0);
    const Eigen::VectorXd s = s_vec(p, cfg, 3.0 / cfg.c);
    const double a = calibrate_amplitude(s, c, 10.0);
    const double u2 = a * a * s.dot(c.fullPivLu().solve(s));
    CHECK(std::sqrt(u2) == doctest::Approx(10.0).epsilon(0.02));
}

TEST_CASE("mirror images against a single wall") {
    const Segment wall{{-20, 0}, {20, 0}};
    const Vec2 agent(2, 1), anchor(-2, 1);
    const MirrorResult r = mirror_mpcs({wall}, agent, anchor, 1);
    REQUIRE(r.los_visible);
    REQUIRE(r.paths.size() == 2);
    CHECK(r.paths[1].distance == doctest::Approx((agent - mirror(anchor, wall)).norm()));
    CHECK(r.paths[1].distance == doctest::Approx(std::sqrt(16.0 + 4.0)));
    CHECK(r.paths[0].amplitude == doctest::Approx(10.0 / 4.0));
    CHECK(r.paths[1].amplitude == doctest::Approx(10.0 / std::sqrt(20.0) * std::pow(10.0, -3.0 / 20)));

    const MirrorResult r0 = mirror_mpcs({wall}, agent, anchor, 0);
    CHECK(r0.paths.size() == 1);
    CHECK_THROWS_AS(mirror_mpcs({wall}, {0, 0}, anchor, 1), std::invalid_argument);
    CHECK_THROWS_AS(mirror_mpcs({wall}, agent, anchor, 4), std::invalid_argument);
}

TEST_CASE("obstacle blocks the LOS") {
    const std::vector<Segment> walls{{{0, -1}, {0, 1}}};
    const MirrorResult r = mirror_mpcs(walls, {1, 0}, {-1, 0}, 0);
    CHECK_FALSE(r.los_visible);
    CHECK(r.paths.empty());
}

TEST_CASE("image paths in a rectangular room match the unfolded lattice") {
    const double x0 = -5, x1 = 5.5, y0 = -4.5, y1 = 5;
    const std::vector<Segment> room{{{x0, y0}, {x1, y0}}, {{x1, y0}, {x1, y1}}, {{x1, y1}, {x0, y1}}, {{x0, y1}, {x0, y0}}};
    const Vec2 agent(2.1, -2.7), anchor(-0.6, -0.3);

    // images with i reflections along one axis of [lo, hi]
    auto axis_images = [](double a, double lo, double hi, int i) {
        const double l = hi - lo;
        std::vector<double> out;
        if (i == 0) return std::vector<double>{a};
        if (i % 2 == 0) {
            out = {a + i * l, a - i * l};
        } else {
            for (int k : {(1 + i) / 2, (1 - i) / 2}) out.push_back(2 * k * l + 2 * lo - a);
        }
        return out;
    };
    std::vector<std::pair<double, int>> expected;
    for (int order = 0; order <= 3; ++order)
        for (int i = 0; i <= order; ++i)
            for (double xi : axis_images(anchor.x(), x0, x1, i))
                for (double yi : axis_images(anchor.y(), y0, y1, order - i))
                    expected.emplace_back((agent - Vec2(xi, yi)).norm(), order);
    std::sort(expected.begin(), expected.end());

    const MirrorResult r = mirror_mpcs(room, agent, anchor, 3);
    std::vector<std::pair<double, int>> got;
    for (const auto& g : r.paths) {
        got.emplace_back(g.distance, g.order);
        CHECK(g.amplitude == doctest::Approx(10.0 / g.distance * std::pow(10.0, -0.15 * g.order)));
    }
    std::sort(got.begin(), got.end());
    REQUIRE(got.size() == expected.size());
    CHECK(got.size() == 25);
    for (std::size_t k = 0; k < got.size(); ++k) {
        CHECK(got[k].first == doctest::Approx(expected[k].first).epsilon(1e-12));
        CHECK(got[k].second == expected[k].second);
    }
}
