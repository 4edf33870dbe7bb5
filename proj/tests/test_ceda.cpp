#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mpath/ceda.hpp"

using namespace mpath;

namespace {

const Pulse& pulse() {
    static const Pulse p = make_rrc_pulse(0.6, 2e-9, 1.25e-9);
    return p;
}

cplx phasor(double phase) { return std::polar(1.0, phase); }

}  // namespace

TEST_CASE("u_ml of a constructed component") {
    const SignalConfig cfg;
    const double tau = 37.3e-9, sigma = 0.7, u = 4.2;
    const Eigen::VectorXd s = s_vec(pulse(), cfg, tau);
    const Eigen::VectorXcd r = (u * sigma / s.norm() * phasor(1.1)) * s.cast<cplx>();
    CHECK(u_ml(r, pulse(), cfg, tau, sigma) == doctest::Approx(u).epsilon(1e-12));

    // orthogonalize a random vector against s
    Rng rng(3);
    Eigen::VectorXcd w(cfg.num_samples);
    for (auto& x : w) x = cplx(std_normal(rng), std_normal(rng));
    const Eigen::VectorXcd sc = s.cast<cplx>();
    w -= sc * (sc.dot(w) / s.squaredNorm());
    CHECK(u_ml(w, pulse(), cfg, tau, sigma) < 1e-12);
    CHECK_THROWS_AS(u_ml(w, pulse(), cfg, tau, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(u_ml(w, pulse(), cfg, -1e-9, 1.0), std::out_of_range);
}

TEST_CASE("u_ml on noise has unit mean square") {
    const SignalConfig cfg;
    Rng rng(17);
    double acc = 0.0;
    const int draws = 10000;
    for (int k = 0; k < draws; ++k) {
        const Snapshot n = synth_deterministic(pulse(), cfg, {}, 1.3, rng);
        const double v = u_ml(n.r, pulse(), cfg, 80e-9, 1.3);
        acc += v * v;
    }
    CHECK(acc / draws == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("noiseless single component is recovered") {
    const SignalConfig cfg;
    CedaConfig cc;
    cc.sigma_floor = 1e-3;
    const double tau = 52 * cfg.sample_interval;
    const Eigen::VectorXd s = s_vec(pulse(), cfg, tau);
    const double u = 25.0;
    Snapshot snap{(u * cc.sigma_floor / s.norm() * phasor(0.4)) * s.cast<cplx>(), 0.0};
    const CedaResult res = estimate_snapshot(snap, pulse(), cfg, cc);
    REQUIRE(res.measurements.size() == 1);
    CHECK(std::abs(res.measurements[0].distance / cfg.c - tau) < cfg.sample_interval / 10);
    CHECK(res.measurements[0].amplitude == doctest::Approx(u).epsilon(0.01));
    CHECK_FALSE(res.truncated);
}

TEST_CASE("two separated components are both recovered") {
    const SignalConfig cfg;
    const CedaConfig cc;
    Rng rng(5);
    const double t1 = 40.4e-9, t2 = t1 + 8 * cfg.sample_interval;
    for (int rep = 0; rep < 20; ++rep) {
        const double u1 = std::pow(10.0, 30.0 / 20), u2 = std::pow(10.0, 20.0 / 20);
        const double n1 = s_vec(pulse(), cfg, t1).norm(), n2 = s_vec(pulse(), cfg, t2).norm();
        const Snapshot snap = synth_deterministic(
            pulse(), cfg, {{t1, u1 / n1 * phasor(0.3 * rep)}, {t2, u2 / n2 * phasor(1.0 + rep)}}, 1.0, rng);
        const CedaResult res = estimate_snapshot(snap, pulse(), cfg, cc);
        REQUIRE(res.measurements.size() >= 2);
        auto nearest = [&](double t) {
            double best = 1e9;
            for (const auto& m : res.measurements) best = std::min(best, std::abs(m.distance / cfg.c - t));
            return best;
        };
        CHECK(nearest(t1) < cfg.sample_interval / 4);
        CHECK(nearest(t2) < cfg.sample_interval / 4);
        CHECK(res.measurements[0].distance / cfg.c == doctest::Approx(t1).epsilon(0.01));
    }
}

TEST_CASE("residual energy is non-increasing over iterations") {
    const SignalConfig cfg;
    Rng rng(23);
    const Snapshot snap = synth_stochastic(pulse(), cfg, PathComponent{20e-9, {6, 2}}, {30.0, 0.7, 6.0, 0.7}, {6, 0},
                                           {0, 0}, 1.0, rng);
    double prev = snap.r.squaredNorm();
    for (int k = 1; k <= 15; ++k) {
        CedaConfig cc;
        cc.max_components = k;
        const CedaResult res = estimate_snapshot(snap, pulse(), cfg, cc);
        const double e = res.residual.squaredNorm();
        CHECK(e <= prev * (1 + 1e-12));
        prev = e;
    }
}

TEST_CASE("decomposition resynthesizes the snapshot") {
    const SignalConfig cfg;
    Rng rng(29);
    const Snapshot snap = synth_stochastic(pulse(), cfg, PathComponent{15e-9, {8, -3}}, {30.0, 0.7, 6.0, 0.7}, {4.5, 0},
                                           {0, 0}, 1.0, rng);
    const CedaResult res = estimate_snapshot(snap, pulse(), cfg, {});
    Eigen::VectorXcd rebuilt = res.residual;
    for (std::size_t k = 0; k < res.delays.size(); ++k)
        rebuilt += res.amplitudes[k] * s_vec(pulse(), cfg, res.delays[k]).cast<cplx>();
    CHECK((rebuilt - snap.r).norm() <= 1e-12 * snap.r.norm());
}

TEST_CASE("measurements satisfy the output contract") {
    const SignalConfig cfg;
    const CedaConfig cc;
    Rng rng(31);
    for (int rep = 0; rep < 30; ++rep) {
        const Snapshot snap = synth_stochastic(pulse(), cfg, PathComponent{25e-9, {7, 0}}, {30.0, 0.7, 6.0, 0.7},
                                               {7.5, 0}, {0, 0}, 1.0, rng);
        const CedaResult res = estimate_snapshot(snap, pulse(), cfg, cc);
        CHECK(res.amplitudes.size() == res.delays.size());
        for (const auto& m : res.measurements) {
            CHECK(m.amplitude >= cc.threshold);
            CHECK(m.distance >= 0.0);
            CHECK(m.distance <= cfg.d_max() + 1e-9);
        }
    }
}

TEST_CASE("component safeguard flags truncation") {
    const SignalConfig cfg;
    CedaConfig cc;
    cc.max_components = 2;
    Rng rng(2);
    std::vector<PathComponent> comps;
    for (int k = 0; k < 6; ++k) comps.push_back({(20 + 15 * k) * 1e-9, {10, 0}});
    const CedaResult res = estimate_snapshot(synth_deterministic(pulse(), cfg, comps, 1.0, rng), pulse(), cfg, cc);
    CHECK(res.truncated);
    CHECK(res.delays.size() == 2);
}

TEST_CASE("residual noise estimate mode runs and stays calibrated on strong signals") {
    const SignalConfig cfg;
    CedaConfig cc;
    cc.noise = NoiseEstimate::residual;
    Rng rng(4);
    const Snapshot snap = synth_deterministic(pulse(), cfg, {{30e-9, {20, 0}}}, 1.0, rng);
    const CedaResult res = estimate_snapshot(snap, pulse(), cfg, cc);
    REQUIRE_FALSE(res.measurements.empty());
    CHECK(res.measurements[0].distance / cfg.c == doctest::Approx(30e-9).epsilon(0.01));
    CHECK(res.sigma_hat > 0.2);
    CHECK(res.sigma_hat < 1.2);
}

TEST_CASE("noise-only snapshots at huge sigma match noise statistics") {
    const SignalConfig cfg;
    const CedaConfig cc;
    Rng a(8), b(8);
    double count_big = 0, count_noise = 0;
    for (int k = 0; k < 40; ++k) {
        const Snapshot big = synth_deterministic(pulse(), cfg, {{30e-9, {1, 0}}}, 1e6, a);
        const Snapshot noise = synth_deterministic(pulse(), cfg, {}, 1e6, b);
        count_big += static_cast<double>(estimate_snapshot(big, pulse(), cfg, cc).measurements.size());
        count_noise += static_cast<double>(estimate_snapshot(noise, pulse(), cfg, cc).measurements.size());
    }
    CHECK(count_big == doctest::Approx(count_noise).epsilon(0.05));
}
