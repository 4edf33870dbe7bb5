#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "mpath/measmodel.hpp"
#include "mpath/scenario.hpp"

using namespace mpath;

namespace {

double beta() {
    static const double b = make_rrc_pulse(0.6, 2e-9, 1.25e-9).rms_bandwidth();
    return b;
}

ScenarioConfig short_dense(int steps) {
    ScenarioConfig c = dense_scenario();
    c.steps = steps;
    c.olos.clear();
    c.tracker.particles = 300;
    return c;
}

}  // namespace

TEST_CASE("built-in scenarios") {
    const ScenarioConfig d = dense_scenario();
    CHECK(d.anchors.size() == 3);
    CHECK(d.steps == 190);
    CHECK(d.realizations == 50);
    CHECK(d.truth.dnr_db == 12.5);
    CHECK(d.mode == GenMode::fully_synthetic);
    const ScenarioConfig g = geometric_scenario();
    CHECK(g.mode == GenMode::geometric_ceda);
    CHECK(g.walls.size() == 5);
    CHECK(g.realizations == 30);
}

TEST_CASE("trajectory honors the waypoints and the speed band") {
    const ScenarioConfig cfg = dense_scenario();
    const Truth t = make_truth(cfg);
    REQUIRE(t.position.size() == 191);
    CHECK((t.position.front() - cfg.trajectory.waypoints.front()).norm() < 1e-9);
    CHECK((t.position.back() - cfg.trajectory.waypoints.back()).norm() < 0.01);
    const double mean_speed = cfg.trajectory.speed;
    double lo = 1e9, hi = 0;
    for (const auto& v : t.velocity) {
        lo = std::min(lo, v.norm());
        hi = std::max(hi, v.norm());
    }
    CHECK(lo >= mean_speed * 0.9 * 0.95);
    CHECK(hi <= mean_speed * 1.1 * 1.05);
    CHECK(hi / lo > 1.1);
    for (std::size_t n = 1; n < t.position.size(); ++n) CHECK((t.position[n] - t.position[n - 1]).norm() <= hi * cfg.dt * 1.01);
    for (const auto& p : t.position) {
        CHECK(std::abs(p.x()) <= 2.62 + 1e-9);
        CHECK(std::abs(p.y()) <= 2.62 + 1e-9);
    }
}

TEST_CASE("filleted path is continuous with the right length") {
    const FilletedPath square({{0, 0}, {0, 2}, {2, 2}}, 0.5);
    CHECK(square.length() == doctest::Approx(4 - 2 * 0.5 + 0.25 * std::numbers::pi));
    for (double s = 0; s < square.length(); s += 1e-3) CHECK((square.at(s + 1e-3) - square.at(s)).norm() <= 1e-3 + 1e-9);
    CHECK((square.at(square.length()) - Vec2(2, 2)).norm() < 1e-9);
}

TEST_CASE("OLOS schedule of the dense scenario") {
    const Truth t = make_truth(dense_scenario());
    CHECK(t.visible[74][1]);
    CHECK_FALSE(t.visible[75][1]);
    CHECK(t.visible[75][0]);
    CHECK_FALSE(t.visible[104][1]);
    CHECK(t.visible[105][1]);
    for (int n = 115; n <= 144; ++n)
        for (int j = 0; j < 3; ++j) CHECK_FALSE(t.visible[static_cast<std::size_t>(n)][static_cast<std::size_t>(j)]);
    CHECK(t.amplitude[0][1] == doctest::Approx(10.0));
    ScenarioConfig bad = dense_scenario();
    bad.olos.push_back({0, 3, {0}});
    CHECK_THROWS_AS(make_truth(bad), std::invalid_argument);
}

TEST_CASE("fully synthetic generator limits") {
    ScenarioConfig cfg = dense_scenario();
    const Truth truth = make_truth(cfg);
    cfg.threshold = 1e6;
    Rng rng(1);
    for (int k = 0; k < 50; ++k) CHECK(gen_fully_synthetic(cfg, truth, 3, 0, beta(), rng).empty());

    cfg = dense_scenario();
    cfg.truth.dnr_db = -400;
    cfg.truth.snr_db = {60, 60, 60};
    Truth strong = make_truth(cfg);
    const double d_los = (strong.position[3] - cfg.anchors[0]).norm();
    double nlos = 0;
    for (int k = 0; k < 500; ++k) {
        const auto z = gen_fully_synthetic(cfg, strong, 3, 0, beta(), rng);
        int near = 0;
        for (const auto& m : z)
            if (std::abs(m.distance - d_los) < 0.01 && m.amplitude > 100) ++near;
        CHECK(near == 1);
        nlos += static_cast<double>(z.size()) - 1;
    }
    CHECK(nlos / 500 == doctest::Approx(161 * std::exp(-1.77 * 1.77)).epsilon(0.05));
}

TEST_CASE("kept NLOS count matches the detection quadrature") {
    const ScenarioConfig cfg = dense_scenario();
    const Truth truth = make_truth(cfg);
    const int n = 130, j = 0;  // full OLOS: every measurement is NLOS
    REQUIRE_FALSE(truth.visible[n][j]);
    const Vec2 p = truth.position[n];
    const NlosZeta zeta{std::sqrt(std::pow(10.0, cfg.truth.dnr_db / 10)), cfg.truth.bias, cfg.truth.fall, cfg.truth.rise};
    auto keep = [&](double d) {
        return std::exp(-cfg.threshold * cfg.threshold / (2 * nlos_scale2(d, p, cfg.anchors[j], zeta)));
    };
    double integral = 0.0;
    for (double a = 0; a < cfg.d_max(); a += 0.5)
        integral += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(keep, a, std::min(a + 0.5, cfg.d_max()));
    const double expected = cfg.signal.num_samples * integral / cfg.d_max();
    double total = 0;
    for (int r = 0; r < 1000; ++r) {
        Rng rng = measurement_rng(cfg, r, n, j);
        total += static_cast<double>(gen_fully_synthetic(cfg, truth, n, j, beta(), rng).size());
    }
    CHECK(total / 1000 == doctest::Approx(expected).epsilon(0.05));
}

TEST_CASE("measurement streams are deterministic per seed") {
    ScenarioConfig cfg = short_dense(20);
    const Truth truth = make_truth(cfg);
    const auto a = generate_stream(cfg, truth, 3, beta());
    const auto b = generate_stream(cfg, truth, 3, beta());
    const auto c = generate_stream(cfg, truth, 4, beta());
    REQUIRE(a.size() == 21);
    bool same = true, differs = false;
    for (std::size_t n = 0; n < a.size(); ++n)
        for (std::size_t j = 0; j < 3; ++j) {
            same = same && a[n][j].size() == b[n][j].size() &&
                   std::equal(a[n][j].begin(), a[n][j].end(), b[n][j].begin(),
                              [](auto& x, auto& y) { return x.distance == y.distance && x.amplitude == y.amplitude; });
            differs = differs || a[n][j].size() != c[n][j].size();
        }
    CHECK(same);
    CHECK(differs);
    CHECK_THROWS_AS(generate_stream(geometric_scenario(), make_truth(geometric_scenario()), 0, beta()), std::invalid_argument);
}

TEST_CASE("bin based estimates") {
    const std::vector<Measurement> four{{1.0, 1.0}, {1.2, 1.0}, {1.4, 1.0}, {1.6, 1.0}};
    const auto one = bin_based_estimates(four, 2.0, 1, 0.0);
    REQUIRE(one.size() == 1);
    CHECK(*one[0].rayleigh_scale2 == doctest::Approx(0.5));
    CHECK(one[0].center == doctest::Approx(1.0));

    Rng rng(2);
    std::vector<Measurement> z;
    for (int k = 0; k < 500; ++k) z.push_back({uniform01(rng) * 30, 1.77 + uniform01(rng) * 3});
    const auto est = bin_based_estimates(z, 60.0, 20, 1.77);
    double f = 0.0;
    for (const auto& e : est) f += e.frequency;
    CHECK(f == doctest::Approx(1.0));
    CHECK_FALSE(est.back().rayleigh_scale2.has_value());
    CHECK(est.back().count == 0);
    CHECK(est.front().rice_scale2.has_value());
    CHECK_THROWS_AS(bin_based_estimates(z, 60.0, 0, 1.77), std::invalid_argument);
}

TEST_CASE("lost-track detector") {
    ScenarioConfig cfg = dense_scenario();
    VisibilitySchedule vis(40, std::vector<bool>{true, true, true});
    std::vector<double> sq(40, 0.01);
    CHECK_FALSE(track_lost(sq, vis, cfg));
    sq[5] = 4.0;  // before lost_after
    CHECK_FALSE(track_lost(sq, vis, cfg));
    sq[12] = 4.0;
    CHECK(track_lost(sq, vis, cfg));
    sq[12] = 0.01;
    for (int n = 15; n <= 20; ++n) vis[static_cast<std::size_t>(n)] = {false, false, false};
    sq[18] = 9.0;
    sq[28] = 4.0;  // within the recovery window
    CHECK_FALSE(track_lost(sq, vis, cfg));
    sq[31] = 4.0;
    CHECK(track_lost(sq, vis, cfg));
}

TEST_CASE("RMSE aggregation equals brute-force recomputation") {
    Rng rng(3);
    std::vector<RealizationResult> runs(7);
    for (auto& r : runs)
        for (int n = 0; n < 30; ++n) r.sq_error.push_back(std::pow(uniform01(rng), 2));
    const auto rmse = aggregate_rmse(runs);
    for (std::size_t n = 0; n < 30; ++n) {
        double acc = 0;
        for (const auto& r : runs) acc += r.sq_error[n];
        CHECK(rmse[n] == doctest::Approx(std::sqrt(acc / 7)).epsilon(1e-14));
    }
    const auto cdf = rmse_cdf(runs);
    CHECK(std::is_sorted(cdf.begin(), cdf.end()));
    CHECK(cdf.size() == 7);
    VariantResult v;
    v.runs = runs;
    std::vector<double> tr;
    for (const auto& r : runs) {
        double a = 0;
        for (std::size_t n = 1; n < 30; ++n) a += r.sq_error[n];
        tr.push_back(std::sqrt(a / 29));
    }
    std::sort(tr.begin(), tr.end());
    CHECK(v.median_track_rmse() == doctest::Approx(tr[3]));
    runs[2].lost = true;
    v.runs = runs;
    CHECK(v.divergence_rate() == doctest::Approx(1.0 / 7));
}

TEST_CASE("experiments are reproducible") {
    const ScenarioConfig cfg = short_dense(15);
    ExperimentOptions opt;
    opt.realizations = 2;
    const std::vector<FeatureFlags> variants{FeatureFlags::variant("AL5", 300), FeatureFlags::variant("AL1", 300)};
    const ExperimentResult a = run_experiment(cfg, variants, opt);
    const ExperimentResult b = run_experiment(cfg, variants, opt);
    REQUIRE(a.variants.size() == 2);
    for (std::size_t v = 0; v < 2; ++v) {
        CHECK(a.variants[v].failures == 0);
        REQUIRE(a.variants[v].runs.size() == 2);
        for (std::size_t r = 0; r < 2; ++r) CHECK(a.variants[v].runs[r].sq_error == b.variants[v].runs[r].sq_error);
        CHECK(a.variants[v].rmse == b.variants[v].rmse);
    }
    CHECK(a.bounds.p_crlb == b.bounds.p_crlb);
    CHECK(a.variants[0].rmse.back() < 0.5);
}

TEST_CASE("stochastic signal path in full OLOS has no LOS cluster") {
    ScenarioConfig cfg = dense_scenario();
    cfg.mode = GenMode::stochastic_ceda;
    const Truth truth = make_truth(cfg);
    const CedaPath path(cfg);
    const int n = 130;
    int near_blocked = 0, near_visible = 0;
    for (int r = 0; r < 40; ++r) {
        Rng a = measurement_rng(cfg, r, n, 0), b = measurement_rng(cfg, r, 20, 0);
        const double d_blocked = (truth.position[n] - cfg.anchors[0]).norm();
        const double d_visible = (truth.position[20] - cfg.anchors[0]).norm();
        for (const auto& m : path.generate(truth, n, 0, a)) near_blocked += std::abs(m.distance - d_blocked) < 0.1;
        for (const auto& m : path.generate(truth, 20, 0, b)) near_visible += std::abs(m.distance - d_visible) < 0.1;
    }
    CHECK(near_visible >= 38);
    // about 1/600 of the window per measurement, ~20 measurements per snapshot
    CHECK(near_blocked <= 5);
}

TEST_CASE("geometric signal path detects the visible strong paths") {
    const ScenarioConfig cfg = geometric_scenario();
    const Truth truth = make_truth(cfg);
    const CedaPath path(cfg);
    const int n = 20, j = 1;
    const MirrorResult mr = mirror_mpcs(cfg.walls, truth.position[n], cfg.anchors[j], cfg.max_order, cfg.path_loss);
    int strong = 0;
    for (const auto& g : mr.paths) strong += g.amplitude > 4.0;
    double total = 0;
    int found = 0;
    for (int r = 0; r < 20; ++r) {
        Rng rng = measurement_rng(cfg, r, n, j);
        const auto z = path.generate(truth, n, j, rng);
        total += static_cast<double>(z.size());
        for (const auto& g : mr.paths)
            if (g.amplitude > 4.0)
                found += std::any_of(z.begin(), z.end(), [&](auto& m) { return std::abs(m.distance - g.distance) < 0.1; });
    }
    CHECK(found >= static_cast<int>(0.9 * 20 * strong));
    CHECK(total / 20 >= strong);
    CHECK(total / 20 <= static_cast<double>(mr.paths.size()) + 20);
}
