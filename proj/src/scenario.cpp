#include "mpath/scenario.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "mpath/mathdist.hpp"

namespace mpath {

namespace {

double db_to_amplitude_from_power(double db) { return std::sqrt(std::pow(10.0, db / 10.0)); }

Vec2 rotate(const Vec2& v, double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    return {c * v.x() - s * v.y(), s * v.x() + c * v.y()};
}

double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

std::vector<Segment> room_walls() {
    const Vec2 a(-5.0, -4.5), b(5.5, -4.5), c(5.5, 5.0), d(-5.0, 5.0);
    return {{a, b}, {b, c}, {c, d}, {d, a}};
}

std::vector<Vec2> default_anchors() { return {{-0.6, -0.3}, {0.0, 0.3}, {0.6, -0.3}}; }

TrajectorySpec default_trajectory() {
    TrajectorySpec t;
    t.waypoints = {{-2.62, -2.62}, {-2.62, 2.62}, {2.62, 2.62}, {2.62, -2.62}};
    return t;
}

}  // namespace

ScenarioConfig dense_scenario() {
    ScenarioConfig c;
    c.name = "dense";
    c.anchors = default_anchors();
    c.trajectory = default_trajectory();
    c.olos = {{75, 104, {1}}, {115, 144, {0, 1, 2}}};
    return c;
}

ScenarioConfig dense_dnr25_scenario() {
    ScenarioConfig c = dense_scenario();
    c.name = "dense_dnr25";
    c.truth.dnr_db = 25.0;
    return c;
}

ScenarioConfig geometric_scenario() {
    ScenarioConfig c;
    c.name = "geometric";
    c.anchors = default_anchors();
    c.trajectory = default_trajectory();
    c.mode = GenMode::geometric_ceda;
    c.walls = room_walls();
    c.walls.push_back({{-0.3, 1.5}, {1.6, 1.5}});  // W5
    c.realizations = 30;
    c.tracker.particles = 10000;
    return c;
}

FilletedPath::FilletedPath(const std::vector<Vec2>& wp, double radius) {
    if (wp.size() < 2) throw std::invalid_argument("FilletedPath: need at least two waypoints");
    Vec2 start = wp.front();
    for (std::size_t k = 1; k < wp.size(); ++k) {
        const Vec2 corner = wp[k];
        const Vec2 u1 = (corner - wp[k - 1]).normalized();
        Vec2 end = corner;
        if (k + 1 < wp.size() && radius > 0.0) {
            const Vec2 u2 = (wp[k + 1] - corner).normalized();
            const double theta = std::acos(std::clamp(u1.dot(u2), -1.0, 1.0));
            const double t = radius * std::tan(0.5 * theta);
            if (theta > 1e-9) {
                const Vec2 t1 = corner - t * u1;
                const double turn = cross(u1, u2) > 0.0 ? 1.0 : -1.0;
                const Vec2 normal = turn * Vec2(-u1.y(), u1.x());
                const Vec2 center = t1 + radius * normal;
                pieces_.push_back({false, start, u1, (t1 - start).norm(), 0.0, 0.0});
                pieces_.push_back({true, center, t1 - center, radius * theta, turn, radius});
                start = corner + t * u2;
                continue;
            }
        }
        pieces_.push_back({false, start, u1, (end - start).norm(), 0.0, 0.0});
        start = end;
    }
    for (const auto& p : pieces_) length_ += p.len;
}

Vec2 FilletedPath::at(double s) const {
    s = std::clamp(s, 0.0, length_);
    for (const auto& p : pieces_) {
        if (s <= p.len || &p == &pieces_.back()) {
            const double l = std::min(s, p.len);
            if (!p.arc) return p.a + l * p.dir;
            return p.a + rotate(p.dir, p.turn * l / p.radius);
        }
        s -= p.len;
    }
    return pieces_.back().a;
}

Truth make_truth(const ScenarioConfig& cfg) {
    if (cfg.steps < 1) throw std::invalid_argument("make_truth: need N >= 1");
    for (const auto& w : cfg.olos)
        if (w.first < 1 || w.last > cfg.steps || w.first > w.last) throw std::invalid_argument("OLOS window outside [1, N]");
    const FilletedPath path(cfg.trajectory.waypoints, cfg.trajectory.corner_radius);
    const auto& tr = cfg.trajectory;
    const double omega = 2.0 * std::numbers::pi / tr.speed_period;
    // arc length of v(t) = v0 (1 + a sin(omega t)); the agent stops at the end of the path
    if (!(tr.speed > 0.0)) throw std::invalid_argument("make_truth: speed must be positive");
    const double t_stop = path.length() / tr.speed;
    auto arc = [&](double t) { return std::min(t + tr.speed_variation / omega * (1.0 - std::cos(omega * t)), t_stop); };
    const double t_end = cfg.steps * cfg.dt;
    const double scale = tr.speed;

    Truth truth;
    const std::size_t nj = cfg.anchors.size();
    const double u_const_size = static_cast<double>(cfg.truth.snr_db.size());
    if (cfg.mode != GenMode::geometric_ceda && u_const_size != static_cast<double>(nj))
        throw std::invalid_argument("make_truth: one SNR value per anchor required");
    for (int n = 0; n <= cfg.steps; ++n) {
        const double t = n * cfg.dt;
        const Vec2 p = path.at(scale * arc(t));
        const double h = 1e-4;
        const double t_lo = std::max(t - h, 0.0), t_hi = std::min(t + h, t_end);
        const Vec2 v = (path.at(scale * arc(t_hi)) - path.at(scale * arc(t_lo))) / (t_hi - t_lo);
        truth.position.push_back(p);
        truth.velocity.push_back(v);
        std::vector<bool> vis(nj, true);
        std::vector<double> amp(nj);
        if (cfg.mode == GenMode::geometric_ceda) {
            for (std::size_t j = 0; j < nj; ++j) {
                vis[j] = !blocked(p, cfg.anchors[j], cfg.walls);
                const double d = (p - cfg.anchors[j]).norm();
                amp[j] = std::pow(10.0, cfg.path_loss.snr_ref_db / 20.0) * cfg.path_loss.ref_distance / d;
            }
        } else {
            for (std::size_t j = 0; j < nj; ++j) amp[j] = db_to_amplitude_from_power(cfg.truth.snr_db[j]);
            for (const auto& w : cfg.olos)
                if (n >= w.first && n <= w.last)
                    for (int j : w.anchors) vis.at(static_cast<std::size_t>(j)) = false;
        }
        truth.visible.push_back(std::move(vis));
        truth.amplitude.push_back(std::move(amp));
    }
    return truth;
}

TrackerConfig tracker_config(const ScenarioConfig& cfg, double rms_bandwidth) {
    TrackerConfig t;
    t.anchors = cfg.anchors;
    t.model.threshold = cfg.threshold;
    t.model.num_samples = cfg.signal.num_samples;
    t.model.rms_bandwidth = rms_bandwidth;
    t.model.c = cfg.signal.c;
    t.model.d_max = cfg.d_max();
    t.transition.accel_std = cfg.tracker.accel_std;
    t.transition.dt = cfg.dt;
    t.init.initial_particles = cfg.tracker.initial_particles;
    t.init.velocity_std = cfg.tracker.velocity_std;
    t.init.proposal = cfg.tracker.proposal;
    t.init.likelihood = cfg.tracker.likelihood;
    return t;
}

Rng measurement_rng(const ScenarioConfig& cfg, int realization, int n, int j) {
    return Rng(stream_seed({cfg.seed, 0x6d656173ULL, static_cast<std::uint64_t>(realization),
                            static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(j)}));
}

std::vector<Measurement> gen_fully_synthetic(const ScenarioConfig& cfg, const Truth& truth, int n, int j,
                                             double rms_bandwidth, Rng& rng) {
    const auto ni = static_cast<std::size_t>(n), ji = static_cast<std::size_t>(j);
    const Vec2& p = truth.position.at(ni);
    const Vec2& anchor = cfg.anchors.at(ji);
    const double d_los = (p - anchor).norm();
    const double d_max = cfg.d_max();
    const double g = cfg.threshold;
    const double w2 = std::pow(10.0, cfg.truth.dnr_db / 10.0);
    const int ns = cfg.signal.num_samples;

    std::vector<Measurement> z;
    const int k = cfg.poisson_count ? std::poisson_distribution<int>(ns)(rng) : ns;
    for (int c = 0; c < k; ++c) {
        const double d = d_max * uniform01(rng);
        const double s2 = 0.5 * (w2 * dps_shape(d - d_los - cfg.truth.bias, cfg.truth.fall, cfg.truth.rise) + 1.0);
        const double a = std::sqrt(-2.0 * s2 * std::log(uniform01(rng)));
        if (a >= g) z.push_back({d, a});
    }
    if (truth.visible[ni][ji] && uniform01(rng) < cfg.truth.los_prob) {
        const double u = truth.amplitude[ni][ji];
        const double a = sample_rice(u, sigma_u(u, ns), rng);
        const double d = d_los + sigma_d(u, rms_bandwidth, cfg.signal.c) * std_normal(rng);
        if (a >= g) z.push_back({std::clamp(d, 0.0, d_max), a});
    }
    std::shuffle(z.begin(), z.end(), rng);
    return z;
}

namespace {

CedaConfig ceda_config(const ScenarioConfig& cfg) {
    CedaConfig c;
    c.threshold = cfg.threshold;
    return c;
}

// sum_k (s^T s_k)^2 dd / |s|^2 over the dense delay grid, for a delay in the middle of the window
double dense_gain(const Pulse& pulse, const SignalConfig& sc) {
    const double tau0 = 0.5 * sc.max_delay();
    const Eigen::VectorXd s0 = s_vec(pulse, sc, tau0);
    const double dtau = sc.sample_interval / 4.0;
    double acc = 0.0;
    Eigen::VectorXd s(sc.num_samples);
    for (double tau = 0.0; tau <= sc.max_delay(); tau += dtau) {
        s_vec_into(pulse, sc, tau, s);
        const double x = s0.dot(s);
        acc += x * x;
    }
    return acc * sc.c * dtau / s0.squaredNorm();
}

}  // namespace

CedaPath::CedaPath(const ScenarioConfig& cfg)
    : cfg_(cfg),
      pulse_(cfg.rolloff, cfg.symbol_time, cfg.signal.sample_interval),
      ceda_(pulse_, cfg.signal, ceda_config(cfg)),
      dense_power_(std::pow(10.0, cfg.truth.dnr_db / 10.0) * cfg.noise_sigma * cfg.noise_sigma /
                   dense_gain(pulse_, cfg.signal)) {}

std::vector<Measurement> CedaPath::generate(const Truth& truth, int n, int j, Rng& rng) const {
    const auto ni = static_cast<std::size_t>(n), ji = static_cast<std::size_t>(j);
    const Vec2& p = truth.position.at(ni);
    const Vec2& anchor = cfg_.anchors.at(ji);
    const SignalConfig& sc = cfg_.signal;
    const double sigma = cfg_.noise_sigma;
    auto component = [&](double distance, double u) -> std::optional<PathComponent> {
        const double tau = distance / sc.c;
        if (tau > sc.max_delay()) return std::nullopt;
        const double norm = s_vec(pulse_, sc, tau).norm();
        const double phase = 2.0 * std::numbers::pi * uniform01(rng);
        return PathComponent{tau, std::polar(u * sigma / norm, phase)};
    };

    Snapshot snap;
    if (cfg_.mode == GenMode::stochastic_ceda) {
        std::optional<PathComponent> los;
        if (truth.visible[ni][ji] && uniform01(rng) < cfg_.truth.los_prob)
            los = component((p - anchor).norm(), truth.amplitude[ni][ji]);
        const DpsParams dense{dense_power_, cfg_.truth.rise, cfg_.truth.fall, cfg_.truth.bias};
        snap = synth_stochastic(pulse_, sc, los, dense, p, anchor, sigma, rng);
    } else if (cfg_.mode == GenMode::geometric_ceda) {
        const MirrorResult mr = mirror_mpcs(cfg_.walls, p, anchor, cfg_.max_order, cfg_.path_loss);
        std::vector<PathComponent> comps;
        for (const auto& gp : mr.paths)
            if (auto c = component(gp.distance, gp.amplitude)) comps.push_back(*c);
        snap = synth_deterministic(pulse_, sc, comps, sigma, rng);
    } else {
        throw std::logic_error("CedaPath: fully synthetic mode has no signal path");
    }
    return ceda_.estimate(snap.r, snap.sigma).measurements;
}

std::vector<MeasurementSet> generate_stream(const ScenarioConfig& cfg, const Truth& truth, int realization,
                                            double rms_bandwidth, const CedaPath* ceda) {
    const int nj = static_cast<int>(cfg.anchors.size());
    std::vector<MeasurementSet> z(static_cast<std::size_t>(cfg.steps + 1), MeasurementSet(static_cast<std::size_t>(nj)));
    for (int n = 0; n <= cfg.steps; ++n) {
        for (int j = 0; j < nj; ++j) {
            Rng rng = measurement_rng(cfg, realization, n, j);
            auto& out = z[static_cast<std::size_t>(n)][static_cast<std::size_t>(j)];
            if (cfg.mode == GenMode::fully_synthetic) {
                out = gen_fully_synthetic(cfg, truth, n, j, rms_bandwidth, rng);
            } else {
                if (!ceda) throw std::invalid_argument("generate_stream: signal mode needs a CedaPath");
                out = ceda->generate(truth, n, j, rng);
            }
        }
    }
    return z;
}

std::vector<BinEstimate> bin_based_estimates(std::span<const Measurement> nlos, double d_max, int bins, double threshold,
                                             double rice_ratio) {
    if (bins < 1) throw std::invalid_argument("bin_based_estimates: need at least one bin");
    const double width = d_max / bins;
    std::vector<std::vector<double>> amp(static_cast<std::size_t>(bins));
    for (const auto& m : nlos) {
        if (m.distance < 0.0 || m.distance > d_max) continue;
        const int k = std::min(static_cast<int>(m.distance / width), bins - 1);
        amp[static_cast<std::size_t>(k)].push_back(m.amplitude);
    }
    std::vector<BinEstimate> out;
    const double total = static_cast<double>(nlos.size());
    for (int k = 0; k < bins; ++k) {
        const auto& a = amp[static_cast<std::size_t>(k)];
        BinEstimate e{(k + 0.5) * width, std::nullopt, std::nullopt, total > 0 ? a.size() / total : 0.0, a.size()};
        if (!a.empty()) {
            try {
                const double s = ml_trunc_rayleigh_scale(a, threshold);
                e.rayleigh_scale2 = s * s;
            } catch (const std::domain_error&) {
            }
            const RiceScaleFit fit = ml_trunc_rice_scale(a, threshold, rice_ratio);
            e.rice_scale2 = fit.scale * fit.scale;
        }
        out.push_back(e);
    }
    return out;
}

bool track_lost(std::span<const double> sq_error, const VisibilitySchedule& visible, const ScenarioConfig& cfg) {
    int since_blackout = std::numeric_limits<int>::max() / 2;
    for (std::size_t n = 0; n < sq_error.size(); ++n) {
        const bool any = n < visible.size() && std::any_of(visible[n].begin(), visible[n].end(), [](bool b) { return b; });
        since_blackout = any ? since_blackout + 1 : 0;
        if (!any || since_blackout <= cfg.recovery_steps || static_cast<int>(n) < cfg.lost_after) continue;
        if (sq_error[n] > cfg.lost_error * cfg.lost_error) return true;
    }
    return false;
}

std::vector<double> aggregate_rmse(const std::vector<RealizationResult>& runs) {
    if (runs.empty()) return {};
    std::vector<double> acc(runs.front().sq_error.size(), 0.0);
    for (const auto& r : runs)
        for (std::size_t n = 0; n < acc.size(); ++n) acc[n] += r.sq_error.at(n);
    for (double& x : acc) x = std::sqrt(x / static_cast<double>(runs.size()));
    return acc;
}

namespace {

double segment_rmse(const RealizationResult& r, int first, int last) {
    double acc = 0.0;
    int cnt = 0;
    for (int n = std::max(first, 0); n <= last && n < static_cast<int>(r.sq_error.size()); ++n, ++cnt)
        acc += r.sq_error[static_cast<std::size_t>(n)];
    return cnt ? std::sqrt(acc / cnt) : 0.0;
}

double median(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace

std::vector<double> rmse_cdf(const std::vector<RealizationResult>& runs) {
    std::vector<double> v;
    for (const auto& r : runs) v.push_back(segment_rmse(r, 1, static_cast<int>(r.sq_error.size()) - 1));
    std::sort(v.begin(), v.end());
    return v;
}

double VariantResult::divergence_rate() const {
    if (runs.empty()) return 0.0;
    const auto lost = std::count_if(runs.begin(), runs.end(), [](const auto& r) { return r.lost; });
    return static_cast<double>(lost) / static_cast<double>(runs.size());
}

double VariantResult::median_track_rmse() const {
    std::vector<double> v;
    for (const auto& r : runs) v.push_back(segment_rmse(r, 1, static_cast<int>(r.sq_error.size()) - 1));
    return median(std::move(v));
}

double VariantResult::median_segment_rmse(int first, int last) const {
    std::vector<double> v;
    for (const auto& r : runs) v.push_back(segment_rmse(r, first, last));
    return median(std::move(v));
}

BoundCurves scenario_bounds(const ScenarioConfig& cfg, const Truth& truth, double rms_bandwidth) {
    MotionModel m;
    m.accel_std = cfg.tracker.accel_std;
    m.dt = cfg.dt;
    m.velocity_prior_std = cfg.tracker.velocity_std;
    return bound_curves(truth.amplitude, truth.position, cfg.anchors, truth.visible, rms_bandwidth, cfg.signal.c, m);
}

ExperimentResult run_experiment(const ScenarioConfig& cfg, const std::vector<FeatureFlags>& variants,
                                const ExperimentOptions& opt) {
    const Pulse pulse(cfg.rolloff, cfg.symbol_time, cfg.signal.sample_interval);
    const double beta = pulse.rms_bandwidth();
    ExperimentResult out;
    out.truth = make_truth(cfg);
    out.bounds = scenario_bounds(cfg, out.truth, beta);
    std::optional<CedaPath> ceda;
    if (cfg.mode != GenMode::fully_synthetic) ceda.emplace(cfg);

    TrackerConfig tcfg = tracker_config(cfg, beta);
    tcfg.threads = opt.threads;
    for (const auto& f : variants) out.variants.push_back({f, {}, {}, 0, 0.0});

    const int reals = opt.realizations.value_or(cfg.realizations);
    for (int r = 0; r < reals; ++r) {
        const auto z = generate_stream(cfg, out.truth, r, beta, ceda ? &*ceda : nullptr);
        for (auto& vr : out.variants) {
            try {
                const TrackResult tr =
                    run_track(z, tcfg, vr.flags, stream_seed({cfg.seed, 0x747261636bULL, static_cast<std::uint64_t>(r)}));
                RealizationResult rr;
                rr.realization = r;
                rr.zero_weights = tr.diverged;
                rr.lost = tr.diverged;
                double ms = 0.0;
                for (std::size_t n = 0; n < tr.steps.size(); ++n) {
                    const double e2 = (tr.steps[n].position - out.truth.position[n]).squaredNorm();
                    rr.sq_error.push_back(e2);
                    if (n > 0) ms += tr.steps[n].step_ms;
                }
                rr.lost = rr.lost || track_lost(rr.sq_error, out.truth.visible, cfg);
                rr.mean_step_ms = ms / std::max<std::size_t>(tr.steps.size() - 1, 1);
                if (opt.keep_estimates) rr.estimates = tr.steps;
                vr.runs.push_back(std::move(rr));
            } catch (const std::exception&) {
                ++vr.failures;
            }
        }
    }
    for (auto& vr : out.variants) {
        vr.rmse = aggregate_rmse(vr.runs);
        double ms = 0.0;
        for (const auto& r : vr.runs) ms += r.mean_step_ms;
        vr.mean_step_ms = vr.runs.empty() ? 0.0 : ms / static_cast<double>(vr.runs.size());
    }
    return out;
}

}  // namespace mpath
