#include "mpath/tracker.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "mpath/mathdist.hpp"

namespace mpath {

namespace {

constexpr double kTiny = 1e-9;

double reflect(double x, double upper) {
    x = std::abs(x);
    if (x > upper) x = std::max(2.0 * upper - x, 0.0);
    return x;
}

double log_sum_exp(std::span<const double> v) {
    double m = -INFINITY;
    for (double x : v) m = std::max(m, x);
    if (!std::isfinite(m)) return m;
    double acc = 0.0;
    for (double x : v) acc += std::exp(x - m);
    return m + std::log(acc);
}

// Normalizes log-weights into w; returns false if every weight is zero or non-finite.
bool normalize_log(std::span<const double> lw, std::vector<double>& w) {
    const double lse = log_sum_exp(lw);
    if (!std::isfinite(lse)) return false;
    w.resize(lw.size());
    for (std::size_t i = 0; i < lw.size(); ++i) w[i] = std::exp(lw[i] - lse);
    return true;
}

double ess_of(std::span<const double> w) {
    double s = 0.0, s2 = 0.0;
    for (double x : w) {
        s += x;
        s2 += x * x;
    }
    return s2 > 0.0 ? s * s / s2 : 0.0;
}

template <class T>
void gather(std::vector<T>& v, const std::vector<std::size_t>& idx) {
    std::vector<T> out(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) out[k] = v[idx[k]];
    v = std::move(out);
}

LhfOptions options_for(const TrackerConfig& cfg, const FeatureFlags& flags) {
    LhfOptions opt;
    opt.nonuniform_nlos = flags.nonuniform_nlos;
    opt.uniform_delay = flags.uniform_delay;
    opt.gaussian_los_ampl = cfg.gaussian_los_ampl;
    opt.quad_points = cfg.quad_points;
    return opt;
}

}  // namespace

Eigen::MatrixXd TransitionConfig::default_q_transition() {
    Eigen::MatrixXd q = Eigen::MatrixXd::Zero(4, 4);
    q(0, 0) = 0.9;
    q(1, 0) = 0.1;
    for (int k = 1; k <= 2; ++k) {
        q(k, k) = 0.85;
        q(k - 1, k) = 0.05;
        q(k + 1, k) = 0.1;
    }
    q(3, 3) = 0.95;
    q(2, 3) = 0.05;
    return q;
}

FeatureFlags FeatureFlags::variant(const std::string& name, int base_particles, int large_particles) {
    FeatureFlags f;
    f.particles = base_particles;
    if (name == "AL1") {
        f.track_q = f.nonuniform_nlos = f.decoupled = false;
    } else if (name == "AL2") {
        f.track_q = false;
    } else if (name == "AL3") {
        f.nonuniform_nlos = false;
    } else if (name == "AL4") {
        f.decoupled = false;
    } else if (name == "AL5") {
    } else if (name == "AL4'" || name == "AL4p") {
        f.decoupled = false;
        f.particles = large_particles;
    } else if (name == "AL5'" || name == "AL5p") {
        f.particles = large_particles;
    } else {
        throw std::invalid_argument("unknown variant: " + name);
    }
    f.name = name;
    if (f.name.back() == 'p') f.name.back() = '\'';
    return f;
}

void ParticleSet::resize(std::size_t n) {
    for (auto* v : {&px, &py, &vx, &vy, &rise, &weight}) v->resize(n);
    for (auto& a : anchors)
        for (auto* v : {&a.amplitude, &a.dnr, &a.bias, &a.fall, &a.weight}) v->resize(n);
}

AnchorState ParticleSet::anchor_state(std::size_t j, std::size_t i) const {
    const auto& a = anchors[j];
    return {a.amplitude[i], a.dnr[i], a.bias[i], a.fall[i]};
}

void predict(ParticleSet& ps, const TransitionConfig& cfg, const StepEstimate& prev, double d_max, double threshold,
             Rng& rng) {
    if (!(cfg.accel_std >= 0.0)) throw std::invalid_argument("predict: negative acceleration std");
    const double dt = cfg.dt;
    const std::size_t n = ps.size();
    const double len_floor = cfg.std_floor * d_max;
    const double amp_floor = cfg.std_floor * threshold;
    auto stv = [](double rel, double est, double floor) { return rel > 0.0 ? std::max(rel * std::abs(est), floor) : 0.0; };

    const double s_rise = stv(cfg.rel_std_rise, prev.rise, len_floor);
    for (std::size_t i = 0; i < n; ++i) {
        const double ax = cfg.accel_std * std_normal(rng);
        const double ay = cfg.accel_std * std_normal(rng);
        ps.px[i] += ps.vx[i] * dt + 0.5 * dt * dt * ax;
        ps.py[i] += ps.vy[i] * dt + 0.5 * dt * dt * ay;
        ps.vx[i] += dt * ax;
        ps.vy[i] += dt * ay;
        ps.rise[i] = std::max(reflect(ps.rise[i] + s_rise * std_normal(rng), d_max), kTiny);
    }
    for (std::size_t j = 0; j < ps.anchors.size(); ++j) {
        auto& a = ps.anchors[j];
        const AnchorEstimate& e = prev.anchors.at(j);
        const double su = stv(cfg.rel_std_amplitude, e.amplitude, amp_floor);
        const double sw = stv(cfg.rel_std_dnr, e.dnr, amp_floor);
        const double sb = stv(cfg.rel_std_bias, e.bias, len_floor);
        const double sf = stv(cfg.rel_std_fall, e.fall, len_floor);
        for (std::size_t i = 0; i < n; ++i) {
            a.amplitude[i] = std::abs(a.amplitude[i] + su * std_normal(rng));
            a.dnr[i] = std::abs(a.dnr[i] + sw * std_normal(rng));
            a.bias[i] = reflect(a.bias[i] + sb * std_normal(rng), d_max);
            a.fall[i] = std::max(reflect(a.fall[i] + sf * std_normal(rng), d_max), kTiny);
        }
        LosPmf& pmf = ps.pmf[j];
        if (pmf.support.size() == static_cast<std::size_t>(cfg.q_transition.rows())) {
            const Eigen::VectorXd w = cfg.q_transition * Eigen::Map<const Eigen::VectorXd>(pmf.weights.data(),
                                                                                          static_cast<Eigen::Index>(pmf.weights.size()));
            pmf.weights.assign(w.data(), w.data() + w.size());
        }
    }
}

UpdateResult apply_update(ParticleSet& ps, const KernelOutput& lhf, const FeatureFlags& flags) {
    const std::size_t n = ps.size();
    const std::size_t nj = ps.anchors.size();
    UpdateResult res;

    std::vector<double> log_wx(n);
    std::vector<std::vector<double>> log_wy(nj, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) log_wx[i] = std::log(ps.weight[i]);
    for (std::size_t j = 0; j < nj; ++j)
        for (std::size_t i = 0; i < n; ++i) log_wy[j][i] = std::log(ps.anchors[j].weight[i]);

    // joint (agent) log-weights: w_x * prod_j w_y^(j) * l^(j)
    std::vector<double> joint(log_wx);
    for (std::size_t j = 0; j < nj; ++j)
        for (std::size_t i = 0; i < n; ++i) joint[i] += log_wy[j][i] + lhf[j][i];

    std::vector<double> wx;
    if (!normalize_log(joint, wx)) {
        res.zero_weights = true;
        res.ess = 0.0;
        return res;
    }
    res.ess = ess_of(wx);

    std::vector<double> buf(n);
    for (std::size_t j = 0; j < nj; ++j) {
        // chi^(j): agent message excluding anchor j's own factor
        std::vector<double> chi(n);
        for (std::size_t i = 0; i < n; ++i) {
            chi[i] = log_wx[i];
            if (flags.decoupled) continue;
            for (std::size_t jj = 0; jj < nj; ++jj)
                if (jj != j) chi[i] += log_wy[jj][i] + lhf[jj][i];
        }

        for (std::size_t i = 0; i < n; ++i) buf[i] = log_wy[j][i] + chi[i] + lhf[j][i];
        std::vector<double> wy;
        if (normalize_log(buf, wy)) ps.anchors[j].weight = std::move(wy);

        LosPmf& pmf = ps.pmf[j];
        const std::size_t nq = pmf.support.size();
        if (nq > 1 && lhf[j].size() >= (nq + 1) * n) {
            std::vector<double> log_post(nq);
            for (std::size_t qi = 0; qi < nq; ++qi) {
                const double* m = lhf[j].data() + (qi + 1) * n;
                for (std::size_t i = 0; i < n; ++i) buf[i] = chi[i] + log_wy[j][i] + m[i];
                log_post[qi] = std::log(pmf.weights[qi]) + log_sum_exp(buf);
            }
            std::vector<double> w;
            if (normalize_log(log_post, w)) pmf.weights = std::move(w);
        }
    }
    ps.weight = std::move(wx);
    return res;
}

StepEstimate beliefs_and_mmse(const ParticleSet& ps) {
    StepEstimate e;
    const std::size_t n = ps.size();
    double sw = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double w = ps.weight[i];
        sw += w;
        e.position += w * Vec2(ps.px[i], ps.py[i]);
        e.velocity += w * Vec2(ps.vx[i], ps.vy[i]);
        e.rise += w * ps.rise[i];
    }
    if (sw > 0.0) {
        e.position /= sw;
        e.velocity /= sw;
        e.rise /= sw;
    }
    e.ess = ess_of(ps.weight);
    e.low_ess = e.ess < 2.0;
    for (std::size_t j = 0; j < ps.anchors.size(); ++j) {
        const auto& a = ps.anchors[j];
        AnchorEstimate ae{0.0, 0.0, 0.0, 0.0, ps.pmf[j].mean()};
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double w = a.weight[i];
            s += w;
            ae.amplitude += w * a.amplitude[i];
            ae.dnr += w * a.dnr[i];
            ae.bias += w * a.bias[i];
            ae.fall += w * a.fall[i];
        }
        if (s > 0.0) {
            ae.amplitude /= s;
            ae.dnr /= s;
            ae.bias /= s;
            ae.fall /= s;
        }
        e.anchors.push_back(ae);
    }
    return e;
}

std::vector<std::size_t> systematic_indices(std::span<const double> w, std::size_t count, double u0) {
    if (w.empty()) throw std::invalid_argument("systematic_indices: empty weights");
    double total = 0.0;
    for (double x : w) total += x;
    std::vector<std::size_t> idx(count);
    std::size_t i = 0;
    double cum = w[0] / total;
    for (std::size_t k = 0; k < count; ++k) {
        const double u = (u0 + static_cast<double>(k)) / static_cast<double>(count);
        while (cum < u && i + 1 < w.size()) cum += w[++i] / total;
        idx[k] = i;
    }
    return idx;
}

void resample(ParticleSet& ps, std::size_t count, Rng& rng) {
    const double u0 = uniform01(rng);
    const auto ix = systematic_indices(ps.weight, count, u0);
    for (auto* v : {&ps.px, &ps.py, &ps.vx, &ps.vy, &ps.rise}) gather(*v, ix);
    ps.weight.assign(count, 1.0 / static_cast<double>(count));
    for (auto& a : ps.anchors) {
        const auto iy = systematic_indices(a.weight, count, u0);
        for (auto* v : {&a.amplitude, &a.dnr, &a.bias, &a.fall}) gather(*v, iy);
        a.weight.assign(count, 1.0 / static_cast<double>(count));
    }
}

double dnr_init(std::span<const Measurement> z, double threshold, double d_max, double floor) {
    if (z.empty()) throw std::invalid_argument("dnr_init: empty measurement set");
    const auto strongest = std::max_element(z.begin(), z.end(), [](const auto& a, const auto& b) {
        return a.amplitude < b.amplitude;
    });
    const std::size_t m = z.size() - 1;
    const int bins = 2 + static_cast<int>(m / 3);
    std::vector<std::vector<double>> amp(static_cast<std::size_t>(bins));
    for (auto it = z.begin(); it != z.end(); ++it) {
        if (it == strongest) continue;
        const int k = std::clamp(static_cast<int>(it->distance / d_max * bins), 0, bins - 1);
        amp[static_cast<std::size_t>(k)].push_back(it->amplitude);
    }
    double sum_s2 = 0.0;
    for (const auto& b : amp) {
        double s2 = 0.5;
        if (!b.empty()) {
            try {
                const double s = ml_trunc_rayleigh_scale(b, threshold);
                s2 = std::max(s * s, 0.5);
            } catch (const std::domain_error&) {
            }
        }
        sum_s2 += s2;
    }
    const double w2 = 2.0 * (d_max / bins) * sum_s2 - d_max;
    return std::max(std::sqrt(std::max(w2, 0.0)), floor);
}

ParticleSet initialize(const MeasurementSet& z0, const TrackerConfig& cfg, const FeatureFlags& flags, Rng& rng) {
    const std::size_t nj = cfg.anchors.size();
    if (z0.size() != nj) throw std::invalid_argument("initialize: measurement set / anchor count mismatch");
    for (const auto& z : z0)
        if (z.empty()) throw std::invalid_argument("initialize: anchor without measurements");
    const ModelConstants& k = cfg.model;
    const double d_max = k.d_max;
    const auto n = static_cast<std::size_t>(cfg.init.initial_particles);
    if (n == 0) throw std::invalid_argument("initialize: need at least one particle");

    // per-anchor LOS candidates: the strongest measurement, or all of them
    struct Candidate {
        double distance, sd, mass, pick;  // pick: proposal probability within the anchor
    };
    std::vector<Measurement> strongest(nj);
    std::vector<std::vector<Candidate>> cand(nj);
    std::vector<double> dnr0(nj);
    for (std::size_t j = 0; j < nj; ++j) {
        const auto top = std::max_element(z0[j].begin(), z0[j].end(),
                                          [](const auto& a, const auto& b) { return a.amplitude < b.amplitude; });
        strongest[j] = *top;
        for (auto it = z0[j].begin(); it != z0[j].end(); ++it) {
            if (cfg.init.likelihood == InitLikelihood::strongest && it != top) continue;
            const Measurement& zm = *it;
            const double sd = sigma_d(zm.amplitude, k.rms_bandwidth, k.c);
            const double mass = 1.0 - gauss_q((d_max - zm.distance) / sd) - gauss_q(zm.distance / sd);
            cand[j].push_back({zm.distance, sd, mass, zm.amplitude * zm.amplitude});
        }
        double total = 0.0;
        for (const auto& c : cand[j]) total += c.pick;
        for (auto& c : cand[j]) c.pick /= total;
        dnr0[j] = dnr_init(z0[j], k.threshold, d_max, cfg.init.dnr_floor);
    }

    ParticleSet ps;
    ps.anchors.resize(nj);
    ps.resize(n);
    std::uniform_int_distribution<std::size_t> pick(0, nj - 1);
    const double log_disc = std::log(std::numbers::pi * d_max * d_max);
    const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    std::vector<double> lw(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j0 = pick(rng);
        const double ang = 2.0 * std::numbers::pi * uniform01(rng);
        double r;
        if (cfg.init.proposal == InitProposal::disc) {
            r = d_max * std::sqrt(uniform01(rng));
        } else {
            // candidate chosen with probability proportional to its SNR
            double u = uniform01(rng);
            std::size_t m = 0;
            while (m + 1 < cand[j0].size() && u >= cand[j0][m].pick) u -= cand[j0][m++].pick;
            const auto& c = cand[j0][m];
            do {
                r = c.distance + c.sd * std_normal(rng);
            } while (r <= 0.0 || r >= d_max);
        }
        const Vec2 p = cfg.anchors[j0] + r * Vec2(std::cos(ang), std::sin(ang));
        ps.px[i] = p.x();
        ps.py[i] = p.y();

        // log prod_j mean_m N(z_d,m; |p - a_j|, sigma_d)
        double l = 0.0, prior = 0.0, prop = 0.0;
        for (std::size_t j = 0; j < nj; ++j) {
            const double rj = (p - cfg.anchors[j]).norm();
            double lik = 0.0, ring = 0.0;
            for (const auto& c : cand[j]) {
                const double e = (rj - c.distance) / c.sd;
                const double g = inv_sqrt_2pi / c.sd * std::exp(-0.5 * e * e);
                lik += g;
                ring += c.pick * g / c.mass;
            }
            l += std::log(lik / static_cast<double>(cand[j].size()));
            if (rj < d_max) prior += 1.0;
            prop += ring / (2.0 * std::numbers::pi * std::max(rj, 1e-12));
        }
        if (cfg.init.proposal == InitProposal::ring) {
            // importance correction: disc-mixture prior over ring-mixture proposal (common 1/J dropped)
            l += std::log(prior) - log_disc - std::log(prop);
        }
        lw[i] = l;

        ps.vx[i] = cfg.init.velocity_std * std_normal(rng);
        ps.vy[i] = cfg.init.velocity_std * std_normal(rng);
        ps.rise[i] = std::max(d_max * uniform01(rng), kTiny);
    }
    if (!normalize_log(lw, ps.weight)) throw std::runtime_error("initialize: all position weights are zero");

    for (std::size_t j = 0; j < nj; ++j) {
        auto& a = ps.anchors[j];
        const double zu = strongest[j].amplitude;
        const TruncRice amp{cfg.init.amplitude_rel_spread * zu, zu, k.threshold};
        const TruncRice dnr{cfg.init.amplitude_rel_spread * dnr0[j], dnr0[j], 0.0};
        for (std::size_t i = 0; i < n; ++i) {
            a.amplitude[i] = sample(amp, rng);
            a.dnr[i] = sample(dnr, rng);
            a.bias[i] = d_max * uniform01(rng);
            a.fall[i] = std::max(d_max * uniform01(rng), kTiny);
        }
        a.weight.assign(n, 1.0 / static_cast<double>(n));
        ps.pmf.push_back(flags.track_q ? LosPmf::uniform(cfg.transition.q_support) : LosPmf::fixed(cfg.init.fixed_q));
    }
    return ps;
}

Tracker::Tracker(TrackerConfig cfg, FeatureFlags flags, std::uint64_t seed)
    : cfg_(std::move(cfg)), flags_(std::move(flags)), rng_(seed) {
    if (cfg_.anchors.empty()) throw std::invalid_argument("Tracker: no anchors");
    if (flags_.particles < 1) throw std::invalid_argument("Tracker: particle budget must be >= 1");
}

StepEstimate Tracker::initialize(const MeasurementSet& z0) {
    ps_ = mpath::initialize(z0, cfg_, flags_, rng_);
    n_ = 0;
    last_ = beliefs_and_mmse(ps_);
    last_.n = 0;
    return last_;
}

StepEstimate Tracker::step(const MeasurementSet& z) {
    if (ps_.size() == 0) throw std::logic_error("Tracker::step before initialize");
    if (z.size() != cfg_.anchors.size()) throw std::invalid_argument("Tracker::step: anchor count mismatch");
    const auto t0 = std::chrono::steady_clock::now();
    ++n_;

    predict(ps_, cfg_.transition, last_, cfg_.model.d_max, cfg_.model.threshold, rng_);

    KernelInput in{&ps_, &z, &cfg_.anchors, &cfg_.model, options_for(cfg_, flags_), {}};
    for (const auto& pmf : ps_.pmf) {
        std::vector<double> q{pmf.mean()};
        if (pmf.support.size() > 1) q.insert(q.end(), pmf.support.begin(), pmf.support.end());
        in.q_eval.push_back(std::move(q));
    }
    if (parallel_)
        update_kernel_parallel(in, scratch_, cfg_.threads);
    else
        update_kernel_serial(in, scratch_);

    const UpdateResult up = apply_update(ps_, scratch_, flags_);
    StepEstimate est = beliefs_and_mmse(ps_);
    est.n = n_;
    est.zero_weights = up.zero_weights;
    if (!up.zero_weights) {
        est.ess = up.ess;
        est.low_ess = up.ess < 2.0;
    }
    resample(ps_, static_cast<std::size_t>(flags_.particles), rng_);
    est.step_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    last_ = est;
    return est;
}

TrackResult run_track(const std::vector<MeasurementSet>& z, const TrackerConfig& cfg, const FeatureFlags& flags,
                      std::uint64_t seed) {
    if (z.empty()) throw std::invalid_argument("run_track: empty measurement stream");
    Tracker tracker(cfg, flags, seed);
    TrackResult out;
    out.steps.push_back(tracker.initialize(z[0]));
    for (std::size_t n = 1; n < z.size(); ++n) {
        StepEstimate e = tracker.step(z[n]);
        out.diverged = out.diverged || e.zero_weights;
        out.low_ess_steps += e.low_ess ? 1 : 0;
        out.steps.push_back(std::move(e));
    }
    return out;
}

}  // namespace mpath
