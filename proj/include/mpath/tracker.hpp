#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mpath/measmodel.hpp"
#include "mpath/rng.hpp"

namespace mpath {

using MeasurementSet = std::vector<std::vector<Measurement>>;  // [anchor][m]

struct TransitionConfig {
    double accel_std = 2.0;  // sigma_a [m/s^2]
    double dt = 0.1;         // Delta T [s]
    double rel_std_amplitude = 0.05;
    double rel_std_dnr = 0.05;
    double rel_std_bias = 0.05;
    double rel_std_fall = 0.05;
    double rel_std_rise = 0.5;
    double std_floor = 1e-4;  // fraction of the state's scale
    std::vector<double> q_support{0.01, 0.33, 0.66, 1.0};
    Eigen::MatrixXd q_transition = default_q_transition();  // column-stochastic

    static Eigen::MatrixXd default_q_transition();
};

struct FeatureFlags {
    std::string name = "AL5";
    bool track_q = true;
    bool nonuniform_nlos = true;
    bool decoupled = true;
    bool uniform_delay = true;  // NLOS distance LHF 1/d_max
    int particles = 2000;

    // AL1..AL5, AL4', AL5' (also accepted: AL4p, AL5p). base = particle budget of AL1..AL5.
    static FeatureFlags variant(const std::string& name, int base_particles = 2000, int large_particles = 20000);
};

enum class InitProposal {
    disc,  // uniform on discs of radius d_max around a randomly chosen anchor
    ring,  // radius ~ N(z_d,max, sigma_d) around a randomly chosen anchor, uniform angle
};

// Initial position likelihood per anchor.
enum class InitLikelihood {
    strongest,  // LOS likelihood of the max-amplitude measurement only
    mixture,    // mean of the LOS likelihoods of all measurements
};

struct InitConfig {
    int initial_particles = 50000;
    double velocity_std = 6.0;
    double amplitude_rel_spread = 0.05;
    double dnr_floor = 1e-3;
    double fixed_q = 0.999;  // q when LOS-probability tracking is off
    InitProposal proposal = InitProposal::ring;
    InitLikelihood likelihood = InitLikelihood::mixture;
};

struct TrackerConfig {
    std::vector<Vec2> anchors;
    ModelConstants model;
    TransitionConfig transition;
    InitConfig init;
    bool gaussian_los_ampl = true;
    int quad_points = 30;
    int threads = 0;  // 0: OpenMP default
};

// Structure-of-arrays particle set: one augmented agent state and J anchor states per particle,
// with separate weights for the agent belief and for each anchor belief.
struct AnchorParticles {
    std::vector<double> amplitude, dnr, bias, fall;
    std::vector<double> weight;
};

struct ParticleSet {
    std::vector<double> px, py, vx, vy, rise;
    std::vector<double> weight;  // agent belief
    std::vector<AnchorParticles> anchors;
    std::vector<LosPmf> pmf;  // per anchor

    std::size_t size() const { return px.size(); }
    void resize(std::size_t n);
    AnchorState anchor_state(std::size_t j, std::size_t i) const;
};

struct AnchorEstimate {
    double amplitude, dnr, bias, fall, q;
};

struct StepEstimate {
    int n = 0;
    Vec2 position = Vec2::Zero();
    Vec2 velocity = Vec2::Zero();
    double rise = 0.0;
    std::vector<AnchorEstimate> anchors;
    double ess = 0.0;
    bool low_ess = false;       // ESS < 2
    bool zero_weights = false;  // all-zero or non-finite agent weights; update skipped
    double step_ms = 0.0;
};

// Per-(anchor, q) log marginal pseudo-LHF for every particle: out[j][qi * I + i].
using KernelOutput = std::vector<std::vector<double>>;

struct KernelInput {
    const ParticleSet* particles;
    const MeasurementSet* z;
    const std::vector<Vec2>* anchors;
    const ModelConstants* model;
    LhfOptions options;
    std::vector<std::vector<double>> q_eval;  // per anchor: q values to evaluate
};

void update_kernel_serial(const KernelInput& in, KernelOutput& out);
void update_kernel_parallel(const KernelInput& in, KernelOutput& out, int threads = 0);

// Model operations

void predict(ParticleSet& ps, const TransitionConfig& cfg, const StepEstimate& prev, double d_max, double threshold,
             Rng& rng);

struct UpdateResult {
    bool zero_weights = false;
    double ess = 0.0;
};

// Weight update from kernel output; updates weights and LosPmfs in place (normalized).
UpdateResult apply_update(ParticleSet& ps, const KernelOutput& lhf, const FeatureFlags& flags);

StepEstimate beliefs_and_mmse(const ParticleSet& ps);

void resample(ParticleSet& ps, std::size_t count, Rng& rng);

// Systematic resampling indices for normalized weights w, shared offset u0 in [0, 1).
std::vector<std::size_t> systematic_indices(std::span<const double> w, std::size_t count, double u0);

// omega_init per anchor from the initial measurements (max-amplitude measurement excluded).
double dnr_init(std::span<const Measurement> z, double threshold, double d_max, double floor);

ParticleSet initialize(const MeasurementSet& z0, const TrackerConfig& cfg, const FeatureFlags& flags, Rng& rng);

class Tracker {
public:
    Tracker(TrackerConfig cfg, FeatureFlags flags, std::uint64_t seed);

    StepEstimate initialize(const MeasurementSet& z0);
    StepEstimate step(const MeasurementSet& z);

    const ParticleSet& particles() const { return ps_; }
    const FeatureFlags& flags() const { return flags_; }
    const TrackerConfig& config() const { return cfg_; }
    void set_parallel(bool on) { parallel_ = on; }

private:
    TrackerConfig cfg_;
    FeatureFlags flags_;
    Rng rng_;
    ParticleSet ps_;
    StepEstimate last_;
    int n_ = 0;
    bool parallel_ = true;
    KernelOutput scratch_;
};

struct TrackResult {
    std::vector<StepEstimate> steps;  // n = 0..N
    bool diverged = false;            // zero-weight event seen
    int low_ess_steps = 0;
};

// Runs initialize on z[0] and step on z[1..].
TrackResult run_track(const std::vector<MeasurementSet>& z, const TrackerConfig& cfg, const FeatureFlags& flags,
                      std::uint64_t seed);

}  // namespace mpath
