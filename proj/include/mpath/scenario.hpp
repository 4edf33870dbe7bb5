#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mpath/bounds.hpp"
#include "mpath/ceda.hpp"
#include "mpath/geometry.hpp"
#include "mpath/signal.hpp"
#include "mpath/tracker.hpp"

namespace mpath {

enum class GenMode { fully_synthetic, stochastic_ceda, geometric_ceda };

struct OlosWindow {
    int first = 0;  // inclusive
    int last = 0;   // inclusive
    std::vector<int> anchors;
};

struct TruthParams {
    std::vector<double> snr_db{19.5, 20.0, 20.5};  // u^2 per anchor [dB]
    double dnr_db = 12.5;                          // omega^2 [dB]
    double rise = 0.7;
    double fall = 6.0;
    double bias = 0.7;
    double los_prob = 1.0;  // q~
};

struct TrajectorySpec {
    std::vector<Vec2> waypoints;
    double speed = 0.8;            // mean speed [m/s]
    double speed_variation = 0.1;  // relative amplitude of the sinusoidal speed profile
    double speed_period = 9.5;     // [s]
    double corner_radius = 0.6;    // fillet radius [m]
};

struct TrackerSettings {
    int particles = 2000;
    int large_particles = 20000;  // AL4', AL5'
    int initial_particles = 50000;
    double accel_std = 2.0;
    double velocity_std = 6.0;
    InitProposal proposal = InitProposal::ring;
    InitLikelihood likelihood = InitLikelihood::mixture;
};

struct ScenarioConfig {
    std::string name = "dense";
    std::vector<Vec2> anchors;
    TrajectorySpec trajectory;
    int steps = 190;  // N; states n = 0..N
    double dt = 0.1;
    std::vector<OlosWindow> olos;
    TruthParams truth;
    SignalConfig signal;
    double rolloff = 0.6;
    double symbol_time = 2e-9;
    double threshold = 1.77;
    double noise_sigma = 1.0;
    int realizations = 50;
    std::uint64_t seed = 1;
    GenMode mode = GenMode::fully_synthetic;
    bool poisson_count = true;  // NLOS candidate count law; fixed N_s otherwise
    std::vector<Segment> walls;
    PathLoss path_loss;
    int max_order = 3;
    TrackerSettings tracker;
    double lost_error = 1.0;  // [m]
    int lost_after = 10;      // steps before the lost-track check applies
    int recovery_steps = 10;  // grace after steps without any LOS

    double d_max() const { return signal.d_max(); }
};

// Built-in scenarios; coordinates of the trajectory and walls are approximations.
ScenarioConfig dense_scenario();
// Dense scenario with the alternative truth DNR reading of 25 dB.
ScenarioConfig dense_dnr25_scenario();
ScenarioConfig geometric_scenario();

struct Truth {
    std::vector<Vec2> position;  // n = 0..N
    std::vector<Vec2> velocity;
    VisibilitySchedule visible;               // [n][j]
    std::vector<std::vector<double>> amplitude;  // LOS u [n][j]
};

// Positions at arc lengths along the filleted polyline.
class FilletedPath {
public:
    FilletedPath(const std::vector<Vec2>& waypoints, double radius);
    double length() const { return length_; }
    Vec2 at(double s) const;

private:
    struct Piece {
        bool arc;
        Vec2 a;        // line start or arc center
        Vec2 dir;      // line direction or arc start radius vector
        double len;
        double turn;   // +1 left, -1 right
        double radius;
    };
    std::vector<Piece> pieces_;
    double length_ = 0.0;
};

Truth make_truth(const ScenarioConfig& cfg);

TrackerConfig tracker_config(const ScenarioConfig& cfg, double rms_bandwidth);

// Counter-based RNG for generation at (realization, n, j).
Rng measurement_rng(const ScenarioConfig& cfg, int realization, int n, int j);

std::vector<Measurement> gen_fully_synthetic(const ScenarioConfig& cfg, const Truth& truth, int n, int j, double rms_bandwidth,
                                             Rng& rng);

class CedaPath {
public:
    explicit CedaPath(const ScenarioConfig& cfg);
    std::vector<Measurement> generate(const Truth& truth, int n, int j, Rng& rng) const;
    // DPS power giving the configured DNR in normalized-amplitude units.
    double dense_power() const { return dense_power_; }
    const Pulse& pulse() const { return pulse_; }

private:
    ScenarioConfig cfg_;
    Pulse pulse_;
    CedaEstimator ceda_;
    double dense_power_;
};

// Full measurement stream for one realization: z[n][j].
std::vector<MeasurementSet> generate_stream(const ScenarioConfig& cfg, const Truth& truth, int realization,
                                            double rms_bandwidth, const CedaPath* ceda = nullptr);

struct BinEstimate {
    double center;
    std::optional<double> rayleigh_scale2;
    std::optional<double> rice_scale2;
    double frequency;
    std::size_t count;
};

std::vector<BinEstimate> bin_based_estimates(std::span<const Measurement> nlos, double d_max, int bins, double threshold,
                                             double rice_ratio = 1.0);

struct RealizationResult {
    int realization = 0;
    std::vector<double> sq_error;  // n = 0..N
    std::vector<StepEstimate> estimates;
    bool zero_weights = false;
    bool lost = false;
    double mean_step_ms = 0.0;
};

struct VariantResult {
    FeatureFlags flags;
    std::vector<RealizationResult> runs;
    std::vector<double> rmse;  // per n
    int failures = 0;          // realizations that threw
    double mean_step_ms = 0.0;

    double divergence_rate() const;
    double median_track_rmse() const;
    // Median over realizations of the RMSE over n in [first, last].
    double median_segment_rmse(int first, int last) const;
};

struct ExperimentResult {
    std::vector<VariantResult> variants;
    BoundCurves bounds;
    Truth truth;
};

struct ExperimentOptions {
    std::optional<int> realizations;
    bool keep_estimates = false;
    int threads = 0;
};

ExperimentResult run_experiment(const ScenarioConfig& cfg, const std::vector<FeatureFlags>& variants,
                                const ExperimentOptions& opt = {});

BoundCurves scenario_bounds(const ScenarioConfig& cfg, const Truth& truth, double rms_bandwidth);

// Lost track: error above cfg.lost_error at some n >= cfg.lost_after, skipping steps without LOS to any
// anchor and the cfg.recovery_steps steps after them.
bool track_lost(std::span<const double> sq_error, const VisibilitySchedule& visible, const ScenarioConfig& cfg);

// RMSE(n) = sqrt(mean over runs of squared error)
std::vector<double> aggregate_rmse(const std::vector<RealizationResult>& runs);

// Empirical CDF of per-realization whole-track RMSE: sorted values.
std::vector<double> rmse_cdf(const std::vector<RealizationResult>& runs);

}  // namespace mpath
