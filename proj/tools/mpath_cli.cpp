#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mpath/config.hpp"
#include "mpath/io.hpp"
#include "mpath/scenario.hpp"

namespace fs = std::filesystem;
using namespace mpath;

namespace {

constexpr int kUsageError = 2;
constexpr int kConfigError = 3;
constexpr int kDivergence = 4;

struct Common {
    std::string config;
    std::string out = "out";
    std::optional<std::uint64_t> seed;
    std::optional<int> particles;
    std::optional<double> gamma_db;
    bool uniform_nlos = false, nonuniform_nlos = false;
    bool coupled = false, decoupled = false;
};

int env_threads() {
    if (const char* s = std::getenv("MPATH_THREADS")) {
        const int t = std::atoi(s);
        if (t > 0) return t;
    }
    return 0;
}

ScenarioConfig load(const Common& c) {
    ScenarioConfig cfg = c.config.empty() ? dense_scenario() : load_scenario(c.config);
    if (c.seed) cfg.seed = *c.seed;
    if (c.particles) cfg.tracker.particles = *c.particles;
    if (c.gamma_db) cfg.threshold = amplitude_db_to_linear(*c.gamma_db);
    return cfg;
}

std::vector<FeatureFlags> variants(const std::string& list, const ScenarioConfig& cfg, const Common& c) {
    std::vector<FeatureFlags> out;
    std::stringstream ss(list);
    std::string name;
    while (std::getline(ss, name, ',')) {
        FeatureFlags f = FeatureFlags::variant(name, cfg.tracker.particles, cfg.tracker.large_particles);
        if (c.uniform_nlos) f.nonuniform_nlos = false;
        if (c.nonuniform_nlos) f.nonuniform_nlos = true;
        if (c.coupled) f.decoupled = false;
        if (c.decoupled) f.decoupled = true;
        out.push_back(f);
    }
    return out;
}

void prepare_out(const fs::path& dir, const ScenarioConfig& cfg) {
    fs::create_directories(dir);
    save_scenario(cfg, dir / "config.json");
}

void runtime_table(const std::vector<VariantResult>& vs) {
    std::printf("%-8s %10s %12s %14s %12s\n", "variant", "particles", "ms/step", "median RMSE m", "diverged");
    for (const auto& v : vs)
        std::printf("%-8s %10d %12.2f %14.4f %11.0f%%\n", v.flags.name.c_str(), v.flags.particles, v.mean_step_ms,
                    v.median_track_rmse(), 100.0 * v.divergence_rate());
}

void add_common(CLI::App* app, Common& c, bool tracking) {
    app->add_option("--config", c.config, "Scenario JSON (default: built-in dense scenario)");
    app->add_option("--out", c.out, "Output directory");
    app->add_option("--seed", c.seed, "Override the base seed");
    app->add_option("--gamma-db", c.gamma_db, "Detection threshold in amplitude dB (20 log10)");
    if (!tracking) return;
    app->add_option("--particles", c.particles, "Particle budget of AL1..AL5");
    auto* u = app->add_flag("--uniform-nlos", c.uniform_nlos, "Force s_u^2 = 1/2 in every variant");
    auto* nu = app->add_flag("--nonuniform-nlos", c.nonuniform_nlos, "Force the distance-dependent NLOS scale");
    u->excludes(nu);
    auto* cp = app->add_flag("--coupled", c.coupled, "Force the coupled schedule");
    auto* dc = app->add_flag("--decoupled", c.decoupled, "Force the decoupled schedule");
    cp->excludes(dc);
}

int cmd_ceda(const std::string& input, const Common& c) {
    const ScenarioConfig cfg = load(c);
    const auto snaps = read_snapshots(input);
    SignalConfig sc = cfg.signal;
    if (!snaps.empty()) sc.num_samples = static_cast<int>(snaps.front().snapshot.r.size());
    const Pulse pulse(cfg.rolloff, cfg.symbol_time, sc.sample_interval);
    CedaConfig cc;
    cc.threshold = cfg.threshold;
    const CedaEstimator est(pulse, sc, cc);
    std::vector<MeasurementSet> z;
    for (const auto& s : snaps) {
        const auto n = static_cast<std::size_t>(s.n), j = static_cast<std::size_t>(s.anchor);
        if (z.size() <= n) z.resize(n + 1);
        for (auto& row : z)
            if (row.size() <= j) row.resize(j + 1);
        z[n][j] = est.estimate(s.snapshot.r, s.snapshot.sigma).measurements;
    }
    prepare_out(c.out, cfg);
    std::ofstream os(fs::path(c.out) / "measurements.csv");
    write_measurements_csv(os, z);
    std::printf("gamma = %.4f, %zu snapshots -> %s\n", cfg.threshold, snaps.size(),
                (fs::path(c.out) / "measurements.csv").c_str());
    return 0;
}

int cmd_track(const std::string& meas, const std::string& variant, int realization, const Common& c) {
    const ScenarioConfig cfg = load(c);
    const Pulse pulse(cfg.rolloff, cfg.symbol_time, cfg.signal.sample_interval);
    std::vector<MeasurementSet> z;
    if (!meas.empty()) {
        std::ifstream is(meas);
        if (!is) throw ConfigError("cannot open " + meas);
        z = read_measurements_csv(is);
    } else {
        const Truth truth = make_truth(cfg);
        std::optional<CedaPath> ceda;
        if (cfg.mode != GenMode::fully_synthetic) ceda.emplace(cfg);
        z = generate_stream(cfg, truth, realization, pulse.rms_bandwidth(), ceda ? &*ceda : nullptr);
    }
    const auto flags = variants(variant, cfg, c).at(0);
    TrackerConfig tcfg = tracker_config(cfg, pulse.rms_bandwidth());
    tcfg.threads = env_threads();
    const TrackResult tr =
        run_track(z, tcfg, flags, stream_seed({cfg.seed, 0x747261636bULL, static_cast<std::uint64_t>(realization)}));
    prepare_out(c.out, cfg);
    std::ofstream os(fs::path(c.out) / "estimates.jsonl");
    write_estimates_jsonl(os, tr.steps);
    double ms = 0.0;
    for (std::size_t n = 1; n < tr.steps.size(); ++n) ms += tr.steps[n].step_ms;
    std::printf("%s: %zu steps, %.2f ms/step, zero-weight events: %s\n", flags.name.c_str(), tr.steps.size() - 1,
                ms / std::max<std::size_t>(tr.steps.size() - 1, 1), tr.diverged ? "yes" : "no");
    return tr.diverged ? kDivergence : 0;
}

int cmd_experiment(const std::string& list, std::optional<int> reals, double max_div, const Common& c) {
    const ScenarioConfig cfg = load(c);
    const auto vs = variants(list, cfg, c);
    ExperimentOptions opt;
    opt.realizations = reals;
    opt.threads = env_threads();
    opt.keep_estimates = true;
    const ExperimentResult res = run_experiment(cfg, vs, opt);
    const fs::path dir(c.out);
    ScenarioConfig saved = cfg;
    if (reals) saved.realizations = *reals;
    prepare_out(dir, saved);
    for (const auto& v : res.variants) {
        std::ofstream os(dir / ("rmse_" + v.flags.name + ".csv"));
        write_rmse_csv(os, {v});
        std::ofstream js(dir / ("runs_" + v.flags.name + ".jsonl"));
        for (const auto& r : v.runs) write_estimates_jsonl(js, r.estimates);
    }
    std::ofstream cdf(dir / "rmse_cdf.csv");
    write_cdf_csv(cdf, res.variants);
    std::ofstream b(dir / "bounds.csv");
    write_bounds_csv(b, res.bounds);
    runtime_table(res.variants);
    int code = 0;
    for (const auto& v : res.variants) {
        if (v.failures > 0) std::printf("%s: %d realizations failed and were excluded\n", v.flags.name.c_str(), v.failures);
        if (v.divergence_rate() > max_div) code = kDivergence;
    }
    return code;
}

int cmd_bounds(const Common& c) {
    const ScenarioConfig cfg = load(c);
    const Pulse pulse(cfg.rolloff, cfg.symbol_time, cfg.signal.sample_interval);
    const Truth truth = make_truth(cfg);
    prepare_out(c.out, cfg);
    std::ofstream os(fs::path(c.out) / "bounds.csv");
    write_bounds_csv(os, scenario_bounds(cfg, truth, pulse.rms_bandwidth()));
    return 0;
}

int cmd_diagnose(int draws, bool snapshots, const Common& c) {
    ScenarioConfig cfg = load(c);
    const Pulse pulse(cfg.rolloff, cfg.symbol_time, cfg.signal.sample_interval);
    const Truth truth = make_truth(cfg);
    prepare_out(c.out, cfg);
    const fs::path dir(c.out);

    // NLOS-only statistics of the fully synthetic generator at n = 0, anchor 0
    ScenarioConfig nl = cfg;
    nl.truth.los_prob = 0.0;
    std::vector<Measurement> all;
    for (int r = 0; r < draws; ++r) {
        Rng rng = measurement_rng(nl, r, 0, 0);
        const auto z = gen_fully_synthetic(nl, truth, 0, 0, pulse.rms_bandwidth(), rng);
        all.insert(all.end(), z.begin(), z.end());
    }
    const auto bins = bin_based_estimates(all, cfg.d_max(), 2 * cfg.steps, cfg.threshold);
    std::ofstream os(dir / "nlos_bins.csv");
    os << "center_m,count,frequency,rayleigh_scale2,rice_scale2\n";
    for (const auto& b : bins) {
        os << b.center << ',' << b.count << ',' << b.frequency << ',';
        if (b.rayleigh_scale2) os << *b.rayleigh_scale2;
        os << ',';
        if (b.rice_scale2) os << *b.rice_scale2;
        os << '\n';
    }
    std::printf("nlos_bins.csv: %zu measurements in %zu bins\n", all.size(), bins.size());

    if (snapshots) {
        if (cfg.mode == GenMode::fully_synthetic) cfg.mode = GenMode::stochastic_ceda;
        const Pulse p(cfg.rolloff, cfg.symbol_time, cfg.signal.sample_interval);
        const CedaPath path(cfg);
        std::vector<TaggedSnapshot> snaps;
        for (int n = 0; n <= cfg.steps; ++n)
            for (int j = 0; j < static_cast<int>(cfg.anchors.size()); ++j) {
                Rng rng = measurement_rng(cfg, 0, n, j);
                const Vec2& pos = truth.position[static_cast<std::size_t>(n)];
                const Vec2& a = cfg.anchors[static_cast<std::size_t>(j)];
                TaggedSnapshot ts{n, j, {}};
                if (cfg.mode == GenMode::stochastic_ceda) {
                    std::optional<PathComponent> los;
                    const double u = truth.amplitude[static_cast<std::size_t>(n)][static_cast<std::size_t>(j)];
                    const double tau = (pos - a).norm() / cfg.signal.c;
                    if (truth.visible[static_cast<std::size_t>(n)][static_cast<std::size_t>(j)])
                        los = PathComponent{tau, u * cfg.noise_sigma / s_vec(p, cfg.signal, tau).norm()};
                    const DpsParams dense{path.dense_power(), cfg.truth.rise, cfg.truth.fall, cfg.truth.bias};
                    ts.snapshot = synth_stochastic(p, cfg.signal, los, dense, pos, a, cfg.noise_sigma, rng);
                } else {
                    std::vector<PathComponent> comps;
                    for (const auto& g : mirror_mpcs(cfg.walls, pos, a, cfg.max_order, cfg.path_loss).paths)
                        if (g.distance / cfg.signal.c <= cfg.signal.max_delay())
                            comps.push_back({g.distance / cfg.signal.c,
                                             g.amplitude * cfg.noise_sigma /
                                                 s_vec(p, cfg.signal, g.distance / cfg.signal.c).norm()});
                    ts.snapshot = synth_deterministic(p, cfg.signal, comps, cfg.noise_sigma, rng);
                }
                snaps.push_back(std::move(ts));
            }
        write_snapshots(dir / "snapshots.bin", snaps);
        std::printf("snapshots.bin: %zu snapshots\n", snaps.size());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sequential radio localization in multipath: CEDA, particle tracking and position bounds"};
    app.require_subcommand(1);

    Common common;
    std::string input, meas, variant = "AL5", list = "AL1,AL5";
    std::optional<int> reals;
    int realization = 0, draws = 2000;
    double max_div = 1.0;
    bool snapshots = false;

    auto* ceda = app.add_subcommand("ceda", "Decompose snapshots into distance/amplitude measurements");
    add_common(ceda, common, false);
    ceda->add_option("--input", input, "Snapshot file")->required()->check(CLI::ExistingFile);

    auto* track = app.add_subcommand("track", "Run one tracker on a measurement stream");
    add_common(track, common, true);
    track->add_option("--measurements", meas, "Measurement CSV (default: generate from the scenario)");
    track->add_option("--variants", variant, "Variant: AL1..AL5, AL4', AL5'");
    track->add_option("--realization", realization, "Realization index used for generation");

    auto* exp = app.add_subcommand("experiment", "Monte Carlo experiment over variants");
    add_common(exp, common, true);
    exp->add_option("--variants", list, "Comma-separated variants");
    exp->add_option("--realizations", reals, "Override the realization count");
    exp->add_option("--max-divergence", max_div, "Exit with code 4 above this divergence rate")->check(CLI::Range(0.0, 1.0));

    auto* bounds = app.add_subcommand("bounds", "SP-CRLB, P-CRLB and P-CRLB-LOS curves");
    add_common(bounds, common, false);

    auto* diag = app.add_subcommand("diagnose", "Generator statistics and optional snapshot export");
    add_common(diag, common, false);
    diag->add_option("--draws", draws, "NLOS generator draws for the bin statistics");
    diag->add_flag("--snapshots", snapshots, "Also write snapshots.bin for realization 0");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kUsageError;
    }

    try {
        if (*ceda) return cmd_ceda(input, common);
        if (*track) return cmd_track(meas, variant, realization, common);
        if (*exp) return cmd_experiment(list, reals, max_div, common);
        if (*bounds) return cmd_bounds(common);
        if (*diag) return cmd_diagnose(draws, snapshots, common);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid argument: " << e.what() << '\n';
        return kUsageError;
    }
    return kUsageError;
}
