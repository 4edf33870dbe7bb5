#include <benchmark/benchmark.h>

#include "mpath/scenario.hpp"

using namespace mpath;

namespace {

struct Fixture {
    ScenarioConfig cfg = dense_scenario();
    Pulse pulse{cfg.rolloff, cfg.symbol_time, cfg.signal.sample_interval};
    Truth truth = make_truth(cfg);
    TrackerConfig tcfg = tracker_config(cfg, pulse.rms_bandwidth());
    ParticleSet ps;
    MeasurementSet z;

    explicit Fixture(int particles) {
        const auto stream = generate_stream(cfg, truth, 0, pulse.rms_bandwidth());
        tcfg.init.initial_particles = particles;
        Rng rng(7);
        ps = initialize(stream[0], tcfg, FeatureFlags::variant("AL5", particles), rng);
        z = stream[1];
    }

    KernelInput input() const {
        KernelInput in{&ps, &z, &tcfg.anchors, &tcfg.model, LhfOptions{}, {}};
        for (const auto& p : ps.pmf) {
            std::vector<double> q{p.mean()};
            q.insert(q.end(), p.support.begin(), p.support.end());
            in.q_eval.push_back(q);
        }
        return in;
    }
};

void BM_KernelSerial(benchmark::State& st) {
    const Fixture f(static_cast<int>(st.range(0)));
    const KernelInput in = f.input();
    KernelOutput out;
    for (auto _ : st) {
        update_kernel_serial(in, out);
        benchmark::DoNotOptimize(out.data());
    }
}

void BM_KernelParallel(benchmark::State& st) {
    const Fixture f(static_cast<int>(st.range(0)));
    const KernelInput in = f.input();
    KernelOutput out;
    for (auto _ : st) {
        update_kernel_parallel(in, out);
        benchmark::DoNotOptimize(out.data());
    }
}

}  // namespace

BENCHMARK(BM_KernelSerial)->Arg(2000)->Arg(5000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_KernelParallel)->Arg(2000)->Arg(5000)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
