#include <stdexcept>

#include "mpath/tracker.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mpath {

namespace {

void prepare(const KernelInput& in, KernelOutput& out) {
    const std::size_t nj = in.anchors->size();
    if (in.z->size() != nj || in.q_eval.size() != nj || in.particles->anchors.size() != nj)
        throw std::invalid_argument("update kernel: anchor count mismatch");
    out.resize(nj);
    for (std::size_t j = 0; j < nj; ++j) out[j].resize(in.q_eval[j].size() * in.particles->size());
}

inline void evaluate(const KernelInput& in, KernelOutput& out, std::size_t i) {
    const ParticleSet& ps = *in.particles;
    const std::size_t n = ps.size();
    const Vec2 p(ps.px[i], ps.py[i]);
    for (std::size_t j = 0; j < out.size(); ++j) {
        const LhfTerms t = lhf_terms((*in.z)[j], p, (*in.anchors)[j], ps.anchor_state(j, i), ps.rise[i], *in.model,
                                     in.options);
        const auto& q = in.q_eval[j];
        for (std::size_t qi = 0; qi < q.size(); ++qi) out[j][qi * n + i] = t.log_marginal(q[qi]);
    }
}

}  // namespace

void update_kernel_serial(const KernelInput& in, KernelOutput& out) {
    prepare(in, out);
    const std::size_t n = in.particles->size();
    for (std::size_t i = 0; i < n; ++i) evaluate(in, out, i);
}

void update_kernel_parallel(const KernelInput& in, KernelOutput& out, int threads) {
    prepare(in, out);
    const auto n = static_cast<std::ptrdiff_t>(in.particles->size());
#ifdef _OPENMP
    const int nt = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for schedule(static) num_threads(nt)
    for (std::ptrdiff_t i = 0; i < n; ++i) evaluate(in, out, static_cast<std::size_t>(i));
#else
    (void)threads;
    for (std::ptrdiff_t i = 0; i < n; ++i) evaluate(in, out, static_cast<std::size_t>(i));
#endif
}

}  // namespace mpath
