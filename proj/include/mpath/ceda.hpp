#pragma once

#include <vector>

#include <Eigen/Core>

#include "mpath/signal.hpp"

namespace mpath {

struct Measurement {
    double distance;   // z_d [m]
    double amplitude;  // z_u, normalized
};

enum class NoiseEstimate {
    known,     // sigma of the snapshot
    residual,  // ||r_res||^2 / (N_s - 1), re-estimated every iteration
};

struct CedaConfig {
    double threshold = 1.77;  // gamma, linear amplitude
    int grid_factor = 3;      // grid spacing T_s / grid_factor
    int max_components = 50;
    int refine_iterations = 30;
    double sigma_floor = 0.0;  // lower bound on the noise estimate
    NoiseEstimate noise = NoiseEstimate::known;
};

struct CedaResult {
    std::vector<Measurement> measurements;  // extraction order
    std::vector<double> delays;             // all extracted delays [s]
    std::vector<cplx> amplitudes;           // joint LS amplitudes for `delays`
    Eigen::VectorXcd residual;              // r - S(delays) * amplitudes
    double sigma_hat = 0.0;
    bool truncated = false;  // max_components reached
};

double u_ml(const Eigen::VectorXcd& r, const Pulse& pulse, const SignalConfig& cfg, double tau, double sigma);

// Search-and-subtract ML decomposition with GLRT stopping. The delay dictionary on the
// T_s/grid_factor grid is built once and reused for every snapshot.
class CedaEstimator {
public:
    CedaEstimator(const Pulse& pulse, const SignalConfig& cfg, const CedaConfig& ceda_cfg);

    // sigma is used in NoiseEstimate::known mode only.
    CedaResult estimate(const Eigen::VectorXcd& r, double sigma) const;

    const CedaConfig& config() const { return ceda_cfg_; }

private:
    double refine(const Eigen::VectorXcd& res, double tau0) const;

    const Pulse* pulse_;
    SignalConfig cfg_;
    CedaConfig ceda_cfg_;
    Eigen::MatrixXd dict_;  // N_s x G, columns s(tau_g)
    Eigen::VectorXd dict_norm2_;
    double grid_step_;
};

CedaResult estimate_snapshot(const Snapshot& snap, const Pulse& pulse, const SignalConfig& cfg,
                             const CedaConfig& ceda_cfg);

}  // namespace mpath
