#include "mpath/ceda.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>

namespace mpath {

double u_ml(const Eigen::VectorXcd& r, const Pulse& pulse, const SignalConfig& cfg, double tau, double sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("u_ml: sigma must be positive");
    const Eigen::VectorXd s = s_vec(pulse, cfg, tau);
    const cplx proj = s.cast<cplx>().dot(r);
    return std::abs(proj) / (sigma * s.norm());
}

CedaEstimator::CedaEstimator(const Pulse& pulse, const SignalConfig& cfg, const CedaConfig& ceda_cfg)
    : pulse_(&pulse), cfg_(cfg), ceda_cfg_(ceda_cfg) {
    if (!(ceda_cfg.threshold > 0.0)) throw std::invalid_argument("CedaConfig: threshold must be positive");
    grid_step_ = cfg.sample_interval / ceda_cfg.grid_factor;
    const int g = ceda_cfg.grid_factor * (cfg.num_samples - 1) + 1;
    dict_.resize(cfg.num_samples, g);
    for (int k = 0; k < g; ++k) s_vec_into(pulse, cfg, std::min(k * grid_step_, cfg.max_delay()), dict_.col(k));
    dict_norm2_ = dict_.colwise().squaredNorm().transpose();
}

double CedaEstimator::refine(const Eigen::VectorXcd& res, double tau0) const {
    Eigen::VectorXd s(cfg_.num_samples);
    auto objective = [&](double tau) {
        s_vec_into(*pulse_, cfg_, tau, s);
        const double n2 = s.squaredNorm();
        if (n2 <= 0.0) return 0.0;
        return std::norm(s.cast<cplx>().dot(res)) / n2;
    };
    double a = std::max(0.0, tau0 - grid_step_), b = std::min(cfg_.max_delay(), tau0 + grid_step_);
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = objective(c), fd = objective(d);
    for (int it = 0; it < ceda_cfg_.refine_iterations; ++it) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = objective(d);
        }
    }
    const double best = 0.5 * (a + b);
    return objective(best) >= objective(tau0) ? best : tau0;
}

CedaResult CedaEstimator::estimate(const Eigen::VectorXcd& r, double sigma) const {
    if (r.size() != cfg_.num_samples) throw std::invalid_argument("estimate: snapshot length mismatch");
    const int ns = cfg_.num_samples;
    const bool known = ceda_cfg_.noise == NoiseEstimate::known;
    if (known && !(sigma > 0.0) && !(ceda_cfg_.sigma_floor > 0.0))
        throw std::invalid_argument("estimate: known-noise mode needs sigma > 0");
    auto noise_variance = [&](const Eigen::VectorXcd& res) {
        const double v = known ? sigma * sigma : res.squaredNorm() / (ns - 1);
        return std::max(v, ceda_cfg_.sigma_floor * ceda_cfg_.sigma_floor);
    };
    CedaResult out;
    out.residual = r;
    Eigen::MatrixXd basis(ns, 0);
    Eigen::VectorXd s(ns);

    for (;;) {
        if (static_cast<int>(out.delays.size()) >= ceda_cfg_.max_components) {
            out.truncated = true;
            break;
        }
        const Eigen::VectorXcd corr = dict_.transpose().cast<cplx>() * out.residual;
        Eigen::Index best = 0;
        double best_val = -1.0;
        for (Eigen::Index k = 0; k < corr.size(); ++k) {
            if (dict_norm2_[k] <= 0.0) continue;
            const double v = std::norm(corr[k]) / dict_norm2_[k];
            if (v > best_val) {
                best_val = v;
                best = k;
            }
        }
        const double tau = refine(out.residual, std::min(static_cast<double>(best) * grid_step_, cfg_.max_delay()));
        const double sigma2 = noise_variance(out.residual);
        s_vec_into(*pulse_, cfg_, tau, s);
        const double stat = std::abs(s.cast<cplx>().dot(out.residual)) / std::sqrt(sigma2 * s.squaredNorm());
        if (!(stat >= ceda_cfg_.threshold)) break;
        const bool too_close = std::any_of(out.delays.begin(), out.delays.end(), [&](double t) {
            return std::abs(t - tau) < cfg_.sample_interval / 8.0;
        });
        if (too_close) break;

        out.delays.push_back(tau);
        basis.conservativeResize(ns, basis.cols() + 1);
        basis.col(basis.cols() - 1) = s;
        const Eigen::MatrixXd gram = basis.transpose() * basis;
        const Eigen::VectorXcd rhs = basis.transpose().cast<cplx>() * r;
        const Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
        Eigen::VectorXcd alpha(rhs.size());
        alpha.real() = ldlt.solve(rhs.real());
        alpha.imag() = ldlt.solve(rhs.imag());
        out.amplitudes.assign(alpha.data(), alpha.data() + alpha.size());
        out.residual = r - basis.cast<cplx>() * alpha;
    }

    out.sigma_hat = std::sqrt(noise_variance(out.residual));
    for (std::size_t k = 0; k < out.delays.size(); ++k) {
        const double zu = std::abs(out.amplitudes[k]) * basis.col(static_cast<Eigen::Index>(k)).norm() / out.sigma_hat;
        if (zu >= ceda_cfg_.threshold) out.measurements.push_back({cfg_.c * out.delays[k], zu});
    }
    return out;
}

CedaResult estimate_snapshot(const Snapshot& snap, const Pulse& pulse, const SignalConfig& cfg,
                             const CedaConfig& ceda_cfg) {
    return CedaEstimator(pulse, cfg, ceda_cfg).estimate(snap.r, snap.sigma);
}

}  // namespace mpath
