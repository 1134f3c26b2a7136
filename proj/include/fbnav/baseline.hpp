#ifndef FBNAV_BASELINE_HPP
#define FBNAV_BASELINE_HPP

#include <span>
#include <vector>

#include "fbnav/core.hpp"
#include "fbnav/errors.hpp"
#include "fbnav/eskf.hpp"
#include "fbnav/io.hpp"
#include "fbnav/strapdown.hpp"

namespace fbnav {

// Loose-integration comparison system: a fixed-threshold GLRT stance
// detector driving a single zero-velocity-update error-state filter.
// Reimplementation of the standard SHOE-style baseline, not part of the
// tightly integrated framework.
struct DetectorConfig {
    int window = 5;          // W samples
    double gamma = 1e4;      // detection threshold, stance when T < gamma
    double sigma_a = 0.05;   // m/s^2
    double sigma_g = 0.005;  // rad/s
    double g_mag = 9.81;     // m/s^2
    double zupt_sigma_v = 0.01;  // m/s, ZUPT measurement std

    void validate() const {
        if (window < 1) throw ConfigError("DetectorConfig: window must be >= 1");
        if (gamma < 0.0) throw ConfigError("DetectorConfig: gamma must be >= 0");
        if (!(sigma_a > 0.0) || !(sigma_g > 0.0) || !(zupt_sigma_v > 0.0)) {
            throw ConfigError("DetectorConfig: stds must be > 0");
        }
    }
};

// Per-window stance statistic: mean of the squared specific-force residual
// against gravity along the window-mean direction plus the squared angular
// rate, each weighted by its noise variance.
inline double shoe_statistic(std::span<const ImuSample> window,
                             const DetectorConfig& cfg) {
    if (static_cast<int>(window.size()) != cfg.window) {
        throw ConfigError("shoe_statistic: window length mismatch");
    }
    Vec3 sbar = Vec3::Zero();
    for (const ImuSample& u : window) sbar += u.s;
    sbar /= static_cast<double>(window.size());
    if (sbar.norm() < 1e-6) {
        throw DegenerateWindow("shoe_statistic: mean specific force near zero");
    }
    const Vec3 grav_dir = cfg.g_mag * sbar.normalized();
    double acc = 0.0;
    for (const ImuSample& u : window) {
        acc += (u.s - grav_dir).squaredNorm() / (cfg.sigma_a * cfg.sigma_a) +
               u.w.squaredNorm() / (cfg.sigma_g * cfg.sigma_g);
    }
    return acc / static_cast<double>(window.size());
}

// Single-filter ZUPT-aided INS: strapdown prediction every sample, and a
// velocity-only pseudo-measurement (z = -v) whenever the trailing detector
// window fires. Emits the same record format as the filter-bank runner,
// with map_mode 3 during detected stance and 1 otherwise.
inline std::vector<TrajRecord> run_zupt_ins(std::span<const ImuSample> data,
                                            const DetectorConfig& det,
                                            const NoiseConfig& noise,
                                            const GaussianBelief& prior) {
    det.validate();
    noise.validate();
    if (prior.dim() != 9) throw ConfigError("run_zupt_ins: prior must be 9-dimensional");

    GaussianBelief belief = prior;
    std::vector<TrajRecord> out;
    out.reserve(data.size());

    double last_t = 0.0;
    bool have_t = false;
    for (size_t k = 0; k < data.size(); ++k) {
        const ImuSample& u = data[k];
        double dt = noise.dt;
        if (have_t) {
            const double dts = u.t - last_t;
            if (dts > 0.0 && dts <= 0.1) dt = dts;
        }
        last_t = u.t;
        have_t = true;

        belief = predict(belief, u, noise, dt);

        bool stance = false;
        if (k + 1 >= static_cast<size_t>(det.window)) {
            const auto win = data.subspan(k + 1 - det.window, det.window);
            stance = shoe_statistic(win, det) < det.gamma;
        }

        double ll = 0.0;
        if (stance) {
            Constraint c;
            c.z = -belief.mean.v;
            c.H = ErrMat::Zero(3, 9);
            c.H.block<3, 3>(0, 3) = Mat3::Identity();
            c.R = det.zupt_sigma_v * det.zupt_sigma_v * ErrMat::Identity(3, 3);
            auto res = update(belief, c);
            belief = res.first;
            ll = res.second;
        }

        TrajRecord rec;
        rec.t = u.t;
        rec.x = belief.mean;
        rec.euler = euler_from_quat(belief.mean.q);
        rec.map_mode = stance ? 3 : 1;
        rec.mode_posterior = Eigen::VectorXd::Zero(3);
        rec.mode_posterior(stance ? 2 : 0) = 1.0;
        rec.loglik_inc = ll;
        out.push_back(std::move(rec));
    }
    return out;
}

}  // namespace fbnav

#endif  // FBNAV_BASELINE_HPP
