#ifndef FBNAV_FILTERBANK_HPP
#define FBNAV_FILTERBANK_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "fbnav/core.hpp"
#include "fbnav/errors.hpp"
#include "fbnav/eskf.hpp"
#include "fbnav/motion_models.hpp"
#include "fbnav/strapdown.hpp"

namespace fbnav {

// One hypothesis: a mode sequence tail, its current mode, the conditional
// belief, and the log of the normalized sequence probability.
struct Branch {
    GaussianBelief belief;
    int mode = 1;
    double log_w = 0.0;
    std::vector<int> history;  // bounded tail of recent modes

    static constexpr size_t kHistoryCap = 256;

    void push_mode(int m) {
        history.push_back(m);
        if (history.size() > kHistoryCap) history.erase(history.begin());
    }
};

// Minimum-variance fusion of the branch mixture. The Euclidean sub-state
// (r, v and xi when present) is fused directly; attitude is fused on the
// rotation manifold via the polar projection of the weighted rotation sum.
struct FusedEstimate {
    NavState x_mv;
    ErrMat P_mv;               // Euclidean sub-state covariance (6x6 or 7x7)
    EulerAngles euler;
    Mat3 euler_cov;
    Eigen::VectorXd mode_posterior;
    int map_mode = 1;
};

class FilterBank {
  public:
    FilterBank(MotionModel model, NoiseConfig cfg, const GaussianBelief& prior,
               const Eigen::VectorXd& mode_prior, int max_leaves = 9)
        : model_(std::move(model)), cfg_(cfg), max_leaves_(max_leaves) {
        cfg_.validate();
        if (max_leaves_ < 1) throw ConfigError("FilterBank: max_leaves must be >= 1");
        if (mode_prior.size() != model_.num_modes) {
            throw ConfigError("FilterBank: mode prior size does not match model");
        }
        if (prior.dim() != model_.err_dim) {
            throw ConfigError("FilterBank: prior covariance dimension mismatch");
        }
        double sum = 0.0;
        for (int i = 0; i < mode_prior.size(); ++i) {
            if (mode_prior(i) < 0.0) throw ConfigError("FilterBank: negative mode prior");
            sum += mode_prior(i);
        }
        if (std::abs(sum - 1.0) > 1e-9) {
            throw ConfigError("FilterBank: mode prior must sum to 1");
        }
        for (int m = 1; m <= model_.num_modes; ++m) {
            if (mode_prior(m - 1) <= 0.0) continue;
            Branch b;
            b.belief = prior;
            b.mode = m;
            b.log_w = std::log(mode_prior(m - 1));
            b.push_mode(m);
            branches_.push_back(std::move(b));
        }
    }

    // One sample: expand every leaf over the admissible next modes, apply the
    // child mode's pseudo-measurement, update the weight recursion in the log
    // domain, then prune back to the leaf budget.
    void step(const ImuSample& u) {
        double dt = cfg_.dt;
        if (have_last_t_) {
            const double dts = u.t - last_t_;
            if (dts > 0.0 && dts <= 0.1) dt = dts;
        }
        last_t_ = u.t;
        have_last_t_ = true;

        std::vector<Branch> children;
        children.reserve(branches_.size() * static_cast<size_t>(model_.num_modes));
        for (const Branch& b : branches_) {
            GaussianBelief pred;
            try {
                pred = predict(b.belief, u, cfg_, dt, model_.dynamics(b.mode));
            } catch (const std::runtime_error& e) {
                throw NumericalBlowup(branch_context(b) + ": " + e.what());
            }
            for (int m = 1; m <= model_.num_modes; ++m) {
                const double p = model_.transition_prob(m, b.mode);
                if (p <= 0.0) continue;
                Constraint c = model_.constraint(m, pred.mean, u);
                std::pair<GaussianBelief, double> res;
                try {
                    res = update(pred, c);
                } catch (const SingularInnovation& e) {
                    throw SingularInnovation(branch_context(b) + ": " + e.what());
                }
                Branch child;
                child.belief = std::move(res.first);
                child.mode = m;
                child.log_w = b.log_w + std::log(p) + res.second;
                child.history = b.history;
                child.push_mode(m);
                children.push_back(std::move(child));
            }
        }

        double max_lw = -std::numeric_limits<double>::infinity();
        for (const Branch& c : children) max_lw = std::max(max_lw, c.log_w);
        if (!(max_lw > -700.0)) {
            throw AllBranchesDead("step " + std::to_string(step_count_) +
                                  ": every branch weight underflowed");
        }
        double acc = 0.0;
        for (const Branch& c : children) acc += std::exp(c.log_w - max_lw);
        const double lse = max_lw + std::log(acc);
        for (Branch& c : children) c.log_w -= lse;

        branches_ = std::move(children);
        last_increment_ = lse;
        prune();
        ++step_count_;
    }

    // Keep the max_leaves most probable branches; ties broken toward the
    // lower mode index, then insertion order.
    void prune() {
        if (branches_.size() <= static_cast<size_t>(max_leaves_)) return;
        std::stable_sort(branches_.begin(), branches_.end(),
                         [](const Branch& a, const Branch& b) {
                             if (a.log_w != b.log_w) return a.log_w > b.log_w;
                             return a.mode < b.mode;
                         });
        branches_.resize(static_cast<size_t>(max_leaves_));
        double max_lw = -std::numeric_limits<double>::infinity();
        for (const Branch& b : branches_) max_lw = std::max(max_lw, b.log_w);
        double acc = 0.0;
        for (const Branch& b : branches_) acc += std::exp(b.log_w - max_lw);
        const double lse = max_lw + std::log(acc);
        for (Branch& b : branches_) b.log_w -= lse;
    }

    FusedEstimate fuse() const {
        const int L = model_.num_modes;
        const int ed = model_.err_dim == 10 ? 7 : 6;  // Euclidean sub-state

        FusedEstimate out;
        out.mode_posterior = Eigen::VectorXd::Zero(L);

        Eigen::VectorXd mean_e = Eigen::VectorXd::Zero(ed);
        Mat3 Msum = Mat3::Zero();
        std::vector<double> w(branches_.size());
        std::vector<Eigen::VectorXd> eucl(branches_.size());
        for (size_t i = 0; i < branches_.size(); ++i) {
            const Branch& b = branches_[i];
            w[i] = std::exp(b.log_w);
            Eigen::VectorXd e(ed);
            e.segment<3>(0) = b.belief.mean.r;
            e.segment<3>(3) = b.belief.mean.v;
            if (ed == 7) e(6) = b.belief.mean.xi;
            eucl[i] = e;
            mean_e += w[i] * e;
            Msum += w[i] * rotmat_from_quat(b.belief.mean.q);
            out.mode_posterior(b.mode - 1) += w[i];
        }

        const Mat3 C_mv = polar_project(Msum);
        out.euler = euler_from_rotmat(C_mv);

        out.P_mv = ErrMat::Zero(ed, ed);
        out.euler_cov = Mat3::Zero();
        for (size_t i = 0; i < branches_.size(); ++i) {
            const Branch& b = branches_[i];
            ErrMat Pe = ErrMat::Zero(ed, ed);
            Pe.block(0, 0, 6, 6) = b.belief.cov.block(0, 0, 6, 6);
            if (ed == 7) {
                Pe.block(0, 6, 6, 1) = b.belief.cov.block(0, 9, 6, 1);
                Pe.block(6, 0, 1, 6) = b.belief.cov.block(9, 0, 1, 6);
                Pe(6, 6) = b.belief.cov(9, 9);
            }
            const Eigen::VectorXd d = eucl[i] - mean_e;
            out.P_mv += w[i] * (Pe + (d * d.transpose()).eval());

            const Mat3 Ci = rotmat_from_quat(b.belief.mean.q);
            const Vec3 dphi = euler_residual(C_mv * Ci.transpose());
            const Mat3 J = euler_error_jacobian(b.belief.mean.q);
            const Mat3 Sigma_i =
                J * b.belief.cov.block<3, 3>(6, 6) * J.transpose();
            out.euler_cov += w[i] * (Sigma_i + dphi * dphi.transpose());
        }
        symmetrize(out.P_mv);
        symmetrize(out.euler_cov);

        out.x_mv.r = mean_e.segment<3>(0);
        out.x_mv.v = mean_e.segment<3>(3);
        out.x_mv.xi = ed == 7 ? mean_e(6) : 0.0;
        out.x_mv.q = Quat(C_mv).normalized();

        out.map_mode = 1;
        for (int m = 2; m <= L; ++m) {
            if (out.mode_posterior(m - 1) > out.mode_posterior(out.map_mode - 1)) {
                out.map_mode = m;
            }
        }
        return out;
    }

    const std::vector<Branch>& branches() const { return branches_; }
    const MotionModel& model() const { return model_; }
    const NoiseConfig& noise() const { return cfg_; }
    int max_leaves() const { return max_leaves_; }
    long step_count() const { return step_count_; }
    // log p(y_k | y_{1:k-1}) of the most recent step (pruned-bank value).
    double last_loglik_increment() const { return last_increment_; }

    // Jacobian of the Euler angles w.r.t. the navigation-frame attitude
    // error at q, by central differences.
    static Mat3 euler_error_jacobian(const Quat& q, double eps = 1e-6) {
        Mat3 J;
        for (int k = 0; k < 3; ++k) {
            Vec3 dth = Vec3::Zero();
            dth(k) = eps;
            const Mat3 Cp = rotmat_from_quat(apply_error_rotation(dth, q));
            const Mat3 Cm = rotmat_from_quat(apply_error_rotation(-dth, q));
            const Vec3 ep = euler_from_rotmat(Cp).vec();
            const Vec3 em = euler_from_rotmat(Cm).vec();
            for (int r = 0; r < 3; ++r) {
                J(r, k) = wrap_pm_pi(ep(r) - em(r)) / (2.0 * eps);
            }
        }
        return J;
    }

  private:
    std::string branch_context(const Branch& b) const {
        return "branch mode " + std::to_string(b.mode) + " at step " +
               std::to_string(step_count_);
    }

    MotionModel model_;
    NoiseConfig cfg_;
    std::vector<Branch> branches_;
    int max_leaves_;
    long step_count_ = 0;
    double last_t_ = 0.0;
    bool have_last_t_ = false;
    double last_increment_ = 0.0;
};

// Coarse-alignment prior from an assumed-stationary window: roll and pitch
// from the mean specific force, yaw zero, position and velocity zero.
struct AlignmentConfig {
    double std_r = 1e-3;    // m
    double std_v = 1e-2;    // m/s
    double std_att = 1e-2;  // rad, roll/pitch
    double std_yaw = 1e-2;  // rad
    double std_xi = 1e-3;   // m
};

inline GaussianBelief initial_alignment(std::span<const ImuSample> window,
                                        int err_dim,
                                        const AlignmentConfig& ac = {}) {
    if (window.empty()) throw ConfigError("initial_alignment: empty window");
    Vec3 sbar = Vec3::Zero();
    for (const ImuSample& u : window) sbar += u.s;
    sbar /= static_cast<double>(window.size());
    const double n = sbar.norm();
    if (n < 1e-6) throw ConfigError("initial_alignment: degenerate specific force");

    EulerAngles e;
    e.yaw = 0.0;
    e.pitch = std::asin(std::min(1.0, std::max(-1.0, -sbar.x() / n)));
    e.roll = wrap_2pi(std::atan2(sbar.y(), sbar.z()));

    GaussianBelief b;
    b.mean.q = quat_from_euler(e);
    b.mean.r = Vec3::Zero();
    b.mean.v = Vec3::Zero();
    b.mean.xi = 0.0;
    b.cov = ErrMat::Zero(err_dim, err_dim);
    b.cov.block<3, 3>(0, 0) = ac.std_r * ac.std_r * Mat3::Identity();
    b.cov.block<3, 3>(3, 3) = ac.std_v * ac.std_v * Mat3::Identity();
    b.cov(6, 6) = ac.std_att * ac.std_att;
    b.cov(7, 7) = ac.std_att * ac.std_att;
    b.cov(8, 8) = ac.std_yaw * ac.std_yaw;
    if (err_dim == 10) b.cov(9, 9) = ac.std_xi * ac.std_xi;
    return b;
}

}  // namespace fbnav

#endif  // FBNAV_FILTERBANK_HPP
