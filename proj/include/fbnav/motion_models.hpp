#ifndef FBNAV_MOTION_MODELS_HPP
#define FBNAV_MOTION_MODELS_HPP

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "fbnav/core.hpp"
#include "fbnav/errors.hpp"
#include "fbnav/eskf.hpp"

namespace fbnav {

using BoolMat = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

// Column-stochastic mode transition matrix: pi(i-1, j-1) = p(next=i | cur=j).
// mask marks admissible transitions (hard structural zeros elsewhere);
// pinned marks edges fixed at probability exactly 1.
struct TransitionMatrix {
    Eigen::MatrixXd pi;
    BoolMat mask;
    BoolMat pinned;

    int modes() const { return static_cast<int>(pi.cols()); }

    static TransitionMatrix unmasked(const Eigen::MatrixXd& p) {
        TransitionMatrix t;
        t.pi = p;
        t.mask = BoolMat::Constant(p.rows(), p.cols(), true);
        t.pinned = BoolMat::Constant(p.rows(), p.cols(), false);
        return t;
    }

    void validate() const {
        const int L = modes();
        if (pi.rows() != L || mask.rows() != L || mask.cols() != L ||
            pinned.rows() != L || pinned.cols() != L) {
            throw ConfigError("TransitionMatrix: inconsistent dimensions");
        }
        for (int j = 0; j < L; ++j) {
            double colsum = 0.0;
            for (int i = 0; i < L; ++i) {
                const double p = pi(i, j);
                if (p < 0.0 || p > 1.0) {
                    throw ConfigError("TransitionMatrix: entry outside [0, 1]");
                }
                if (!mask(i, j) && p != 0.0) {
                    throw ConfigError("TransitionMatrix: nonzero entry under structural zero");
                }
                if (pinned(i, j) && p != 1.0) {
                    throw ConfigError("TransitionMatrix: pinned entry must be exactly 1");
                }
                colsum += p;
            }
            if (std::abs(colsum - 1.0) > 1e-12) {
                throw ConfigError("TransitionMatrix: column does not sum to 1");
            }
        }
    }
};

// One concrete jump Markov model: mode count, per-mode pseudo-measurement
// builders, per-mode xi dynamics, transition structure. Modes are 1-based.
struct MotionModel {
    int num_modes = 0;
    int err_dim = 9;
    TransitionMatrix trans;
    Vec3 g = Vec3(0.0, 0.0, -9.81);
    std::vector<std::function<Constraint(const NavState&, const ImuSample&)>>
        constraint_builders;             // index mode-1
    std::vector<ModeDynamics> mode_dynamics;  // index mode-1

    Constraint constraint(int mode, const NavState& x, const ImuSample& u) const {
        return constraint_builders.at(static_cast<size_t>(mode - 1))(x, u);
    }
    const ModeDynamics& dynamics(int mode) const {
        return mode_dynamics.at(static_cast<size_t>(mode - 1));
    }
    double transition_prob(int next_mode, int cur_mode) const {
        return trans.pi(next_mode - 1, cur_mode - 1);
    }
};

// Stationarity constraint h0 = [v; w; C(q)s + g] evaluated in innovation
// form z = 0 - h0. Jacobian rows w.r.t. [dr, dv, dtheta, ...]:
// velocity rows I on dv, angular-rate rows zero (input only), specific-force
// rows -[C(q)s]_x on dtheta.
inline std::pair<ErrVec, ErrMat> h0(const NavState& x, const ImuSample& u,
                                    const Vec3& g, int err_dim = 9) {
    const Mat3 C = rotmat_from_quat(x.q);
    ErrVec z = ErrVec::Zero(9);
    z.segment<3>(0) = -x.v;
    z.segment<3>(3) = -u.w;
    z.segment<3>(6) = -(C * u.s + g);

    ErrMat H = ErrMat::Zero(9, err_dim);
    H.block<3, 3>(0, 3) = Mat3::Identity();
    H.block<3, 3>(6, 6) = -skew(C * u.s);
    return {z, H};
}

namespace detail {

inline ErrMat r0_block(double var_v, double var_w, double var_s) {
    ErrMat R = ErrMat::Zero(9, 9);
    R.block<3, 3>(0, 0) = var_v * Mat3::Identity();
    R.block<3, 3>(3, 3) = var_w * Mat3::Identity();
    R.block<3, 3>(6, 6) = var_s * Mat3::Identity();
    return R;
}

inline Constraint unconstrained(double var_nc, int err_dim) {
    Constraint c;
    c.z = ErrVec::Zero(9);
    c.H = ErrMat::Zero(9, err_dim);
    c.R = var_nc * ErrMat::Identity(9, 9);
    return c;
}

}  // namespace detail

// Varying gait speed model: unconstrained (1), almost stationary (2),
// stationary (3). Admissible transitions are the self loops plus
// 1<->2 and 2<->3; no direct edge between 1 and 3.
struct VaryingGaitParams {
    // Stds of the stochastic constraints; mode 2 must be softer than mode 3.
    double sigma_v3 = 0.01;  // m/s
    double sigma_w3 = 0.05;  // rad/s
    double sigma_s3 = 0.3;   // m/s^2
    double sigma_v2 = 0.1;
    double sigma_w2 = 0.5;
    double sigma_s2 = 3.0;
    double sigma_nc = 1.0;   // no-constraint likelihood design parameter
    Vec3 g = Vec3(0.0, 0.0, -9.81);
};

inline BoolMat varying_gait_mask() {
    BoolMat m = BoolMat::Constant(3, 3, false);
    m(0, 0) = m(1, 0) = true;            // from unconstrained
    m(0, 1) = m(1, 1) = m(2, 1) = true;  // from almost stationary
    m(1, 2) = m(2, 2) = true;            // from stationary
    return m;
}

inline Eigen::MatrixXd default_varying_gait_pi() {
    Eigen::MatrixXd p(3, 3);
    p << 0.993, 0.073, 0.0,
         0.007, 0.893, 0.005,
         0.0,   0.034, 0.995;
    return p;
}

inline MotionModel varying_gait_model(const VaryingGaitParams& prm,
                                      Eigen::MatrixXd pi = Eigen::MatrixXd()) {
    for (double s : {prm.sigma_v3, prm.sigma_w3, prm.sigma_s3, prm.sigma_v2,
                     prm.sigma_w2, prm.sigma_s2, prm.sigma_nc}) {
        if (!(s > 0.0)) throw ConfigError("varying_gait_model: variances must be positive");
    }
    if (!(prm.sigma_v2 > prm.sigma_v3 && prm.sigma_w2 > prm.sigma_w3 &&
          prm.sigma_s2 > prm.sigma_s3)) {
        throw ConfigError(
            "varying_gait_model: mode-2 constraint stds must exceed mode-3 stds");
    }

    MotionModel m;
    m.num_modes = 3;
    m.err_dim = 9;
    m.g = prm.g;
    m.trans.mask = varying_gait_mask();
    m.trans.pinned = BoolMat::Constant(3, 3, false);
    m.trans.pi = pi.size() == 0 ? default_varying_gait_pi() : pi;
    m.trans.validate();

    const Vec3 g = prm.g;
    m.constraint_builders.push_back(
        [var = prm.sigma_nc * prm.sigma_nc](const NavState&, const ImuSample&) {
            return detail::unconstrained(var, 9);
        });
    auto h0_mode = [g](double sv, double sw, double ss) {
        return [g, sv, sw, ss](const NavState& x, const ImuSample& u) {
            Constraint c;
            std::tie(c.z, c.H) = h0(x, u, g, 9);
            c.R = detail::r0_block(sv * sv, sw * sw, ss * ss);
            return c;
        };
    };
    m.constraint_builders.push_back(h0_mode(prm.sigma_v2, prm.sigma_w2, prm.sigma_s2));
    m.constraint_builders.push_back(h0_mode(prm.sigma_v3, prm.sigma_w3, prm.sigma_s3));
    m.mode_dynamics.assign(3, ModeDynamics{});
    return m;
}

// Return-to-same-height model: unconstrained (1), stationary at new height
// (2), stationary at same height (3). xi stores the height from the last
// stationary sample; mode 3 adds the row [r]_3 - xi. The 2 -> 3 edge is
// pinned to probability 1.
struct SameHeightParams {
    double sigma_v = 0.01;   // m/s
    double sigma_w = 0.05;   // rad/s
    double sigma_s = 0.3;    // m/s^2
    double sigma_h = 0.01;   // m
    double sigma_nc = 1.0;
    Vec3 g = Vec3(0.0, 0.0, -9.81);
};

inline BoolMat same_height_mask() {
    BoolMat m = BoolMat::Constant(3, 3, false);
    m(0, 0) = m(1, 0) = m(2, 0) = true;  // from unconstrained
    m(2, 1) = true;                      // stationarity lasts >= 2 samples
    m(0, 2) = m(2, 2) = true;            // from same height
    return m;
}

inline Eigen::MatrixXd default_same_height_pi() {
    Eigen::MatrixXd p(3, 3);
    p << 0.976, 0.0, 0.031,
         0.003, 0.0, 0.0,
         0.021, 1.0, 0.969;
    return p;
}

inline MotionModel same_height_model(const SameHeightParams& prm,
                                     Eigen::MatrixXd pi = Eigen::MatrixXd()) {
    for (double s : {prm.sigma_v, prm.sigma_w, prm.sigma_s, prm.sigma_h, prm.sigma_nc}) {
        if (!(s > 0.0)) throw ConfigError("same_height_model: variances must be positive");
    }

    MotionModel m;
    m.num_modes = 3;
    m.err_dim = 10;
    m.g = prm.g;
    m.trans.mask = same_height_mask();
    m.trans.pinned = BoolMat::Constant(3, 3, false);
    m.trans.pinned(2, 1) = true;
    m.trans.pi = pi.size() == 0 ? default_same_height_pi() : pi;
    m.trans.validate();

    const Vec3 g = prm.g;
    m.constraint_builders.push_back(
        [var = prm.sigma_nc * prm.sigma_nc](const NavState&, const ImuSample&) {
            return detail::unconstrained(var, 10);
        });
    m.constraint_builders.push_back(
        [g, prm](const NavState& x, const ImuSample& u) {
            Constraint c;
            std::tie(c.z, c.H) = h0(x, u, g, 10);
            c.R = detail::r0_block(prm.sigma_v * prm.sigma_v,
                                   prm.sigma_w * prm.sigma_w,
                                   prm.sigma_s * prm.sigma_s);
            return c;
        });
    m.constraint_builders.push_back(
        [g, prm](const NavState& x, const ImuSample& u) {
            auto [z9, H9] = h0(x, u, g, 10);
            Constraint c;
            c.z = ErrVec::Zero(10);
            c.z.segment<9>(0) = z9;
            c.z(9) = -(x.r.z() - x.xi);
            c.H = ErrMat::Zero(10, 10);
            c.H.block(0, 0, 9, 10) = H9;
            c.H(9, 2) = 1.0;
            c.H(9, 9) = -1.0;
            c.R = ErrMat::Zero(10, 10);
            c.R.block(0, 0, 9, 9) = detail::r0_block(
                prm.sigma_v * prm.sigma_v, prm.sigma_w * prm.sigma_w,
                prm.sigma_s * prm.sigma_s);
            c.R(9, 9) = prm.sigma_h * prm.sigma_h;
            return c;
        });

    m.mode_dynamics.assign(3, ModeDynamics{});
    m.mode_dynamics[1].xi_tracks_height = true;
    m.mode_dynamics[2].xi_tracks_height = true;
    return m;
}

}  // namespace fbnav

#endif  // FBNAV_MOTION_MODELS_HPP
