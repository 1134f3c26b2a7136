#ifndef FBNAV_STRAPDOWN_HPP
#define FBNAV_STRAPDOWN_HPP

#include <cmath>
#include <utility>

#include "fbnav/core.hpp"
#include "fbnav/errors.hpp"

namespace fbnav {

// Continuous navigation state: position, velocity, body-to-nav attitude and
// an auxiliary height reference used only by the extended (same-height)
// model. Error-state ordering everywhere: [dr(3), dv(3), dtheta(3), dxi].
struct NavState {
    Vec3 r = Vec3::Zero();   // m, navigation frame (z up)
    Vec3 v = Vec3::Zero();   // m/s
    Quat q = Quat::Identity();
    double xi = 0.0;         // m, height reference

    bool finite() const {
        return r.allFinite() && v.allFinite() && q.coeffs().allFinite() &&
               std::isfinite(xi);
    }
};

struct ImuSample {
    double t = 0.0;          // s
    Vec3 s = Vec3::Zero();   // m/s^2 specific force, body frame
    Vec3 w = Vec3::Zero();   // rad/s angular rate, body frame
};

struct NoiseConfig {
    double sigma_s = 0.05;   // m/s^2 accelerometer noise std
    double sigma_w = 0.005;  // rad/s gyroscope noise std
    double dt = 0.01;        // s nominal sampling period
    Vec3 g = Vec3(0.0, 0.0, -9.81);

    void validate() const {
        if (!(sigma_s > 0.0) || !(sigma_w > 0.0) || !(dt > 0.0)) {
            throw ConfigError("NoiseConfig: sigma_s, sigma_w, dt must be > 0");
        }
    }
};

inline double checked_dt(double dt) {
    if (!(dt > 0.0) || dt > 0.1) {
        throw ConfigError("strapdown: dt must lie in (0, 0.1] s");
    }
    return dt;
}

// One step of inertial mechanization with zero process noise:
//   r' = r + dt*v,  v' = v + dt*(C(q)s + g),  q' = q (x) exp(dt*w).
// xi is passed through; its mode-dependent update lives with the motion
// models.
inline NavState propagate(const NavState& x, const ImuSample& u,
                          const NoiseConfig& cfg, double dt = -1.0) {
    const double h = checked_dt(dt > 0.0 ? dt : cfg.dt);
    NavState out;
    out.r = x.r + h * x.v;
    out.v = x.v + h * (rotmat_from_quat(x.q) * u.s + cfg.g);
    out.q = quat_increment(x.q, h * u.w);
    out.xi = x.xi;
    return out;
}

// Linearized error-state transition for [dr, dv, dtheta (, dxi)]:
//   dr'  = dr + dt*dv
//   dv'  = dv - dt*[C(q)s]_x dtheta
//   dth' = dtheta
//   dxi' = dxi
// Process noise enters the velocity rows through the accelerometers and the
// attitude rows through the gyroscopes, both rotated into the navigation
// frame.
inline std::pair<ErrMat, ErrMat> error_transition(const NavState& x,
                                                  const ImuSample& u,
                                                  const NoiseConfig& cfg,
                                                  int dim = 9,
                                                  double dt = -1.0) {
    const double h = checked_dt(dt > 0.0 ? dt : cfg.dt);
    const Mat3 C = rotmat_from_quat(x.q);
    ErrMat F = ErrMat::Identity(dim, dim);
    F.block<3, 3>(0, 3) = h * Mat3::Identity();
    F.block<3, 3>(3, 6) = -h * skew(C * u.s);

    ErrMat Q = ErrMat::Zero(dim, dim);
    const Mat3 CCt = C * C.transpose();
    Q.block<3, 3>(3, 3) = (h * cfg.sigma_s) * (h * cfg.sigma_s) * CCt;
    Q.block<3, 3>(6, 6) = (h * cfg.sigma_w) * (h * cfg.sigma_w) * CCt;
    return {F, Q};
}

}  // namespace fbnav

#endif  // FBNAV_STRAPDOWN_HPP
