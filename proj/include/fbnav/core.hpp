#ifndef FBNAV_CORE_HPP
#define FBNAV_CORE_HPP

#include <Eigen/Dense>
#include <cmath>

#include "fbnav/errors.hpp"

// Geometric conventions used throughout:
//  - quaternions are scalar-first (w, x, y, z), Hamilton product, and
//    parameterize the body-to-navigation rotation C(q);
//  - Euler angles are intrinsic Z-Y-X (yaw, pitch, roll) with
//    yaw, roll in [0, 2*pi) and pitch in [-pi/2, pi/2);
//  - attitude error is a small rotation applied on the navigation side,
//    C_true = (I + [dtheta]_x) C(q_hat).

namespace fbnav {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;  // scalar-first constructor (w, x, y, z)

// Dynamic vectors/matrices bounded at the largest error-state size (10);
// keeps branch beliefs heap-free.
using ErrVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 10, 1>;
using ErrMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 10, 10>;

constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 2.0 * kPi;

inline double wrap_2pi(double a) {
    a = std::fmod(a, kTwoPi);
    if (a < 0.0) a += kTwoPi;
    return a;
}

inline double wrap_pm_pi(double a) {
    a = std::fmod(a + kPi, kTwoPi);
    if (a < 0.0) a += kTwoPi;
    return a - kPi;
}

struct EulerAngles {
    double yaw = 0.0;    // [0, 2*pi)
    double pitch = 0.0;  // [-pi/2, pi/2)
    double roll = 0.0;   // [0, 2*pi)

    Vec3 vec() const { return Vec3(yaw, pitch, roll); }
};

inline Mat3 skew(const Vec3& v) {
    Mat3 m;
    m << 0.0, -v.z(), v.y(),
         v.z(), 0.0, -v.x(),
         -v.y(), v.x(), 0.0;
    return m;
}

// Exponential map: rotation vector -> unit quaternion.
inline Quat quat_exp(const Vec3& dtheta) {
    const double angle = dtheta.norm();
    if (angle < 1e-12) {
        Quat q(1.0, 0.5 * dtheta.x(), 0.5 * dtheta.y(), 0.5 * dtheta.z());
        q.normalize();
        return q;
    }
    const double half = 0.5 * angle;
    const double s = std::sin(half) / angle;
    Quat q(std::cos(half), s * dtheta.x(), s * dtheta.y(), s * dtheta.z());
    q.normalize();
    return q;
}

// Logarithm map: unit quaternion -> rotation vector in [0, pi].
inline Vec3 quat_log(const Quat& q_in) {
    Quat q = q_in.normalized();
    if (q.w() < 0.0) q.coeffs() *= -1.0;
    const Vec3 v(q.x(), q.y(), q.z());
    const double n = v.norm();
    if (n < 1e-12) return 2.0 * v;
    const double angle = 2.0 * std::atan2(n, q.w());
    return (angle / n) * v;
}

inline Mat3 rotmat_from_quat(const Quat& q) {
    return q.normalized().toRotationMatrix();
}

// Body-frame increment: rotates q by angle |dtheta| about axis dtheta/|dtheta|
// expressed in the body frame (the strapdown attitude update).
inline Quat quat_increment(const Quat& q, const Vec3& dtheta) {
    if (dtheta.norm() < 1e-12) return q.normalized();
    Quat out = q * quat_exp(dtheta);
    out.normalize();
    return out;
}

// Navigation-frame error fold-back: C_new = (I + [dtheta]_x) C(q).
inline Quat apply_error_rotation(const Vec3& dtheta, const Quat& q) {
    Quat out = quat_exp(dtheta) * q;
    out.normalize();
    return out;
}

inline Mat3 rotmat_from_euler(const EulerAngles& e) {
    return (Eigen::AngleAxisd(e.yaw, Vec3::UnitZ()) *
            Eigen::AngleAxisd(e.pitch, Vec3::UnitY()) *
            Eigen::AngleAxisd(e.roll, Vec3::UnitX()))
        .toRotationMatrix();
}

inline Quat quat_from_euler(const EulerAngles& e) {
    Quat q = Eigen::AngleAxisd(e.yaw, Vec3::UnitZ()) *
             Eigen::AngleAxisd(e.pitch, Vec3::UnitY()) *
             Eigen::AngleAxisd(e.roll, Vec3::UnitX());
    q.normalize();
    return q;
}

inline EulerAngles euler_from_rotmat(const Mat3& C) {
    const double sp = -C(2, 0);
    const double pitch = std::asin(std::min(1.0, std::max(-1.0, sp)));
    if (std::abs(std::abs(pitch) - 0.5 * kPi) < 1e-6) {
        throw GimbalLock("euler_from_rotmat: pitch within 1e-6 of +/- pi/2");
    }
    EulerAngles e;
    e.pitch = pitch;
    e.yaw = wrap_2pi(std::atan2(C(1, 0), C(0, 0)));
    e.roll = wrap_2pi(std::atan2(C(2, 1), C(2, 2)));
    return e;
}

inline EulerAngles euler_from_quat(const Quat& q) {
    return euler_from_rotmat(rotmat_from_quat(q));
}

// Signed Euler residual of a near-identity relative rotation, each component
// wrapped to (-pi, pi]. Used for mixture spread terms where the [0, 2*pi)
// convention would destroy small negative angles.
inline Vec3 euler_residual(const Mat3& C_rel) {
    const EulerAngles e = euler_from_rotmat(C_rel);
    return Vec3(wrap_pm_pi(e.yaw), e.pitch, wrap_pm_pi(e.roll));
}

// Closest rotation to M in Frobenius norm with det +1 (polar decomposition).
// When the orthogonal polar factor has det -1, the sign is flipped along the
// smallest singular direction; if the two smallest singular values coincide
// the minimizer is not unique.
inline Mat3 polar_project(const Mat3& M) {
    Eigen::JacobiSVD<Mat3> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vec3 sv = svd.singularValues();
    Mat3 U = svd.matrixU();
    Mat3 V = svd.matrixV();
    const double d = (U * V.transpose()).determinant();
    if (d < 0.0) {
        if (sv(1) - sv(2) < 1e-12) {
            throw DegenerateInput(
                "polar_project: sign flip required with equal smallest "
                "singular values; nearest rotation not unique");
        }
        U.col(2) *= -1.0;
    }
    return U * V.transpose();
}

// Symmetrize in place; covariance hygiene after every product update.
template <typename Derived>
inline void symmetrize(Eigen::MatrixBase<Derived>& P) {
    P = 0.5 * (P + P.transpose()).eval();
}

}  // namespace fbnav

#endif  // FBNAV_CORE_HPP
