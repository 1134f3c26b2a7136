#ifndef FBNAV_ESKF_HPP
#define FBNAV_ESKF_HPP

#include <cmath>
#include <utility>

#include "fbnav/core.hpp"
#include "fbnav/errors.hpp"
#include "fbnav/strapdown.hpp"

namespace fbnav {

// Error-state covariance dimension is 9 (dr, dv, dtheta) or 10 (plus dxi).
struct GaussianBelief {
    NavState mean;
    ErrMat cov;

    int dim() const { return static_cast<int>(cov.rows()); }
};

// Pseudo-measurement in innovation form: z = y - h(x_hat, u), y == 0.
// H is the Jacobian of h with respect to the error state. Rows of h that
// depend only on the input (e.g. the angular-rate rows) carry zero H rows:
// they still enter the likelihood but never the state correction.
struct Constraint {
    ErrVec z;
    ErrMat H;   // rows x err_dim
    ErrMat R;   // rows x rows, symmetric positive definite
};

// Mode-dependent piece of the state transition. With xi_tracks_height the
// auxiliary state is overwritten by the pre-propagation height, which in the
// error state is the deterministic assignment dxi' = dr_z.
struct ModeDynamics {
    bool xi_tracks_height = false;
};

inline GaussianBelief predict(const GaussianBelief& b, const ImuSample& u,
                              const NoiseConfig& cfg, double dt = -1.0,
                              const ModeDynamics& dyn = {}) {
    const int d = b.dim();
    auto [F, Q] = error_transition(b.mean, u, cfg, d, dt);

    GaussianBelief out;
    out.mean = propagate(b.mean, u, cfg, dt);
    if (dyn.xi_tracks_height) {
        if (d != 10) throw ConfigError("predict: xi dynamics need a 10-dim error state");
        out.mean.xi = b.mean.r.z();
        F.row(9).setZero();
        F(9, 2) = 1.0;
    }
    out.cov = F * b.cov * F.transpose() + Q;
    symmetrize(out.cov);

    if (out.cov.diagonal().maxCoeff() > 1e12) {
        throw NumericalBlowup("predict: covariance diagonal exceeded 1e12");
    }
    return out;
}

// Kalman update of the error state with Joseph-form covariance, followed by
// folding the error mean back into the nominal state (additive for r, v, xi;
// multiplicative on the navigation side for attitude) and resetting it to
// zero. Returns the posterior belief and log N(z; 0, S), S = H P H^T + R.
inline std::pair<GaussianBelief, double> update(const GaussianBelief& b,
                                                const Constraint& c) {
    const int d = b.dim();
    const int m = static_cast<int>(c.z.size());
    if (c.H.rows() != m || c.H.cols() != d || c.R.rows() != m || c.R.cols() != m) {
        throw ConfigError("update: constraint dimensions do not match belief");
    }

    ErrMat S = c.H * b.cov * c.H.transpose() + c.R;
    symmetrize(S);
    Eigen::LLT<ErrMat> llt(S);
    if (llt.info() != Eigen::Success) {
        throw SingularInnovation("update: innovation covariance not SPD");
    }
    const ErrMat L = llt.matrixL();
    const double lmin = L.diagonal().minCoeff();
    const double lmax = L.diagonal().maxCoeff();
    if (!(lmin > 0.0) || (lmin / lmax) * (lmin / lmax) < 1e-14) {
        throw SingularInnovation(
            "update: innovation covariance reciprocal condition below 1e-14");
    }

    // log det S from the Cholesky factor; quadratic form via triangular solve.
    double logdet = 0.0;
    for (int i = 0; i < m; ++i) logdet += 2.0 * std::log(L(i, i));
    const ErrVec alpha = llt.solve(c.z);
    const double loglik =
        -0.5 * (m * std::log(kTwoPi) + logdet + c.z.dot(alpha));

    const ErrMat K = b.cov * c.H.transpose() * llt.solve(ErrMat::Identity(m, m));
    const ErrVec dx = K * c.z;

    GaussianBelief out;
    const ErrMat IKH = ErrMat::Identity(d, d) - K * c.H;
    out.cov = IKH * b.cov * IKH.transpose() + K * c.R * K.transpose();
    symmetrize(out.cov);

    out.mean = b.mean;
    out.mean.r += dx.segment<3>(0);
    out.mean.v += dx.segment<3>(3);
    out.mean.q = apply_error_rotation(dx.segment<3>(6), b.mean.q);
    if (d == 10) out.mean.xi += dx(9);
    return {out, loglik};
}

}  // namespace fbnav

#endif  // FBNAV_ESKF_HPP
