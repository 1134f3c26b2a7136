#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "fbnav/eskf.hpp"
#include "oracles.hpp"

using namespace fbnav;

namespace {

GaussianBelief random_belief(std::mt19937_64& rng, int dim) {
    std::normal_distribution<double> g(0.0, 1.0);
    GaussianBelief b;
    b.mean.r = Vec3(g(rng), g(rng), g(rng));
    b.mean.v = Vec3(g(rng), g(rng), g(rng));
    b.mean.q = Quat(g(rng), g(rng), g(rng), g(rng)).normalized();
    b.mean.xi = g(rng);
    Eigen::MatrixXd A = Eigen::MatrixXd::NullaryExpr(dim, dim, [&] { return g(rng); });
    b.cov = A * A.transpose() + 1e-6 * Eigen::MatrixXd::Identity(dim, dim);
    return b;
}

}  // namespace

TEST_CASE("predict with zero covariance produces the process noise") {
    NoiseConfig cfg;
    GaussianBelief b;
    b.cov = ErrMat::Zero(9, 9);
    b.mean.q = Quat::Identity();
    ImuSample u;
    u.s = -cfg.g;
    const GaussianBelief out = predict(b, u, cfg);
    auto [F, Q] = error_transition(b.mean, u, cfg, 9);
    (void)F;
    CHECK((out.cov - Q).norm() < 1e-15);
}

TEST_CASE("predict never shrinks the covariance trace") {
    NoiseConfig cfg;
    std::mt19937_64 rng(51);
    const GaussianBelief b = random_belief(rng, 9);
    ImuSample u;
    u.s = Vec3(1.0, -2.0, 9.0);
    u.w = Vec3(0.1, 0.2, -0.1);
    auto [F, Q] = error_transition(b.mean, u, cfg, 9);
    (void)Q;
    const GaussianBelief out = predict(b, u, cfg);
    const ErrMat fpf = F * b.cov * F.transpose();
    CHECK(out.cov.trace() >= fpf.trace() - 1e-12);
}

TEST_CASE("predict throws NumericalBlowup past the diagonal guard") {
    NoiseConfig cfg;
    GaussianBelief b;
    b.cov = 1e13 * ErrMat::Identity(9, 9);
    ImuSample u;
    CHECK_THROWS_AS(predict(b, u, cfg), NumericalBlowup);
}

TEST_CASE("update with H = 0 leaves the belief unchanged and scores against R") {
    std::mt19937_64 rng(53);
    const GaussianBelief b = random_belief(rng, 9);
    Constraint c;
    c.z = ErrVec::Zero(9);
    c.z(0) = 0.3;
    c.z(4) = -0.1;
    c.H = ErrMat::Zero(9, 9);
    c.R = 0.7 * ErrMat::Identity(9, 9);
    auto [post, ll] = update(b, c);
    CHECK((post.cov - b.cov).norm() < 1e-12);
    CHECK((post.mean.r - b.mean.r).norm() < 1e-15);
    CHECK((post.mean.v - b.mean.v).norm() < 1e-15);
    CHECK(post.mean.q.angularDistance(b.mean.q) < 1e-15);
    const double direct = oracles::mvn_logpdf(
        Eigen::VectorXd(c.z), Eigen::VectorXd::Zero(9), Eigen::MatrixXd(c.R));
    CHECK(std::abs(ll - direct) < 1e-10 * std::abs(direct));
}

TEST_CASE("update: scalar hand-worked case") {
    // cov = 1 on the first position axis, H picks that axis, R = 1, z = 1:
    // posterior shift 0.5, posterior variance 0.5, loglik = log N(1; 0, 2).
    GaussianBelief b;
    b.cov = ErrMat::Zero(9, 9);
    b.cov(0, 0) = 1.0;
    Constraint c;
    c.z = ErrVec::Constant(1, 1.0);
    c.H = ErrMat::Zero(1, 9);
    c.H(0, 0) = 1.0;
    c.R = ErrMat::Identity(1, 1);
    auto [post, ll] = update(b, c);
    CHECK(std::abs(post.mean.r.x() - 0.5) < 1e-14);
    CHECK(std::abs(post.cov(0, 0) - 0.5) < 1e-14);
    const double expected = -0.5 * (std::log(kTwoPi * 2.0) + 1.0 / 2.0);
    CHECK(std::abs(ll - expected) < 1e-14);
}

TEST_CASE("update with zero innovation leaves the mean and scores the determinant") {
    std::mt19937_64 rng(59);
    const GaussianBelief b = random_belief(rng, 9);
    Constraint c;
    c.z = ErrVec::Zero(3);
    c.H = ErrMat::Zero(3, 9);
    c.H.block<3, 3>(0, 3) = Mat3::Identity();
    c.R = 0.01 * ErrMat::Identity(3, 3);
    auto [post, ll] = update(b, c);
    CHECK((post.mean.v - b.mean.v).norm() < 1e-15);
    CHECK(post.mean.q.angularDistance(b.mean.q) < 1e-15);
    const Eigen::MatrixXd S = c.H * b.cov * c.H.transpose() + c.R;
    const double expected = -0.5 * (3.0 * std::log(kTwoPi) + std::log(S.determinant()));
    CHECK(std::abs(ll - expected) < 1e-10);
}

TEST_CASE("update loglik matches a direct normal density on random problems") {
    std::mt19937_64 rng(61);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int rep = 0; rep < 100; ++rep) {
        const GaussianBelief b = random_belief(rng, 9);
        Constraint c;
        const int m = 1 + rep % 4;
        c.z = ErrVec::NullaryExpr(m, [&] { return g(rng); });
        c.H = ErrMat::NullaryExpr(m, 9, [&] { return g(rng); });
        Eigen::MatrixXd A = Eigen::MatrixXd::NullaryExpr(m, m, [&] { return g(rng); });
        c.R = A * A.transpose() + 0.1 * Eigen::MatrixXd::Identity(m, m);
        auto [post, ll] = update(b, c);
        (void)post;
        const Eigen::MatrixXd S = c.H * b.cov * c.H.transpose() + c.R;
        const double direct = oracles::mvn_logpdf(Eigen::VectorXd(c.z),
                                                  Eigen::VectorXd::Zero(m), S);
        CHECK(std::abs(ll - direct) < 1e-10 * std::max(1.0, std::abs(direct)));
    }
}

TEST_CASE("Joseph-form update keeps the covariance PSD and contractive") {
    std::mt19937_64 rng(67);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int rep = 0; rep < 1000; ++rep) {
        const GaussianBelief b = random_belief(rng, 9);
        Constraint c;
        const int m = 1 + rep % 3;
        c.z = ErrVec::NullaryExpr(m, [&] { return g(rng); });
        c.H = ErrMat::NullaryExpr(m, 9, [&] { return g(rng); });
        Eigen::MatrixXd A = Eigen::MatrixXd::NullaryExpr(m, m, [&] { return g(rng); });
        c.R = A * A.transpose() + 0.1 * Eigen::MatrixXd::Identity(m, m);
        auto [post, ll] = update(b, c);
        (void)ll;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(post.cov));
        CHECK(es.eigenvalues().minCoeff() > -1e-9 * post.cov.trace());
        // Posterior <= prior in the PSD order.
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> diff(
            Eigen::MatrixXd(b.cov - post.cov));
        CHECK(diff.eigenvalues().minCoeff() > -1e-9 * b.cov.trace());
    }
}

TEST_CASE("update rejects a numerically singular innovation covariance") {
    GaussianBelief b;
    b.cov = ErrMat::Zero(9, 9);
    Constraint c;
    c.z = ErrVec::Zero(2);
    c.H = ErrMat::Zero(2, 9);
    c.R = ErrMat::Zero(2, 2);
    c.R(0, 0) = 1.0;
    c.R(1, 1) = 1e-16;  // rcond proxy far below 1e-14
    CHECK_THROWS_AS(update(b, c), SingularInnovation);
}

TEST_CASE("update rejects mismatched constraint dimensions") {
    GaussianBelief b;
    b.cov = ErrMat::Identity(9, 9);
    Constraint c;
    c.z = ErrVec::Zero(3);
    c.H = ErrMat::Zero(3, 10);
    c.R = ErrMat::Identity(3, 3);
    CHECK_THROWS_AS(update(b, c), ConfigError);
}

TEST_CASE("unconstrained-only predict/update chain is pure dead reckoning") {
    NoiseConfig cfg;
    std::mt19937_64 rng(71);
    GaussianBelief b;
    b.cov = 1e-4 * ErrMat::Identity(9, 9);
    NavState dr = b.mean;

    Constraint nc;
    nc.z = ErrVec::Zero(9);
    nc.H = ErrMat::Zero(9, 9);
    nc.R = ErrMat::Identity(9, 9);

    std::normal_distribution<double> g(0.0, 1.0);
    for (int k = 0; k < 50; ++k) {
        ImuSample u;
        u.s = Vec3(g(rng), g(rng), 9.81 + g(rng));
        u.w = 0.1 * Vec3(g(rng), g(rng), g(rng));
        b = predict(b, u, cfg);
        b = update(b, nc).first;
        dr = propagate(dr, u, cfg);
    }
    CHECK((b.mean.r - dr.r).norm() < 1e-12);
    CHECK((b.mean.v - dr.v).norm() < 1e-12);
    CHECK(b.mean.q.angularDistance(dr.q) < 1e-12);
}

TEST_CASE("xi-tracking dynamics copy the pre-propagation height into xi") {
    NoiseConfig cfg;
    GaussianBelief b;
    b.mean.r = Vec3(0.0, 0.0, 1.25);
    b.mean.xi = 0.4;
    b.cov = 0.01 * ErrMat::Identity(10, 10);
    ModeDynamics dyn;
    dyn.xi_tracks_height = true;
    ImuSample u;
    u.s = -cfg.g;
    const GaussianBelief out = predict(b, u, cfg, -1.0, dyn);
    CHECK(out.mean.xi == 1.25);
    // The deterministic assignment makes var(dxi') equal var(dr_z) and ties
    // the cross terms to the height row.
    CHECK(std::abs(out.cov(9, 9) - b.cov(2, 2)) < 1e-15);
    CHECK(std::abs(out.cov(9, 2) - b.cov(2, 2)) < 1e-12);
}

TEST_CASE("xi-tracking dynamics require the extended error state") {
    NoiseConfig cfg;
    GaussianBelief b;
    b.cov = ErrMat::Identity(9, 9);
    ModeDynamics dyn;
    dyn.xi_tracks_height = true;
    ImuSample u;
    CHECK_THROWS_AS(predict(b, u, cfg, -1.0, dyn), ConfigError);
}
