#ifndef FBNAV_LEARNING_HPP
#define FBNAV_LEARNING_HPP

#include <Eigen/Dense>
#include <cmath>
#include <future>
#include <limits>
#include <utility>
#include <vector>

#include "fbnav/errors.hpp"
#include "fbnav/filterbank.hpp"
#include "fbnav/motion_models.hpp"

namespace fbnav {

// How filter banks are instantiated during likelihood evaluation: leaf
// budget, mode prior (uniform when empty) and the stationary-alignment
// window used to build the initial belief of each sequence.
struct BankOptions {
    int max_leaves = 9;
    Eigen::VectorXd mode_prior;
    int align_window = 50;
    AlignmentConfig align;
};

namespace detail {

inline Eigen::VectorXd effective_mode_prior(const BankOptions& opt, int L) {
    if (opt.mode_prior.size() == 0) {
        return Eigen::VectorXd::Constant(L, 1.0 / L);
    }
    if (opt.mode_prior.size() != L) {
        throw ConfigError("BankOptions: mode prior size mismatch");
    }
    return opt.mode_prior;
}

inline double sequence_loglik(const std::vector<ImuSample>& seq,
                              const MotionModel& model, const NoiseConfig& cfg,
                              const BankOptions& opt) {
    if (seq.empty()) return 0.0;
    const size_t n_align = std::min(seq.size(), static_cast<size_t>(
                                                    std::max(1, opt.align_window)));
    GaussianBelief prior = initial_alignment(
        std::span<const ImuSample>(seq.data(), n_align), model.err_dim, opt.align);
    FilterBank bank(model, cfg, prior,
                    effective_mode_prior(opt, model.num_modes), opt.max_leaves);
    double total = 0.0;
    for (const ImuSample& u : seq) {
        bank.step(u);
        total += bank.last_loglik_increment();
    }
    if (!std::isfinite(total)) {
        throw NonFinite("log_marginal_likelihood: sequence likelihood not finite");
    }
    return total;
}

}  // namespace detail

// Marginal data log-likelihood sum_n log p(y_n | y_{1:n-1}) accumulated over
// all sequences, with the mode marginalization carried by the (pruned)
// filter bank. The theta-independent p(y_1) prior is dropped.
inline double log_marginal_likelihood(
    const std::vector<std::vector<ImuSample>>& data, const MotionModel& model,
    const NoiseConfig& cfg, const BankOptions& opt = {}) {
    if (data.empty()) return 0.0;
    if (data.size() == 1) return detail::sequence_loglik(data[0], model, cfg, opt);

    std::vector<std::future<double>> jobs;
    jobs.reserve(data.size());
    for (const auto& seq : data) {
        jobs.push_back(std::async(std::launch::async, [&seq, &model, &cfg, &opt] {
            return detail::sequence_loglik(seq, model, cfg, opt);
        }));
    }
    double total = 0.0;
    for (auto& j : jobs) total += j.get();
    return total;
}

struct LearnConfig {
    std::vector<std::vector<ImuSample>> dataset;
    int max_iter = 50;
    double tol_loglik = 1e-4;  // absolute improvement stopping rule
    BankOptions bank;
};

struct LearnReport {
    Eigen::MatrixXd pi_hat;
    std::vector<double> loglik_trace;  // accepted steps only, non-decreasing
    int iterations = 0;
    bool converged = false;
    Eigen::VectorXd occupancy_pct;  // MAP-mode occupancy under pi_hat
};

namespace detail {

// Free columns of Pi are reparameterized on the simplex: a column with m
// free entries carries m-1 unconstrained logits against a zero reference.
// Structural zeros and pinned edges are never part of theta.
struct PiParam {
    BoolMat mask;
    BoolMat pinned;
    std::vector<std::vector<int>> free_rows;  // per column; empty = fixed
    int dof = 0;

    explicit PiParam(const TransitionMatrix& t) : mask(t.mask), pinned(t.pinned) {
        const int L = t.modes();
        free_rows.resize(static_cast<size_t>(L));
        for (int j = 0; j < L; ++j) {
            bool has_pinned = false;
            std::vector<int> rows;
            for (int i = 0; i < L; ++i) {
                if (pinned(i, j)) has_pinned = true;
                else if (mask(i, j)) rows.push_back(i);
            }
            if (!has_pinned && rows.size() >= 2) {
                free_rows[static_cast<size_t>(j)] = rows;
                dof += static_cast<int>(rows.size()) - 1;
            }
        }
        if (dof == 0) throw ConfigError("learn_transition_matrix: no free parameters");
    }

    Eigen::VectorXd pack(const Eigen::MatrixXd& pi) const {
        Eigen::VectorXd x(dof);
        int k = 0;
        for (size_t j = 0; j < free_rows.size(); ++j) {
            const auto& rows = free_rows[j];
            if (rows.empty()) continue;
            const double ref = std::max(pi(rows.back(), static_cast<int>(j)), 1e-9);
            for (size_t r = 0; r + 1 < rows.size(); ++r) {
                x(k++) = std::log(std::max(pi(rows[r], static_cast<int>(j)), 1e-9) / ref);
            }
        }
        return x;
    }

    Eigen::MatrixXd unpack(const Eigen::VectorXd& x,
                           const Eigen::MatrixXd& pi_template) const {
        Eigen::MatrixXd pi = pi_template;
        int k = 0;
        for (size_t j = 0; j < free_rows.size(); ++j) {
            const auto& rows = free_rows[j];
            if (rows.empty()) continue;
            Eigen::VectorXd logits(rows.size());
            for (size_t r = 0; r + 1 < rows.size(); ++r) logits(static_cast<int>(r)) = x(k++);
            logits(static_cast<int>(rows.size()) - 1) = 0.0;
            const double m = logits.maxCoeff();
            Eigen::VectorXd e = (logits.array() - m).exp();
            e /= e.sum();
            for (size_t r = 0; r < rows.size(); ++r) {
                pi(rows[r], static_cast<int>(j)) = e(static_cast<int>(r));
            }
        }
        return pi;
    }
};

}  // namespace detail

// Maximum-likelihood fit of the free transition probabilities by BFGS on the
// simplex logits with forward-difference gradients. Steps are accepted only
// when the objective improves, so the reported trace is monotone.
inline LearnReport learn_transition_matrix(const LearnConfig& cfg,
                                           MotionModel model,
                                           const NoiseConfig& noise,
                                           const Eigen::MatrixXd& pi_init) {
    {
        TransitionMatrix check = model.trans;
        check.pi = pi_init;
        check.validate();  // throws ConfigError on mask violation
    }
    detail::PiParam param(model.trans);

    auto objective = [&](const Eigen::VectorXd& x) -> double {
        model.trans.pi = param.unpack(x, pi_init);
        try {
            return -log_marginal_likelihood(cfg.dataset, model, noise, cfg.bank);
        } catch (const std::runtime_error&) {
            return std::numeric_limits<double>::infinity();
        }
    };
    // A fairly large difference step: pruning makes the objective only
    // piecewise smooth, and a wide stencil averages over the seams.
    auto gradient = [&](const Eigen::VectorXd& x, double fx) {
        const double h = 1e-3;
        Eigen::VectorXd g(param.dof);
        for (int i = 0; i < param.dof; ++i) {
            Eigen::VectorXd xp = x;
            xp(i) += h;
            g(i) = (objective(xp) - fx) / h;
        }
        return g;
    };

    Eigen::VectorXd x = param.pack(pi_init);
    double fx = objective(x);
    if (!std::isfinite(fx)) {
        throw NonFinite("learn_transition_matrix: likelihood not finite at pi_init");
    }
    Eigen::VectorXd g = gradient(x, fx);
    Eigen::MatrixXd Hinv = Eigen::MatrixXd::Identity(param.dof, param.dof);

    LearnReport rep;
    rep.loglik_trace.push_back(-fx);
    rep.converged = false;

    for (int it = 0; it < cfg.max_iter; ++it) {
        Eigen::VectorXd d = -(Hinv * g);
        if (g.dot(d) >= 0.0) {
            d = -g;
            Hinv.setIdentity();
        }
        // Clamp the step so a single iteration cannot saturate the simplex
        // logits, where the finite-difference gradient vanishes.
        const double dn = d.norm();
        if (dn > 2.0) d *= 2.0 / dn;
        // Backtracking Armijo line search; falls back to steepest descent
        // before giving up, since the BFGS direction can be poor across the
        // pruning seams of the objective.
        double f_new = std::numeric_limits<double>::infinity();
        Eigen::VectorXd x_new;
        bool accepted = false;
        for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
            double alpha = 1.0;
            for (int ls = 0; ls < 30; ++ls) {
                x_new = x + alpha * d;
                f_new = objective(x_new);
                if (f_new <= fx + 1e-4 * alpha * g.dot(d) && f_new < fx) {
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if (!accepted && attempt == 0) {
                d = -g;
                const double gn = d.norm();
                if (gn > 2.0) d *= 2.0 / gn;
                Hinv.setIdentity();
            }
        }
        if (!accepted) {
            rep.converged = true;  // no ascent direction improves: local max
            break;
        }

        const Eigen::VectorXd g_new = gradient(x_new, f_new);
        const Eigen::VectorXd s = x_new - x;
        const Eigen::VectorXd y = g_new - g;
        const double sy = s.dot(y);
        if (sy > 1e-12) {
            const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(param.dof, param.dof);
            const Eigen::MatrixXd V = I - (s * y.transpose()) / sy;
            Hinv = V * Hinv * V.transpose() + (s * s.transpose()) / sy;
        }

        const double improvement = fx - f_new;
        x = x_new;
        fx = f_new;
        g = g_new;
        rep.iterations = it + 1;
        rep.loglik_trace.push_back(-fx);
        if (improvement < cfg.tol_loglik) {
            rep.converged = true;
            break;
        }
    }

    rep.pi_hat = param.unpack(x, pi_init);
    model.trans.pi = rep.pi_hat;

    // MAP-mode occupancy from a filter-bank pass under the learned matrix.
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(model.num_modes);
    long n_total = 0;
    for (const auto& seq : cfg.dataset) {
        if (seq.empty()) continue;
        const size_t n_align = std::min(
            seq.size(), static_cast<size_t>(std::max(1, cfg.bank.align_window)));
        GaussianBelief prior = initial_alignment(
            std::span<const ImuSample>(seq.data(), n_align), model.err_dim,
            cfg.bank.align);
        FilterBank bank(model, noise, prior,
                        detail::effective_mode_prior(cfg.bank, model.num_modes),
                        cfg.bank.max_leaves);
        for (const ImuSample& u : seq) {
            bank.step(u);
            counts(bank.fuse().map_mode - 1) += 1.0;
            ++n_total;
        }
    }
    rep.occupancy_pct = n_total > 0
                            ? Eigen::VectorXd(100.0 * counts / n_total)
                            : Eigen::VectorXd::Zero(model.num_modes);
    return rep;
}

}  // namespace fbnav

#endif  // FBNAV_LEARNING_HPP
