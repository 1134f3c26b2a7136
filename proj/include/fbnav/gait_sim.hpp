#ifndef FBNAV_GAIT_SIM_HPP
#define FBNAV_GAIT_SIM_HPP

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "fbnav/core.hpp"
#include "fbnav/errors.hpp"
#include "fbnav/motion_models.hpp"
#include "fbnav/strapdown.hpp"

namespace fbnav {

// Synthetic gait generator. Trajectories are built from velocity/attitude
// profiles that are C^2 in time and exactly zero during stance, then the
// mechanization is inverted sample by sample, so integrating the noiseless
// IMU stream through propagate() reproduces the truth to machine precision.

enum class PhaseType { Stance, Swing, StairUp, StairDown };

struct GaitPhase {
    double duration = 0.0;      // s
    PhaseType type = PhaseType::Stance;
    double stride = 0.0;        // m, horizontal advance (swing/stair)
    double step_height = 0.0;   // m, foot lift (swing) or riser (stairs)
};

enum class Labeling { VaryingGait, SameHeight };
enum class TruthSource { Phases, MarkovChain };

struct GaitProfile {
    std::vector<GaitPhase> phases;
    double cadence = 1.0;        // Hz, used by the profile builders
    double sample_rate = 100.0;  // Hz
    NoiseConfig noise;
    uint64_t seed = 0;
    Labeling labeling = Labeling::VaryingGait;
    TruthSource source = TruthSource::Phases;
    Eigen::MatrixXd pi;          // MarkovChain source only
    int init_mode = 3;
    int markov_samples = 0;

    void validate() const {
        if (sample_rate < 20.0) throw ConfigError("GaitProfile: sample rate must be >= 20 Hz");
        if (source == TruthSource::Phases) {
            if (phases.empty()) throw ConfigError("GaitProfile: no phases");
            for (const GaitPhase& p : phases) {
                if (!(p.duration > 0.0)) throw ConfigError("GaitProfile: phase duration must be > 0");
            }
        } else {
            if (markov_samples < 1 || pi.size() == 0) {
                throw ConfigError("GaitProfile: Markov source needs pi and a sample count");
            }
        }
        noise.validate();
    }
};

struct TruthRecord {
    double t = 0.0;
    NavState x;
    int mode = 1;
    bool stance = false;
};

// Markov-chain sample of length n over 1-based modes; column j of pi is the
// distribution of the next mode given mode j+1.
inline std::vector<int> sample_mode_sequence(const Eigen::MatrixXd& pi, int n,
                                             uint64_t seed, int init_mode = 1) {
    const int L = static_cast<int>(pi.cols());
    if (pi.rows() != L || L < 1) throw ConfigError("sample_mode_sequence: pi must be square");
    for (int j = 0; j < L; ++j) {
        if (std::abs(pi.col(j).sum() - 1.0) > 1e-9) {
            throw ConfigError("sample_mode_sequence: columns must sum to 1");
        }
    }
    if (init_mode < 1 || init_mode > L) throw ConfigError("sample_mode_sequence: bad init mode");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<int> seq;
    seq.reserve(static_cast<size_t>(n));
    int cur = init_mode;
    for (int k = 0; k < n; ++k) {
        seq.push_back(cur);
        double u = unif(rng);
        int next = L;
        for (int i = 0; i < L; ++i) {
            u -= pi(i, cur - 1);
            if (u <= 0.0) {
                next = i + 1;
                break;
            }
        }
        cur = next;
    }
    return seq;
}

namespace detail {

// Quintic smoothstep: s(0)=0, s(1)=1, zero first and second derivatives at
// both ends.
inline double quintic(double t) { return t * t * t * (10.0 + t * (-15.0 + 6.0 * t)); }
inline double quintic_d(double t) { return 30.0 * t * t * (1.0 - t) * (1.0 - t); }

struct Block {
    int mode = 3;          // truth label for the block interior
    int n = 0;             // samples
    double stride = 0.0;   // horizontal advance
    double dz = 0.0;       // net height change (stairs)
    double lift = 0.0;     // transient foot lift
    double pitch_amp = 0.0;
    double cycles = 1.0;   // pitch / lift oscillation cycles over the block
    bool zero = false;     // exactly stationary
    bool stance = false;
    bool stance_entry = false;  // first stationary sample of a stance
};

// C^2 trapezoidal speed shape: quintic ramps over the first and last rho of
// the block, constant cruise in between. Integrates to (1 - rho) over [0,1].
inline double trapezoid(double tau, double rho) {
    const double up = std::min(tau / rho, 1.0);
    const double down = std::min((1.0 - tau) / rho, 1.0);
    return quintic(up) * quintic(down);
}

inline double block_rho(const Block& b, double T) {
    const double ramp_time = b.mode == 1 ? 0.08 : 0.05;
    return std::clamp(ramp_time / T, 0.01, 0.3);
}

// Velocity at local progress tau in [0,1); zero blocks return zero.
inline Vec3 block_velocity(const Block& b, double tau, double T) {
    if (b.zero || T <= 0.0) return Vec3::Zero();
    const double s = quintic(tau);
    const double sd = quintic_d(tau) / T;
    Vec3 v;
    // Horizontal motion cruises at near-constant speed with short ramps, so
    // little time is spent at ambiguous in-between speeds. Ramps aim for a
    // fixed wall-clock length but stay between 10% and 30% of the block.
    const double rho = block_rho(b, T);
    v.x() = b.stride / ((1.0 - rho) * T) * trapezoid(tau, rho);
    // Cruise speed texture: real gait never holds a perfectly constant
    // velocity, and a textureless cruise is momentarily indistinguishable
    // from a tracked stationary constraint.
    if (b.mode == 1) {
        v.x() *= 1.0 + 0.2 * std::sin(2.0 * kPi * std::max(1.0, std::round(3.0 * T)) * tau);
    }
    v.y() = 0.0;
    v.z() = (b.dz + b.lift * kPi * std::sin(2.0 * kPi * b.cycles * s)) * sd;
    return v;
}

inline Quat block_attitude(const Block& b, double tau, double T) {
    if (b.zero || b.pitch_amp == 0.0 || T <= 0.0) return Quat::Identity();
    // Linear phase: the foot rotates at a constant rate through the whole
    // block (rotation stops abruptly at the block change, as at a heel
    // strike); whole cycles keep the attitude continuous across blocks.
    EulerAngles e;
    e.pitch = b.pitch_amp * std::sin(2.0 * kPi * b.cycles * tau);
    // Quadrature yaw component: the total angular rate then never passes
    // through zero mid-block, as a real foot's does not.
    e.yaw = b.pitch_amp * (std::cos(2.0 * kPi * b.cycles * tau) - 1.0);
    return quat_from_euler(e);
}

inline int round_samples(double duration, double fs) {
    return std::max(1, static_cast<int>(std::llround(duration * fs)));
}

// Small-motion block used for the "almost stationary" mode: peak speed held
// near 0.05 m/s and peak angular rate near 0.3 rad/s regardless of duration,
// so the transients stay small even for very short blocks.
inline Block almost_stationary_block(int n, double fs) {
    Block b;
    b.mode = 2;
    b.n = n;
    const double T = n / fs;
    // Cruise speed ~0.1 m/s, with very short blocks capped by acceleration:
    // clearly above the stationary constraint scale, near the soft one.
    b.stride = std::min(0.1 * T, 0.4 * T * T);
    b.lift = 0.005 * T;      // peak vertical speed ~0.03 m/s
    // Sustained rocking at ~3 Hz with ~0.8 rad/s peak rate: the soft
    // constraint absorbs it while the hard stationary one cannot.
    b.cycles = std::max(1.0, std::round(3.0 * T));
    b.pitch_amp = 0.8 * T / (2.0 * kPi * b.cycles);
    return b;
}

inline std::vector<Block> blocks_from_phases(const GaitProfile& prof) {
    const double fs = prof.sample_rate;
    std::vector<Block> blocks;
    for (const GaitPhase& p : prof.phases) {
        switch (p.type) {
            case PhaseType::Stance: {
                if (prof.labeling == Labeling::SameHeight) {
                    Block b;
                    b.mode = 3;  // entry sample relabeled during assembly
                    b.n = round_samples(p.duration, fs);
                    b.zero = true;
                    b.stance = true;
                    b.stance_entry = true;
                    blocks.push_back(b);
                    break;
                }
                const double t_tr = std::min(0.08, p.duration / 4.0);
                if (p.duration < 0.3) {
                    // Short (running) stance: never fully stationary.
                    blocks.push_back(almost_stationary_block(
                        round_samples(p.duration, fs), fs));
                    break;
                }
                blocks.push_back(almost_stationary_block(round_samples(t_tr, fs), fs));
                Block core;
                core.mode = 3;
                core.n = round_samples(p.duration - 2.0 * t_tr, fs);
                core.zero = true;
                core.stance = true;
                blocks.push_back(core);
                blocks.push_back(almost_stationary_block(round_samples(t_tr, fs), fs));
                break;
            }
            case PhaseType::Swing:
            case PhaseType::StairUp:
            case PhaseType::StairDown: {
                Block b;
                b.mode = 1;
                b.n = round_samples(p.duration, fs);
                b.stride = p.stride;
                if (p.type == PhaseType::Swing) {
                    b.lift = p.step_height;
                } else {
                    b.dz = (p.type == PhaseType::StairUp ? 1.0 : -1.0) * p.step_height;
                    b.lift = 0.08;
                }
                b.pitch_amp = 0.3;
                blocks.push_back(b);
                break;
            }
        }
    }
    return blocks;
}

inline std::vector<Block> blocks_from_markov(const GaitProfile& prof) {
    const double fs = prof.sample_rate;
    std::vector<int> seq =
        sample_mode_sequence(prof.pi, prof.markov_samples, prof.seed ^ 0x9e3779b97f4a7c15ULL,
                             prof.init_mode);
    std::vector<Block> blocks;
    size_t i = 0;
    while (i < seq.size()) {
        size_t j = i;
        while (j < seq.size() && seq[j] == seq[i]) ++j;
        const int n = static_cast<int>(j - i);
        if (seq[i] == 3) {
            Block b;
            b.mode = 3;
            b.n = n;
            b.zero = true;
            b.stance = true;
            blocks.push_back(b);
        } else if (seq[i] == 2) {
            blocks.push_back(almost_stationary_block(n, fs));
        } else {
            Block b;
            b.mode = 1;
            b.n = n;
            const double T = n / fs;
            // Cruise speed ~0.9 m/s; very short blocks are also capped by a
            // ~20 m/s^2 peak acceleration (quintic peak curvature is 5.77).
            b.stride = std::min(0.8 * T, 3.5 * T * T);
            // One swing cycle per ~0.7 s stride with a ~4 rad/s peak rate,
            // so the rotation signature persists across long dwells.
            b.cycles = std::max(1.0, std::round(1.4 * T));
            b.pitch_amp = 4.0 * T / (2.0 * kPi * b.cycles);
            b.lift = std::min(0.05, 0.05 * T);
            blocks.push_back(b);
        }
        i = j;
    }
    return blocks;
}

}  // namespace detail

inline std::pair<std::vector<ImuSample>, std::vector<TruthRecord>> simulate(
    const GaitProfile& prof) {
    prof.validate();
    const double fs = prof.sample_rate;
    const double dt = 1.0 / fs;

    std::vector<detail::Block> blocks =
        prof.source == TruthSource::Phases ? detail::blocks_from_phases(prof)
                                           : detail::blocks_from_markov(prof);

    long total = 0;
    for (const auto& b : blocks) total += b.n;
    const long N = total;

    // Velocity, attitude and labels at sample indices 0..N (index N only
    // feeds the inversion of the last sample).
    std::vector<Vec3> vel(static_cast<size_t>(N) + 1, Vec3::Zero());
    std::vector<Quat> att(static_cast<size_t>(N) + 1, Quat::Identity());
    std::vector<int> mode(static_cast<size_t>(N), 1);
    std::vector<char> stance(static_cast<size_t>(N), 0);
    std::vector<char> entry(static_cast<size_t>(N), 0);

    long k0 = 0;
    for (const auto& b : blocks) {
        const double T = b.n * dt;
        for (int j = 0; j < b.n; ++j) {
            const double tau = static_cast<double>(j) / b.n;
            vel[static_cast<size_t>(k0 + j)] = detail::block_velocity(b, tau, T);
            att[static_cast<size_t>(k0 + j)] = detail::block_attitude(b, tau, T);
            mode[static_cast<size_t>(k0 + j)] = b.mode;
            stance[static_cast<size_t>(k0 + j)] = b.stance ? 1 : 0;
            if (j == 0 && b.stance_entry) entry[static_cast<size_t>(k0)] = 1;
        }
        k0 += b.n;
    }

    // Positions by the same discrete rule the mechanization uses.
    std::vector<Vec3> pos(static_cast<size_t>(N) + 1, Vec3::Zero());
    for (long k = 0; k < N; ++k) {
        pos[static_cast<size_t>(k + 1)] =
            pos[static_cast<size_t>(k)] + dt * vel[static_cast<size_t>(k)];
    }

    // Same-height relabeling: the first sample of a stance at a changed
    // height is mode 2 (new height), everything else stationary is mode 3.
    if (prof.labeling == Labeling::SameHeight) {
        double last_stance_z = 0.0;
        bool have_prev = false;
        for (long k = 0; k < N; ++k) {
            if (!entry[static_cast<size_t>(k)]) continue;
            const double z = pos[static_cast<size_t>(k)].z();
            const bool new_height = have_prev && std::abs(z - last_stance_z) > 1e-3;
            mode[static_cast<size_t>(k)] = new_height ? 2 : 3;
            last_stance_z = z;
            have_prev = true;
        }
    }

    // xi truth follows the extended dynamics given the truth mode labels.
    std::vector<double> xi(static_cast<size_t>(N), 0.0);
    for (long k = 1; k < N; ++k) {
        xi[static_cast<size_t>(k)] =
            mode[static_cast<size_t>(k - 1)] == 1
                ? xi[static_cast<size_t>(k - 1)]
                : pos[static_cast<size_t>(k - 1)].z();
    }

    std::mt19937_64 rng(prof.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    std::vector<ImuSample> samples;
    std::vector<TruthRecord> truth;
    samples.reserve(static_cast<size_t>(N));
    truth.reserve(static_cast<size_t>(N));
    for (long k = 0; k < N; ++k) {
        const size_t i = static_cast<size_t>(k);
        const Mat3 C = rotmat_from_quat(att[i]);
        ImuSample u;
        u.t = k * dt;
        u.s = C.transpose() * ((vel[i + 1] - vel[i]) / dt - prof.noise.g);
        u.w = quat_log(att[i].conjugate() * att[i + 1]) / dt;
        u.s += prof.noise.sigma_s * Vec3(gauss(rng), gauss(rng), gauss(rng));
        u.w += prof.noise.sigma_w * Vec3(gauss(rng), gauss(rng), gauss(rng));
        samples.push_back(u);

        TruthRecord rec;
        rec.t = u.t;
        rec.x.r = pos[i];
        rec.x.v = vel[i];
        rec.x.q = att[i];
        rec.x.xi = xi[i];
        rec.mode = mode[i];
        rec.stance = stance[i] != 0;
        truth.push_back(rec);
    }
    return {std::move(samples), std::move(truth)};
}

// ---- Profile builders -----------------------------------------------------

inline GaitProfile make_stationary_profile(double duration, double fs,
                                           const NoiseConfig& noise,
                                           uint64_t seed) {
    GaitProfile p;
    p.phases.push_back({duration, PhaseType::Stance, 0.0, 0.0});
    p.sample_rate = fs;
    p.noise = noise;
    p.seed = seed;
    return p;
}

inline void append_walk_cycles(GaitProfile& p, double duration, double cadence,
                               double stride, double step_height) {
    const double cycle = 1.0 / cadence;
    const double t_stance = 0.55 * cycle;
    const double t_swing = 0.45 * cycle;
    double t = 0.0;
    while (t + cycle <= duration + 1e-9) {
        p.phases.push_back({t_swing, PhaseType::Swing, stride, step_height});
        p.phases.push_back({t_stance, PhaseType::Stance, 0.0, 0.0});
        t += cycle;
    }
}

inline void append_run_cycles(GaitProfile& p, double duration, double cadence,
                              double stride, double step_height) {
    const double cycle = 1.0 / cadence;
    const double t_stance = std::min(0.25 * cycle, 0.2);  // short: never fully stationary
    const double t_swing = cycle - t_stance;
    double t = 0.0;
    while (t + cycle <= duration + 1e-9) {
        p.phases.push_back({t_swing, PhaseType::Swing, stride, step_height});
        p.phases.push_back({t_stance, PhaseType::Stance, 0.0, 0.0});
        t += cycle;
    }
}

inline GaitProfile make_walk_profile(double duration, double fs,
                                     const NoiseConfig& noise, uint64_t seed,
                                     double cadence = 1.0, double stride = 0.7,
                                     double step_height = 0.05) {
    GaitProfile p;
    p.sample_rate = fs;
    p.noise = noise;
    p.seed = seed;
    p.cadence = cadence;
    p.phases.push_back({1.5, PhaseType::Stance, 0.0, 0.0});
    append_walk_cycles(p, duration - 1.5, cadence, stride, step_height);
    return p;
}

inline GaitProfile make_walk_run_profile(double walk_duration,
                                         double run_duration, double fs,
                                         const NoiseConfig& noise,
                                         uint64_t seed) {
    GaitProfile p;
    p.sample_rate = fs;
    p.noise = noise;
    p.seed = seed;
    p.phases.push_back({1.5, PhaseType::Stance, 0.0, 0.0});
    append_walk_cycles(p, walk_duration - 1.5, 1.0, 0.7, 0.05);
    append_run_cycles(p, run_duration, 1.5, 1.4, 0.12);
    return p;
}

inline GaitProfile make_flat_stair_profile(double flat1, int stairs,
                                           double flat2, double fs,
                                           const NoiseConfig& noise,
                                           uint64_t seed,
                                           double riser = 0.17) {
    GaitProfile p;
    p.sample_rate = fs;
    p.noise = noise;
    p.seed = seed;
    p.labeling = Labeling::SameHeight;
    p.phases.push_back({1.5, PhaseType::Stance, 0.0, 0.0});
    append_walk_cycles(p, flat1 - 1.5, 1.0, 0.7, 0.05);
    for (int i = 0; i < stairs; ++i) {
        p.phases.push_back({0.5, PhaseType::StairUp, 0.3, riser});
        p.phases.push_back({0.5, PhaseType::Stance, 0.0, 0.0});
    }
    append_walk_cycles(p, flat2, 1.0, 0.7, 0.05);
    return p;
}

inline GaitProfile make_markov_profile(const Eigen::MatrixXd& pi, int n_samples,
                                       double fs, const NoiseConfig& noise,
                                       uint64_t seed, int init_mode = 3) {
    GaitProfile p;
    p.sample_rate = fs;
    p.noise = noise;
    p.seed = seed;
    p.source = TruthSource::MarkovChain;
    p.pi = pi;
    p.markov_samples = n_samples;
    p.init_mode = init_mode;
    return p;
}

}  // namespace fbnav

#endif  // FBNAV_GAIT_SIM_HPP
