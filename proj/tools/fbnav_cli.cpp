// fbnav command-line front end: synthetic data generation, filter-bank
// inference, transition-matrix learning, and baseline comparison.

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "fbnav/baseline.hpp"
#include "fbnav/filterbank.hpp"
#include "fbnav/gait_sim.hpp"
#include "fbnav/io.hpp"
#include "fbnav/learning.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;
constexpr int kExitNotConverged = 5;

Eigen::MatrixXd load_matrix_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw fbnav::ConfigError("cannot open " + path);
    json j;
    in >> j;
    if (j.is_object() && j.contains("pi")) j = j.at("pi");
    return fbnav::detail::json_matrix(j);
}

std::vector<fbnav::TrajRecord> run_filterbank(
    const fbnav::RunConfig& cfg, const std::vector<fbnav::ImuSample>& samples) {
    const fbnav::MotionModel model = cfg.make_model();
    const size_t n_align =
        std::min(samples.size(),
                 static_cast<size_t>(std::max(1, cfg.align_window)));
    fbnav::GaussianBelief prior = fbnav::initial_alignment(
        std::span<const fbnav::ImuSample>(samples.data(), n_align),
        model.err_dim);
    Eigen::VectorXd mode_prior =
        cfg.mode_prior.size() > 0
            ? cfg.mode_prior
            : Eigen::VectorXd::Constant(model.num_modes, 1.0 / model.num_modes);
    fbnav::FilterBank bank(model, cfg.noise, prior, mode_prior, cfg.max_leaves);

    std::vector<fbnav::TrajRecord> out;
    out.reserve(samples.size());
    for (const fbnav::ImuSample& u : samples) {
        bank.step(u);
        const fbnav::FusedEstimate est = bank.fuse();
        fbnav::TrajRecord rec;
        rec.t = u.t;
        rec.x = est.x_mv;
        rec.euler = est.euler;
        rec.map_mode = est.map_mode;
        rec.mode_posterior = est.mode_posterior;
        rec.loglik_inc = bank.last_loglik_increment();
        out.push_back(std::move(rec));
    }
    return out;
}

struct Metrics {
    double final_horizontal = 0.0;
    double along_track = 0.0;
    double cross_track = 0.0;
    double vertical_rms = 0.0;
};

Metrics compute_metrics(const std::vector<fbnav::TrajRecord>& traj,
                        const std::vector<fbnav::TruthRecord>& truth) {
    if (traj.empty() || traj.size() != truth.size()) {
        throw fbnav::DataError("metrics: trajectory/truth length mismatch");
    }
    Metrics m;
    const Eigen::Vector2d err_xy =
        (traj.back().x.r - truth.back().x.r).head<2>();
    m.final_horizontal = err_xy.norm();

    Eigen::Vector2d track =
        (truth.back().x.r - truth.front().x.r).head<2>();
    if (track.norm() < 1e-6) track = Eigen::Vector2d(1.0, 0.0);
    track.normalize();
    const Eigen::Vector2d perp(-track.y(), track.x());
    m.along_track = err_xy.dot(track);
    m.cross_track = err_xy.dot(perp);

    double acc = 0.0;
    for (size_t k = 0; k < traj.size(); ++k) {
        const double dz = traj[k].x.r.z() - truth[k].x.r.z();
        acc += dz * dz;
    }
    m.vertical_rms = std::sqrt(acc / static_cast<double>(traj.size()));
    return m;
}

void write_plot_csv(const std::string& path,
                    const std::vector<fbnav::TrajRecord>& traj) {
    std::ofstream out(path);
    if (!out) throw fbnav::DataError("cannot write " + path);
    out.precision(17);
    out << "t,speed,height,map_mode\n";
    for (const auto& r : traj) {
        out << r.t << ',' << r.x.v.norm() << ',' << r.x.r.z() << ','
            << r.map_mode << '\n';
    }
}

int cmd_simulate(const std::string& profile_name, double duration,
                 uint64_t seed, const std::string& out_dir, double fs,
                 double cadence, double stride, double step_height,
                 double sigma_s, double sigma_w, int stairs, double riser,
                 const std::string& pi_file, int markov_samples) {
    fbnav::NoiseConfig noise;
    noise.sigma_s = sigma_s;
    noise.sigma_w = sigma_w;
    noise.dt = 1.0 / fs;

    fbnav::GaitProfile prof;
    if (profile_name == "stationary") {
        prof = fbnav::make_stationary_profile(duration, fs, noise, seed);
    } else if (profile_name == "walk") {
        prof = fbnav::make_walk_profile(duration, fs, noise, seed, cadence,
                                        stride, step_height);
    } else if (profile_name == "walk-run") {
        prof = fbnav::make_walk_run_profile(duration / 2.0, duration / 2.0, fs,
                                            noise, seed);
    } else if (profile_name == "flat-stair") {
        const double stair_time = stairs * 1.0;
        const double flat = std::max(2.0, (duration - stair_time) / 2.0);
        prof = fbnav::make_flat_stair_profile(flat, stairs, flat, fs, noise,
                                              seed, riser);
    } else if (profile_name == "markov") {
        Eigen::MatrixXd pi = pi_file.empty()
                                 ? fbnav::default_varying_gait_pi()
                                 : load_matrix_json(pi_file);
        const int n = markov_samples > 0
                          ? markov_samples
                          : static_cast<int>(duration * fs);
        prof = fbnav::make_markov_profile(pi, n, fs, noise, seed);
    } else {
        throw fbnav::ConfigError("unknown profile '" + profile_name + "'");
    }

    auto [samples, truth] = fbnav::simulate(prof);
    fs::create_directories(out_dir);
    fbnav::write_imu_csv((fs::path(out_dir) / "imu.csv").string(), samples);
    fbnav::write_truth_csv((fs::path(out_dir) / "truth.csv").string(), truth);
    std::cout << "simulate: profile=" << profile_name << " samples="
              << samples.size() << " seed=" << seed << " -> " << out_dir
              << "/{imu.csv,truth.csv}\n";
    return 0;
}

int cmd_run(const std::string& imu_path, const std::string& out_path,
            fbnav::RunConfig cfg) {
    const auto samples = fbnav::read_imu_csv(imu_path);
    const auto traj = run_filterbank(cfg, samples);
    fbnav::write_traj_csv(out_path, traj, cfg.make_model().num_modes);
    std::cout << "run: model=" << cfg.model_name << " samples="
              << samples.size() << " -> " << out_path << '\n';
    return 0;
}

int cmd_learn(const std::vector<std::string>& imu_paths,
              const std::string& out_path, fbnav::RunConfig cfg,
              const std::string& pi_init_file, int max_iter, double tol) {
    fbnav::LearnConfig lc;
    for (const auto& p : imu_paths) lc.dataset.push_back(fbnav::read_imu_csv(p));
    lc.max_iter = max_iter;
    lc.tol_loglik = tol;
    lc.bank.max_leaves = cfg.max_leaves;
    lc.bank.align_window = cfg.align_window;
    if (cfg.mode_prior.size() > 0) lc.bank.mode_prior = cfg.mode_prior;

    fbnav::MotionModel model = cfg.make_model();
    Eigen::MatrixXd pi_init;
    if (!pi_init_file.empty()) {
        pi_init = load_matrix_json(pi_init_file);
    } else if (cfg.model_name == "varying-gait") {
        pi_init.resize(3, 3);
        pi_init << 0.5, 1.0 / 3.0, 0.0,
                   0.5, 1.0 / 3.0, 0.5,
                   0.0, 1.0 / 3.0, 0.5;
    } else {
        pi_init.resize(3, 3);
        pi_init << 1.0 / 3.0, 0.0, 0.5,
                   1.0 / 3.0, 0.0, 0.0,
                   1.0 / 3.0, 1.0, 0.5;
    }

    const fbnav::LearnReport rep =
        fbnav::learn_transition_matrix(lc, model, cfg.noise, pi_init);

    json j;
    j["pi"] = json::array();
    for (int i = 0; i < rep.pi_hat.rows(); ++i) {
        json row = json::array();
        for (int k = 0; k < rep.pi_hat.cols(); ++k) row.push_back(rep.pi_hat(i, k));
        j["pi"].push_back(row);
    }
    j["loglik_trace"] = rep.loglik_trace;
    j["iterations"] = rep.iterations;
    j["converged"] = rep.converged;
    j["occupancy"] = std::vector<double>(
        rep.occupancy_pct.data(), rep.occupancy_pct.data() + rep.occupancy_pct.size());
    std::ofstream out(out_path);
    if (!out) throw fbnav::DataError("cannot write " + out_path);
    out << j.dump(2) << '\n';

    std::cout << "learn: iterations=" << rep.iterations << " converged="
              << (rep.converged ? "true" : "false") << " loglik="
              << rep.loglik_trace.back() << " -> " << out_path << '\n';
    return rep.converged ? 0 : kExitNotConverged;
}

int cmd_compare(const std::string& imu_path, const std::string& truth_path,
                const std::string& out_dir, fbnav::RunConfig cfg, double gamma,
                int window) {
    const auto samples = fbnav::read_imu_csv(imu_path);
    const auto truth = fbnav::read_truth_csv(truth_path);

    const auto traj_fb = run_filterbank(cfg, samples);

    fbnav::DetectorConfig det;
    det.gamma = gamma;
    det.window = window;
    det.sigma_a = cfg.noise.sigma_s;
    det.sigma_g = cfg.noise.sigma_w;
    det.g_mag = cfg.noise.g.norm();
    const size_t n_align = std::min(
        samples.size(), static_cast<size_t>(std::max(1, cfg.align_window)));
    fbnav::GaussianBelief prior = fbnav::initial_alignment(
        std::span<const fbnav::ImuSample>(samples.data(), n_align), 9);
    const auto traj_bl = fbnav::run_zupt_ins(samples, det, cfg.noise, prior);

    const Metrics mfb = compute_metrics(traj_fb, truth);
    const Metrics mbl = compute_metrics(traj_bl, truth);

    fs::create_directories(out_dir);
    {
        std::ofstream out((fs::path(out_dir) / "metrics.csv").string());
        if (!out) throw fbnav::DataError("cannot write metrics.csv");
        out.precision(17);
        out << "system,final_horizontal_error_m,along_track_error_m,"
               "cross_track_error_m,vertical_rms_m\n";
        out << "filterbank," << mfb.final_horizontal << ',' << mfb.along_track
            << ',' << mfb.cross_track << ',' << mfb.vertical_rms << '\n';
        out << "baseline," << mbl.final_horizontal << ',' << mbl.along_track
            << ',' << mbl.cross_track << ',' << mbl.vertical_rms << '\n';
    }
    write_plot_csv((fs::path(out_dir) / "plot_filterbank.csv").string(), traj_fb);
    write_plot_csv((fs::path(out_dir) / "plot_baseline.csv").string(), traj_bl);

    std::cout << "compare: filterbank vertical_rms=" << mfb.vertical_rms
              << " baseline vertical_rms=" << mbl.vertical_rms << " -> "
              << out_dir << "/metrics.csv\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tightly integrated motion classification and inertial "
                 "navigation (filter bank, learning, baseline, simulator)"};
    app.require_subcommand(1);

    // simulate
    auto* sim = app.add_subcommand("simulate", "Generate synthetic IMU data with ground truth");
    std::string profile = "walk", out_dir = "sim_out", pi_file;
    double duration = 60.0, fs = 100.0, cadence = 1.0, stride = 0.7;
    double step_height = 0.05, sim_sigma_s = 0.05, sim_sigma_w = 0.005, riser = 0.17;
    uint64_t seed = 0;
    int stairs = 12, markov_samples = 0;
    sim->add_option("--profile", profile,
                    "stationary|walk|walk-run|flat-stair|markov");
    sim->add_option("--duration", duration, "seconds");
    sim->add_option("--seed", seed, "RNG seed (default 0)");
    sim->add_option("--out-dir", out_dir, "output directory");
    sim->add_option("--sample-rate", fs, "Hz");
    sim->add_option("--cadence", cadence, "gait cycles per second");
    sim->add_option("--stride", stride, "m");
    sim->add_option("--step-height", step_height, "m foot lift");
    sim->add_option("--sigma-s", sim_sigma_s, "accel noise std m/s^2");
    sim->add_option("--sigma-w", sim_sigma_w, "gyro noise std rad/s");
    sim->add_option("--stairs", stairs, "stair count (flat-stair)");
    sim->add_option("--riser", riser, "stair riser m");
    sim->add_option("--pi-file", pi_file, "JSON transition matrix (markov)");
    sim->add_option("--markov-samples", markov_samples, "samples (markov)");

    // shared run/learn/compare options
    std::string model_name = "varying-gait", config_path, imu_path, truth_path;
    std::string out_path = "traj.csv", report_path = "learn_report.json";
    std::string compare_dir = "compare_out", pi_init_file;
    std::vector<std::string> imu_paths;
    int max_leaves = -1, max_iter = 50, det_window = 5;
    double tol = 1e-4, gamma = -1.0;

    auto* run = app.add_subcommand("run", "Run the filter bank on an IMU CSV");
    run->add_option("--model", model_name, "varying-gait|same-height");
    run->add_option("--imu", imu_path, "input IMU CSV")->required();
    run->add_option("--config", config_path, "JSON run configuration");
    run->add_option("--out", out_path, "output trajectory CSV");
    run->add_option("--max-leaves", max_leaves, "hypothesis budget");

    auto* learn = app.add_subcommand("learn", "Learn the mode transition matrix");
    learn->add_option("--model", model_name, "varying-gait|same-height");
    learn->add_option("--imu", imu_paths, "input IMU CSV(s)")->required();
    learn->add_option("--config", config_path, "JSON run configuration");
    learn->add_option("--out", report_path, "output report JSON");
    learn->add_option("--pi-init", pi_init_file, "JSON initial transition matrix");
    learn->add_option("--max-iter", max_iter, "iteration cap");
    learn->add_option("--tol", tol, "absolute log-likelihood tolerance");

    auto* cmp = app.add_subcommand("compare", "Filter bank vs baseline ZUPT INS");
    cmp->add_option("--model", model_name, "varying-gait|same-height");
    cmp->add_option("--imu", imu_path, "input IMU CSV")->required();
    cmp->add_option("--truth", truth_path, "truth CSV")->required();
    cmp->add_option("--config", config_path, "JSON run configuration");
    cmp->add_option("--gamma", gamma, "baseline detector threshold")->required();
    cmp->add_option("--window", det_window, "baseline detector window");
    cmp->add_option("--out-dir", compare_dir, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) {
            return cmd_simulate(profile, duration, seed, out_dir, fs, cadence,
                                stride, step_height, sim_sigma_s, sim_sigma_w,
                                stairs, riser, pi_file, markov_samples);
        }
        fbnav::RunConfig cfg;
        if (!config_path.empty()) cfg = fbnav::load_run_config(config_path);
        CLI::App* active = run->parsed() ? static_cast<CLI::App*>(run)
                         : learn->parsed() ? static_cast<CLI::App*>(learn)
                                           : static_cast<CLI::App*>(cmp);
        if (active->count("--model") > 0 || config_path.empty()) {
            cfg.model_name = model_name;
        }
        if (max_leaves > 0) cfg.max_leaves = max_leaves;

        if (run->parsed()) return cmd_run(imu_path, out_path, cfg);
        if (learn->parsed()) {
            return cmd_learn(imu_paths, report_path, cfg, pi_init_file,
                             max_iter, tol);
        }
        if (cmp->parsed()) {
            return cmd_compare(imu_path, truth_path, compare_dir, cfg, gamma,
                               det_window);
        }
    } catch (const fbnav::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const fbnav::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::runtime_error& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    }
    return 0;
}
