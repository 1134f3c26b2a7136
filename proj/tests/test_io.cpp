#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "fbnav/gait_sim.hpp"
#include "fbnav/io.hpp"

using namespace fbnav;

namespace {

std::filesystem::path temp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("fbnav_io_" + name);
}

}  // namespace

TEST_CASE("imu csv round trip is exact") {
    NoiseConfig noise;
    GaitProfile prof = make_walk_profile(5.0, 100.0, noise, 19);
    auto [samples, truth] = simulate(prof);
    (void)truth;

    const auto path = temp_file("imu.csv");
    write_imu_csv(path.string(), samples);
    const auto back = read_imu_csv(path.string());
    REQUIRE(back.size() == samples.size());
    for (size_t k = 0; k < samples.size(); ++k) {
        CHECK(back[k].t == samples[k].t);
        CHECK((back[k].s - samples[k].s).norm() == 0.0);
        CHECK((back[k].w - samples[k].w).norm() == 0.0);
    }
    std::filesystem::remove(path);
}

TEST_CASE("truth csv round trip preserves fields within write precision") {
    NoiseConfig noise;
    GaitProfile prof = make_walk_profile(5.0, 100.0, noise, 23);
    auto [samples, truth] = simulate(prof);
    (void)samples;

    const auto path = temp_file("truth.csv");
    write_truth_csv(path.string(), truth);
    const auto back = read_truth_csv(path.string());
    REQUIRE(back.size() == truth.size());
    for (size_t k = 0; k < truth.size(); ++k) {
        CHECK(back[k].t == truth[k].t);
        CHECK((back[k].x.r - truth[k].x.r).norm() < 1e-12);
        CHECK((back[k].x.v - truth[k].x.v).norm() < 1e-12);
        CHECK(back[k].x.q.angularDistance(truth[k].x.q) < 1e-12);
        CHECK(back[k].mode == truth[k].mode);
        // The format has no stance column; the reader infers it from the
        // velocity, which also marks the zero-velocity endpoints of swings.
        CHECK(back[k].stance == (truth[k].x.v.norm() < 1e-9));
    }
    std::filesystem::remove(path);
}

TEST_CASE("imu reader rejects garbage") {
    const auto path = temp_file("bad.csv");

    std::ofstream(path) << "wrong,header\n";
    CHECK_THROWS_AS(read_imu_csv(path.string()), DataError);

    std::ofstream(path) << "t,sx,sy,sz,wx,wy,wz\n0.0,1,2\n";
    CHECK_THROWS_AS(read_imu_csv(path.string()), DataError);

    std::ofstream(path) << "t,sx,sy,sz,wx,wy,wz\n0.0,1,2,3,4,5,abc\n";
    CHECK_THROWS_AS(read_imu_csv(path.string()), DataError);

    // Non-increasing timestamps.
    std::ofstream(path) << "t,sx,sy,sz,wx,wy,wz\n"
                           "0.0,0,0,9.81,0,0,0\n"
                           "0.0,0,0,9.81,0,0,0\n";
    CHECK_THROWS_AS(read_imu_csv(path.string()), DataError);

    CHECK_THROWS_AS(read_imu_csv("/nonexistent/nowhere.csv"), DataError);
    std::filesystem::remove(path);
}

TEST_CASE("trajectory writer emits one row per record with the right width") {
    std::vector<TrajRecord> recs(3);
    for (int k = 0; k < 3; ++k) {
        recs[k].t = 0.01 * k;
        recs[k].map_mode = k + 1;
        recs[k].mode_posterior = Eigen::VectorXd::Constant(3, 1.0 / 3.0);
        recs[k].loglik_inc = -1.5;
    }
    const auto path = temp_file("traj.csv");
    write_traj_csv(path.string(), recs, 3);

    std::ifstream in(path);
    std::string line;
    REQUIRE(std::getline(in, line));
    CHECK(line == "t,rx,ry,rz,vx,vy,vz,yaw,pitch,roll,map_mode,post1,post2,post3,loglik_inc");
    int rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        CHECK(std::count(line.begin(), line.end(), ',') == 14);
    }
    CHECK(rows == 3);
    std::filesystem::remove(path);
}

TEST_CASE("run config parses a full document") {
    nlohmann::json j = {
        {"model", "same-height"},
        {"noise", {{"sigma_s", 0.02}, {"sigma_w", 0.002}, {"dt", 0.005},
                   {"gravity", {0.0, 0.0, -9.82}}}},
        {"variances", {{"sigma_h", 0.02}, {"sigma_nc", 2.0}}},
        {"max_leaves", 5},
        {"align_window", 80},
        {"mode_prior", {0.5, 0.25, 0.25}},
    };
    const RunConfig cfg = parse_run_config(j);
    CHECK(cfg.model_name == "same-height");
    CHECK(cfg.noise.sigma_s == 0.02);
    CHECK(cfg.noise.dt == 0.005);
    CHECK(cfg.noise.g.z() == -9.82);
    CHECK(cfg.sh.sigma_h == 0.02);
    CHECK(cfg.sh.sigma_nc == 2.0);
    CHECK(cfg.max_leaves == 5);
    CHECK(cfg.align_window == 80);
    CHECK(cfg.mode_prior.size() == 3);
    const MotionModel m = cfg.make_model();
    CHECK(m.err_dim == 10);
}

TEST_CASE("run config rejects unknown keys at every level") {
    CHECK_THROWS_AS(parse_run_config({{"modle", "varying-gait"}}), ConfigError);
    CHECK_THROWS_AS(parse_run_config({{"noise", {{"sigma_x", 1.0}}}}), ConfigError);
    CHECK_THROWS_AS(parse_run_config({{"variances", {{"sigma_q", 1.0}}}}), ConfigError);
}

TEST_CASE("run config accepts an inline transition matrix") {
    nlohmann::json j = {
        {"model", "varying-gait"},
        {"pi", {{0.99, 0.05, 0.0}, {0.01, 0.9, 0.01}, {0.0, 0.05, 0.99}}},
    };
    const RunConfig cfg = parse_run_config(j);
    const MotionModel m = cfg.make_model();
    CHECK(m.trans.pi(0, 0) == 0.99);
    CHECK(m.trans.pi(1, 1) == 0.9);

    // A matrix violating the structure mask fails at model construction.
    nlohmann::json bad = j;
    bad["pi"] = {{0.9, 0.05, 0.1}, {0.1, 0.9, 0.01}, {0.0, 0.05, 0.89}};
    const RunConfig cfg_bad = parse_run_config(bad);
    CHECK_THROWS_AS(cfg_bad.make_model(), ConfigError);
}
