#ifndef FBNAV_IO_HPP
#define FBNAV_IO_HPP

#include <Eigen/Dense>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "fbnav/core.hpp"
#include "fbnav/errors.hpp"
#include "fbnav/gait_sim.hpp"
#include "fbnav/motion_models.hpp"
#include "fbnav/strapdown.hpp"

namespace fbnav {

// One output row of a trajectory run (filter bank or baseline).
struct TrajRecord {
    double t = 0.0;
    NavState x;
    EulerAngles euler;
    int map_mode = 1;
    Eigen::VectorXd mode_posterior;
    double loglik_inc = 0.0;
};

namespace detail {

inline std::vector<std::vector<double>> read_csv_rows(const std::string& path,
                                                      const std::string& header,
                                                      size_t min_cols) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError(path + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != header) {
        throw DataError(path + ": expected header '" + header + "', got '" + line + "'");
    }
    std::vector<std::vector<double>> rows;
    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw DataError(path + ":" + std::to_string(lineno) +
                                ": cannot parse '" + cell + "'");
            }
        }
        if (row.size() < min_cols) {
            throw DataError(path + ":" + std::to_string(lineno) + ": too few columns");
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

inline void open_out(std::ofstream& out, const std::string& path) {
    out.open(path);
    if (!out) throw DataError("cannot write " + path);
    out.precision(17);
}

}  // namespace detail

inline void write_imu_csv(const std::string& path,
                          const std::vector<ImuSample>& samples) {
    std::ofstream out;
    detail::open_out(out, path);
    out << "t,sx,sy,sz,wx,wy,wz\n";
    for (const ImuSample& u : samples) {
        out << u.t << ',' << u.s.x() << ',' << u.s.y() << ',' << u.s.z() << ','
            << u.w.x() << ',' << u.w.y() << ',' << u.w.z() << '\n';
    }
}

inline std::vector<ImuSample> read_imu_csv(const std::string& path) {
    auto rows = detail::read_csv_rows(path, "t,sx,sy,sz,wx,wy,wz", 7);
    std::vector<ImuSample> samples;
    samples.reserve(rows.size());
    double prev_t = -std::numeric_limits<double>::infinity();
    for (const auto& r : rows) {
        ImuSample u;
        u.t = r[0];
        u.s = Vec3(r[1], r[2], r[3]);
        u.w = Vec3(r[4], r[5], r[6]);
        if (!(u.t > prev_t)) throw DataError(path + ": timestamps not strictly increasing");
        prev_t = u.t;
        samples.push_back(u);
    }
    return samples;
}

inline void write_truth_csv(const std::string& path,
                            const std::vector<TruthRecord>& truth) {
    std::ofstream out;
    detail::open_out(out, path);
    out << "t,rx,ry,rz,vx,vy,vz,yaw,pitch,roll,mode\n";
    for (const TruthRecord& r : truth) {
        EulerAngles e = euler_from_quat(r.x.q);
        out << r.t << ',' << r.x.r.x() << ',' << r.x.r.y() << ',' << r.x.r.z()
            << ',' << r.x.v.x() << ',' << r.x.v.y() << ',' << r.x.v.z() << ','
            << e.yaw << ',' << e.pitch << ',' << e.roll << ',' << r.mode << '\n';
    }
}

inline std::vector<TruthRecord> read_truth_csv(const std::string& path) {
    auto rows = detail::read_csv_rows(
        path, "t,rx,ry,rz,vx,vy,vz,yaw,pitch,roll,mode", 11);
    std::vector<TruthRecord> truth;
    truth.reserve(rows.size());
    for (const auto& r : rows) {
        TruthRecord rec;
        rec.t = r[0];
        rec.x.r = Vec3(r[1], r[2], r[3]);
        rec.x.v = Vec3(r[4], r[5], r[6]);
        EulerAngles e;
        e.yaw = r[7];
        e.pitch = r[8];
        e.roll = r[9];
        rec.x.q = quat_from_euler(e);
        rec.mode = static_cast<int>(r[10]);
        rec.stance = rec.x.v.norm() < 1e-9;
        truth.push_back(rec);
    }
    return truth;
}

inline void write_traj_csv(const std::string& path,
                           const std::vector<TrajRecord>& records, int L) {
    std::ofstream out;
    detail::open_out(out, path);
    out << "t,rx,ry,rz,vx,vy,vz,yaw,pitch,roll,map_mode";
    for (int m = 1; m <= L; ++m) out << ",post" << m;
    out << ",loglik_inc\n";
    for (const TrajRecord& r : records) {
        out << r.t << ',' << r.x.r.x() << ',' << r.x.r.y() << ',' << r.x.r.z()
            << ',' << r.x.v.x() << ',' << r.x.v.y() << ',' << r.x.v.z() << ','
            << r.euler.yaw << ',' << r.euler.pitch << ',' << r.euler.roll << ','
            << r.map_mode;
        for (int m = 0; m < L; ++m) {
            out << ',' << (m < r.mode_posterior.size() ? r.mode_posterior(m) : 0.0);
        }
        out << ',' << r.loglik_inc << '\n';
    }
}

// ---- Run configuration ----------------------------------------------------

struct RunConfig {
    std::string model_name = "varying-gait";
    NoiseConfig noise;
    VaryingGaitParams vg;
    SameHeightParams sh;
    Eigen::MatrixXd pi;  // empty -> model default
    int max_leaves = 9;
    int align_window = 100;
    Eigen::VectorXd mode_prior;  // empty -> uniform

    MotionModel make_model() const {
        if (model_name == "varying-gait") {
            VaryingGaitParams p = vg;
            p.g = noise.g;
            return varying_gait_model(p, pi);
        }
        if (model_name == "same-height") {
            SameHeightParams p = sh;
            p.g = noise.g;
            return same_height_model(p, pi);
        }
        throw ConfigError("RunConfig: unknown model '" + model_name + "'");
    }
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j,
                                const std::vector<std::string>& known,
                                const std::string& ctx) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const auto& k : known) {
            if (it.key() == k) {
                ok = true;
                break;
            }
        }
        if (!ok) throw ConfigError("config: unknown key '" + it.key() + "' in " + ctx);
    }
}

inline Eigen::MatrixXd json_matrix(const nlohmann::json& j) {
    const auto rows = j.size();
    Eigen::MatrixXd m(rows, rows ? j[0].size() : 0);
    for (size_t i = 0; i < rows; ++i) {
        if (j[i].size() != static_cast<size_t>(m.cols())) {
            throw ConfigError("config: ragged matrix");
        }
        for (size_t k = 0; k < j[i].size(); ++k) m(i, k) = j[i][k].get<double>();
    }
    return m;
}

}  // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& j) {
    RunConfig cfg;
    detail::reject_unknown_keys(
        j,
        {"model", "noise", "variances", "pi", "max_leaves", "align_window",
         "mode_prior"},
        "top level");
    if (j.contains("model")) cfg.model_name = j.at("model").get<std::string>();
    if (j.contains("noise")) {
        const auto& n = j.at("noise");
        detail::reject_unknown_keys(n, {"sigma_s", "sigma_w", "dt", "gravity"}, "noise");
        if (n.contains("sigma_s")) cfg.noise.sigma_s = n.at("sigma_s").get<double>();
        if (n.contains("sigma_w")) cfg.noise.sigma_w = n.at("sigma_w").get<double>();
        if (n.contains("dt")) cfg.noise.dt = n.at("dt").get<double>();
        if (n.contains("gravity")) {
            const auto& g = n.at("gravity");
            if (g.size() != 3) throw ConfigError("config: gravity must have 3 entries");
            cfg.noise.g = Vec3(g[0].get<double>(), g[1].get<double>(), g[2].get<double>());
        }
    }
    if (j.contains("variances")) {
        const auto& v = j.at("variances");
        detail::reject_unknown_keys(v,
                                    {"sigma_v2", "sigma_w2", "sigma_s2", "sigma_v3",
                                     "sigma_w3", "sigma_s3", "sigma_v", "sigma_w",
                                     "sigma_s", "sigma_h", "sigma_nc"},
                                    "variances");
        auto get = [&v](const char* key, double& dst) {
            if (v.contains(key)) dst = v.at(key).get<double>();
        };
        get("sigma_v2", cfg.vg.sigma_v2);
        get("sigma_w2", cfg.vg.sigma_w2);
        get("sigma_s2", cfg.vg.sigma_s2);
        get("sigma_v3", cfg.vg.sigma_v3);
        get("sigma_w3", cfg.vg.sigma_w3);
        get("sigma_s3", cfg.vg.sigma_s3);
        get("sigma_v", cfg.sh.sigma_v);
        get("sigma_w", cfg.sh.sigma_w);
        get("sigma_s", cfg.sh.sigma_s);
        get("sigma_h", cfg.sh.sigma_h);
        get("sigma_nc", cfg.vg.sigma_nc);
        get("sigma_nc", cfg.sh.sigma_nc);
    }
    if (j.contains("pi")) cfg.pi = detail::json_matrix(j.at("pi"));
    if (j.contains("max_leaves")) cfg.max_leaves = j.at("max_leaves").get<int>();
    if (j.contains("align_window")) cfg.align_window = j.at("align_window").get<int>();
    if (j.contains("mode_prior")) {
        const auto& p = j.at("mode_prior");
        cfg.mode_prior.resize(p.size());
        for (size_t i = 0; i < p.size(); ++i) cfg.mode_prior(i) = p[i].get<double>();
    }
    return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ConfigError(path + ": invalid JSON: " + e.what());
    }
    return parse_run_config(j);
}

}  // namespace fbnav

#endif  // FBNAV_IO_HPP
