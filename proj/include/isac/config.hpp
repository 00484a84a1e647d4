#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "isac/geometry.hpp"

namespace isac {

/// Configuration error carrying the offending field path.
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& path, const std::string& msg)
        : std::runtime_error(path + ": " + msg), field_path_(path) {}
    const std::string& field_path() const { return field_path_; }

private:
    std::string field_path_;
};

/// OFDM numerology and the sensing resource split for one stage.
/// All derived constants (noise variance, bin widths, thresholds) come
/// from here.
struct FrameConfig {
    double fc = 0.0;       // carrier frequency, Hz
    double delta_f = 0.0;  // subcarrier spacing, Hz
    int k_total = 0;       // total active subcarriers K
    int m_total = 0;       // OFDM symbols per frame M
    double t_cp = 0.0;     // cyclic prefix duration, s
    int k_s = 0;           // sensing subcarriers K_s = round(rho_f * K)
    int m_s = 0;           // sensing symbols per direction M_s
    int n_dir = 0;         // sensing directions
    double rho_f = 1.0;    // sensing bandwidth fraction, (0, 1]
    double rho_p = 1.0;    // sensing power fraction, [0, 1]
    double p_avg = 0.0;    // per-subcarrier power, W
    double n0 = 0.0;       // noise PSD, W/Hz
    int k_p = 0;           // range zero-pad length, >= K_s
    int m_p = 0;           // Doppler zero-pad length, >= M_s

    double symbol_duration() const { return 1.0 / delta_f + t_cp; }
    double noise_variance() const { return n0 * delta_f; }
};

/// A base station: global pose, array sizes, element gains, scan sector.
struct BsDescriptor {
    GlobalPoint position;      // m
    double orientation = 0.0;  // rad, (-pi, pi]
    int n_t = 1;               // transmit antennas
    int n_r = 1;               // receive antennas
    double g_t = 1.0;          // element TX gain, linear
    double g_r = 1.0;          // element RX gain, linear
    double theta0 = 0.0;       // scan half-sector, rad, (0, pi/2]
    double comm_angle = 0.0;   // local DoD of the communication beam, rad

    BsPose pose() const { return BsPose{position, orientation}; }
};

inline LocalPolar global_to_local(const GlobalPoint& p, const BsDescriptor& bs) {
    return global_to_local(p, bs.pose());
}
inline GlobalPoint local_polar_to_global(const LocalPolar& lp, const BsDescriptor& bs) {
    return local_polar_to_global(lp, bs.pose());
}

enum class FusionMethod { Simple, Weighted, Wls };

enum class RoiModel {
    Coarse,    // RoI centered at the actual coarse fused estimate
    Gaussian,  // RoI center drawn as N(p_true, sigma_p^2/2 * I)
};

/// Monte Carlo campaign settings.
struct SimConfig {
    double far = 1e-3;             // per-map false-alarm rate, (0, 1)
    int n_iter = 250;              // trials per trajectory point
    double roi_side = 4.0;         // RoI square side, m
    double dx = 0.02;              // grid step, m
    double dy = 0.02;              // grid step, m
    double sigma_p = 0.70;         // coarse-accuracy std used by the RoI model, m
    std::vector<FusionMethod> fusion = {FusionMethod::Simple, FusionMethod::Weighted,
                                        FusionMethod::Wls};
    std::uint64_t seed = 1;
    std::vector<GlobalPoint> trajectory;
    RoiModel roi_model = RoiModel::Coarse;
    bool cheb_taper = false;       // Dolph-Chebyshev taper on receive beamformers
    double cheb_sll_db = 30.0;     // taper design sidelobe level, dB
    double cluster_eps = 0.61;     // DBSCAN radius, m (~2 range bins)
    int cluster_min_pts = 1;
};

/// Target specification (positions come from the trajectory).
struct TargetSpec {
    double mean_rcs = 1.0;           // m^2
    double velocity_x = 0.0;         // m/s
    double velocity_y = 0.0;         // m/s
};

struct Scenario {
    FrameConfig stage1;
    FrameConfig stage2;
    std::vector<BsDescriptor> bs;
    TargetSpec target;
    SimConfig sim;
};

/// Constants derived from a frame/BS pair: noise variance, scan step,
/// range bin width, valid delay rows, search-space size, and the
/// detection threshold eta = sigma_N^2 * ln(|Omega| / FAR).
struct DerivedConstants {
    double sigma2_noise = 0.0;     // W
    double delta_theta = 0.0;      // rad between scan directions
    double range_bin_width = 0.0;  // m
    int q_max = 0;                 // valid delay rows, q in {0..q_max-1}
    int omega_size = 0;            // |Omega| = q_max * N_dir
    double threshold = 0.0;        // eta, W
};

inline DerivedConstants derived_constants(const FrameConfig& f, const BsDescriptor& bs,
                                          double far) {
    if (f.n_dir >= 2 && !(bs.theta0 > 0.0))
        throw ConfigError("bs.theta0_deg", "scan requested with nonpositive sector");
    DerivedConstants d;
    d.sigma2_noise = f.noise_variance();
    d.delta_theta = f.n_dir >= 2 ? 2.0 * bs.theta0 / (f.n_dir - 1) : 0.0;
    if (f.n_dir < 2 && f.n_dir != 1)
        throw ConfigError("frame.n_dir", "need at least 2 directions for a scan");
    d.range_bin_width = kSpeedOfLight / (2.0 * f.delta_f * f.k_p);
    d.q_max = static_cast<int>(std::ceil(f.t_cp * f.delta_f * f.k_p));
    d.omega_size = d.q_max * f.n_dir;
    d.threshold = d.sigma2_noise * std::log(static_cast<double>(d.omega_size) / far);
    return d;
}

/// Half-up rounding used for K_s = round(rho_f * K).
inline int round_half_up(double v) { return static_cast<int>(std::floor(v + 0.5)); }

namespace detail {

using nlohmann::json;

inline const json& require(const json& j, const std::string& key, const std::string& path) {
    auto it = j.find(key);
    if (it == j.end()) throw ConfigError(path + "." + key, "missing field");
    return *it;
}

inline double num(const json& j, const std::string& key, const std::string& path) {
    const json& v = require(j, key, path);
    if (!v.is_number()) throw ConfigError(path + "." + key, "expected a number");
    return v.get<double>();
}

inline double num_or(const json& j, const std::string& key, const std::string& path,
                     double dflt) {
    return j.contains(key) ? num(j, key, path) : dflt;
}

inline int integer(const json& j, const std::string& key, const std::string& path) {
    double v = num(j, key, path);
    if (v != std::floor(v)) throw ConfigError(path + "." + key, "expected an integer");
    return static_cast<int>(v);
}

/// Angle given either as "<base>_rad" or "<base>_deg".
inline double angle(const json& j, const std::string& base, const std::string& path,
                    std::optional<double> dflt = std::nullopt) {
    if (j.contains(base + "_rad")) return num(j, base + "_rad", path);
    if (j.contains(base + "_deg")) return num(j, base + "_deg", path) * kPi / 180.0;
    if (dflt) return *dflt;
    throw ConfigError(path + "." + base + "_rad", "missing field");
}

inline int next_pow2_at_least(int n) {
    int p = 1;
    while (p < n) p <<= 1;
    return p;
}

inline FrameConfig parse_stage(const json& root, const json& stage, const std::string& path) {
    FrameConfig f;
    f.fc = num(root, "fc_hz", "frame");
    f.delta_f = num(root, "delta_f_hz", "frame");
    if (!(f.delta_f > 0.0)) throw ConfigError("frame.delta_f_hz", "subcarrier spacing must be positive");
    if (!(f.fc > 0.0)) throw ConfigError("frame.fc_hz", "carrier frequency must be positive");
    f.k_total = integer(root, "k_subcarriers", "frame");
    f.m_total = integer(root, "m_symbols", "frame");
    if (f.k_total < 1) throw ConfigError("frame.k_subcarriers", "must be >= 1");
    if (f.m_total < 1) throw ConfigError("frame.m_symbols", "must be >= 1");
    if (root.contains("t_cp_s")) {
        f.t_cp = num(root, "t_cp_s", "frame");
    } else if (root.contains("t_symbol_s")) {
        f.t_cp = num(root, "t_symbol_s", "frame") - 1.0 / f.delta_f;
    } else {
        throw ConfigError("frame.t_cp_s", "missing field (give t_cp_s or t_symbol_s)");
    }
    if (!(f.t_cp > 0.0)) throw ConfigError("frame.t_cp_s", "cyclic prefix must be positive");

    double p_dbm = num(root, "p_avg_dbm", "frame");
    f.p_avg = std::pow(10.0, p_dbm / 10.0) * 1e-3;
    f.n0 = num(root, "n0_w_per_hz", "frame");
    if (!(f.n0 > 0.0)) throw ConfigError("frame.n0_w_per_hz", "noise PSD must be positive");

    f.n_dir = integer(stage, "n_dir", path);
    f.m_s = integer(stage, "m_s", path);
    f.rho_f = num(stage, "rho_f", path);
    f.rho_p = num_or(stage, "rho_p", path, 1.0);
    if (!(f.rho_f > 0.0 && f.rho_f <= 1.0)) throw ConfigError(path + ".rho_f", "must be in (0, 1]");
    if (!(f.rho_p >= 0.0 && f.rho_p <= 1.0)) throw ConfigError(path + ".rho_p", "must be in [0, 1]");
    f.k_s = round_half_up(f.rho_f * f.k_total);
    if (f.k_s < 1 || f.k_s > f.k_total) throw ConfigError(path + ".rho_f", "K_s out of range");
    if (f.m_s < 1 || f.m_s > f.m_total) throw ConfigError(path + ".m_s", "must be in [1, M]");
    if (f.n_dir < 1) throw ConfigError(path + ".n_dir", "must be >= 1");
    f.k_p = stage.contains("k_p") ? integer(stage, "k_p", path) : next_pow2_at_least(f.k_s);
    f.m_p = stage.contains("m_p") ? integer(stage, "m_p", path) : next_pow2_at_least(f.m_s);
    if (f.k_p < f.k_s) throw ConfigError(path + ".k_p", "must be >= K_s");
    if (f.m_p < f.m_s) throw ConfigError(path + ".m_p", "must be >= M_s");
    return f;
}

}  // namespace detail

/// Parse and validate a scenario document. Every violated invariant is
/// reported with its field path.
inline Scenario load_scenario(const nlohmann::json& j) {
    using detail::angle;
    using detail::integer;
    using detail::num;
    using detail::num_or;
    using detail::require;

    Scenario sc;
    const auto& frame = require(j, "frame", "");
    sc.stage1 = detail::parse_stage(frame, require(frame, "stage1", "frame"), "frame.stage1");
    sc.stage2 = detail::parse_stage(frame, require(frame, "stage2", "frame"), "frame.stage2");

    const auto& bss = require(j, "bs", "");
    if (!bss.is_array() || bss.empty()) throw ConfigError("bs", "expected a nonempty array");
    for (std::size_t i = 0; i < bss.size(); ++i) {
        const std::string path = "bs[" + std::to_string(i) + "]";
        const auto& b = bss[i];
        BsDescriptor d;
        const auto& pos = require(b, "position_m", path);
        if (!pos.is_array() || pos.size() != 2) throw ConfigError(path + ".position_m", "expected [x, y]");
        d.position = GlobalPoint{pos[0].get<double>(), pos[1].get<double>()};
        d.orientation = wrap_angle(angle(b, "orientation", path));
        d.n_t = integer(b, "n_t", path);
        d.n_r = integer(b, "n_r", path);
        if (d.n_t < 1) throw ConfigError(path + ".n_t", "must be >= 1");
        if (d.n_r < 1) throw ConfigError(path + ".n_r", "must be >= 1");
        d.g_t = std::pow(10.0, num_or(b, "g_t_db", path, 0.0) / 10.0);
        d.g_r = std::pow(10.0, num_or(b, "g_r_db", path, 0.0) / 10.0);
        d.theta0 = angle(b, "theta0", path);
        if (!(d.theta0 > 0.0 && d.theta0 <= kPi / 2.0))
            throw ConfigError(path + ".theta0_deg", "must be in (0, 90] degrees");
        d.comm_angle = angle(b, "comm_angle", path, 0.0);
        sc.bs.push_back(d);
    }

    const auto& tgt = require(j, "target", "");
    sc.target.mean_rcs = num(tgt, "mean_rcs_m2", "target");
    if (!(sc.target.mean_rcs > 0.0)) throw ConfigError("target.mean_rcs_m2", "must be positive");
    if (tgt.contains("velocity_mps")) {
        const auto& v = tgt["velocity_mps"];
        if (!v.is_array() || v.size() != 2) throw ConfigError("target.velocity_mps", "expected [vx, vy]");
        sc.target.velocity_x = v[0].get<double>();
        sc.target.velocity_y = v[1].get<double>();
    }

    const auto& sim = require(j, "sim", "");
    sc.sim.far = num(sim, "far", "sim");
    if (!(sc.sim.far > 0.0 && sc.sim.far < 1.0)) throw ConfigError("sim.far", "must be in (0, 1)");
    sc.sim.n_iter = integer(sim, "n_iter", "sim");
    if (sc.sim.n_iter < 1) throw ConfigError("sim.n_iter", "must be >= 1");
    sc.sim.roi_side = num(sim, "roi_side_m", "sim");
    sc.sim.dx = num(sim, "dx_m", "sim");
    sc.sim.dy = num(sim, "dy_m", "sim");
    if (!(sc.sim.dx > 0.0 && sc.sim.dy > 0.0)) throw ConfigError("sim.dx_m", "grid steps must be positive");
    for (auto [step, name] : {std::pair{sc.sim.dx, "sim.dx_m"}, std::pair{sc.sim.dy, "sim.dy_m"}}) {
        const double cells = sc.sim.roi_side / step;
        if (std::abs(cells - std::round(cells)) > 1e-9 * cells)
            throw ConfigError(name, "RoI side must be an integer multiple of the grid step");
    }
    sc.sim.sigma_p = num_or(sim, "sigma_p_m", "sim", 0.70);
    sc.sim.seed = static_cast<std::uint64_t>(num_or(sim, "seed", "sim", 1));
    if (sim.contains("fusion")) {
        sc.sim.fusion.clear();
        const std::string f = sim["fusion"].get<std::string>();
        if (f == "simple") sc.sim.fusion = {FusionMethod::Simple};
        else if (f == "weighted") sc.sim.fusion = {FusionMethod::Weighted};
        else if (f == "wls") sc.sim.fusion = {FusionMethod::Wls};
        else if (f == "all")
            sc.sim.fusion = {FusionMethod::Simple, FusionMethod::Weighted, FusionMethod::Wls};
        else throw ConfigError("sim.fusion", "expected simple|weighted|wls|all");
    }
    if (sim.contains("roi_model")) {
        const std::string m = sim["roi_model"].get<std::string>();
        if (m == "coarse") sc.sim.roi_model = RoiModel::Coarse;
        else if (m == "gaussian") sc.sim.roi_model = RoiModel::Gaussian;
        else throw ConfigError("sim.roi_model", "expected coarse|gaussian");
    }
    if (sim.contains("cheb_taper")) sc.sim.cheb_taper = sim["cheb_taper"].get<bool>();
    sc.sim.cheb_sll_db = num_or(sim, "cheb_sll_db", "sim", 30.0);
    sc.sim.cluster_eps = num_or(sim, "cluster_eps_m", "sim", 0.61);
    sc.sim.cluster_min_pts = sim.contains("cluster_min_pts") ? integer(sim, "cluster_min_pts", "sim") : 1;

    const auto& traj = require(sim, "trajectory_m", "sim");
    if (!traj.is_array() || traj.empty()) throw ConfigError("sim.trajectory_m", "expected a nonempty array");
    for (const auto& p : traj) {
        if (!p.is_array() || p.size() != 2) throw ConfigError("sim.trajectory_m", "expected [x, y] pairs");
        sc.sim.trajectory.push_back(GlobalPoint{p[0].get<double>(), p[1].get<double>()});
    }
    return sc;
}

/// Serialize a Scenario back to the config document form. Reloading the
/// result yields an identical Scenario.
inline nlohmann::json scenario_to_json(const Scenario& sc) {
    nlohmann::json j;
    auto stage = [](const FrameConfig& f) {
        return nlohmann::json{{"n_dir", f.n_dir}, {"m_s", f.m_s},      {"rho_f", f.rho_f},
                              {"rho_p", f.rho_p}, {"k_p", f.k_p},      {"m_p", f.m_p}};
    };
    j["frame"] = {{"fc_hz", sc.stage1.fc},
                  {"delta_f_hz", sc.stage1.delta_f},
                  {"k_subcarriers", sc.stage1.k_total},
                  {"m_symbols", sc.stage1.m_total},
                  {"t_cp_s", sc.stage1.t_cp},
                  {"p_avg_dbm", 10.0 * std::log10(sc.stage1.p_avg / 1e-3)},
                  {"n0_w_per_hz", sc.stage1.n0},
                  {"stage1", stage(sc.stage1)},
                  {"stage2", stage(sc.stage2)}};
    j["bs"] = nlohmann::json::array();
    for (const auto& b : sc.bs) {
        j["bs"].push_back({{"position_m", {b.position.x, b.position.y}},
                           {"orientation_rad", b.orientation},
                           {"n_t", b.n_t},
                           {"n_r", b.n_r},
                           {"g_t_db", 10.0 * std::log10(b.g_t)},
                           {"g_r_db", 10.0 * std::log10(b.g_r)},
                           {"theta0_rad", b.theta0},
                           {"comm_angle_rad", b.comm_angle}});
    }
    j["target"] = {{"mean_rcs_m2", sc.target.mean_rcs},
                   {"velocity_mps", {sc.target.velocity_x, sc.target.velocity_y}}};
    nlohmann::json traj = nlohmann::json::array();
    for (const auto& p : sc.sim.trajectory) traj.push_back({p.x, p.y});
    const char* fusion = sc.sim.fusion.size() > 1 ? "all"
                         : sc.sim.fusion[0] == FusionMethod::Simple   ? "simple"
                         : sc.sim.fusion[0] == FusionMethod::Weighted ? "weighted"
                                                                      : "wls";
    j["sim"] = {{"far", sc.sim.far},
                {"n_iter", sc.sim.n_iter},
                {"roi_side_m", sc.sim.roi_side},
                {"dx_m", sc.sim.dx},
                {"dy_m", sc.sim.dy},
                {"sigma_p_m", sc.sim.sigma_p},
                {"fusion", fusion},
                {"seed", sc.sim.seed},
                {"roi_model", sc.sim.roi_model == RoiModel::Coarse ? "coarse" : "gaussian"},
                {"cheb_taper", sc.sim.cheb_taper},
                {"cheb_sll_db", sc.sim.cheb_sll_db},
                {"cluster_eps_m", sc.sim.cluster_eps},
                {"cluster_min_pts", sc.sim.cluster_min_pts},
                {"trajectory_m", traj}};
    return j;
}

}  // namespace isac
