#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "isac/channel.hpp"
#include "isac/config.hpp"
#include "isac/fusion.hpp"
#include "isac/stage1.hpp"
#include "isac/stage2.hpp"

namespace isac {

enum class StageMode { Stage1Only, Stage2Only, Full };

/// Outcome of one Monte Carlo trial at one trajectory point.
struct TrialResult {
    int trial_id = 0;
    GlobalPoint truth;
    std::vector<bool> detected;               // per BS
    bool coop_detected = false;
    std::vector<double> single_bs_error;      // per detecting BS, m
    std::map<std::string, GlobalPoint> coarse;  // fusion method -> estimate
    std::optional<GlobalPoint> refined;
    std::map<std::string, double> coarse_error;  // m
    std::optional<double> refined_error;         // m
};

inline const char* fusion_name(FusionMethod m) {
    switch (m) {
        case FusionMethod::Simple: return "simple";
        case FusionMethod::Weighted: return "weighted";
        default: return "wls";
    }
}

namespace detail {

inline double gaussian(Rng& rng, NormalGen& gen, double stddev) { return stddev * gen(rng); }

/// RoI angular extent seen from a BS: local-angle span of the square's
/// corners.
inline std::pair<double, double> roi_sector(const Roi& roi, const BsDescriptor& bs) {
    double lo = 1e9, hi = -1e9;
    const double h = 0.5 * roi.side;
    for (double sx : {-h, h}) {
        for (double sy : {-h, h}) {
            const GlobalPoint c{roi.center.x + sx, roi.center.y + sy};
            const double th = global_to_local(c, bs).theta;
            lo = std::min(lo, th);
            hi = std::max(hi, th);
        }
    }
    return {lo, hi};
}

}  // namespace detail

/// Dump hooks for --dump-maps style exports; null members disable a dump.
struct DumpOptions {
    std::string dir;
    bool range_angle = false;
    bool likelihood = false;
    int max_trials = 1;  // only the first trials of each point are dumped
};

/// Run one end-to-end trial: Stage-1 scan and detection at every BS,
/// coarse fusion, RoI selection, Stage-2 ML refinement. All randomness
/// comes from the (seed, point, trial) stream, so a trial is
/// bit-reproducible and independent of execution order.
inline TrialResult run_trial(const Scenario& sc, const GlobalPoint& truth, int point_index,
                             int trial_index, Periodogram& pg,
                             StageMode mode = StageMode::Full,
                             const DumpOptions* dump = nullptr) {
    TrialResult res;
    res.trial_id = trial_index;
    res.truth = truth;
    Rng rng = make_stream(sc.sim.seed, point_index, trial_index);
    NormalGen gen;

    const int n_bs = static_cast<int>(sc.bs.size());
    TargetState target{truth, sc.target.velocity_x, sc.target.velocity_y, sc.target.mean_rcs};

    // Swerling-I: independent RCS per (trial, BS), held fixed across the
    // directions of one scan.
    std::vector<double> rcs(n_bs);
    for (int i = 0; i < n_bs; ++i) rcs[i] = draw_rcs(sc.target.mean_rcs, rng);

    res.detected.assign(n_bs, false);
    std::vector<CoarseMeasurement> measurements;
    std::vector<std::optional<Detection>> peaks(n_bs);

    if (mode != StageMode::Stage2Only) {
        const FrameConfig& f1 = sc.stage1;
        for (int i = 0; i < n_bs; ++i) {
            const BsDescriptor& bs = sc.bs[i];
            const DerivedConstants dc = derived_constants(f1, bs, sc.sim.far);
            const std::vector<EchoParams> echoes = {
                echo_params(target, bs, f1, rcs[i])};
            std::vector<Eigen::MatrixXd> rd_maps;
            rd_maps.reserve(f1.n_dir);
            for (int j = 0; j < f1.n_dir; ++j) {
                const double theta_s = -bs.theta0 + j * dc.delta_theta;
                const BeamVector w_t =
                    stage1_multibeam(theta_s, bs.comm_angle, f1.rho_p, f1.p_avg, bs.n_t);
                const BeamVector w_r = receive_beamformer(theta_s, bs.n_r, sc.sim.cheb_taper,
                                                          sc.sim.cheb_sll_db);
                rd_maps.push_back(pg.compute(
                    simulate_stage1_filtered(echoes, bs, f1, w_t, w_r, rng)));
            }
            const RangeAngleMap map = build_range_angle_map(rd_maps, dc.q_max);
            if (dump && dump->range_angle && trial_index < dump->max_trials)
                dump_range_angle_map(map, dc, bs,
                                     dump->dir + "/ra_map_p" + std::to_string(point_index) +
                                         "_t" + std::to_string(trial_index) + "_bs" +
                                         std::to_string(i) + ".csv");
            peaks[i] = peak_detection(map, dc, bs, i);
            res.detected[i] = peaks[i].has_value();
        }
        res.coop_detected = std::any_of(res.detected.begin(), res.detected.end(),
                                        [](bool b) { return b; });

        double max_intensity = 0.0;
        for (int i = 0; i < n_bs; ++i)
            if (peaks[i]) max_intensity = std::max(max_intensity, peaks[i]->intensity);
        for (int i = 0; i < n_bs; ++i) {
            if (!peaks[i]) continue;
            measurements.push_back(make_coarse_measurement(
                i, sc.bs[i], peaks[i]->r, peaks[i]->theta,
                peaks[i]->intensity / max_intensity));
            res.single_bs_error.push_back(distance(measurements.back().point, truth));
        }

        if (!measurements.empty()) {
            for (FusionMethod m : sc.sim.fusion) {
                std::optional<GlobalPoint> est;
                if (m == FusionMethod::Simple) est = fuse_simple_average(measurements);
                else if (m == FusionMethod::Weighted) est = fuse_weighted_average(measurements);
                else if (measurements.size() >= 2) est = fuse_wls(measurements, sc.bs).point;
                if (est) {
                    res.coarse[fusion_name(m)] = *est;
                    res.coarse_error[fusion_name(m)] = distance(*est, truth);
                }
            }
        }
    } else {
        res.coop_detected = true;  // stage-2-only benchmarking mode
    }

    if (mode == StageMode::Stage1Only || !res.coop_detected) return res;

    // RoI placement: either the paper's Gaussian coarse-accuracy model or
    // the actual fused coarse estimate.
    Roi roi;
    roi.side = sc.sim.roi_side;
    roi.dx = sc.sim.dx;
    roi.dy = sc.sim.dy;
    if (sc.sim.roi_model == RoiModel::Gaussian || mode == StageMode::Stage2Only) {
        const double stddev = sc.sim.sigma_p / std::sqrt(2.0);
        roi.center = GlobalPoint{truth.x + detail::gaussian(rng, gen, stddev),
                                 truth.y + detail::gaussian(rng, gen, stddev)};
    } else {
        auto it = res.coarse.find("weighted");
        if (it == res.coarse.end()) it = res.coarse.begin();
        roi.center = it->second;
    }

    const FrameConfig& f2 = sc.stage2;
    std::vector<Stage2BsData> data(n_bs);
    for (int i = 0; i < n_bs; ++i) {
        const BsDescriptor& bs = sc.bs[i];
        const auto [lo, hi] = detail::roi_sector(roi, bs);
        const SectorBeam w_t = stage2_sector_beam(lo, hi, f2.p_avg, bs.n_t);
        const std::vector<EchoParams> echoes = {echo_params(target, bs, f2, rcs[i])};
        Stage2Rx rx = simulate_stage2_rx(echoes, bs, f2, w_t, rng);
        data[i].y = std::move(rx.y_stacked);
        data[i].x = std::move(rx.x_stacked);
        data[i].f_d_hat = 0.0;  // no Doppler resolution with M_s = 1
    }
    const LikelihoodMap map = build_likelihood_map(roi, data, sc.bs, f2, sc.sim.cheb_taper,
                                                   sc.sim.cheb_sll_db);
    if (dump && dump->likelihood && trial_index < dump->max_trials)
        dump_likelihood_map(map, dump->dir + "/likelihood_p" + std::to_string(point_index) +
                                     "_t" + std::to_string(trial_index) + ".csv");
    const PositionEstimate est = estimate_position(map);
    res.refined = est.p;
    res.refined_error = distance(est.p, truth);
    return res;
}

/// Linear-interpolation percentile (q in [0, 1]) of an unsorted sample.
inline double percentile(std::vector<double> v, double q) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const double rank = q * (v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(rank));
    if (lo + 1 >= v.size()) return v.back();
    const double frac = rank - lo;
    return v[lo] * (1.0 - frac) + v[lo + 1] * frac;
}

struct PointMetrics {
    GlobalPoint point;
    std::vector<double> pd_single;  // per BS
    double pd_coop = 0.0;
    std::map<std::string, double> rmse;  // "coarse_<method>" and "refined", m
    std::map<std::string, int> n_used;   // sample counts behind each RMSE
    double p20 = 0.0, p50 = 0.0, p80 = 0.0;  // single-BS error percentiles, m
    int n_det = 0;  // trials with at least one detecting BS
};

struct CampaignMetrics {
    std::vector<PointMetrics> points;
    std::map<std::string, double> mean_rmse;  // mean across trajectory points
};

/// Aggregate a full campaign: n_iter trials per trajectory point.
inline CampaignMetrics run_campaign(const Scenario& sc, StageMode mode = StageMode::Full,
                                    const DumpOptions* dump = nullptr) {
    CampaignMetrics out;
    Periodogram pg(sc.stage1.k_p, sc.stage1.m_p);
    const int n_bs = static_cast<int>(sc.bs.size());

    std::map<std::string, std::vector<double>> rmse_acc;
    for (std::size_t pi = 0; pi < sc.sim.trajectory.size(); ++pi) {
        const GlobalPoint& pt = sc.sim.trajectory[pi];
        PointMetrics pm;
        pm.point = pt;
        pm.pd_single.assign(n_bs, 0.0);
        std::map<std::string, double> sq_err;
        std::map<std::string, int> n_err;
        std::vector<double> single_errors;

        for (int t = 0; t < sc.sim.n_iter; ++t) {
            const TrialResult tr =
                run_trial(sc, pt, static_cast<int>(pi), t, pg, mode, dump);
            for (int i = 0; i < n_bs; ++i)
                if (tr.detected[i]) pm.pd_single[i] += 1.0;
            if (tr.coop_detected) ++pm.n_det;
            for (double e : tr.single_bs_error) single_errors.push_back(e);
            for (const auto& [name, err] : tr.coarse_error) {
                sq_err["coarse_" + name] += err * err;
                n_err["coarse_" + name] += 1;
            }
            if (tr.refined_error) {
                sq_err["refined"] += *tr.refined_error * *tr.refined_error;
                n_err["refined"] += 1;
            }
        }
        for (int i = 0; i < n_bs; ++i) pm.pd_single[i] /= sc.sim.n_iter;
        pm.pd_coop = static_cast<double>(pm.n_det) / sc.sim.n_iter;
        for (const auto& [name, s] : sq_err) {
            pm.rmse[name] = std::sqrt(s / n_err[name]);
            pm.n_used[name] = n_err[name];
            rmse_acc[name].push_back(pm.rmse[name]);
        }
        pm.p20 = percentile(single_errors, 0.20);
        pm.p50 = percentile(single_errors, 0.50);
        pm.p80 = percentile(single_errors, 0.80);
        out.points.push_back(std::move(pm));
    }
    for (const auto& [name, v] : rmse_acc) {
        double s = 0.0;
        for (double x : v) s += x;
        out.mean_rmse[name] = s / v.size();
    }
    return out;
}

/// Write the campaign results as CSV (one row per point per method) and
/// a JSON summary that round-trips for regression comparisons.
inline void export_results(const CampaignMetrics& m, const std::string& dir) {
    std::filesystem::create_directories(dir);
    std::ofstream csv(dir + "/metrics.csv");
    if (!csv) throw std::runtime_error("export_results: cannot open " + dir + "/metrics.csv");
    csv << "point_y_m,method,pd,rmse_m,p20_m,p50_m,p80_m,n_det\n";
    for (const auto& p : m.points)
        for (const auto& [name, rmse] : p.rmse)
            csv << p.point.y << ',' << name << ',' << p.pd_coop << ',' << rmse << ','
                << p.p20 << ',' << p.p50 << ',' << p.p80 << ',' << p.n_det << '\n';

    nlohmann::json j;
    j["mean_rmse"] = m.mean_rmse;
    j["points"] = nlohmann::json::array();
    for (const auto& p : m.points) {
        nlohmann::json pj;
        pj["point"] = {p.point.x, p.point.y};
        pj["pd_single"] = p.pd_single;
        pj["pd_coop"] = p.pd_coop;
        pj["rmse"] = p.rmse;
        pj["n_used"] = p.n_used;
        pj["percentiles"] = {{"p20", p.p20}, {"p50", p.p50}, {"p80", p.p80}};
        pj["n_det"] = p.n_det;
        j["points"].push_back(pj);
    }
    std::ofstream js(dir + "/summary.json");
    js << j.dump(2) << '\n';
}

}  // namespace isac
