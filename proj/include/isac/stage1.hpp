#pragma once

#include <algorithm>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <fftw3.h>

#include "isac/beamforming.hpp"
#include "isac/channel.hpp"
#include "isac/config.hpp"

namespace isac {

/// Receive beamforming followed by element-wise division by the
/// transmitted symbols: y~_{k,m} = (w_R^H y[k,m]) / x_{k,m}.
inline Eigen::MatrixXcd reciprocal_filter(const Stage1Rx& rx, const BeamVector& w_r) {
    const int k_s = static_cast<int>(rx.x_s.rows());
    const int m_s = static_cast<int>(rx.x_s.cols());
    Eigen::MatrixXcd out(k_s, m_s);
    for (int m = 0; m < m_s; ++m) {
        for (int k = 0; k < k_s; ++k) {
            const Cplx x = rx.x_s(k, m);
            if (x == Cplx(0.0, 0.0))
                throw std::domain_error("reciprocal_filter: zero transmitted symbol");
            out(k, m) = (w_r.coeffs.adjoint() * rx.y.col(k + k_s * m))(0) / x;
        }
    }
    return out;
}

/// Zero-padded double periodogram (range x Doppler). Holds one FFTW plan
/// per instance; not safe for concurrent use of the same instance.
class Periodogram {
public:
    Periodogram(int k_p, int m_p) : k_p_(k_p), m_p_(m_p) {
        buf_ = fftw_alloc_complex(static_cast<std::size_t>(k_p_) * m_p_);
        out_ = fftw_alloc_complex(static_cast<std::size_t>(k_p_) * m_p_);
        plan_ = fftw_plan_dft_2d(k_p_, m_p_, buf_, out_, FFTW_FORWARD, FFTW_ESTIMATE);
    }
    Periodogram(const Periodogram&) = delete;
    Periodogram& operator=(const Periodogram&) = delete;
    ~Periodogram() {
        fftw_destroy_plan(plan_);
        fftw_free(buf_);
        fftw_free(out_);
    }

    /// P(q,p) = |sum_k sum_m y~ e^{-j2pi mp/M_p} e^{+j2pi kq/K_p}|^2 / (K_s M_s).
    /// The opposite transform signs are handled by one forward 2-D FFT
    /// and a flip of the range axis.
    Eigen::MatrixXd compute(const Eigen::MatrixXcd& filtered) const {
        const int k_s = static_cast<int>(filtered.rows());
        const int m_s = static_cast<int>(filtered.cols());
        if (k_s > k_p_ || m_s > m_p_)
            throw std::invalid_argument("Periodogram: input exceeds the padded size");
        std::fill_n(&buf_[0][0], 2l * k_p_ * m_p_, 0.0);
        for (int k = 0; k < k_s; ++k) {
            for (int m = 0; m < m_s; ++m) {
                buf_[static_cast<std::size_t>(k) * m_p_ + m][0] = filtered(k, m).real();
                buf_[static_cast<std::size_t>(k) * m_p_ + m][1] = filtered(k, m).imag();
            }
        }
        fftw_execute(plan_);
        Eigen::MatrixXd p(k_p_, m_p_);
        const double scale = 1.0 / (static_cast<double>(k_s) * m_s);
        for (int q = 0; q < k_p_; ++q) {
            const int qf = q == 0 ? 0 : k_p_ - q;  // F(-q) = F(K_p - q)
            for (int m = 0; m < m_p_; ++m) {
                const auto& c = out_[static_cast<std::size_t>(qf) * m_p_ + m];
                p(q, m) = (c[0] * c[0] + c[1] * c[1]) * scale;
            }
        }
        return p;
    }

    int k_p() const { return k_p_; }
    int m_p() const { return m_p_; }

private:
    int k_p_, m_p_;
    fftw_complex* buf_;
    fftw_complex* out_;
    fftw_plan plan_;
};

/// Per-BS detection statistic: for each scan direction, the range profile
/// of the strongest Doppler column.
struct RangeAngleMap {
    Eigen::MatrixXd values;  // q_max x N_dir, W
    std::vector<int> p_max;  // selected Doppler column per direction
};

/// Select, per direction, the Doppler column holding the largest value
/// over the valid delay rows q < q_max (ties: lowest p), and keep that
/// column's range profile.
inline RangeAngleMap build_range_angle_map(const std::vector<Eigen::MatrixXd>& rd_maps,
                                           int q_max) {
    RangeAngleMap map;
    const int n_dir = static_cast<int>(rd_maps.size());
    if (n_dir == 0) throw std::invalid_argument("build_range_angle_map: no maps");
    map.values.resize(q_max, n_dir);
    map.p_max.resize(n_dir);
    for (int j = 0; j < n_dir; ++j) {
        const Eigen::MatrixXd& rd = rd_maps[j];
        if (rd.rows() < q_max) throw std::invalid_argument("build_range_angle_map: q_max too large");
        int best_p = 0;
        double best = -1.0;
        for (int p = 0; p < rd.cols(); ++p) {
            const double col_max = rd.col(p).head(q_max).maxCoeff();
            if (col_max > best) {
                best = col_max;
                best_p = p;
            }
        }
        map.p_max[j] = best_p;
        map.values.col(j) = rd.col(best_p).head(q_max);
    }
    return map;
}

/// One above-threshold cell of a range-angle map.
struct Detection {
    int bs_id = 0;
    int q = 0;            // delay row
    int j = 0;            // direction index
    double r = 0.0;       // m, local
    double theta = 0.0;   // rad, local
    double intensity = 0.0;  // W, map value
    double threshold = 0.0;  // W, eta used for the decision
};

inline Detection make_detection(int bs_id, int q, int j, double value,
                                const DerivedConstants& dc, const BsDescriptor& bs) {
    Detection d;
    d.bs_id = bs_id;
    d.q = q;
    d.j = j;
    d.r = q * dc.range_bin_width;
    d.theta = -bs.theta0 + j * dc.delta_theta;
    d.intensity = value;
    d.threshold = dc.threshold;
    return d;
}

/// All cells exceeding eta, mapped to local polar coordinates.
inline std::vector<Detection> detect(const RangeAngleMap& map, const DerivedConstants& dc,
                                     const BsDescriptor& bs, int bs_id = 0) {
    std::vector<Detection> out;
    for (int q = 0; q < map.values.rows(); ++q)
        for (int j = 0; j < map.values.cols(); ++j)
            if (map.values(q, j) > dc.threshold)
                out.push_back(make_detection(bs_id, q, j, map.values(q, j), dc, bs));
    return out;
}

/// Single-point-target mode: the global maximum if it reaches eta,
/// otherwise a missed detection. Ties go to the lowest (q, j) row-major.
inline std::optional<Detection> peak_detection(const RangeAngleMap& map,
                                               const DerivedConstants& dc,
                                               const BsDescriptor& bs, int bs_id = 0) {
    int best_q = 0, best_j = 0;
    double best = -1.0;
    for (int q = 0; q < map.values.rows(); ++q)
        for (int j = 0; j < map.values.cols(); ++j)
            if (map.values(q, j) > best) {
                best = map.values(q, j);
                best_q = q;
                best_j = j;
            }
    if (best < dc.threshold) return std::nullopt;
    return make_detection(bs_id, best_q, best_j, best, dc, bs);
}

/// A DBSCAN cluster of detections with its intensity-weighted centroid.
struct DetectionCluster {
    std::vector<Detection> members;
    double r = 0.0;          // m, centroid in local polar
    double theta = 0.0;      // rad
    double intensity = 0.0;  // strongest member
};

/// DBSCAN over the detections' local Cartesian positions. Core points
/// need >= min_pts neighbours within eps; non-core, non-reachable points
/// are discarded as noise.
inline std::vector<DetectionCluster> cluster_detections(const std::vector<Detection>& dets,
                                                        double eps, int min_pts) {
    const int n = static_cast<int>(dets.size());
    std::vector<double> px(n), py(n);
    for (int i = 0; i < n; ++i) {
        px[i] = dets[i].r * std::cos(dets[i].theta);
        py[i] = dets[i].r * std::sin(dets[i].theta);
    }
    auto neighbours = [&](int i) {
        std::vector<int> out;
        for (int k = 0; k < n; ++k)
            if (std::hypot(px[i] - px[k], py[i] - py[k]) <= eps) out.push_back(k);
        return out;
    };

    constexpr int kUnvisited = -2, kNoise = -1;
    std::vector<int> label(n, kUnvisited);
    int cluster_id = 0;
    for (int i = 0; i < n; ++i) {
        if (label[i] != kUnvisited) continue;
        auto nb = neighbours(i);
        if (static_cast<int>(nb.size()) < min_pts) {
            label[i] = kNoise;
            continue;
        }
        const int cid = cluster_id++;
        label[i] = cid;
        std::vector<int> frontier = nb;
        for (std::size_t f = 0; f < frontier.size(); ++f) {
            const int k = frontier[f];
            if (label[k] == kNoise) label[k] = cid;
            if (label[k] != kUnvisited) continue;
            label[k] = cid;
            auto nb_k = neighbours(k);
            if (static_cast<int>(nb_k.size()) >= min_pts)
                frontier.insert(frontier.end(), nb_k.begin(), nb_k.end());
        }
    }

    std::vector<DetectionCluster> clusters(cluster_id);
    for (int i = 0; i < n; ++i)
        if (label[i] >= 0) clusters[label[i]].members.push_back(dets[i]);
    for (auto& c : clusters) {
        double wx = 0.0, wy = 0.0, wsum = 0.0;
        for (const auto& d : c.members) {
            wx += d.intensity * d.r * std::cos(d.theta);
            wy += d.intensity * d.r * std::sin(d.theta);
            wsum += d.intensity;
            c.intensity = std::max(c.intensity, d.intensity);
        }
        wx /= wsum;
        wy /= wsum;
        c.r = std::hypot(wx, wy);
        c.theta = std::atan2(wy, wx);
    }
    return clusters;
}

/// CSV dump of a range-angle map for plotting.
inline void dump_range_angle_map(const RangeAngleMap& map, const DerivedConstants& dc,
                                 const BsDescriptor& bs, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("dump_range_angle_map: cannot open " + path);
    f << "q,j,r_m,theta_rad,power_W\n";
    for (int q = 0; q < map.values.rows(); ++q)
        for (int j = 0; j < map.values.cols(); ++j)
            f << q << ',' << j << ',' << q * dc.range_bin_width << ','
              << -bs.theta0 + j * dc.delta_theta << ',' << map.values(q, j) << '\n';
}

}  // namespace isac
