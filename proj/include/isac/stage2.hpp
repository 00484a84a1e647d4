#pragma once

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "isac/beamforming.hpp"
#include "isac/channel.hpp"
#include "isac/config.hpp"
#include "isac/geometry.hpp"

namespace isac {

/// Square region of interest for the refined grid search.
struct Roi {
    GlobalPoint center;
    double side = 4.0;  // m
    double dx = 0.02;   // m
    double dy = 0.02;   // m

    int nx() const { return static_cast<int>(std::llround(side / dx)) + 1; }
    int ny() const { return static_cast<int>(std::llround(side / dy)) + 1; }
    double x(int ix) const { return center.x - 0.5 * side + ix * dx; }
    double y(int iy) const { return center.y - 0.5 * side + iy * dy; }
};

/// Apply the diagonal phase-ramp matrix T(tau, fD) without materializing
/// it: element-wise product with e^{i2pi m Ts fD} e^{-i2pi k df tau} in
/// (m-major (x) k) order.
inline Eigen::VectorXcd t_matrix_apply(const Eigen::VectorXcd& x, double tau, double f_d,
                                       const FrameConfig& frame) {
    if (tau < 0.0) throw std::invalid_argument("t_matrix_apply: negative delay");
    if (x.size() != static_cast<Eigen::Index>(frame.k_s) * frame.m_s)
        throw std::invalid_argument("t_matrix_apply: size mismatch");
    return t_diagonal(tau, f_d, frame).cwiseProduct(x);
}

/// Stage-2 per-BS received data.
struct Stage2BsData {
    Eigen::VectorXcd y;  // stacked, K_s*M_s*N_R
    Eigen::VectorXcd x;  // stacked symbols, K_s*M_s
    double f_d_hat = 0.0;  // coarse Doppler estimate (0 Hz nominal)
};

namespace detail {

/// Collapse the stacked receive vector over antennas with the unit-norm
/// beamformer w(theta) = b(theta)^H / sqrt(N_R):
/// z_j = sum_n conj(b_n)/sqrt(N_R) * y[n*D + j].
inline Eigen::VectorXcd beamform_collapse(const Eigen::VectorXcd& y,
                                          const Eigen::VectorXcd& w_r_coeffs) {
    const int n_r = static_cast<int>(w_r_coeffs.size());
    const int d = static_cast<int>(y.size()) / n_r;
    Eigen::VectorXcd z = Eigen::VectorXcd::Zero(d);
    for (int n = 0; n < n_r; ++n) z.noalias() += std::conj(w_r_coeffs(n)) * y.segment(n * d, d);
    return z;
}

/// Inner sum |sum_j conj(z_j) T_jj x_j|^2 evaluated with iterative phase
/// ramps (c_j = conj(z_j) * x_j precombined by the caller).
inline double ramp_objective(const Eigen::VectorXcd& c, double tau, double f_d,
                             const FrameConfig& frame) {
    const double ts = frame.symbol_duration();
    const Cplx rk = std::polar(1.0, -2.0 * kPi * frame.delta_f * tau);
    const Cplx rm = std::polar(1.0, 2.0 * kPi * ts * f_d);
    const Cplx* cd = c.data();
    double acc_re = 0.0, acc_im = 0.0;
    Cplx pm(1.0, 0.0);
    for (int m = 0; m < frame.m_s; ++m) {
        double pr = pm.real(), pi = pm.imag();
        const double rr = rk.real(), ri = rk.imag();
        const Cplx* row = cd + static_cast<std::size_t>(m) * frame.k_s;
        double sre = 0.0, sim = 0.0;
        for (int k = 0; k < frame.k_s; ++k) {
            const double cr = row[k].real(), ci = row[k].imag();
            sre += cr * pr - ci * pi;
            sim += cr * pi + ci * pr;
            const double npr = pr * rr - pi * ri;
            pi = pr * ri + pi * rr;
            pr = npr;
        }
        acc_re += sre;
        acc_im += sim;
        pm *= rm;
    }
    return acc_re * acc_re + acc_im * acc_im;
}

}  // namespace detail

/// Likelihood term of one BS for a candidate position p:
/// |(W(theta_i(p)) y~)^H T(tau_i(p), fD) x~|^2 / ||T x~||^2.
/// The denominator equals ||x~||^2 (T has a unit-modulus diagonal).
inline double likelihood_contribution(const Stage2BsData& data, const GlobalPoint& p,
                                      const BsDescriptor& bs, const FrameConfig& frame,
                                      bool cheb_taper = false, double cheb_sll_db = 30.0) {
    const LocalPolar lp = global_to_local(p, bs);
    const BeamVector w = receive_beamformer(lp.theta, bs.n_r, cheb_taper, cheb_sll_db);
    const Eigen::VectorXcd z = detail::beamform_collapse(data.y, w.coeffs);
    const Eigen::VectorXcd c = z.conjugate().cwiseProduct(data.x);
    return detail::ramp_objective(c, lp.tau, data.f_d_hat, frame) / data.x.squaredNorm();
}

/// Fused Stage-2 objective over the RoI grid.
struct LikelihoodMap {
    Roi roi;
    Eigen::MatrixXd fused;                // nx x ny
    std::vector<Eigen::MatrixXd> per_bs;  // one nx x ny map per BS
};

/// Evaluate the fused objective over the grid. Receive beamformers are
/// cached per BS keyed on theta rounded to 1e-4 rad (fine enough that the
/// quantization loss stays well below the grid-cell discrimination of a
/// 50-element array); the cached entry stores the antenna-collapsed
/// vector so each grid point costs one K_s*M_s-length ramp sum.
inline LikelihoodMap build_likelihood_map(const Roi& roi,
                                          const std::vector<Stage2BsData>& data,
                                          const std::vector<BsDescriptor>& bss,
                                          const FrameConfig& frame, bool cheb_taper = false,
                                          double cheb_sll_db = 30.0) {
    const int nx = roi.nx(), ny = roi.ny();
    if (nx < 1 || ny < 1) throw std::invalid_argument("build_likelihood_map: empty grid");
    if (data.size() != bss.size())
        throw std::invalid_argument("build_likelihood_map: data/BS count mismatch");

    LikelihoodMap out;
    out.roi = roi;
    out.fused = Eigen::MatrixXd::Zero(nx, ny);
    out.per_bs.reserve(bss.size());

    for (std::size_t i = 0; i < bss.size(); ++i) {
        const BsDescriptor& bs = bss[i];
        Eigen::MatrixXd map(nx, ny);
        std::unordered_map<long long, Eigen::VectorXcd> cache;
        const double inv_norm = 1.0 / data[i].x.squaredNorm();
        for (int ix = 0; ix < nx; ++ix) {
            for (int iy = 0; iy < ny; ++iy) {
                const GlobalPoint p{roi.x(ix), roi.y(iy)};
                const LocalPolar lp = global_to_local(p, bs);
                const long long key = std::llround(lp.theta * 10000.0);
                auto it = cache.find(key);
                if (it == cache.end()) {
                    const double theta_q = key / 10000.0;
                    const BeamVector w =
                        receive_beamformer(theta_q, bs.n_r, cheb_taper, cheb_sll_db);
                    Eigen::VectorXcd c = detail::beamform_collapse(data[i].y, w.coeffs)
                                             .conjugate()
                                             .cwiseProduct(data[i].x);
                    it = cache.emplace(key, std::move(c)).first;
                }
                map(ix, iy) =
                    detail::ramp_objective(it->second, lp.tau, data[i].f_d_hat, frame) * inv_norm;
            }
        }
        out.fused += map;
        out.per_bs.push_back(std::move(map));
    }
    return out;
}

/// Refined estimate: the fused grid argmax.
struct PositionEstimate {
    GlobalPoint p;
    double objective = 0.0;
    int ix = 0;
    int iy = 0;
    std::vector<double> per_bs_value;  // each BS's term at the argmax
};

inline PositionEstimate estimate_position(const LikelihoodMap& map) {
    const int nx = static_cast<int>(map.fused.rows());
    const int ny = static_cast<int>(map.fused.cols());
    if (nx == 0 || ny == 0) throw std::invalid_argument("estimate_position: empty map");
    PositionEstimate est;
    double best = -1.0;
    for (int ix = 0; ix < nx; ++ix)
        for (int iy = 0; iy < ny; ++iy)
            if (map.fused(ix, iy) > best) {
                best = map.fused(ix, iy);
                est.ix = ix;
                est.iy = iy;
            }
    est.objective = best;
    est.p = GlobalPoint{map.roi.x(est.ix), map.roi.y(est.iy)};
    for (const auto& m : map.per_bs) est.per_bs_value.push_back(m(est.ix, est.iy));
    return est;
}

/// CSV dump (x_m, y_m, value) of the fused map, plus optional per-BS maps.
inline void dump_likelihood_map(const LikelihoodMap& map, const std::string& path,
                                bool per_bs = false) {
    auto write = [&](const Eigen::MatrixXd& m, const std::string& p) {
        std::ofstream f(p);
        if (!f) throw std::runtime_error("dump_likelihood_map: cannot open " + p);
        f << "x_m,y_m,value\n";
        for (int ix = 0; ix < m.rows(); ++ix)
            for (int iy = 0; iy < m.cols(); ++iy)
                f << map.roi.x(ix) << ',' << map.roi.y(iy) << ',' << m(ix, iy) << '\n';
    };
    write(map.fused, path);
    if (per_bs)
        for (std::size_t i = 0; i < map.per_bs.size(); ++i)
            write(map.per_bs[i], path + ".bs" + std::to_string(i) + ".csv");
}

}  // namespace isac
