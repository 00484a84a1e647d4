#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "isac/beamforming.hpp"
#include "isac/config.hpp"
#include "isac/geometry.hpp"
#include "isac/rng.hpp"

namespace isac {

/// A target as seen by the simulator: true kinematics plus mean RCS.
struct TargetState {
    GlobalPoint position;
    double velocity_x = 0.0;  // m/s
    double velocity_y = 0.0;  // m/s
    double mean_rcs = 1.0;    // m^2
};

/// Per-BS echo parameters of one scatterer.
struct EchoParams {
    double tau = 0.0;    // s, round-trip delay
    double f_d = 0.0;    // Hz, Doppler shift
    double theta = 0.0;  // rad, local DoA/DoD
    double alpha = 0.0;  // linear two-way gain
    double phi = 0.0;    // rad, carrier phase = -2*pi*fc*tau
    double r = 0.0;      // m
};

/// Swerling-I RCS draw: exponential with the given mean. Independent
/// draws per (trial, BS) give the spatial-diversity behaviour.
inline double draw_rcs(double mean_rcs, Rng& rng) {
    if (!(mean_rcs > 0.0)) throw std::invalid_argument("draw_rcs: mean RCS must be positive");
    return std::exponential_distribution<double>(1.0 / mean_rcs)(rng);
}

/// Geometry, Doppler, and the radar-equation gain for one target at one BS.
inline EchoParams echo_params(const TargetState& target, const BsDescriptor& bs,
                              const FrameConfig& frame, double rcs) {
    const LocalPolar lp = global_to_local(target.position, bs);
    EchoParams e;
    e.r = lp.r;
    e.tau = lp.tau;
    e.theta = lp.theta;
    // Radial closing speed: positive when the target approaches the BS.
    const double ux = (target.position.x - bs.position.x) / lp.r;
    const double uy = (target.position.y - bs.position.y) / lp.r;
    const double v_radial = -(target.velocity_x * ux + target.velocity_y * uy);
    e.f_d = 2.0 * frame.fc * v_radial / kSpeedOfLight;
    const double c2 = kSpeedOfLight * kSpeedOfLight;
    const double four_pi3 = std::pow(4.0 * kPi, 3);
    e.alpha = std::sqrt(bs.g_t * bs.g_r * c2 * rcs /
                        (four_pi3 * frame.fc * frame.fc * std::pow(lp.r, 4)));
    e.phi = -2.0 * kPi * frame.fc * e.tau;
    return e;
}

/// Two-way frequency-domain channel matrix at subcarrier k, symbol m:
/// H[k,m] = sum_l alpha_l e^{i phi_l} e^{i 2pi m Ts fD} e^{-i 2pi k df tau}
///          b(theta_l) a(theta_l)^H.
inline Eigen::MatrixXcd channel_matrix(const std::vector<EchoParams>& echoes, int k, int m,
                                       const FrameConfig& frame, int n_t, int n_r) {
    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(n_r, n_t);
    const double ts = frame.symbol_duration();
    for (const auto& e : echoes) {
        const Cplx scale = e.alpha * std::polar(1.0, e.phi +
                                                         2.0 * kPi * m * ts * e.f_d -
                                                         2.0 * kPi * k * frame.delta_f * e.tau);
        h.noalias() += scale * steering_vector(e.theta, n_r) *
                       steering_vector(e.theta, n_t).adjoint();
    }
    return h;
}

/// Stage-1 antenna-resolved receive block for one sensing direction:
/// y[k,m] = H[k,m] w_T x_{k,m} + n[k,m], stored antenna-by-(k + K_s*m).
struct Stage1Rx {
    Eigen::MatrixXcd y;    // N_R x (K_s * M_s), column index = k + K_s*m
    Eigen::MatrixXcd x_s;  // K_s x M_s transmitted symbols
};

inline Stage1Rx simulate_stage1_rx(const std::vector<EchoParams>& echoes,
                                   const BsDescriptor& bs, const FrameConfig& frame,
                                   const BeamVector& w_t, Rng& rng, bool noiseless = false) {
    Stage1Rx out;
    out.x_s.resize(frame.k_s, frame.m_s);
    out.y.resize(bs.n_r, frame.k_s * frame.m_s);
    const double sigma2 = frame.noise_variance();
    NormalGen gen;
    for (int m = 0; m < frame.m_s; ++m) {
        for (int k = 0; k < frame.k_s; ++k) {
            const Cplx x = qpsk_symbol(rng);
            out.x_s(k, m) = x;
            Eigen::VectorXcd col =
                channel_matrix(echoes, k, m, frame, bs.n_t, bs.n_r) * w_t.coeffs * x;
            if (!noiseless)
                for (int n = 0; n < bs.n_r; ++n) col(n) += complex_normal(rng, gen, sigma2);
            out.y.col(k + frame.k_s * m) = col;
        }
    }
    return out;
}

/// Stage-2 stacked receive vector per BS. Layout follows the antenna-major
/// Kronecker order b (x) T with T's diagonal in (m-major (x) k) order, so
/// element index = n*(K_s*M_s) + m*K_s + k.
struct Stage2Rx {
    Eigen::VectorXcd y_stacked;  // K_s * M_s * N_R
    Eigen::VectorXcd x_stacked;  // K_s * M_s, x[m*K_s + k] = x_{k,m}
};

/// Diagonal phase ramp of the effective channel: entries
/// e^{i 2pi m Ts fD} * e^{-i 2pi k df tau} in (m-major (x) k) order.
inline Eigen::VectorXcd t_diagonal(double tau, double f_d, const FrameConfig& frame) {
    const double ts = frame.symbol_duration();
    Eigen::VectorXcd d(frame.k_s * frame.m_s);
    for (int m = 0; m < frame.m_s; ++m) {
        const Cplx dm = std::polar(1.0, 2.0 * kPi * m * ts * f_d);
        for (int k = 0; k < frame.k_s; ++k)
            d(m * frame.k_s + k) = dm * std::polar(1.0, -2.0 * kPi * k * frame.delta_f * tau);
    }
    return d;
}

/// Overall per-target gain h = sqrt(P_avg) * gamma * alpha * e^{i phi},
/// where gamma = a(theta)^H w_T / sqrt(P_avg).
inline Cplx stage2_gain(const EchoParams& e, const BeamVector& w_t, int n_t) {
    const Cplx a_h_w = (steering_vector(e.theta, n_t).adjoint() * w_t.coeffs)(0);
    return a_h_w * e.alpha * std::polar(1.0, e.phi);
}

inline Stage2Rx simulate_stage2_rx(const std::vector<EchoParams>& echoes,
                                   const BsDescriptor& bs, const FrameConfig& frame,
                                   const BeamVector& w_t, Rng& rng, bool noiseless = false) {
    const int d = frame.k_s * frame.m_s;
    Stage2Rx out;
    out.x_stacked.resize(d);
    for (int m = 0; m < frame.m_s; ++m)
        for (int k = 0; k < frame.k_s; ++k) out.x_stacked(m * frame.k_s + k) = qpsk_symbol(rng);

    out.y_stacked = Eigen::VectorXcd::Zero(d * bs.n_r);
    for (const auto& e : echoes) {
        const Cplx h = stage2_gain(e, w_t, bs.n_t);
        const Eigen::VectorXcd tx = t_diagonal(e.tau, e.f_d, frame).cwiseProduct(out.x_stacked);
        const Eigen::VectorXcd b = steering_vector(e.theta, bs.n_r);
        for (int n = 0; n < bs.n_r; ++n) out.y_stacked.segment(n * d, d) += h * b(n) * tx;
    }
    if (!noiseless) {
        NormalGen gen;
        const double sigma2 = frame.noise_variance();
        for (int i = 0; i < d * bs.n_r; ++i) out.y_stacked(i) += complex_normal(rng, gen, sigma2);
    }
    return out;
}

/// Fast Stage-1 path used by the Monte Carlo harness: generates the
/// receive-beamformed, reciprocal-filtered matrix directly. For a
/// unit-norm w_R and unit-modulus QPSK the filtered noise is CN(0,
/// sigma_N^2) per entry, so this matches the antenna-resolved pipeline
/// in distribution (and exactly in the noiseless signal part).
inline Eigen::MatrixXcd simulate_stage1_filtered(const std::vector<EchoParams>& echoes,
                                                 const BsDescriptor& bs,
                                                 const FrameConfig& frame,
                                                 const BeamVector& w_t,
                                                 const BeamVector& w_r, Rng& rng,
                                                 bool noiseless = false) {
    const double ts = frame.symbol_duration();
    Eigen::MatrixXcd out(frame.k_s, frame.m_s);
    const double sigma2 = frame.noise_variance();
    const double s = noiseless ? 0.0 : std::sqrt(0.5 * sigma2);
    NormalGen gen;
    out.setZero();
    for (const auto& e : echoes) {
        const Cplx g = (w_r.coeffs.adjoint() * steering_vector(e.theta, bs.n_r))(0) *
                       (steering_vector(e.theta, bs.n_t).adjoint() * w_t.coeffs)(0) *
                       e.alpha * std::polar(1.0, e.phi);
        const Cplx rk = std::polar(1.0, -2.0 * kPi * frame.delta_f * e.tau);
        const Cplx rm = std::polar(1.0, 2.0 * kPi * ts * e.f_d);
        Cplx pm = 1.0;
        for (int m = 0; m < frame.m_s; ++m) {
            Cplx pk = g * pm;
            for (int k = 0; k < frame.k_s; ++k) {
                out(k, m) += pk;
                pk *= rk;
            }
            pm *= rm;
        }
    }
    if (!noiseless) {
        for (int m = 0; m < frame.m_s; ++m)
            for (int k = 0; k < frame.k_s; ++k) out(k, m) += Cplx(s * gen(rng), s * gen(rng));
    }
    return out;
}

}  // namespace isac
