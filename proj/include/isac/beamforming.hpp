#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "isac/geometry.hpp"

namespace isac {

using Cplx = std::complex<double>;

enum class BeamStage { Stage1, Stage2, Receive };

/// Beamforming weights plus the power convention they were built under.
struct BeamVector {
    Eigen::VectorXcd coeffs;
    BeamStage stage = BeamStage::Stage1;
    double nominal_power = 0.0;  // W; receive beamformers use 1 (unit norm)
};

/// ULA steering vector with half-wavelength spacing and mid-array phase
/// reference: element n = exp(i*pi*(n - (N-1)/2)*sin(theta)). ||a||^2 = N.
inline Eigen::VectorXcd steering_vector(double theta, int n) {
    if (n < 1) throw std::invalid_argument("steering_vector: N must be >= 1");
    Eigen::VectorXcd a(n);
    const double s = std::sin(theta);
    for (int i = 0; i < n; ++i)
        a(i) = std::polar(1.0, kPi * (i - (n - 1) * 0.5) * s);
    return a;
}

/// Stage-1 multibeam transmit weights: power split rho_p toward the
/// sensing direction and (1 - rho_p) toward the communication direction.
inline BeamVector stage1_multibeam(double theta_s, double theta_c, double rho_p,
                                   double p_avg, int n_t) {
    if (rho_p < 0.0 || rho_p > 1.0)
        throw std::invalid_argument("stage1_multibeam: rho_p must be in [0, 1]");
    BeamVector w;
    w.stage = BeamStage::Stage1;
    w.nominal_power = p_avg;
    w.coeffs = std::sqrt(rho_p * p_avg / n_t) * steering_vector(theta_s, n_t) +
               std::sqrt((1.0 - rho_p) * p_avg / n_t) * steering_vector(theta_c, n_t);
    return w;
}

/// Dolph-Chebyshev window of length N with the given sidelobe attenuation
/// (dB, positive). Computed in the transform domain from T_{N-1}.
inline Eigen::VectorXd chebyshev_window(int n, double sll_db) {
    if (n < 2) return Eigen::VectorXd::Ones(std::max(n, 1));
    const double r = std::pow(10.0, sll_db / 20.0);
    const double x0 = std::cosh(std::acosh(r) / (n - 1));
    auto cheb = [&](double x) -> double {
        if (x > 1.0) return std::cosh((n - 1) * std::acosh(x));
        if (x < -1.0) {
            const double t = std::cosh((n - 1) * std::acosh(-x));
            return (n - 1) % 2 == 0 ? t : -t;
        }
        return std::cos((n - 1) * std::acos(x));
    };
    // Sample the Chebyshev spectrum, invert with a direct DFT (even
    // lengths need a half-sample phase shift), then reorder to the
    // symmetric window.
    std::vector<Cplx> p(n);
    for (int k = 0; k < n; ++k) {
        p[k] = cheb(x0 * std::cos(kPi * k / n));
        if (n % 2 == 0) p[k] *= std::polar(1.0, kPi * k / n);
    }
    std::vector<double> f(n);
    for (int j = 0; j < n; ++j) {
        Cplx acc = 0.0;
        for (int k = 0; k < n; ++k) acc += p[k] * std::polar(1.0, -2.0 * kPi * k * j / n);
        f[j] = acc.real();
    }
    Eigen::VectorXd w(n);
    if (n % 2 == 0) {
        const int h = n / 2 + 1;
        for (int j = 0; j < h - 1; ++j) w(j) = f[h - 1 - j];
        for (int j = 1; j < h; ++j) w(h - 2 + j) = f[j];
    } else {
        const int h = (n + 1) / 2;
        for (int j = 0; j < h - 1; ++j) w(j) = f[h - 1 - j];
        for (int j = 0; j < h; ++j) w(h - 1 + j) = f[j];
    }
    w /= w.maxCoeff();
    return w;
}

/// Unit-norm receive beamformer b(theta)/sqrt(N_R); optional
/// Dolph-Chebyshev taper applied before normalization.
inline BeamVector receive_beamformer(double theta, int n_r, bool cheb_taper = false,
                                     double sll_db = 30.0) {
    BeamVector w;
    w.stage = BeamStage::Receive;
    w.nominal_power = 1.0;
    w.coeffs = steering_vector(theta, n_r);
    if (cheb_taper) {
        const Eigen::VectorXd t = chebyshev_window(n_r, sll_db);
        w.coeffs = w.coeffs.cwiseProduct(t.cast<Cplx>());
    }
    w.coeffs /= w.coeffs.norm();
    return w;
}

/// Stage-2 sector beam with the synthesis diagnostics used to validate
/// the flat-gain / low-sidelobe contract.
struct SectorBeam : BeamVector {
    double theta_min = 0.0;       // achieved sector, rad
    double theta_max = 0.0;
    double ripple_db = 0.0;       // max in-sector deviation from the sector mean
    double peak_sidelobe_db = 0.0;  // re in-sector mean power, outside the
                                    // transition bands of width dTheta/2
};

/// Synthesize a transmit beam with approximately constant gain across
/// [theta_min, theta_max] and suppressed sidelobes elsewhere, normalized
/// to ||w||^2 = p_avg. The fit runs in u = sin(theta), where the ULA
/// response is shift-invariant, so the achieved ripple/sidelobe quality
/// does not degrade at steep steering angles. Sectors narrower than
/// roughly the array resolution (2.5/N_T in u; a sector of exactly one
/// beamwidth cannot meet the sidelobe contract half a beamwidth past its
/// edge) are widened about their center. Synthesis is a weighted
/// least-squares fit of the array response to an in-sector unit-gain
/// indicator on a dense u grid, with a transition band of half the
/// sector width on each side left free; the fit weights are normalized
/// per region so the passband/stopband balance is independent of where
/// the sector sits.
inline SectorBeam stage2_sector_beam(double theta_min, double theta_max, double p_avg,
                                     int n_t) {
    if (!(theta_max > theta_min))
        throw std::invalid_argument("stage2_sector_beam: theta_max must exceed theta_min");
    if (theta_min < -kPi / 2.0 || theta_max > kPi / 2.0)
        throw std::invalid_argument("stage2_sector_beam: sector outside the field of view");
    double u_lo = std::sin(theta_min), u_hi = std::sin(theta_max);
    const double min_width = 2.5 / n_t;
    if (u_hi - u_lo < min_width) {
        const double c = 0.5 * (u_lo + u_hi);
        u_lo = std::max(-1.0, c - 0.5 * min_width);
        u_hi = std::min(1.0, u_lo + min_width);
        u_lo = u_hi - min_width;
    }
    const double width = u_hi - u_lo;
    const double step = std::min(0.002, width / 24.0);

    std::vector<double> us;
    for (double u = -1.0; u <= 1.0 + 1e-12; u += step) us.push_back(std::min(u, 1.0));
    const int g = static_cast<int>(us.size());

    auto row = [&](double u) {
        Eigen::RowVectorXcd r(n_t);
        for (int n = 0; n < n_t; ++n)
            r(n) = std::polar(1.0, -kPi * (n - 0.5 * (n_t - 1)) * u);  // a(theta)^H
        return r;
    };

    int n_pass = 0, n_stop = 0;
    for (double u : us) {
        if (u >= u_lo && u <= u_hi) ++n_pass;
        else if (u < u_lo - 0.5 * width || u > u_hi + 0.5 * width) ++n_stop;
    }

    Eigen::MatrixXcd a_rows(g, n_t);
    Eigen::VectorXcd target(g);
    Eigen::VectorXd sqw(g);
    const double pass_weight = std::sqrt(1.0 / n_pass);
    const double stop_weight = std::sqrt(100.0 / n_stop);
    for (int i = 0; i < g; ++i) {
        const double u = us[i];
        a_rows.row(i) = row(u);
        const bool in_sector = u >= u_lo && u <= u_hi;
        const bool in_stop = u < u_lo - 0.5 * width || u > u_hi + 0.5 * width;
        target(i) = in_sector ? Cplx(1.0, 0.0) : Cplx(0.0, 0.0);
        sqw(i) = in_sector ? pass_weight : (in_stop ? stop_weight : 0.0);
    }
    const Eigen::MatrixXcd aw = sqw.cast<Cplx>().asDiagonal() * a_rows;
    const Eigen::VectorXcd tw = sqw.cast<Cplx>().cwiseProduct(target);
    Eigen::VectorXcd w = aw.colPivHouseholderQr().solve(tw);
    w *= std::sqrt(p_avg) / w.norm();

    SectorBeam beam;
    beam.stage = BeamStage::Stage2;
    beam.nominal_power = p_avg;
    beam.coeffs = w;
    beam.theta_min = std::asin(u_lo);
    beam.theta_max = std::asin(u_hi);

    // Evaluate the synthesized pattern for the diagnostics.
    double in_sum = 0.0, in_min = 1e300, in_max = 0.0, stop_peak = 0.0;
    int in_count = 0;
    for (int i = 0; i < g; ++i) {
        const double u = us[i];
        const double p = std::norm((a_rows.row(i) * w)(0));
        if (u >= u_lo && u <= u_hi) {
            in_sum += p;
            in_min = std::min(in_min, p);
            in_max = std::max(in_max, p);
            ++in_count;
        } else if (u < u_lo - 0.5 * width || u > u_hi + 0.5 * width) {
            stop_peak = std::max(stop_peak, p);
        }
    }
    const double in_mean = in_sum / in_count;
    beam.ripple_db = 10.0 * std::max(std::log10(in_max / in_mean),
                                     std::log10(in_mean / in_min));
    beam.peak_sidelobe_db = 10.0 * std::log10(stop_peak / in_mean);
    return beam;
}

}  // namespace isac
