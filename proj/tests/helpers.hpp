#pragma once

// Shared fixtures: the reference three-BS scenario and small frames for
// fast statistical tests.

#include "isac/config.hpp"

namespace testing_fixtures {

inline isac::FrameConfig small_frame(int k_s, int m_s, int k_p, int m_p, int n_dir = 50) {
    isac::FrameConfig f;
    f.fc = 28e9;
    f.delta_f = 120e3;
    f.k_total = 3168;
    f.m_total = 1120;
    f.t_cp = 8.92e-6 - 1.0 / 120e3;
    f.k_s = k_s;
    f.m_s = m_s;
    f.n_dir = n_dir;
    f.rho_f = static_cast<double>(k_s) / f.k_total;
    f.rho_p = 0.1;
    f.p_avg = std::pow(10.0, -0.5) * 1e-3;  // -5 dBm
    f.n0 = 4e-20;
    f.k_p = k_p;
    f.m_p = m_p;
    return f;
}

inline std::vector<isac::BsDescriptor> paper_bs(int n_t = 50, int n_r = 50) {
    using isac::kPi;
    auto mk = [&](double x, double y, double orient) {
        isac::BsDescriptor b;
        b.position = {x, y};
        b.orientation = orient;
        b.n_t = n_t;
        b.n_r = n_r;
        b.theta0 = 60.0 * kPi / 180.0;
        return b;
    };
    return {mk(60.0, 0.0, kPi), mk(-30.0, 52.0, -kPi / 3.0), mk(-30.0, -52.0, kPi / 3.0)};
}

}  // namespace testing_fixtures
