#pragma once

#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "isac/config.hpp"
#include "isac/geometry.hpp"

namespace isac {

/// One BS's coarse detection, ready for fusion: local polar estimate,
/// its back-projection into the global frame, and the peak intensity
/// normalized by the global maximum across BSs (so max_i intensity = 1).
struct CoarseMeasurement {
    int bs_index = 0;
    double r = 0.0;          // m, local
    double theta = 0.0;      // rad, local
    double bearing = 0.0;    // rad, global = orientation + theta
    GlobalPoint point;       // back-projected global position
    double intensity = 1.0;  // normalized peak intensity, (0, 1]
};

inline CoarseMeasurement make_coarse_measurement(int bs_index, const BsDescriptor& bs,
                                                 double r, double theta, double intensity) {
    CoarseMeasurement m;
    m.bs_index = bs_index;
    m.r = r;
    m.theta = theta;
    m.bearing = wrap_angle(bs.orientation + theta);
    m.point = local_polar_to_global(LocalPolar{r, theta, 0.0}, bs);
    m.intensity = intensity;
    return m;
}

/// Unweighted mean of the back-projected global points.
inline GlobalPoint fuse_simple_average(const std::vector<CoarseMeasurement>& ms) {
    if (ms.empty()) throw std::invalid_argument("fuse_simple_average: no measurements");
    GlobalPoint p{0.0, 0.0};
    for (const auto& m : ms) {
        p.x += m.point.x;
        p.y += m.point.y;
    }
    p.x /= ms.size();
    p.y /= ms.size();
    return p;
}

/// Mean weighted by the normalized peak intensities.
inline GlobalPoint fuse_weighted_average(const std::vector<CoarseMeasurement>& ms) {
    if (ms.empty()) throw std::invalid_argument("fuse_weighted_average: no measurements");
    GlobalPoint p{0.0, 0.0};
    double wsum = 0.0;
    for (const auto& m : ms) {
        p.x += m.intensity * m.point.x;
        p.y += m.intensity * m.point.y;
        wsum += m.intensity;
    }
    if (wsum <= 0.0) throw std::invalid_argument("fuse_weighted_average: all-zero weights");
    p.x /= wsum;
    p.y /= wsum;
    return p;
}

struct WlsResult {
    GlobalPoint point;
    bool fell_back = false;  // rank-deficient system, weighted average used
};

/// Weighted least squares over a (2N-1)-row linear system: one bearing
/// line per BS plus one range-difference linearization per non-reference
/// BS (reference = highest intensity). Row order and weights follow the
/// diagonal pattern (R1, R1*Ri, Ri, ...): reference bearing row first,
/// then per non-reference BS its range-difference row and bearing row.
/// weight_scale multiplies the whole weight matrix (W -> cW); the argmin
/// is invariant to it and it exists to make that property testable.
inline WlsResult fuse_wls(const std::vector<CoarseMeasurement>& ms,
                          const std::vector<BsDescriptor>& bss, double weight_scale = 1.0) {
    if (!(weight_scale > 0.0))
        throw std::invalid_argument("fuse_wls: weight scale must be positive");
    const int n = static_cast<int>(ms.size());
    if (n < 2) throw std::invalid_argument("fuse_wls: insufficient measurements (N >= 2 required)");

    int ref = 0;
    for (int i = 1; i < n; ++i)
        if (ms[i].intensity > ms[ref].intensity) ref = i;

    const int rows = 2 * n - 1;
    Eigen::MatrixXd a(rows, 2);
    Eigen::VectorXd b(rows);
    Eigen::VectorXd w(rows);

    auto bearing_row = [&](int row, const CoarseMeasurement& m, double weight) {
        const auto& o = bss[m.bs_index].position;
        a(row, 0) = std::sin(m.bearing);
        a(row, 1) = -std::cos(m.bearing);
        b(row) = std::sin(m.bearing) * o.x - std::cos(m.bearing) * o.y;
        w(row) = weight;
    };

    const auto& mr = ms[ref];
    const auto& o1 = bss[mr.bs_index].position;
    bearing_row(0, mr, mr.intensity);
    int row = 1;
    for (int i = 0; i < n; ++i) {
        if (i == ref) continue;
        const auto& mi = ms[i];
        const auto& oi = bss[mi.bs_index].position;
        a(row, 0) = 2.0 * (o1.x - oi.x);
        a(row, 1) = 2.0 * (o1.y - oi.y);
        b(row) = mi.r * mi.r - mr.r * mr.r + (o1.x * o1.x + o1.y * o1.y) -
                 (oi.x * oi.x + oi.y * oi.y);
        w(row) = mr.intensity * mi.intensity;
        ++row;
        bearing_row(row, mi, mi.intensity);
        ++row;
    }

    w *= weight_scale;
    const Eigen::VectorXd sqw = w.cwiseSqrt();
    const Eigen::MatrixXd aw = sqw.asDiagonal() * a;
    const Eigen::VectorXd bw = sqw.cwiseProduct(b);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(aw);
    qr.setThreshold(1e-10);
    WlsResult res;
    if (qr.rank() < 2) {
        res.fell_back = true;
        res.point = fuse_weighted_average(ms);
        return res;
    }
    const Eigen::Vector2d sol = qr.solve(bw);
    res.point = GlobalPoint{sol(0), sol(1)};
    return res;
}

}  // namespace isac
