#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "isac/stage1.hpp"

using namespace isac;
using testing_fixtures::paper_bs;
using testing_fixtures::small_frame;

namespace {

/// Synthetic filtered grid with exact DFT-bin delay/Doppler frequencies.
Eigen::MatrixXcd on_bin_grid(int k_s, int m_s, int k_p, int m_p, int q_star, int p_star,
                             Cplx gain) {
    Eigen::MatrixXcd g(k_s, m_s);
    for (int k = 0; k < k_s; ++k)
        for (int m = 0; m < m_s; ++m)
            g(k, m) = gain * std::polar(1.0, -2.0 * kPi * k * q_star / double(k_p) +
                                                 2.0 * kPi * m * p_star / double(m_p));
    return g;
}

}  // namespace

TEST_CASE("reciprocal filter removes the symbols and the beam sums") {
    const int k_s = 4, m_s = 3, n_r = 5;
    const BeamVector w_r = receive_beamformer(0.37, n_r);
    Rng rng = make_stream(1, 0, 0);

    Stage1Rx rx;
    rx.x_s.resize(k_s, m_s);
    rx.y.resize(n_r, k_s * m_s);
    Eigen::MatrixXcd want(k_s, m_s);
    for (int m = 0; m < m_s; ++m) {
        for (int k = 0; k < k_s; ++k) {
            rx.x_s(k, m) = qpsk_symbol(rng);
            const Cplx s(0.1 * k - 0.2, 0.05 * m);
            // y = w_R * s  =>  w_R^H y = s (unit-norm beamformer).
            rx.y.col(k + k_s * m) = w_r.coeffs * s * rx.x_s(k, m);
            want(k, m) = s;
        }
    }
    const Eigen::MatrixXcd got = reciprocal_filter(rx, w_r);
    CHECK((got - want).norm() < 1e-12);

    rx.x_s(1, 1) = 0.0;
    CHECK_THROWS_AS(reciprocal_filter(rx, w_r), std::domain_error);
}

TEST_CASE("periodogram: on-bin tone concentrates K_s*M_s of power") {
    const int k_s = 32, m_s = 8, k_p = 64, m_p = 16;
    Periodogram pg(k_p, m_p);
    const Cplx gain(3e-7, -1e-7);
    const int q_star = 11, p_star = 5;
    const Eigen::MatrixXd p = pg.compute(on_bin_grid(k_s, m_s, k_p, m_p, q_star, p_star, gain));

    REQUIRE(p.rows() == k_p);
    REQUIRE(p.cols() == m_p);
    int bq = 0, bp = 0;
    p.maxCoeff(&bq, &bp);
    CHECK(bq == q_star);
    CHECK(bp == p_star);
    CHECK(p(q_star, p_star) ==
          Catch::Approx(std::norm(gain) * k_s * m_s).epsilon(1e-9));

    // Constant input peaks at the origin with the same value.
    const Eigen::MatrixXd dc = pg.compute(Eigen::MatrixXcd::Constant(k_s, m_s, gain));
    dc.maxCoeff(&bq, &bp);
    CHECK(bq == 0);
    CHECK(bp == 0);
    CHECK(dc(0, 0) == Catch::Approx(std::norm(gain) * k_s * m_s).epsilon(1e-9));
}

TEST_CASE("periodogram: one-bin delay increments move the range peak by one row") {
    const int k_s = 32, m_s = 8, k_p = 128, m_p = 16;
    Periodogram pg(k_p, m_p);
    for (int q_star : {0, 1, 7, 40}) {
        const Eigen::MatrixXd p =
            pg.compute(on_bin_grid(k_s, m_s, k_p, m_p, q_star, 3, Cplx(1.0, 0.0)));
        int bq = 0, bp = 0;
        p.maxCoeff(&bq, &bp);
        CHECK(bq == q_star);
        CHECK(bp == 3);
    }
}

TEST_CASE("periodogram: Parseval identity without zero padding") {
    const int k_s = 16, m_s = 8;
    Periodogram pg(k_s, m_s);
    Rng rng = make_stream(4, 0, 0);
    NormalGen gen;
    Eigen::MatrixXcd y(k_s, m_s);
    for (int k = 0; k < k_s; ++k)
        for (int m = 0; m < m_s; ++m) y(k, m) = complex_normal(rng, gen, 1.0);
    const Eigen::MatrixXd p = pg.compute(y);
    CHECK(p.sum() == Catch::Approx(y.squaredNorm()).epsilon(1e-10));
}

TEST_CASE("periodogram noise cells: mean level and exponential tail") {
    const int k_s = 64, m_s = 40;
    Periodogram pg(k_s, m_s);  // no padding -> independent output cells
    const double sigma2 = 4.8e-15;
    Rng rng = make_stream(17, 0, 0);
    NormalGen gen;

    const double eta = sigma2 * std::log(20.0);  // per-cell exceedance 0.05
    double sum = 0.0;
    long long above = 0, cells = 0;
    for (int rep = 0; rep < 20; ++rep) {
        Eigen::MatrixXcd y(k_s, m_s);
        for (int k = 0; k < k_s; ++k)
            for (int m = 0; m < m_s; ++m) y(k, m) = complex_normal(rng, gen, sigma2);
        const Eigen::MatrixXd p = pg.compute(y);
        sum += p.sum();
        above += (p.array() > eta).count();
        cells += p.size();
    }
    CHECK(sum / cells == Catch::Approx(sigma2).epsilon(0.02));
    CHECK(static_cast<double>(above) / cells == Catch::Approx(0.05).margin(0.005));
}

TEST_CASE("range-angle map keeps the strongest Doppler column per direction") {
    const int q_max = 10, n_dir = 4, rows = 16, cols = 6;
    std::vector<Eigen::MatrixXd> rd(n_dir, Eigen::MatrixXd::Constant(rows, cols, 1.0));
    rd[1](3, 4) = 9.0;             // direction 1 peak in column 4
    rd[2](q_max + 2, 5) = 50.0;    // beyond q_max: must be ignored
    rd[2](7, 2) = 5.0;
    rd[3](0, 0) = 2.0;
    rd[3](0, 3) = 2.0;             // tie: lowest p wins

    const RangeAngleMap map = build_range_angle_map(rd, q_max);
    REQUIRE(map.values.rows() == q_max);
    REQUIRE(map.values.cols() == n_dir);
    CHECK(map.p_max[0] == 0);
    CHECK(map.p_max[1] == 4);
    CHECK(map.values(3, 1) == 9.0);
    CHECK(map.p_max[2] == 2);
    CHECK(map.values(7, 2) == 5.0);
    CHECK(map.p_max[3] == 0);

    CHECK_THROWS_AS(build_range_angle_map({}, q_max), std::invalid_argument);
    CHECK_THROWS_AS(build_range_angle_map(rd, rows + 1), std::invalid_argument);
}

TEST_CASE("detections map to local polar coordinates via the reference numerology") {
    const FrameConfig f = [] {
        FrameConfig f = small_frame(3168, 22, 4096, 256);
        return f;
    }();
    const BsDescriptor bs = paper_bs()[0];
    const DerivedConstants dc = derived_constants(f, bs, 1e-3);

    RangeAngleMap map;
    map.values = Eigen::MatrixXd::Zero(dc.q_max, f.n_dir);
    map.p_max.assign(f.n_dir, 0);
    map.values(100, 0) = 10.0 * dc.threshold;
    map.values(200, 25) = 2.0 * dc.threshold;

    const auto dets = detect(map, dc, bs, 7);
    REQUIRE(dets.size() == 2);
    CHECK(dets[0].bs_id == 7);
    CHECK(dets[0].r == Catch::Approx(100.0 * 0.30518).epsilon(1e-3));
    CHECK(dets[0].theta == Catch::Approx(-60.0 * kPi / 180.0));
    CHECK(dets[1].theta == Catch::Approx(-60.0 * kPi / 180.0 + 25.0 * dc.delta_theta));

    const auto peak = peak_detection(map, dc, bs);
    REQUIRE(peak.has_value());
    CHECK(peak->q == 100);
    CHECK(peak->j == 0);
    CHECK(peak->intensity == 10.0 * dc.threshold);

    // All-noise map below eta -> missed detection.
    map.values.setConstant(0.5 * dc.threshold);
    CHECK_FALSE(peak_detection(map, dc, bs).has_value());

    // Exact tie resolves to the lowest (q, j) in row-major order.
    map.values.setZero();
    map.values(5, 3) = 2.0 * dc.threshold;
    map.values(5, 1) = 2.0 * dc.threshold;
    map.values(9, 0) = 2.0 * dc.threshold;
    const auto tie = peak_detection(map, dc, bs);
    REQUIRE(tie.has_value());
    CHECK(tie->q == 5);
    CHECK(tie->j == 1);
}

TEST_CASE("DBSCAN clustering of detections") {
    auto det = [](double x, double y, double intensity) {
        Detection d;
        d.r = std::hypot(x, y);
        d.theta = std::atan2(y, x);
        d.intensity = intensity;
        return d;
    };

    // Two compact groups plus one isolated point.
    std::vector<Detection> dets = {
        det(10.0, 0.0, 1.0),  det(10.3, 0.0, 3.0), det(10.0, 0.3, 1.0),
        det(30.0, 5.0, 2.0),  det(30.2, 5.1, 2.0),
        det(50.0, -20.0, 1.0),
    };

    SECTION("min_pts = 1 keeps the singleton as its own cluster") {
        const auto clusters = cluster_detections(dets, 0.61, 1);
        REQUIRE(clusters.size() == 3);
        CHECK(clusters[0].members.size() == 3);
        CHECK(clusters[0].intensity == 3.0);
        // Intensity-weighted centroid of (10,0)x1, (10.3,0)x3, (10,0.3)x1.
        const double cx = (10.0 + 3.0 * 10.3 + 10.0) / 5.0;
        const double cy = (0.0 + 0.0 + 0.3) / 5.0;
        CHECK(clusters[0].r * std::cos(clusters[0].theta) == Catch::Approx(cx).epsilon(1e-9));
        CHECK(clusters[0].r * std::sin(clusters[0].theta) == Catch::Approx(cy).margin(1e-9));
        CHECK(clusters[1].members.size() == 2);
        CHECK(clusters[2].members.size() == 1);
    }

    SECTION("min_pts = 2 discards the singleton as noise") {
        const auto clusters = cluster_detections(dets, 0.61, 2);
        REQUIRE(clusters.size() == 2);
        CHECK(clusters[0].members.size() == 3);
        CHECK(clusters[1].members.size() == 2);
    }

    SECTION("chain expansion merges transitively reachable points") {
        std::vector<Detection> chain;
        for (int i = 0; i < 6; ++i) chain.push_back(det(5.0 + 0.5 * i, 0.0, 1.0));
        const auto clusters = cluster_detections(chain, 0.55, 2);
        REQUIRE(clusters.size() == 1);
        CHECK(clusters[0].members.size() == 6);
    }

    CHECK(cluster_detections({}, 0.61, 1).empty());
}
