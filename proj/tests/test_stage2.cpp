#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "isac/channel.hpp"
#include "isac/stage2.hpp"

using namespace isac;
using testing_fixtures::paper_bs;
using testing_fixtures::small_frame;

TEST_CASE("phase-ramp matrix: identity, isometry, and explicit entries") {
    const FrameConfig f = small_frame(16, 4, 16, 4);
    Rng rng = make_stream(2, 0, 0);
    Eigen::VectorXcd x(f.k_s * f.m_s);
    for (int i = 0; i < x.size(); ++i) x(i) = qpsk_symbol(rng);

    CHECK((t_matrix_apply(x, 0.0, 0.0, f) - x).norm() < 1e-15);

    const double tau = 2.7e-7, fd = 850.0;
    const Eigen::VectorXcd y = t_matrix_apply(x, tau, fd, f);
    CHECK(y.norm() == Catch::Approx(x.norm()).epsilon(1e-12));
    for (auto [k, m] : {std::pair{0, 0}, std::pair{5, 2}, std::pair{15, 3}}) {
        const Cplx want = x(m * f.k_s + k) *
                          std::polar(1.0, 2.0 * kPi * m * f.symbol_duration() * fd -
                                              2.0 * kPi * k * f.delta_f * tau);
        CHECK(std::abs(y(m * f.k_s + k) - want) < 1e-12);
    }

    CHECK_THROWS_AS(t_matrix_apply(x, -1e-9, 0.0, f), std::invalid_argument);
    CHECK_THROWS_AS(t_matrix_apply(x.head(3), tau, fd, f), std::invalid_argument);
}

TEST_CASE("likelihood at the true position equals |h|^2 N_R ||x||^2") {
    const FrameConfig f = small_frame(32, 1, 32, 1);
    BsDescriptor bs = paper_bs()[0];
    bs.n_t = 16;
    bs.n_r = 10;
    TargetState tgt;
    tgt.position = {15.0, -20.0};
    const EchoParams e = echo_params(tgt, bs, f, 1.0);
    const BeamVector w_t = stage1_multibeam(e.theta, 0.0, 1.0, f.p_avg, bs.n_t);

    Rng rng = make_stream(6, 0, 0);
    const Stage2Rx rx = simulate_stage2_rx({e}, bs, f, w_t, rng, true);
    Stage2BsData data;
    data.y = rx.y_stacked;
    data.x = rx.x_stacked;

    const Cplx h = stage2_gain(e, w_t, bs.n_t);
    const double want = std::norm(h) * bs.n_r * rx.x_stacked.squaredNorm();
    CHECK(likelihood_contribution(data, tgt.position, bs, f) ==
          Catch::Approx(want).epsilon(1e-9));

    // Zero observation gives a zero objective everywhere.
    Stage2BsData zero = data;
    zero.y.setZero();
    CHECK(likelihood_contribution(zero, tgt.position, bs, f) == 0.0);
    CHECK(likelihood_contribution(zero, GlobalPoint{14.0, -21.0}, bs, f) == 0.0);
}

TEST_CASE("RoI grid arithmetic") {
    Roi roi;
    roi.center = {15.0, -20.0};
    roi.side = 4.0;
    roi.dx = roi.dy = 0.02;
    CHECK(roi.nx() == 201);
    CHECK(roi.ny() == 201);
    CHECK(roi.x(0) == Catch::Approx(13.0));
    CHECK(roi.x(200) == Catch::Approx(17.0));
    CHECK(roi.y(100) == Catch::Approx(-20.0));
}

TEST_CASE("likelihood map: additivity, argmax, phase invariance") {
    const FrameConfig f = small_frame(256, 1, 256, 1);
    auto bss = paper_bs();
    for (auto& b : bss) {
        b.n_t = 16;
        b.n_r = 10;
    }
    TargetState tgt;
    tgt.position = {15.0, -20.0};

    Roi roi;
    roi.center = tgt.position;
    roi.side = 2.0;
    roi.dx = roi.dy = 0.1;

    std::vector<Stage2BsData> data(bss.size());
    double want_peak = 0.0;
    Rng rng = make_stream(8, 0, 0);
    for (std::size_t i = 0; i < bss.size(); ++i) {
        const EchoParams e = echo_params(tgt, bss[i], f, 1.0);
        const BeamVector w_t = stage1_multibeam(e.theta, 0.0, 1.0, f.p_avg, bss[i].n_t);
        const Stage2Rx rx = simulate_stage2_rx({e}, bss[i], f, w_t, rng, true);
        data[i].y = rx.y_stacked;
        data[i].x = rx.x_stacked;
        want_peak += std::norm(stage2_gain(e, w_t, bss[i].n_t)) * bss[i].n_r *
                     rx.x_stacked.squaredNorm();
    }

    const LikelihoodMap map = build_likelihood_map(roi, data, bss, f);
    REQUIRE(map.fused.rows() == roi.nx());
    REQUIRE(map.per_bs.size() == bss.size());

    // The fused map is exactly the sum of the per-BS maps.
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(roi.nx(), roi.ny());
    for (const auto& m : map.per_bs) sum += m;
    CHECK((map.fused - sum).norm() < 1e-9 * map.fused.norm());

    // Noiseless argmax lands on the true (on-grid) position, and the peak
    // value matches the matched-filter identity up to the 1e-4 rad
    // beam-cache quantization.
    const PositionEstimate est = estimate_position(map);
    CHECK(distance(est.p, tgt.position) < 1e-9);
    CHECK(est.objective == Catch::Approx(want_peak).epsilon(1e-3));
    REQUIRE(est.per_bs_value.size() == bss.size());
    CHECK(est.per_bs_value[0] + est.per_bs_value[1] + est.per_bs_value[2] ==
          Catch::Approx(est.objective).epsilon(1e-12));

    // A common phase rotation of the observations changes nothing.
    std::vector<Stage2BsData> rotated = data;
    for (auto& d : rotated) d.y *= std::polar(1.0, 1.1);
    const LikelihoodMap map2 = build_likelihood_map(roi, rotated, bss, f);
    CHECK((map2.fused - map.fused).norm() < 1e-9 * map.fused.norm());
}

TEST_CASE("estimate_position tie-breaking and validation") {
    Roi roi;
    roi.center = {0.0, 0.0};
    roi.side = 1.0;
    roi.dx = roi.dy = 0.5;
    LikelihoodMap map;
    map.roi = roi;
    map.fused = Eigen::MatrixXd::Constant(roi.nx(), roi.ny(), 2.0);
    const PositionEstimate est = estimate_position(map);
    CHECK(est.ix == 0);
    CHECK(est.iy == 0);
    CHECK(est.p.x == Catch::Approx(-0.5));
    CHECK(est.p.y == Catch::Approx(-0.5));

    map.fused.resize(0, 0);
    CHECK_THROWS_AS(estimate_position(map), std::invalid_argument);
}

TEST_CASE("likelihood map input validation") {
    const FrameConfig f = small_frame(8, 1, 8, 1);
    const auto bss = paper_bs();
    Roi roi;
    roi.center = {15.0, -20.0};
    roi.side = 1.0;
    roi.dx = roi.dy = 0.5;
    CHECK_THROWS_AS(build_likelihood_map(roi, {}, bss, f), std::invalid_argument);
}
