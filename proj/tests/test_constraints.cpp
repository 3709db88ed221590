#include <catch2/catch_amalgamated.hpp>

#include <cstdio>

#include "geocert/constraints.hpp"
#include "geocert/rng.hpp"
#include "oracles.hpp"

using namespace geocert;
using namespace geocert::constraints;

namespace {

// AR(1)-flavoured synthetic training windows with trend, enough structure for
// every calibration statistic to come out reliable.
void make_training(std::size_t n, std::size_t L, std::size_t H, std::size_t d, Rng& rng,
                   std::vector<std::vector<double>>& Xs, std::vector<std::vector<double>>& Ys) {
    for (std::size_t w = 0; w < n; ++w) {
        std::vector<double> x(L * d), y(H * d);
        for (std::size_t v = 0; v < d; ++v) {
            double level = rng.normal();
            const double slope = 0.05 * rng.normal();
            for (std::size_t t = 0; t < L + H; ++t) {
                level = 0.8 * level + 0.3 * rng.normal();
                const double val = level + slope * static_cast<double>(t);
                if (t < L)
                    x[t * d + v] = val;
                else
                    y[(t - L) * d + v] = val;
            }
        }
        Xs.push_back(std::move(x));
        Ys.push_back(std::move(y));
    }
}

Calibration reliable_calibration(Rng& rng, std::size_t L = 24, std::size_t H = 12,
                                 std::size_t d = 2) {
    std::vector<std::vector<double>> Xs, Ys;
    make_training(64, L, H, d, rng, Xs, Ys);
    return calibrate(Xs, Ys, L, H, d);
}

}  // namespace

TEST_CASE("weight table") {
    ConstraintWeights w;
    CHECK(w.sum() == 1.00);
    CHECK(w.target == 0.20);
    CHECK(w.gradient == 0.12);
    CHECK(w.scale == 0.08);
    CHECK(w.boundary == 0.20);
    CHECK(w.trend == 0.12);
    CHECK(w.autocorr == 0.10);
    CHECK(w.multiscale == 0.10);
    CHECK(w.dynamic == 0.08);
}

TEST_CASE("total_violation pinned values") {
    CHECK(total_violation({0, 0, 0, 0, 0, 0, 0, 0}) == 0.0);
    CHECK(total_violation({1, 1, 1, 1, 1, 1, 1, 1}) == Catch::Approx(1.00).margin(1e-15));
    CHECK(total_violation({2, 0, 0, 0, 0, 0, 0, 0}) == Catch::Approx(0.40).margin(1e-15));
    CHECK_THROWS(total_violation({-0.1, 0, 0, 0, 0, 0, 0, 0}));
}

TEST_CASE("total_violation matches an independent weighted sum") {
    Rng rng(301);
    for (int trial = 0; trial < 100; ++trial) {
        ConstraintVector c;
        for (auto& v : c) v = rng.uniform(0.0, 3.0);
        // oracle: spelled-out arithmetic, fixed table
        const double expect = 0.20 * c[0] + 0.12 * c[1] + 0.08 * c[2] + 0.20 * c[3] +
                              0.12 * c[4] + 0.10 * c[5] + 0.10 * c[6] + 0.08 * c[7];
        CHECK(std::abs(total_violation(c) - expect) <= 1e-12);
    }
}

TEST_CASE("percentiles are nearest-rank on sorted values") {
    std::vector<double> v(100);
    for (std::size_t i = 0; i < 100; ++i) v[i] = static_cast<double>(100 - i);  // unsorted
    CHECK(stats::median(v) == 50.0);
    CHECK(stats::percentile(v, 0.95) == 95.0);
    CHECK(stats::percentile(v, 0.05) == 5.0);
    CHECK(stats::percentile({7.0}, 0.5) == 7.0);
    CHECK_THROWS(stats::percentile({}, 0.5));
}

TEST_CASE("calibrate on a constant series") {
    const std::size_t L = 8, H = 4, d = 1;
    std::vector<std::vector<double>> Xs(40, std::vector<double>(L * d, 3.0));
    std::vector<std::vector<double>> Ys(40, std::vector<double>(H * d, 3.0));
    auto cal = calibrate(Xs, Ys, L, H, d);
    CHECK(cal.sigma_diff == kSigmaFloor);
    CHECK_FALSE(cal.boundary_reliable);

    // boundary constraint is inert on the degenerate calibration
    std::vector<double> xh(H * d, 9.0);
    auto h = eval_heuristic(xh.data(), Xs[0].data(), L, H, d, cal);
    CHECK(h.boundary == 0.0);
}

TEST_CASE("calibrate determinism and duplication invariance") {
    Rng rng(303);
    std::vector<std::vector<double>> Xs, Ys;
    make_training(40, 16, 8, 2, rng, Xs, Ys);
    auto a = calibrate(Xs, Ys, 16, 8, 2);

    // bit-identical on a second run over the same data
    auto a2 = calibrate(Xs, Ys, 16, 8, 2);
    CHECK(a.sigma_data == a2.sigma_data);
    CHECK(a.mu_diff == a2.mu_diff);
    CHECK(a.z_p95 == a2.z_p95);
    CHECK(a.mu_rho == a2.mu_rho);

    // duplicating every window changes nothing beyond summation rounding;
    // rank statistics are exactly invariant
    auto X2 = Xs, Y2 = Ys;
    X2.insert(X2.end(), Xs.begin(), Xs.end());
    Y2.insert(Y2.end(), Ys.begin(), Ys.end());
    auto b = calibrate(X2, Y2, 16, 8, 2);

    CHECK(a.sigma_data == Catch::Approx(b.sigma_data).epsilon(1e-12));
    CHECK(a.mu_diff == Catch::Approx(b.mu_diff).epsilon(1e-12));
    CHECK(a.z_p95 == Catch::Approx(b.z_p95).epsilon(1e-12));
    CHECK(a.tau_trend == b.tau_trend);
    CHECK(a.mu_rho == Catch::Approx(b.mu_rho).epsilon(1e-12));
    CHECK(a.rho_p05 == b.rho_p05);
    CHECK(a.gamma_p95 == b.gamma_p95);
    CHECK(a.tau_var == b.tau_var);

    CHECK_THROWS(calibrate({}, {}, 16, 8, 2));
}

TEST_CASE("too few windows means unreliable") {
    Rng rng(305);
    std::vector<std::vector<double>> Xs, Ys;
    make_training(8, 16, 8, 1, rng, Xs, Ys);
    auto cal = calibrate(Xs, Ys, 16, 8, 1);
    CHECK_FALSE(cal.boundary_reliable);
    CHECK_FALSE(cal.trend_reliable);
    CHECK_FALSE(cal.rho_reliable);
    CHECK_FALSE(cal.dynamic_reliable);
}

TEST_CASE("calibration text round trip") {
    Rng rng(307);
    auto cal = reliable_calibration(rng);
    const std::string path = "calibration_test.txt";
    cal.save(path);
    auto back = Calibration::load(path);
    std::remove(path.c_str());
    CHECK(back.sigma_data == cal.sigma_data);
    CHECK(back.mu_diff == cal.mu_diff);
    CHECK(back.sigma_diff == cal.sigma_diff);
    CHECK(back.z_p95 == cal.z_p95);
    CHECK(back.tau_trend == cal.tau_trend);
    CHECK(back.r_p95 == cal.r_p95);
    CHECK(back.mu_rho == cal.mu_rho);
    CHECK(back.z_rho_p95 == cal.z_rho_p95);
    CHECK(back.rho_p05 == cal.rho_p05);
    CHECK(back.gamma_p95 == cal.gamma_p95);
    CHECK(back.tau_var == cal.tau_var);
    CHECK(back.boundary_reliable == cal.boundary_reliable);
    for (std::size_t i = 0; i < kScales.size(); ++i) {
        CHECK(back.scales[i].mu == cal.scales[i].mu);
        CHECK(back.scales[i].sigma == cal.scales[i].sigma);
        CHECK(back.scales[i].z_p95 == cal.scales[i].z_p95);
        CHECK(back.scales[i].reliable == cal.scales[i].reliable);
    }
}

TEST_CASE("logical layer pinned cases") {
    Rng rng(309);
    auto cal = reliable_calibration(rng);
    const std::size_t H = 12, d = 2;
    std::vector<double> target(H * d);
    for (auto& v : target) v = rng.normal();

    manifold::Geometry geo;
    manifold::Vec flat(target);
    auto z = geo.embed(flat);

    // perfect prediction: everything zero
    auto same = eval_logical(target.data(), target.data(), H, d, z, z, cal, 0.0, 0.1);
    CHECK(same.target == 0.0);
    CHECK(same.gradient == 0.0);
    CHECK(same.scale == 0.0);
    CHECK(same.dist == 0.0);

    // reversed gradient: cos = -1 so C_gradient = 1.5
    std::vector<double> rev(H * d);
    for (std::size_t i = 0; i < H * d; ++i) rev[i] = 5.0 - target[i];
    manifold::Vec fr(rev);
    auto zr = geo.embed(fr);
    auto flipped = eval_logical(rev.data(), target.data(), H, d, zr, z, cal, 0.0, 0.1);
    CHECK(flipped.gradient == Catch::Approx(1.5).margin(1e-12));

    // sigma ratio 1.1 with equal means stays inside the 0.2 margin
    std::vector<double> scaled(H * d);
    for (std::size_t v = 0; v < d; ++v) {
        double mu = 0.0;
        for (std::size_t t = 0; t < H; ++t) mu += target[t * d + v];
        mu /= H;
        for (std::size_t t = 0; t < H; ++t)
            scaled[t * d + v] = mu + 1.1 * (target[t * d + v] - mu);
    }
    manifold::Vec fs(scaled);
    auto zs = geo.embed(fs);
    auto near = eval_logical(scaled.data(), target.data(), H, d, zs, z, cal, 0.0, 0.1);
    CHECK(near.scale == 0.0);
}

TEST_CASE("tau_adapt saturates") {
    CHECK(tau_adapt(0.1, 0.0) == Catch::Approx(0.2));
    CHECK(tau_adapt(0.1, 1.0) == Catch::Approx(0.4));
    CHECK(tau_adapt(0.1, 100.0) == Catch::Approx(0.6));  // min(2, dbar) cap
}

TEST_CASE("heuristic layer pinned cases") {
    Rng rng(311);
    const std::size_t L = 24, H = 12, d = 1;
    auto cal = reliable_calibration(rng, L, H, d);
    REQUIRE(cal.boundary_reliable);
    REQUIRE(cal.trend_reliable);
    REQUIRE(cal.rho_reliable);

    std::vector<double> xin(L * d);
    for (std::size_t t = 0; t < L; ++t) xin[t] = rng.normal();

    // seamless onset: X_L == Xhat_1 gives zero boundary violation
    std::vector<double> xh(H * d, xin[(L - 1) * d]);
    CHECK(cal.mu_diff >= 0.0);
    CHECK(cal.z_p95 > 0.0);
    auto h = eval_heuristic(xh.data(), xin.data(), L, H, d, cal);
    CHECK(h.boundary == 0.0);

    // flat input trend keeps the trend constraint off regardless of Xhat
    std::vector<double> flat_in(L * d, 1.0);
    std::vector<double> steep(H * d);
    for (std::size_t t = 0; t < H; ++t) steep[t] = 100.0 * static_cast<double>(t);
    auto off = eval_heuristic(steep.data(), flat_in.data(), L, H, d, cal);
    CHECK(off.trend == 0.0);

    // gating soundness: flat input also keeps the dynamic constraint at 0
    CHECK(off.dynamic == 0.0);
}

TEST_CASE("autocorr at the calibrated mean vanishes") {
    Rng rng(313);
    const std::size_t L = 24, H = 12, d = 1;
    auto cal = reliable_calibration(rng, L, H, d);
    // construct an AR-like horizon whose lag-1 rho lands near mu_rho by search
    std::vector<double> best;
    double best_gap = 1e9;
    for (int trial = 0; trial < 400; ++trial) {
        std::vector<double> y(H);
        double level = rng.normal();
        for (std::size_t t = 0; t < H; ++t) {
            level = 0.8 * level + 0.3 * rng.normal();
            y[t] = level;
        }
        const double rho = stats::lag1_rho(y.data(), H);
        const double gap = std::abs(rho - cal.mu_rho);
        if (gap < best_gap && rho >= cal.rho_p05) {
            best_gap = gap;
            best = y;
        }
    }
    REQUIRE(best_gap < 0.05);
    std::vector<double> xin(L, 0.0);
    auto h = eval_heuristic(best.data(), xin.data(), L, H, d, cal);
    CHECK(h.autocorr <= 1e-12);  // |rho - mu|/sigma stays far below z_p95
}

TEST_CASE("every constraint value is nonnegative") {
    Rng rng(315);
    const std::size_t L = 24, H = 12, d = 3;
    auto cal = reliable_calibration(rng, L, H, d);
    manifold::Geometry geo;
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> xh(H * d), xin(L * d), xt(H * d);
        for (auto& v : xh) v = 3.0 * rng.normal();
        for (auto& v : xin) v = rng.normal();
        for (auto& v : xt) v = rng.normal();
        auto r = evaluate_window(xh.data(), xin.data(), xt.data(), L, H, d, cal,
                                 rng.uniform(0.0, 3.0), 0.1, geo);
        for (double v : r.values) CHECK(v >= 0.0);
        CHECK(r.total >= 0.0);
        CHECK(r.total == Catch::Approx(total_violation(r.values)).margin(1e-15));
    }
}

TEST_CASE("csr metrics") {
    CHECK(csr({0.01, 0.05, 0.1}, 0.1).csr_hard == 1.0);
    CHECK(csr({0.01, 0.05, 0.1}, 0.1).csr_soft == 1.0);

    auto m = csr({0.0, 0.0, 0.0, 10.0}, 0.1);  // last is 10 eps * 10
    CHECK(m.csr_hard == 0.75);

    CHECK(csr({0.5, 0.9, 2.0}, 0.1).csr_hard == 0.0);
    CHECK_THROWS(csr({}, 0.1));

    // soft >= hard on random batches
    Rng rng(317);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> totals(20);
        for (auto& v : totals) v = rng.uniform(0.0, 0.5);
        auto r = csr(totals, 0.1);
        CHECK(r.csr_soft >= r.csr_hard - 1e-15);
    }

    // deg anchors
    CHECK(violation_degree(0.1, 0.1) == 0.0);
    CHECK(violation_degree(1.0, 0.1) == 1.0);
    CHECK(violation_degree(0.55, 0.1) == Catch::Approx(0.5));
}

TEST_CASE("graph evaluator agrees with the plain one") {
    Rng rng(319);
    const std::size_t B = 4, L = 24, H = 12, d = 2;
    auto cal = reliable_calibration(rng, L, H, d);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> xh(B * H * d), xin(B * L * d), xt(B * H * d);
        for (auto& v : xh) v = 2.0 * rng.normal();
        for (auto& v : xin) v = rng.normal();
        for (auto& v : xt) v = rng.normal();
        const double dbar = rng.uniform(0.0, 2.0);

        for (bool hyp : {true, false}) {
            manifold::Geometry geo{hyp};
            double plain = 0.0;
            for (std::size_t b = 0; b < B; ++b)
                plain += evaluate_window(xh.data() + b * H * d, xin.data() + b * L * d,
                                         xt.data() + b * H * d, L, H, d, cal, dbar, 0.1, geo)
                             .total;
            plain /= B;

            auto g = graph::total_violation(Tensor::from({B, H, d}, xh),
                                            Tensor::from({B, L, d}, xin),
                                            Tensor::from({B, H, d}, xt), cal, dbar, 0.1, hyp);
            CHECK(std::abs(g.item() - plain) <= 1e-9);
        }
    }
}

TEST_CASE("graph evaluator gradient check") {
    Rng rng(321);
    const std::size_t B = 2, L = 24, H = 12, d = 2;
    auto cal = reliable_calibration(rng, L, H, d);
    std::vector<double> xh(B * H * d), xin(B * L * d), xt(B * H * d);
    for (auto& v : xh) v = 2.0 * rng.normal();
    for (auto& v : xin) v = rng.normal();
    for (auto& v : xt) v = rng.normal();
    auto Xhat = Tensor::from({B, H, d}, xh, true);
    auto Xin = Tensor::from({B, L, d}, xin);
    auto Xt = Tensor::from({B, H, d}, xt);
    CHECK(oracles::grad_check({Xhat}, [&] {
              return graph::total_violation(Xhat, Xin, Xt, cal, 0.5, 0.1, true);
          }) < 1e-4);
}
