#include <catch2/catch_amalgamated.hpp>

#include "geocert/rng.hpp"
#include "geocert/spectral.hpp"
#include "oracles.hpp"

using namespace geocert;
using namespace geocert::spectral;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, bool requires_grad = true) {
    std::vector<double> data(numel(shape));
    for (auto& v : data) v = rng.normal();
    return Tensor::from(std::move(shape), std::move(data), requires_grad);
}

}  // namespace

TEST_CASE("identity filter is the identity map") {
    Rng rng(101);
    for (std::size_t L : {7, 12, 96}) {
        auto X = random_tensor({2, L, 3}, rng, false);
        auto f = SpectralFilter::identity(L);
        auto Y = fourier_filter(X, f);
        REQUIRE(Y.shape() == X.shape());
        for (std::size_t i = 0; i < X.size(); ++i)
            CHECK(std::abs(Y.data()[i] - X.data()[i]) <= 1e-9);
    }
}

TEST_CASE("zero filter zeroes the signal") {
    Rng rng(103);
    const std::size_t L = 16;
    auto X = random_tensor({1, L, 2}, rng, false);
    auto f = SpectralFilter::identity(L, L / 2 + 1);  // every bin learnable
    for (auto& v : f.re.mutable_data()) v = 0.0;
    auto Y = fourier_filter(X, f);
    for (double v : Y.data()) CHECK(std::abs(v) <= 1e-12);
}

TEST_CASE("frozen bins stay at identity") {
    Rng rng(105);
    const std::size_t L = 16;
    auto f = SpectralFilter::identity(L, 3);
    // scribble on all parameters; only the first 3 bins may react
    for (auto& v : f.re.mutable_data()) v = 7.0;
    for (auto& v : f.im.mutable_data()) v = -2.0;
    auto wre = f.effective_re().data();
    auto wim = f.effective_im().data();
    for (std::size_t k = 0; k < f.size(); ++k) {
        if (k < 3) {
            CHECK(wre[k] == 7.0);
            CHECK(wim[k] == -2.0);
        } else {
            CHECK(wre[k] == 1.0);
            CHECK(wim[k] == 0.0);
        }
    }
}

TEST_CASE("bin-0 filter extracts the constant component") {
    const std::size_t L = 16;
    const double c = 2.5;
    std::vector<double> x(L);
    for (std::size_t t = 0; t < L; ++t)
        x[t] = c + std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / L);
    auto X = Tensor::from({1, L, 1}, std::move(x));
    auto f = SpectralFilter::identity(L, L / 2 + 1);
    auto& re = f.re.mutable_data();
    for (std::size_t k = 1; k < re.size(); ++k) re[k] = 0.0;
    auto Y = fourier_filter(X, f);
    for (double v : Y.data()) CHECK(v == Catch::Approx(c).margin(1e-10));
}

TEST_CASE("fourier_filter rejects a mismatched filter length") {
    Rng rng(107);
    auto X = random_tensor({1, 12, 1}, rng, false);
    CHECK_THROWS(fourier_filter(X, SpectralFilter::identity(10)));
}

TEST_CASE("fourier_filter gradients") {
    Rng rng(109);
    const std::size_t L = 8;
    auto X = random_tensor({2, L, 2}, rng);
    auto f = SpectralFilter::identity(L, 3);
    for (auto& v : f.re.mutable_data()) v = rng.uniform(0.5, 1.5);
    for (auto& v : f.im.mutable_data()) v = rng.uniform(-0.5, 0.5);
    CHECK(oracles::grad_check({X, f.re, f.im}, [&] {
              auto Y = fourier_filter(X, f);
              return reduce_all(Y * Y, Reduce::mean);
          }) < 1e-4);
}

TEST_CASE("laplace_params with zero projectors") {
    Rng rng(111);
    const std::size_t D = 8, K = 4;
    auto basis = LaplaceBasis::init(D, K, rng);
    std::vector<Tensor> ps;
    basis.projector_A.collect(ps);
    basis.projector_alpha.collect(ps);
    basis.projector_omegaphi.collect(ps);
    for (auto& p : ps)
        for (auto& v : p.mutable_data()) v = 0.0;
    auto h = random_tensor({2, 3, D}, rng, false);
    auto lp = laplace_params(h, basis);
    REQUIRE(lp.A.shape() == Shape{2, 3, K});
    for (double v : lp.A.data()) CHECK(v == 0.0);
    for (double v : lp.alpha.data()) CHECK(v == 0.0);
    for (double v : lp.omega.data()) CHECK(v == 0.0);
    for (double v : lp.phi.data()) CHECK(v == 0.0);
}

TEST_CASE("alpha is never positive") {
    Rng rng(113);
    const std::size_t D = 8, K = 4;
    auto basis = LaplaceBasis::init(D, K, rng);
    for (int trial = 0; trial < 20; ++trial) {
        auto h = random_tensor({2, 3, D}, rng, false);
        auto lp = laplace_params(h, basis);
        for (double a : lp.alpha.data()) CHECK(a <= 0.0);
    }

    // raw = -2 maps to alpha = -ELU(2) = -2
    auto raw = Tensor::from({1}, {-2.0});
    auto a = clamp(neg(elu(neg(raw))), -1e300, 0.0);
    CHECK(a.item() == Catch::Approx(-2.0).margin(1e-15));
}

TEST_CASE("laplace_reconstruct closed forms") {
    Rng rng(115);
    const std::size_t D = 8, K = 1, H = 6;
    auto basis = LaplaceBasis::init(D, K, rng);

    auto constant_params = [&](double A, double alpha, double omega, double phi) {
        LaplaceParams p;
        p.A = Tensor::full({1, 1, K}, A);
        p.alpha = Tensor::full({1, 1, K}, alpha);
        p.omega = Tensor::full({1, 1, K}, omega);
        p.phi = Tensor::full({1, 1, K}, phi);
        return p;
    };

    // pi_t is the identity at initialization
    auto out = laplace_reconstruct(constant_params(1.0, 0.0, 0.0, 0.0), basis, H);
    REQUIRE(out.shape() == Shape{1, H, 1});
    for (double v : out.data()) CHECK(v == Catch::Approx(1.0).margin(1e-12));

    auto zero = laplace_reconstruct(
        constant_params(3.0, 0.0, 0.0, std::numbers::pi / 2.0), basis, H);
    for (double v : zero.data()) CHECK(std::abs(v) <= 1e-12);

    // strong decay at the full-horizon anchor t_k = 1
    auto decayed = laplace_reconstruct(constant_params(1.0, -50.0, 0.0, 0.0), basis, H);
    CHECK(std::abs(decayed.data()[H - 1]) <= 2e-22);
}

TEST_CASE("laplace_reconstruct magnitude bound") {
    Rng rng(117);
    const std::size_t D = 8, K = 5, H = 12;
    auto basis = LaplaceBasis::init(D, K, rng);
    auto h = random_tensor({2, 3, D}, rng, false);
    auto lp = laplace_params(h, basis);
    auto out = laplace_reconstruct(lp, basis, H);

    const auto& A = lp.A.data();
    const std::size_t Bd = 2 * 3;
    std::vector<double> bound(Bd, 0.0);
    for (std::size_t i = 0; i < Bd; ++i)
        for (std::size_t k = 0; k < K; ++k) bound[i] += std::abs(A[i * K + k]);

    for (std::size_t b = 0; b < 2; ++b)
        for (std::size_t s = 0; s < H; ++s)
            for (std::size_t v = 0; v < 3; ++v)
                CHECK(std::abs(out.data()[(b * H + s) * 3 + v]) <= bound[b * 3 + v] + 1e-12);
}

TEST_CASE("laplace branch gradients") {
    Rng rng(119);
    const std::size_t D = 6, K = 2, H = 4;
    auto basis = LaplaceBasis::init(D, K, rng);
    auto h = random_tensor({1, 2, D}, rng);
    std::vector<Tensor> params{h};
    basis.collect(params);
    CHECK(oracles::grad_check(params, [&] {
              auto out = laplace_reconstruct(laplace_params(h, basis), basis, H);
              return reduce_all(out * out, Reduce::mean);
          }) < 1e-4);
}

TEST_CASE("gated_blend") {
    Rng rng(121);
    const std::size_t D = 6, H = 5, B = 2, d = 3;
    auto g = GateBlend::init(D, H, rng);
    auto h = random_tensor({B, d, D}, rng, false);
    auto lap = random_tensor({B, H, d}, rng, false);

    // beta = 0 -> exact midpoint
    auto lin = g.linear(h);
    auto out = gated_blend(h, lap, g);
    for (std::size_t i = 0; i < out.size(); ++i)
        CHECK(out.data()[i] ==
              Catch::Approx(0.5 * lin.data()[i] + 0.5 * lap.data()[i]).margin(1e-12));

    // convex combination bounds, any beta
    g.beta.mutable_data()[0] = 1.7;
    auto mid = gated_blend(h, lap, g);
    for (std::size_t i = 0; i < mid.size(); ++i) {
        CHECK(mid.data()[i] >= std::min(lin.data()[i], lap.data()[i]) - 1e-12);
        CHECK(mid.data()[i] <= std::max(lin.data()[i], lap.data()[i]) + 1e-12);
    }

    // saturated gate -> pure linear head
    g.beta.mutable_data()[0] = 60.0;
    auto sat = gated_blend(h, lap, g);
    for (std::size_t i = 0; i < sat.size(); ++i)
        CHECK(sat.data()[i] == Catch::Approx(lin.data()[i]).margin(1e-12));

    // identical branches are a fixed point of the blend
    g.beta.mutable_data()[0] = -0.8;
    auto same = gated_blend(h, transpose_12(matmul(h, g.head_w) + g.head_b), g);
    for (std::size_t i = 0; i < same.size(); ++i)
        CHECK(same.data()[i] == Catch::Approx(lin.data()[i]).margin(1e-12));

    CHECK_THROWS(gated_blend(h, random_tensor({B, H + 1, d}, rng, false), g));
}

TEST_CASE("gated_blend gradients") {
    Rng rng(123);
    const std::size_t D = 5, H = 3;
    auto g = GateBlend::init(D, H, rng);
    auto h = random_tensor({1, 2, D}, rng);
    auto lap = random_tensor({1, H, 2}, rng);
    CHECK(oracles::grad_check({h, lap, g.beta, g.head_w, g.head_b}, [&] {
              auto out = gated_blend(h, lap, g);
              return reduce_all(out * out, Reduce::mean);
          }) < 1e-4);
}
