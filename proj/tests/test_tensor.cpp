#include <catch2/catch_amalgamated.hpp>

#include "geocert/rng.hpp"
#include "geocert/tensor.hpp"
#include "oracles.hpp"

using namespace geocert;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, bool requires_grad = true) {
    std::vector<double> data(numel(shape));
    for (auto& v : data) v = rng.normal();
    return Tensor::from(std::move(shape), std::move(data), requires_grad);
}

}  // namespace

TEST_CASE("elementwise basics") {
    auto r = relu(Tensor::from({3}, {-1.0, 0.0, 2.0}));
    CHECK(r.data() == std::vector<double>{0.0, 0.0, 2.0});

    CHECK(sigmoid(Tensor::scalar(0.0)).item() == Catch::Approx(0.5).margin(1e-15));
    CHECK(silu(Tensor::scalar(1.0)).item() == Catch::Approx(0.7310585786300049).margin(1e-12));

    auto sum = add(Tensor::from({2, 2}, {1, 2, 3, 4}), Tensor::from({2}, {10, 20}));
    CHECK(sum.data() == std::vector<double>{11, 22, 13, 24});
}

TEST_CASE("elementwise shape mismatch throws") {
    CHECK_THROWS(add(Tensor::from({3}, {1, 2, 3}), Tensor::from({2}, {1, 2})));
}

TEST_CASE("non-finite output is an error") {
    CHECK_THROWS(div(Tensor::scalar(1.0), Tensor::scalar(0.0)));
    CHECK_THROWS(log(Tensor::scalar(-1.0)));
}

TEST_CASE("matmul") {
    auto a = Tensor::from({2, 2}, {1, 2, 3, 4});
    auto eye = Tensor::from({2, 2}, {1, 0, 0, 1});
    CHECK(matmul(eye, a).data() == a.data());

    auto b = Tensor::from({2, 1}, {0, 1});
    CHECK(matmul(a, b).data() == std::vector<double>{2, 4});

    auto z = Tensor::zeros({2, 2});
    CHECK(matmul(z, a).data() == std::vector<double>{0, 0, 0, 0});

    CHECK_THROWS(matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})));
}

TEST_CASE("matmul batched") {
    auto a = Tensor::from({2, 1, 2}, {1, 2, 3, 4});
    auto b = Tensor::from({2, 2, 1}, {1, 1, 1, 0});
    auto c = matmul(a, b);
    REQUIRE(c.shape() == Shape{2, 1, 1});
    CHECK(c.data() == std::vector<double>{3, 3});
}

TEST_CASE("reduce") {
    CHECK(reduce_all(Tensor::from({3}, {1, 2, 3}), Reduce::mean).item() == Catch::Approx(2.0));
    CHECK(reduce_all(Tensor::from({3}, {1, 1, 1}), Reduce::var).item() == Catch::Approx(0.0));
    // population variance
    CHECK(reduce_all(Tensor::from({2}, {0, 2}), Reduce::var).item() == Catch::Approx(1.0));

    auto m = reduce(Tensor::from({2, 2}, {1, 2, 3, 4}), Reduce::mean, 0);
    CHECK(m.data() == std::vector<double>{2, 3});
}

TEST_CASE("layernorm") {
    auto gain = Tensor::full({3}, 1.0);
    auto bias = Tensor::zeros({3});
    auto y = layernorm(Tensor::from({3}, {1, 1, 1}), gain, bias);
    for (double v : y.data()) CHECK(v == Catch::Approx(0.0).margin(1e-9));

    auto y2 = layernorm(Tensor::from({2}, {-1, 1}), Tensor::full({2}, 1.0), Tensor::zeros({2}),
                        1e-14);
    CHECK(y2.data()[0] == Catch::Approx(-1.0).margin(1e-6));
    CHECK(y2.data()[1] == Catch::Approx(1.0).margin(1e-6));

    Rng rng(7);
    auto x = random_tensor({4, 8}, rng, false);
    auto out = layernorm(x, Tensor::full({8}, 1.0), Tensor::zeros({8}));
    for (std::size_t o = 0; o < 4; ++o) {
        double mu = 0.0;
        for (std::size_t j = 0; j < 8; ++j) mu += out.data()[o * 8 + j];
        CHECK(std::abs(mu / 8.0) <= 1e-12);
    }
}

TEST_CASE("backward basics") {
    auto x = Tensor::from({1}, {3.0}, true);
    auto y = mul(x, x);
    y.backward();
    CHECK(x.grad()[0] == Catch::Approx(6.0));

    auto v = Tensor::from({4}, {1, 2, 3, 4}, true);
    auto m = reduce_all(v, Reduce::mean);
    m.backward();
    for (double g : v.grad()) CHECK(g == Catch::Approx(0.25));
}

TEST_CASE("tape cannot be consumed twice") {
    auto x = Tensor::from({1}, {2.0}, true);
    auto y = mul(x, x);
    y.backward();
    CHECK_THROWS_AS(y.backward(), std::logic_error);
}

TEST_CASE("gradient check: composite graph") {
    Rng rng(42);
    auto a = random_tensor({3, 4}, rng);
    auto b = random_tensor({4, 2}, rng);
    auto c = random_tensor({2}, rng);
    auto loss_fn = [&]() {
        auto h = silu(matmul(a, b) + c);
        auto g = sigmoid(h) * tanh(h) + exp(h * 0.1);
        return reduce_all(g * g, Reduce::mean);
    };
    CHECK(oracles::grad_check({a, b, c}, loss_fn) < 1e-4);
}

TEST_CASE("gradient check: each op over random shapes") {
    Rng rng(1234);
    // a representative spread of shapes; the full >=50-config sweep lives in
    // the acceptance suite
    const std::vector<Shape> shapes = {{3}, {2, 3}, {2, 3, 4}, {1, 5}};
    for (const auto& shape : shapes) {
        auto a = random_tensor(shape, rng);
        auto b = random_tensor(shape, rng);
        auto w = random_tensor(shape, rng, false);

        auto weighted = [&](Tensor t) { return reduce_all(t * w, Reduce::sum); };

        CHECK(oracles::grad_check({a, b}, [&] { return weighted(a + b); }) < 1e-4);
        CHECK(oracles::grad_check({a, b}, [&] { return weighted(a * b); }) < 1e-4);
        CHECK(oracles::grad_check({a, b}, [&] { return weighted(a / (sigmoid(b) + 1.0)); }) < 1e-4);
        CHECK(oracles::grad_check({a}, [&] { return weighted(silu(a)); }) < 1e-4);
        CHECK(oracles::grad_check({a}, [&] { return weighted(elu(a)); }) < 1e-4);
        CHECK(oracles::grad_check({a}, [&] { return weighted(tanh(a)); }) < 1e-4);
        CHECK(oracles::grad_check({a}, [&] { return weighted(exp(a * 0.3)); }) < 1e-4);
        CHECK(oracles::grad_check({a}, [&] { return weighted(cos(a)); }) < 1e-4);
        CHECK(oracles::grad_check({a}, [&] { return weighted(sqrt(exp(a))); }) < 1e-4);
        CHECK(oracles::grad_check({a}, [&] { return weighted(log(exp(a) + 1.0)); }) < 1e-4);
        CHECK(oracles::grad_check({a}, [&] {
                  return reduce_all(reduce_last(a * a, Reduce::var), Reduce::sum);
              }) < 1e-4);
        CHECK(oracles::grad_check({a}, [&] { return weighted(softmax_last(a)); }) < 1e-4);
    }
}

TEST_CASE("gradient check: matmul, slice, concat, transpose, layernorm") {
    Rng rng(99);
    auto a = random_tensor({2, 3, 4}, rng);
    auto b = random_tensor({4, 5}, rng);
    auto w = random_tensor({2, 3, 5}, rng, false);
    CHECK(oracles::grad_check({a, b}, [&] {
              return reduce_all(matmul(a, b) * w, Reduce::sum);
          }) < 1e-4);

    auto gain = random_tensor({4}, rng);
    auto bias = random_tensor({4}, rng);
    CHECK(oracles::grad_check({a, gain, bias}, [&] {
              auto y = layernorm(a, gain, bias);
              auto s1 = slice_last(y, 0, 2);
              auto s2 = slice_last(y, 2, 2);
              auto cat = concat_last({s2, s1, s2});
              return reduce_all(transpose_12(cat) * 0.5, Reduce::mean);
          }) < 1e-4);
}

TEST_CASE("gradient check: rfft/irfft graph ops") {
    Rng rng(5);
    for (std::size_t L : {4, 7, 12}) {
        auto x = random_tensor({2, L}, rng);
        CHECK(oracles::grad_check({x}, [&] {
                  auto re = rfft_re(x);
                  auto im = rfft_im(x);
                  auto back = irfft(re * 0.7 + 0.1, im * im, L);
                  return reduce_all(back * back, Reduce::mean);
              }) < 1e-4);
    }
}

TEST_CASE("determinism: same seed gives bit-identical forward results") {
    auto run = [] {
        Rng rng(2024);
        auto a = random_tensor({4, 4}, rng, false);
        auto b = random_tensor({4, 4}, rng, false);
        return silu(matmul(a, b)).data();
    };
    CHECK(run() == run());
}

TEST_CASE("rng box-muller stream properties") {
    Rng a(1), b(1), c(2);
    for (int i = 0; i < 100; ++i) {
        CHECK(a.next_u64() == b.next_u64());
    }
    double mean = 0.0, var = 0.0;
    Rng n(77);
    const int N = 100000;
    std::vector<double> xs(N);
    for (auto& x : xs) x = n.normal();
    for (double x : xs) mean += x;
    mean /= N;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= N;
    CHECK(std::abs(mean) < 0.02);
    CHECK(std::abs(var - 1.0) < 0.03);
    (void)c;
}
