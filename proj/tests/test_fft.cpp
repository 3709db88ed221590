#include <catch2/catch_amalgamated.hpp>

#include "geocert/fft.hpp"
#include "geocert/rng.hpp"
#include "oracles.hpp"

using namespace geocert;

namespace {

std::vector<double> random_signal(std::size_t n, Rng& rng) {
    std::vector<double> x(n);
    for (auto& v : x) v = rng.normal();
    return x;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace

TEST_CASE("rfft matches the naive DFT") {
    Rng rng(11);
    // 97 and 149 exercise the Bluestein path; 96/100 the mixed-radix path
    for (std::size_t L : {1, 2, 3, 5, 8, 12, 15, 96, 97, 100, 149, 512}) {
        auto x = random_signal(L, rng);
        auto f = fft::rfft(x);
        auto ref = oracles::dft_naive_real(x);
        for (std::size_t k = 0; k < f.size(); ++k) {
            CHECK(std::abs(f.re[k] - ref[k].real()) <= 1e-9);
            CHECK(std::abs(f.im[k] - ref[k].imag()) <= 1e-9);
        }
    }
}

TEST_CASE("rfft of a constant concentrates in bin 0") {
    const double c = 1.75;
    std::vector<double> x(8, c);
    auto f = fft::rfft(x);
    CHECK(f.re[0] == Catch::Approx(8.0 * c).margin(1e-12));
    for (std::size_t k = 1; k < f.size(); ++k) {
        CHECK(std::abs(f.re[k]) <= 1e-12);
        CHECK(std::abs(f.im[k]) <= 1e-12);
    }
}

TEST_CASE("rfft of cos(2*pi*t/8) has energy only in bin 1") {
    std::vector<double> x(8);
    for (std::size_t t = 0; t < 8; ++t) x[t] = std::cos(2.0 * std::numbers::pi * t / 8.0);
    auto f = fft::rfft(x);
    for (std::size_t k = 0; k < f.size(); ++k) {
        const double mag = std::hypot(f.re[k], f.im[k]);
        if (k == 1)
            CHECK(mag == Catch::Approx(4.0).margin(1e-12));
        else
            CHECK(mag <= 1e-12);
    }
}

TEST_CASE("round trip irfft(rfft(x)) == x") {
    Rng rng(23);
    for (std::size_t L : {1, 2, 8, 96, 100, 512}) {
        auto x = random_signal(L, rng);
        auto back = fft::irfft(fft::rfft(x), L);
        CHECK(max_abs_diff(x, back) <= 1e-10);
    }
}

TEST_CASE("Parseval identity") {
    Rng rng(31);
    for (std::size_t L : {8, 96, 101}) {
        auto x = random_signal(L, rng);
        double time_energy = 0.0;
        for (double v : x) time_energy += v * v;
        auto f = fft::rfft(x);
        double freq_energy = 0.0;
        for (std::size_t k = 0; k < f.size(); ++k) {
            const bool edge = (k == 0) || (L % 2 == 0 && k == L / 2);
            const double w = edge ? 1.0 : 2.0;  // conjugate-symmetry weights
            freq_energy += w * (f.re[k] * f.re[k] + f.im[k] * f.im[k]);
        }
        freq_energy /= static_cast<double>(L);
        CHECK(std::abs(time_energy - freq_energy) <= 1e-9 * std::max(1.0, time_energy));
    }
}

TEST_CASE("linearity of rfft") {
    Rng rng(47);
    const std::size_t L = 96;
    auto x = random_signal(L, rng);
    auto y = random_signal(L, rng);
    const double a = 1.7, b = -0.3;
    std::vector<double> z(L);
    for (std::size_t i = 0; i < L; ++i) z[i] = a * x[i] + b * y[i];
    auto fz = fft::rfft(z);
    auto fx = fft::rfft(x);
    auto fy = fft::rfft(y);
    for (std::size_t k = 0; k < fz.size(); ++k) {
        CHECK(std::abs(fz.re[k] - (a * fx.re[k] + b * fy.re[k])) <= 1e-10);
        CHECK(std::abs(fz.im[k] - (a * fx.im[k] + b * fy.im[k])) <= 1e-10);
    }
}

TEST_CASE("zero length is an error") {
    CHECK_THROWS(fft::rfft({}));
    CHECK_THROWS(fft::irfft(fft::ComplexVector{}, 0));
}
