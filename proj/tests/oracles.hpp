#pragma once

// Test-only oracles, independent of the library implementations they check.

#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <vector>

#include "geocert/tensor.hpp"

namespace oracles {

// Naive O(L^2) DFT; the correctness reference for the FFT kernels.
inline std::vector<std::complex<double>> dft_naive(const std::vector<std::complex<double>>& x,
                                                   bool inverse) {
    const std::size_t n = x.size();
    std::vector<std::complex<double>> out(n, {0.0, 0.0});
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t j = 0; j < n; ++j) {
            const double ang = (inverse ? 2.0 : -2.0) * std::numbers::pi *
                               static_cast<double>(k) * static_cast<double>(j) /
                               static_cast<double>(n);
            out[k] += x[j] * std::complex<double>{std::cos(ang), std::sin(ang)};
        }
        if (inverse) out[k] /= static_cast<double>(n);
    }
    return out;
}

inline std::vector<std::complex<double>> dft_naive_real(const std::vector<double>& x) {
    std::vector<std::complex<double>> c(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) c[i] = {x[i], 0.0};
    return dft_naive(c, false);
}

// Central finite-difference gradient check. loss_fn must rebuild a fresh
// graph on every call; params are perturbed in place.
// Returns the max relative error, rel = |a - n| / max(1, |a|, |n|).
inline double grad_check(std::vector<geocert::Tensor> params,
                         const std::function<geocert::Tensor()>& loss_fn) {
    using geocert::Tensor;
    for (auto& p : params) p.zero_grad();
    Tensor loss = loss_fn();
    loss.backward();
    std::vector<std::vector<double>> analytic;
    for (auto& p : params) analytic.push_back(p.grad());

    double max_rel = 0.0;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& vals = params[pi].mutable_data();
        for (std::size_t i = 0; i < vals.size(); ++i) {
            const double x0 = vals[i];
            const double h = 1e-5 * std::max(1.0, std::abs(x0));
            vals[i] = x0 + h;
            const double fp = loss_fn().item();
            vals[i] = x0 - h;
            const double fm = loss_fn().item();
            vals[i] = x0;
            const double numeric = (fp - fm) / (2.0 * h);
            const double a = analytic[pi][i];
            const double rel = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
            max_rel = std::max(max_rel, rel);
        }
    }
    return max_rel;
}

}  // namespace oracles
