#pragma once

// Fourier–Laplace dual representation and the gated prediction head.

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "geocert/rng.hpp"
#include "geocert/tensor.hpp"

namespace geocert::spectral {

inline Tensor uniform_init(Shape shape, std::size_t fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::vector<double> data(numel(shape));
    for (auto& v : data) v = rng.uniform(-bound, bound);
    return Tensor::from(std::move(shape), std::move(data), true);
}

inline Tensor softplus(const Tensor& x) { return log(exp(x) + 1.0); }

// ---- learnable frequency filter ----

// Complex filter over the ⌊L/2⌋+1 rfft bins. Only the leading n_modes bins
// are learnable; the rest are pinned to the identity via a constant mask.
struct SpectralFilter {
    Tensor re;  // [L_f]
    Tensor im;  // [L_f]
    Tensor mask;  // [L_f], 1 on learnable bins, 0 on frozen ones (constant)
    std::size_t n_modes = 0;

    static SpectralFilter identity(std::size_t L, std::size_t n_modes = 0) {
        if (L == 0) throw std::invalid_argument("SpectralFilter: L must be positive");
        const std::size_t Lf = L / 2 + 1;
        if (n_modes == 0) n_modes = Lf / 2;
        if (n_modes > Lf) n_modes = Lf;
        SpectralFilter f;
        f.n_modes = n_modes;
        f.re = Tensor::full({Lf}, 1.0, true);
        f.im = Tensor::zeros({Lf}, true);
        std::vector<double> m(Lf, 0.0);
        for (std::size_t k = 0; k < n_modes; ++k) m[k] = 1.0;
        f.mask = Tensor::from({Lf}, std::move(m), false);
        return f;
    }

    std::size_t size() const { return re.size(); }

    // Effective filter; frozen bins read identity no matter what the
    // underlying parameters hold (their gradient is masked to zero too).
    Tensor effective_re() const { return mask * re + (1.0 - mask); }
    Tensor effective_im() const { return mask * im; }

    void collect(std::vector<Tensor>& out) {
        out.push_back(re);
        out.push_back(im);
    }
};

/// irfft(W ⊙ rfft(X)) along the time axis, per batch element and variate.
/// X is [B,L,d]; the result has the same shape.
inline Tensor fourier_filter(const Tensor& X, const SpectralFilter& f) {
    if (X.rank() != 3) throw std::invalid_argument("fourier_filter: expected [B,L,d]");
    const std::size_t L = X.shape()[1];
    if (L / 2 + 1 != f.size()) throw std::invalid_argument("fourier_filter: filter length mismatch");
    auto xt = transpose_12(X);  // [B,d,L]
    auto xre = rfft_re(xt);
    auto xim = rfft_im(xt);
    auto wre = f.effective_re();
    auto wim = f.effective_im();
    auto yre = xre * wre - xim * wim;
    auto yim = xre * wim + xim * wre;
    return transpose_12(irfft(yre, yim, L));
}

// ---- Laplace damped-oscillator basis ----

// Three affine layers with SiLU between them.
struct Mlp3 {
    Tensor w1, b1, w2, b2, w3, b3;

    static Mlp3 init(std::size_t in, std::size_t hidden, std::size_t out, Rng& rng) {
        Mlp3 m;
        m.w1 = uniform_init({in, hidden}, in, rng);
        m.b1 = uniform_init({hidden}, in, rng);
        m.w2 = uniform_init({hidden, hidden}, hidden, rng);
        m.b2 = uniform_init({hidden}, hidden, rng);
        m.w3 = uniform_init({hidden, out}, hidden, rng);
        m.b3 = uniform_init({out}, hidden, rng);
        return m;
    }

    Tensor apply(const Tensor& x) const {
        auto h1 = silu(matmul(x, w1) + b1);
        auto h2 = silu(matmul(h1, w2) + b2);
        return matmul(h2, w3) + b3;
    }

    void collect(std::vector<Tensor>& out) {
        for (auto& t : {w1, b1, w2, b2, w3, b3}) out.push_back(t);
    }
};

struct LaplaceParams {
    Tensor A;      // [B,d,K]
    Tensor alpha;  // [B,d,K], always <= 0
    Tensor omega;  // [B,d,K]
    Tensor phi;    // [B,d,K]
};

struct LaplaceBasis {
    std::size_t K = 0;
    Mlp3 projector_A;
    Mlp3 projector_alpha;
    Mlp3 projector_omegaphi;
    Tensor pi_slope_raw;  // scalar; slope = softplus(raw) > 0
    Tensor pi_bias;       // scalar

    static LaplaceBasis init(std::size_t D, std::size_t K, Rng& rng) {
        if (K == 0) throw std::invalid_argument("LaplaceBasis: K must be positive");
        const std::size_t Df = D / 2 + 1;
        LaplaceBasis b;
        b.K = K;
        b.projector_A = Mlp3::init(D, D, K, rng);
        b.projector_alpha = Mlp3::init(Df, D, K, rng);
        b.projector_omegaphi = Mlp3::init(Df, D, 2 * K, rng);
        // softplus(0.5413...) = 1, so pi_t starts as the identity map
        b.pi_slope_raw = Tensor::from({1}, {std::log(std::numbers::e - 1.0)}, true);
        b.pi_bias = Tensor::zeros({1}, true);
        return b;
    }

    // t anchors k/K for k = 1..K
    std::vector<double> t_grid() const {
        std::vector<double> t(K);
        for (std::size_t k = 0; k < K; ++k)
            t[k] = static_cast<double>(k + 1) / static_cast<double>(K);
        return t;
    }

    Tensor pi_t(const Tensor& t) const { return t * softplus(pi_slope_raw) + pi_bias; }

    void collect(std::vector<Tensor>& out) {
        projector_A.collect(out);
        projector_alpha.collect(out);
        projector_omegaphi.collect(out);
        out.push_back(pi_slope_raw);
        out.push_back(pi_bias);
    }
};

/// Project encoder features into damped-oscillator parameters. h is [B,d,D];
/// h_real/h_imag are the rfft of h along the feature axis.
inline LaplaceParams laplace_params(const Tensor& h, const LaplaceBasis& basis) {
    auto h_real = rfft_re(h);
    auto h_imag = rfft_im(h);
    LaplaceParams p;
    p.A = basis.projector_A.apply(h);
    // -ELU(-raw) capped at zero: identity on raw <= 0, clamped elsewhere, so
    // the decay rate can never turn into growth.
    auto raw = basis.projector_alpha.apply(h_real);
    p.alpha = clamp(neg(elu(neg(raw))), -1e300, 0.0);
    auto op = basis.projector_omegaphi.apply(h_imag);
    p.omega = slice_last(op, 0, basis.K);
    p.phi = slice_last(op, basis.K, basis.K);
    return p;
}

/// Damped-oscillator reconstruction over prediction steps s = 1..H with the
/// anchor rescaling t_k(s) = (s/H)·(k/K). Returns [B,H,d].
inline Tensor laplace_reconstruct(const LaplaceParams& p, const LaplaceBasis& basis,
                                  std::size_t H) {
    if (H == 0) throw std::invalid_argument("laplace_reconstruct: H must be positive");
    const auto t = basis.t_grid();
    const Shape bs = p.A.shape();  // [B,d,K]
    std::vector<Tensor> steps;
    steps.reserve(H);
    for (std::size_t s = 1; s <= H; ++s) {
        std::vector<double> tk(t);
        const double scale = static_cast<double>(s) / static_cast<double>(H);
        for (auto& v : tk) v *= scale;
        auto tau = basis.pi_t(Tensor::from({basis.K}, std::move(tk), false));  // [K]
        auto val = p.A * exp(p.alpha * tau) * cos(p.omega * tau + p.phi);      // [B,d,K]
        steps.push_back(reshape(reduce_last(val, Reduce::sum), {bs[0], bs[1], 1}));
    }
    return transpose_12(concat_last(steps));  // [B,d,H] -> [B,H,d]
}

// ---- gated blend head ----

struct GateBlend {
    Tensor beta;  // scalar gate, init 0 so the blend starts at 50/50
    Tensor head_w;  // [D,H]
    Tensor head_b;  // [H]

    static GateBlend init(std::size_t D, std::size_t H, Rng& rng) {
        GateBlend g;
        g.beta = Tensor::zeros({1}, true);
        g.head_w = uniform_init({D, H}, D, rng);
        g.head_b = uniform_init({H}, D, rng);
        return g;
    }

    // linear head output [B,H,d] from h [B,d,D]
    Tensor linear(const Tensor& h) const { return transpose_12(matmul(h, head_w) + head_b); }

    void collect(std::vector<Tensor>& out) {
        out.push_back(beta);
        out.push_back(head_w);
        out.push_back(head_b);
    }
};

/// X̂ = σ(β)·linear(h) + (1−σ(β))·lap, elementwise over [B,H,d].
inline Tensor gated_blend(const Tensor& h, const Tensor& lap, const GateBlend& g) {
    auto lin = g.linear(h);
    if (lin.shape() != lap.shape()) throw std::invalid_argument("gated_blend: shape mismatch");
    auto s = sigmoid(g.beta);
    return s * lin + (1.0 - s) * lap;
}

}  // namespace geocert::spectral
