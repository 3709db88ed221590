#pragma once

// Inverted transformer encoder: variates are the tokens, attention runs over
// the variate axis.

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "geocert/rng.hpp"
#include "geocert/spectral.hpp"  // uniform_init
#include "geocert/tensor.hpp"

namespace geocert::encoder {

using spectral::uniform_init;

struct EncoderConfig {
    std::size_t D = 32;
    std::size_t N_e = 2;
    std::size_t heads = 4;
    std::size_t ffn_mult = 4;

    void validate() const {
        if (N_e < 1) throw std::invalid_argument("EncoderConfig: N_e must be >= 1");
        if (heads == 0 || D % heads != 0)
            throw std::invalid_argument("EncoderConfig: D must be divisible by heads");
    }
};

struct LayerParams {
    Tensor wq, bq, wk, bk, wv, bv, wo, bo;   // attention, all [D,D]/[D]
    Tensor ffn_w1, ffn_b1, ffn_w2, ffn_b2;   // D -> ffn_mult*D -> D
    Tensor ln1_g, ln1_b, ln2_g, ln2_b;

    static LayerParams init(const EncoderConfig& c, Rng& rng) {
        LayerParams p;
        const std::size_t D = c.D, F = c.ffn_mult * c.D;
        for (Tensor* w : {&p.wq, &p.wk, &p.wv, &p.wo}) *w = uniform_init({D, D}, D, rng);
        for (Tensor* b : {&p.bq, &p.bk, &p.bv, &p.bo}) *b = uniform_init({D}, D, rng);
        p.ffn_w1 = uniform_init({D, F}, D, rng);
        p.ffn_b1 = uniform_init({F}, D, rng);
        p.ffn_w2 = uniform_init({F, D}, F, rng);
        p.ffn_b2 = uniform_init({D}, F, rng);
        p.ln1_g = Tensor::full({D}, 1.0, true);
        p.ln1_b = Tensor::zeros({D}, true);
        p.ln2_g = Tensor::full({D}, 1.0, true);
        p.ln2_b = Tensor::zeros({D}, true);
        return p;
    }

    void collect(std::vector<Tensor>& out) {
        for (auto& t : {wq, bq, wk, bk, wv, bv, wo, bo, ffn_w1, ffn_b1, ffn_w2, ffn_b2,
                        ln1_g, ln1_b, ln2_g, ln2_b})
            out.push_back(t);
    }
};

struct EncoderParams {
    Tensor embed_w;  // [L,D]
    Tensor embed_b;  // [D]
    Tensor pos;      // [d,D], learned variate table
    Tensor time_w;   // [2,D], affine map of the two window-time covariates
    Tensor time_b;   // [D]
    std::vector<LayerParams> layers;

    static EncoderParams init(std::size_t L, std::size_t d, const EncoderConfig& c, Rng& rng) {
        c.validate();
        EncoderParams p;
        p.embed_w = uniform_init({L, c.D}, L, rng);
        p.embed_b = uniform_init({c.D}, L, rng);
        p.pos = uniform_init({d, c.D}, c.D, rng);
        p.time_w = uniform_init({2, c.D}, 2, rng);
        p.time_b = uniform_init({c.D}, 2, rng);
        for (std::size_t l = 0; l < c.N_e; ++l) p.layers.push_back(LayerParams::init(c, rng));
        return p;
    }

    void collect(std::vector<Tensor>& out) {
        for (auto& t : {embed_w, embed_b, pos, time_w, time_b}) out.push_back(t);
        for (auto& l : layers) l.collect(out);
    }
};

/// E = Linear(Xᵀ) + PosEnc + TimeEnc. X is [B,L,d]; time_cov is [B,2]
/// (window start index normalized by series length, mean timestamp gap).
inline Tensor embed_inverted(const Tensor& X, const EncoderParams& p, const Tensor& time_cov) {
    if (X.rank() != 3) throw std::invalid_argument("embed_inverted: expected [B,L,d]");
    if (X.shape()[1] != p.embed_w.shape()[0])
        throw std::invalid_argument("embed_inverted: lookback width mismatch");
    const std::size_t B = X.shape()[0];
    auto tokens = matmul(transpose_12(X), p.embed_w) + p.embed_b;  // [B,d,D]
    auto time_enc = matmul(reshape(time_cov, {B, 1, 2}), p.time_w) + p.time_b;  // [B,1,D]
    return tokens + p.pos + time_enc;
}

inline Tensor embed_inverted(const Tensor& X, const EncoderParams& p) {
    return embed_inverted(X, p, Tensor::zeros({X.shape()[0], 2}));
}

/// Multi-head self-attention over the variate axis; returns [B,d,D].
/// If attn_out is non-null the per-head softmax weights are appended to it.
inline Tensor multi_head_attention(const Tensor& E, const LayerParams& p, std::size_t heads,
                                   std::vector<Tensor>* attn_out = nullptr) {
    const std::size_t D = E.shape().back();
    const std::size_t Dh = D / heads;
    auto Q = matmul(E, p.wq) + p.bq;
    auto K = matmul(E, p.wk) + p.bk;
    auto V = matmul(E, p.wv) + p.bv;
    std::vector<Tensor> head_outs;
    head_outs.reserve(heads);
    const double scale = 1.0 / std::sqrt(static_cast<double>(Dh));
    for (std::size_t h = 0; h < heads; ++h) {
        auto Qh = slice_last(Q, h * Dh, Dh);
        auto Kh = slice_last(K, h * Dh, Dh);
        auto Vh = slice_last(V, h * Dh, Dh);
        auto weights = softmax_last(matmul(Qh, transpose_12(Kh)) * scale);  // [B,d,d]
        if (attn_out) attn_out->push_back(weights);
        head_outs.push_back(matmul(weights, Vh));
    }
    auto cat = heads == 1 ? head_outs[0] : concat_last(head_outs);
    return matmul(cat, p.wo) + p.bo;
}

/// Post-norm residual attention followed by post-norm residual FFN.
inline Tensor encoder_layer(const Tensor& E, const LayerParams& p, std::size_t heads,
                            std::vector<Tensor>* attn_out = nullptr) {
    auto mid = layernorm(E + multi_head_attention(E, p, heads, attn_out), p.ln1_g, p.ln1_b);
    auto ffn = matmul(relu(matmul(mid, p.ffn_w1) + p.ffn_b1), p.ffn_w2) + p.ffn_b2;
    return layernorm(mid + ffn, p.ln2_g, p.ln2_b);
}

/// h = E^(N_e): the stacked encoder applied to the inverted embedding.
inline Tensor encode(const Tensor& X, const EncoderParams& p, const EncoderConfig& c,
                     const Tensor& time_cov) {
    c.validate();
    auto E = embed_inverted(X, p, time_cov);
    for (const auto& layer : p.layers) E = encoder_layer(E, layer, c.heads);
    return E;
}

inline Tensor encode(const Tensor& X, const EncoderParams& p, const EncoderConfig& c) {
    return encode(X, p, c, Tensor::zeros({X.shape()[0], 2}));
}

}  // namespace geocert::encoder
