#pragma once

// Full forecasting model: spectral filter -> inverted encoder -> gated
// Fourier/Laplace head. Ablation switches cover the hyperbolic geometry and
// the spectral branch.

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "geocert/encoder.hpp"
#include "geocert/io.hpp"
#include "geocert/rng.hpp"
#include "geocert/spectral.hpp"
#include "geocert/tensor.hpp"

namespace geocert {

struct ModelConfig {
    std::size_t L = 96;
    std::size_t H = 96;
    std::size_t d = 1;
    encoder::EncoderConfig enc{};  // D=32, N_e=2, heads=4, ffn_mult=4
    std::size_t K = 4;             // Laplace basis count
    std::size_t n_modes = 0;       // 0 = default (half the rfft bins)
    bool use_hyperbolic = true;    // geometry for constraints/certification
    bool use_spectral = true;      // filter + Laplace branch vs linear head only
};

struct Model {
    ModelConfig cfg;
    spectral::SpectralFilter filter;
    encoder::EncoderParams enc;
    spectral::LaplaceBasis basis;
    spectral::GateBlend gate;

    static Model init(const ModelConfig& cfg, std::uint64_t seed) {
        cfg.enc.validate();
        Rng rng(seed);
        Model m;
        m.cfg = cfg;
        m.filter = spectral::SpectralFilter::identity(cfg.L, cfg.n_modes);
        m.enc = encoder::EncoderParams::init(cfg.L, cfg.d, cfg.enc, rng);
        m.basis = spectral::LaplaceBasis::init(cfg.enc.D, cfg.K, rng);
        m.gate = spectral::GateBlend::init(cfg.enc.D, cfg.H, rng);
        return m;
    }

    /// X is [B,L,d], time_cov [B,2]; returns the forecast [B,H,d].
    Tensor forward(const Tensor& X, const Tensor& time_cov) const {
        auto Xf = cfg.use_spectral ? spectral::fourier_filter(X, filter) : X;
        auto h = encoder::encode(Xf, enc, cfg.enc, time_cov);
        if (!cfg.use_spectral) return gate.linear(h);
        auto lap = spectral::laplace_reconstruct(spectral::laplace_params(h, basis), basis, cfg.H);
        return spectral::gated_blend(h, lap, gate);
    }

    Tensor forward(const Tensor& X) const {
        return forward(X, Tensor::zeros({X.shape()[0], 2}));
    }

    /// All trainable tensors in a stable order.
    std::vector<Tensor> parameters() {
        std::vector<Tensor> out;
        filter.collect(out);
        enc.collect(out);
        basis.collect(out);
        gate.collect(out);
        return out;
    }

    void save(const std::string& path) {
        std::vector<io::Blob> blobs;
        for (auto& p : parameters()) {
            io::Blob b;
            for (std::size_t dim : p.shape()) b.shape.push_back(dim);
            b.data = p.data();
            blobs.push_back(std::move(b));
        }
        io::write_blobs(path, io::kParamsMagic, blobs);
    }

    void load(const std::string& path) {
        auto blobs = io::read_blobs(path, io::kParamsMagic);
        auto params = parameters();
        if (blobs.size() != params.size())
            throw std::runtime_error("model: parameter count mismatch in " + path);
        for (std::size_t i = 0; i < params.size(); ++i) {
            if (blobs[i].data.size() != params[i].size())
                throw std::runtime_error("model: parameter shape mismatch in " + path);
            params[i].mutable_data() = blobs[i].data;
        }
    }
};

}  // namespace geocert
