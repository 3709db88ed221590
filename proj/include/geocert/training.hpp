#pragma once

// Constraint-accelerated training: per-sample MSE reweighting, PCGrad
// conflict resolution, adaptive learning rate, and the full fit loop.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "geocert/certification.hpp"
#include "geocert/constraints.hpp"
#include "geocert/data.hpp"
#include "geocert/model.hpp"

namespace geocert::training {

struct DivergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct OptimizerConfig {
    double eta_base = 1e-4;
    std::size_t epochs = 4;
    std::size_t batch = 16;
    double lambda_start = 1.0;
    double lambda_end = 0.3;
    double alpha_start = 0.5;
    double alpha_end = 0.1;
    double epsilon_target = 0.1;
    double grad_clip = 10.0;
    std::uint64_t seed = 0;
};

struct TrainState {
    double ema_violation;
    double ema_mse = 0.0;
    bool ema_mse_set = false;
    double dbar = 0.0;  // running average hyperbolic distance
    std::size_t epoch = 0;
    std::size_t step = 0;
    double alpha_e;
    double lambda_e;
    double eta_t;
    double epsilon_target;
    double eta_base;

    explicit TrainState(const OptimizerConfig& c)
        : ema_violation(c.epsilon_target),
          alpha_e(c.alpha_start),
          lambda_e(c.lambda_start),
          eta_t(c.eta_base),
          epsilon_target(c.epsilon_target),
          eta_base(c.eta_base) {}
};

/// w_b = clamp(1 + alpha * ||C_b|| / mean(||C||), 0.5, 3.0); all ones when
/// the batch mean is zero.
inline std::vector<double> sample_weights(const std::vector<double>& violations, double alpha) {
    double mean = 0.0;
    for (double v : violations) {
        if (v < 0.0) throw std::invalid_argument("sample_weights: negative violation");
        mean += v;
    }
    mean /= static_cast<double>(violations.size());
    std::vector<double> w(violations.size(), 1.0);
    if (mean <= 0.0) return w;
    for (std::size_t i = 0; i < w.size(); ++i)
        w[i] = std::clamp(1.0 + alpha * violations[i] / mean, 0.5, 3.0);
    return w;
}

struct StepDiag {
    double dot_after = 0.0;        // <g_mse, g_con> after projection
    double con_norm_before = 0.0;  // ||g_con|| pre projection
    double con_norm_after = 0.0;   // ||g_con|| post projection
};

/// PCGrad: project g_con off g_mse when they conflict, then combine with the
/// lambda schedule. Returns g_mse + lambda * g_con_projected.
inline std::vector<double> pcgrad_combine(const std::vector<double>& g_mse,
                                          std::vector<double> g_con, double lambda,
                                          bool* projected = nullptr, StepDiag* diag = nullptr) {
    if (g_mse.size() != g_con.size())
        throw std::invalid_argument("pcgrad_combine: size mismatch");
    double dot = 0.0, n2 = 0.0, c2 = 0.0;
    for (std::size_t i = 0; i < g_mse.size(); ++i) {
        dot += g_mse[i] * g_con[i];
        n2 += g_mse[i] * g_mse[i];
        c2 += g_con[i] * g_con[i];
    }
    bool did = false;
    if (dot < 0.0 && n2 > 0.0) {
        const double c = dot / n2;
        for (std::size_t i = 0; i < g_con.size(); ++i) g_con[i] -= c * g_mse[i];
        did = true;
    }
    if (projected) *projected = did;
    if (diag) {
        diag->con_norm_before = std::sqrt(c2);
        double dot_after = 0.0, c2_after = 0.0;
        for (std::size_t i = 0; i < g_con.size(); ++i) {
            dot_after += g_mse[i] * g_con[i];
            c2_after += g_con[i] * g_con[i];
        }
        diag->dot_after = dot_after;
        diag->con_norm_after = std::sqrt(c2_after);
    }
    std::vector<double> out(g_mse.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = g_mse[i] + lambda * g_con[i];
    return out;
}

/// eta = eta_base * clamp(eps_target / ema_violation, 0.5, 2.0).
inline double adaptive_lr(const TrainState& s) {
    const double ratio =
        s.ema_violation > 0.0 ? s.epsilon_target / s.ema_violation : 2.0;
    return s.eta_base * std::clamp(ratio, 0.5, 2.0);
}

/// L = weighted MSE + lambda(e) * C with lambda(e) = lambda_e *
/// clip(L_mse/ema_mse, 0.5, 2.0). Logging-side scalar.
inline double total_loss(double mse_weighted, double c_total, const TrainState& s) {
    if (!std::isfinite(mse_weighted) || !std::isfinite(c_total))
        throw std::invalid_argument("total_loss: non-finite term");
    const double ref = s.ema_mse_set && s.ema_mse > 0.0 ? s.ema_mse : mse_weighted;
    const double mult = ref > 0.0 ? std::clamp(mse_weighted / ref, 0.5, 2.0) : 1.0;
    return mse_weighted + s.lambda_e * mult * c_total;
}

struct EpochRecord {
    std::size_t epoch = 0;
    double train_mse = 0.0;
    double val_mse = 0.0;
    double val_mae = 0.0;
    double csr_hard = 0.0;
    double csr_soft = 0.0;
    double cert_rate = 0.0;
};

struct FitResult {
    std::vector<EpochRecord> history;
    std::vector<StepDiag> step_diags;  // one per optimizer step
    std::size_t pcgrad_projections = 0;
    std::size_t clip_events = 0;
};

namespace detail {

inline Tensor batch_tensor(const std::vector<data::Window>& ws,
                           const std::vector<std::size_t>& idx, std::size_t lo, std::size_t hi,
                           std::size_t rows, std::size_t d, bool horizon) {
    const std::size_t B = hi - lo;
    std::vector<double> buf(B * rows * d);
    for (std::size_t b = 0; b < B; ++b) {
        const auto& w = ws[idx[lo + b]];
        const auto& src = horizon ? w.Y : w.X;
        std::copy(src.begin(), src.end(), buf.begin() + b * rows * d);
    }
    return Tensor::from({B, rows, d}, std::move(buf));
}

inline Tensor batch_cov(const std::vector<data::Window>& ws, const std::vector<std::size_t>& idx,
                        std::size_t lo, std::size_t hi) {
    const std::size_t B = hi - lo;
    std::vector<double> buf(B * 2);
    for (std::size_t b = 0; b < B; ++b) {
        buf[b * 2] = ws[idx[lo + b]].time_start;
        buf[b * 2 + 1] = ws[idx[lo + b]].time_gap;
    }
    return Tensor::from({B, 2}, std::move(buf));
}

inline double grad_norm(const std::vector<double>& g) {
    double n2 = 0.0;
    for (double x : g) n2 += x * x;
    return std::sqrt(n2);
}

inline bool clip_grad(std::vector<double>& g, double max_norm) {
    const double n = grad_norm(g);
    if (n <= max_norm || n == 0.0) return false;
    const double c = max_norm / n;
    for (double& x : g) x *= c;
    return true;
}

inline std::vector<double> flatten_grads(std::vector<Tensor>& params) {
    std::vector<double> flat;
    for (auto& p : params) {
        const auto& g = p.grad();
        flat.insert(flat.end(), g.begin(), g.end());
    }
    return flat;
}

}  // namespace detail

struct EvalMetrics {
    double mse = 0.0;
    double mae = 0.0;
    double csr_hard = 0.0;
    double csr_soft = 0.0;
    double cert_rate = 0.0;
    double mean_proof_length = 0.0;
    double mean_cert_time_ms = 0.0;
};

/// Forward the model over a window list and compute predictive + feasibility
/// + certification metrics.
inline EvalMetrics evaluate(Model& model, const std::vector<data::Window>& windows,
                            const constraints::Calibration& cal, double dbar,
                            double epsilon = certification::kEpsilon,
                            double delta = certification::kDelta, bool with_certificates = true,
                            std::vector<certification::Certificate>* certs_out = nullptr) {
    if (windows.empty()) throw std::invalid_argument("evaluate: empty window list");
    const std::size_t L = model.cfg.L, H = model.cfg.H, d = model.cfg.d;
    manifold::Geometry geo{model.cfg.use_hyperbolic};
    EvalMetrics m;
    std::vector<double> totals;
    for (const auto& w : windows) {
        auto X = Tensor::from({1, L, d}, w.X);
        auto cov = Tensor::from({1, 2}, {w.time_start, w.time_gap});
        auto xhat = model.forward(X, cov);
        const auto& yh = xhat.data();
        double se = 0.0, ae = 0.0;
        for (std::size_t i = 0; i < H * d; ++i) {
            const double e = yh[i] - w.Y[i];
            se += e * e;
            ae += std::abs(e);
        }
        m.mse += se / static_cast<double>(H * d);
        m.mae += ae / static_cast<double>(H * d);

        auto rep = constraints::evaluate_window(yh.data(), w.X.data(), w.Y.data(), L, H, d, cal,
                                                dbar, epsilon, geo);
        totals.push_back(rep.total);

        if (with_certificates) {
            const auto t0 = std::chrono::steady_clock::now();
            auto proof = certification::build_proof(yh.data(), w.X.data(), w.Y.data(), L, H, d,
                                                    cal, dbar, epsilon, geo);
            auto cert = certification::certify(proof, delta, epsilon);
            const auto t1 = std::chrono::steady_clock::now();
            cert.cert_time_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
            m.cert_rate += cert.valid ? 1.0 : 0.0;
            m.mean_proof_length += static_cast<double>(cert.proof_length);
            m.mean_cert_time_ms += cert.cert_time_ms;
            if (certs_out) certs_out->push_back(cert);
        }
    }
    const double n = static_cast<double>(windows.size());
    m.mse /= n;
    m.mae /= n;
    m.cert_rate /= n;
    m.mean_proof_length /= n;
    m.mean_cert_time_ms /= n;
    auto rates = constraints::csr(totals, epsilon);
    m.csr_hard = rates.csr_hard;
    m.csr_soft = rates.csr_soft;
    return m;
}

/// Algorithm: forward, constraint-weighted MSE, PCGrad combine, adaptive-LR
/// gradient step, EMA refresh. Throws on divergence.
inline FitResult fit(Model& model, const data::WindowedDataset& ds,
                     const constraints::Calibration& cal, const OptimizerConfig& cfg,
                     TrainState* state_out = nullptr) {
    if (ds.train.empty()) throw std::invalid_argument("fit: no training windows");
    const std::size_t L = model.cfg.L, H = model.cfg.H, d = model.cfg.d;
    manifold::Geometry geo{model.cfg.use_hyperbolic};

    TrainState st(cfg);
    FitResult result;
    auto params = model.parameters();

    const std::size_t n = ds.train.size();
    const std::size_t steps_per_epoch = (n + cfg.batch - 1) / cfg.batch;
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    for (std::size_t e = 0; e < cfg.epochs; ++e) {
        st.epoch = e;
        // deterministic shuffle per epoch
        Rng shuffle_rng(cfg.seed * 0x9e3779b97f4a7c15ULL + e + 1);
        for (std::size_t i = n; i > 1; --i) {
            const std::size_t j = shuffle_rng.next_u64() % i;
            std::swap(order[i - 1], order[j]);
        }

        // lambda_base: linear per epoch from start to end across the run
        st.lambda_e = (e + 1 >= cfg.epochs)
                          ? cfg.lambda_end
                          : cfg.lambda_start + (cfg.lambda_end - cfg.lambda_start) *
                                                   static_cast<double>(e) /
                                                   static_cast<double>(cfg.epochs - 1);

        double epoch_mse = 0.0;
        std::size_t epoch_steps = 0;
        for (std::size_t lo = 0; lo < n; lo += cfg.batch) {
            const std::size_t hi = std::min(lo + cfg.batch, n);
            const std::size_t B = hi - lo;

            // alpha decays linearly across the first epoch, constant after
            if (e == 0) {
                const double frac = steps_per_epoch > 1
                                        ? static_cast<double>(epoch_steps) /
                                              static_cast<double>(steps_per_epoch - 1)
                                        : 1.0;
                st.alpha_e = cfg.alpha_start + (cfg.alpha_end - cfg.alpha_start) * frac;
            } else {
                st.alpha_e = cfg.alpha_end;
            }

            auto Xb = detail::batch_tensor(ds.train, order, lo, hi, L, d, false);
            auto Yb = detail::batch_tensor(ds.train, order, lo, hi, H, d, true);
            auto cov = detail::batch_cov(ds.train, order, lo, hi);

            // pass 1: weighted MSE graph
            for (auto& p : params) p.zero_grad();
            auto xhat = model.forward(Xb, cov);
            std::vector<double> violations(B);
            double mean_dist = 0.0;
            for (std::size_t b = 0; b < B; ++b) {
                auto rep = constraints::evaluate_window(
                    xhat.data().data() + b * H * d, ds.train[order[lo + b]].X.data(),
                    ds.train[order[lo + b]].Y.data(), L, H, d, cal, st.dbar,
                    cfg.epsilon_target, geo);
                violations[b] = rep.total;
                mean_dist += rep.dist;
            }
            mean_dist /= static_cast<double>(B);
            auto weights = sample_weights(violations, st.alpha_e);
            std::vector<double> wbuf(B);
            for (std::size_t b = 0; b < B; ++b) wbuf[b] = weights[b];
            auto Wt = reshape(Tensor::from({B}, std::move(wbuf)), {B, 1, 1});
            auto err = xhat - Yb;
            auto mse_loss = reduce_all(err * err * Wt, Reduce::mean);
            const double mse_val = mse_loss.item();
            if (!std::isfinite(mse_val))
                throw DivergenceError("fit: divergence, non-finite loss at step " +
                                      std::to_string(st.step));
            mse_loss.backward();
            auto g_mse = detail::flatten_grads(params);

            // pass 2: constraint graph
            for (auto& p : params) p.zero_grad();
            auto xhat2 = model.forward(Xb, cov);
            auto c_loss = constraints::graph::total_violation(xhat2, Xb, Yb, cal, st.dbar,
                                                              cfg.epsilon_target,
                                                              model.cfg.use_hyperbolic);
            const double c_val = c_loss.item();
            c_loss.backward();
            auto g_con = detail::flatten_grads(params);

            if (detail::clip_grad(g_mse, cfg.grad_clip)) ++result.clip_events;
            if (detail::clip_grad(g_con, cfg.grad_clip)) ++result.clip_events;

            bool projected = false;
            StepDiag diag;
            auto g = pcgrad_combine(g_mse, std::move(g_con), st.lambda_e, &projected, &diag);
            if (projected) ++result.pcgrad_projections;
            result.step_diags.push_back(diag);

            st.eta_t = adaptive_lr(st);
            std::size_t off = 0;
            for (auto& p : params) {
                auto& v = p.mutable_data();
                for (auto& x : v) x -= st.eta_t * g[off++];
            }

            // EMA refresh (momentum 0.9)
            double batch_violation = 0.0;
            for (double v : violations) batch_violation += v;
            batch_violation /= static_cast<double>(B);
            st.ema_violation = 0.9 * st.ema_violation + 0.1 * batch_violation;
            if (!st.ema_mse_set) {
                st.ema_mse = mse_val;
                st.ema_mse_set = true;
            } else {
                st.ema_mse = 0.9 * st.ema_mse + 0.1 * mse_val;
            }
            st.dbar = 0.9 * st.dbar + 0.1 * mean_dist;

            (void)total_loss(mse_val, c_val, st);  // validated finite
            epoch_mse += mse_val;
            ++epoch_steps;
            ++st.step;
        }

        EpochRecord rec;
        rec.epoch = e;
        rec.train_mse = epoch_mse / static_cast<double>(epoch_steps);
        const auto& val_windows = ds.val.empty() ? ds.train : ds.val;
        auto vm = evaluate(model, val_windows, cal, st.dbar, cfg.epsilon_target);
        rec.val_mse = vm.mse;
        rec.val_mae = vm.mae;
        rec.csr_hard = vm.csr_hard;
        rec.csr_soft = vm.csr_soft;
        rec.cert_rate = vm.cert_rate;
        result.history.push_back(rec);
    }

    if (state_out) *state_out = st;
    return result;
}

}  // namespace geocert::training
