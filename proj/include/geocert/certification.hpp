#pragma once

// Geometric proof construction over the dyadic horizon tree, certificates,
// and certified-robustness sweeps.

#include <chrono>
#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "geocert/constraints.hpp"
#include "geocert/manifold.hpp"
#include "geocert/rng.hpp"

namespace geocert::certification {

inline constexpr double kDelta = 0.02;
inline constexpr double kEpsilon = 0.1;
inline constexpr double kKappa = 1.02;  // 1 + |K| * delta

struct ProofStep {
    manifold::PoincarePoint point;
    manifold::TangentVector tangent;
    std::size_t level = 0;
    std::size_t index = 0;
    double residual_violation = 0.0;
};

struct ProofObject {
    std::vector<ProofStep> steps;
    double terminal_distance = 0.0;
    double terminal_violation = 0.0;
};

struct Certificate {
    bool valid = false;
    double delta = kDelta;
    double epsilon = kEpsilon;
    std::size_t proof_length = 0;
    double cert_time_ms = 0.0;
    double distance = 0.0;
    double violation = 0.0;
};

inline std::size_t max_proof_steps(std::size_t H) {
    return static_cast<std::size_t>(std::ceil(std::log2(static_cast<double>(H)))) + 1;
}

namespace detail {

// True violation at a candidate point p: the candidate is decoded back to
// forecast coordinates and the full constraint stack is re-evaluated there.
// The gradient below only covers the dominant target term; the descent
// backtracks on this exact objective, so accepted steps always reduce the
// real violation.
struct Surrogate {
    const double* Xinput = nullptr;
    const double* Xtarget = nullptr;
    std::size_t L = 0, H = 0, d = 0;
    manifold::PoincarePoint z_tgt;
    const constraints::Calibration* cal = nullptr;
    double dbar = 0.0;
    double epsilon = kEpsilon;
    double tau = 0.0;
    manifold::Geometry geo;
    constraints::ConstraintWeights w{};

    double operator()(const manifold::PoincarePoint& p) const {
        const auto xhat = geo.unembed(p);
        return constraints::evaluate_window(xhat.data(), Xinput, Xtarget, L, H, d, *cal, dbar,
                                            epsilon, geo, w)
            .total;
    }

    manifold::Vec grad(const manifold::PoincarePoint& p) const {
        const double dist = geo.dist(p, z_tgt);
        manifold::Vec g(p.coords.size(), 0.0);
        if (dist / cal->sigma_data - tau <= 0.0 || dist < 1e-12) return g;
        auto gd2 = geo.dist_sq_grad_p(p, z_tgt);
        const double c = w.target / (cal->sigma_data * 2.0 * dist);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] = c * gd2[i];
        return g;
    }
};

// Bounded inner descent: <= 10 Riemannian iterations at tau = 0.1 with
// halving backtracking on the surrogate.
inline manifold::PoincarePoint descend(const Surrogate& phi, manifold::PoincarePoint p) {
    double best = phi(p);
    for (int it = 0; it < 10 && best > 0.0; ++it) {
        const auto g = phi.grad(p);
        if (manifold::norm(g) < 1e-14) break;
        double step = 0.1;
        bool moved = false;
        for (int half = 0; half < 8; ++half) {
            auto cand = phi.geo.step(p, g, step);
            const double val = phi(cand);
            if (val < best) {
                p = cand;
                best = val;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if (!moved) break;
    }
    return p;
}

}  // namespace detail

/// Dyadic-level proof construction. Xhat/Xtarget are [H x d] row-major,
/// Xinput the lookback [L x d]; dbar the running-average distance feeding
/// tau_adapt.
inline ProofObject build_proof(const double* Xhat, const double* Xinput, const double* Xtarget,
                               std::size_t L, std::size_t H, std::size_t d,
                               const constraints::Calibration& cal, double dbar = 0.0,
                               double epsilon = kEpsilon, const manifold::Geometry& geo = {},
                               const constraints::ConstraintWeights& w = {}) {
    if (H < 1) throw std::invalid_argument("build_proof: H must be >= 1");
    ProofObject proof;

    auto base = constraints::evaluate_window(Xhat, Xinput, Xtarget, L, H, d, cal, dbar, epsilon,
                                             geo, w);
    if (!std::isfinite(base.total)) throw std::runtime_error("build_proof: non-finite violation");

    manifold::Vec flat_h(Xhat, Xhat + H * d), flat_t(Xtarget, Xtarget + H * d);
    auto p = geo.embed(flat_h);
    detail::Surrogate phi{Xinput,
                          Xtarget,
                          L,
                          H,
                          d,
                          geo.embed(flat_t),
                          &cal,
                          dbar,
                          epsilon,
                          constraints::tau_adapt(epsilon, dbar),
                          geo,
                          w};

    const std::size_t levels =
        static_cast<std::size_t>(std::ceil(std::log2(static_cast<double>(H)))) + 1;
    for (std::size_t lvl = 0; lvl < levels; ++lvl) {
        // Segment-restricted violation across the 2^lvl horizon segments.
        // Level 0 is the whole window (all eight constraints); deeper
        // segments use the logical layer only — the heuristic terms are
        // onset- and horizon-global statistics.
        const std::size_t nseg = std::size_t(1) << lvl;
        double worst = -1.0;
        std::size_t worst_idx = 0;
        if (lvl == 0) {
            worst = base.total;
        } else {
            for (std::size_t i = 0; i < nseg; ++i) {
                const std::size_t a = i * H / nseg;
                const std::size_t b = (i + 1) * H / nseg;
                if (b - a < 2) continue;
                const std::size_t hs = b - a;
                manifold::Vec sh(Xhat + a * d, Xhat + b * d);
                manifold::Vec st(Xtarget + a * d, Xtarget + b * d);
                auto lg = constraints::eval_logical(Xhat + a * d, Xtarget + a * d, hs, d,
                                                    geo.embed(sh), geo.embed(st), cal, dbar,
                                                    epsilon, geo);
                const double seg_total = constraints::total_violation(
                    {lg.target, lg.gradient, lg.scale, 0, 0, 0, 0, 0}, w);
                if (!std::isfinite(seg_total))
                    throw std::runtime_error("build_proof: non-finite violation");
                if (seg_total > worst) {
                    worst = seg_total;
                    worst_idx = i;
                }
            }
        }
        if (worst <= epsilon / 2.0) continue;

        auto next = detail::descend(phi, p);
        ProofStep step;
        step.tangent = {p, geo.log(p, next)};
        step.point = next;
        step.level = lvl;
        step.index = worst_idx;
        step.residual_violation = phi(next);
        proof.steps.push_back(std::move(step));
        p = next;
    }

    proof.terminal_distance = geo.dist(p, geo.project_feasible(p));
    proof.terminal_violation = phi(p);
    return proof;
}

/// Strict-conjunction certificate: V = [distance < delta AND violation < eps].
inline Certificate certify(const ProofObject& proof, double delta = kDelta,
                           double epsilon = kEpsilon) {
    Certificate c;
    c.delta = delta;
    c.epsilon = epsilon;
    c.proof_length = proof.steps.size();
    c.distance = proof.terminal_distance;
    c.violation = proof.terminal_violation;
    c.valid = proof.terminal_distance < delta && proof.terminal_violation < epsilon;
    return c;
}

struct CertificationSummary {
    double cert_rate = 0.0;
    double mean_proof_length = 0.0;
    double mean_cert_time_ms = 0.0;
    std::vector<Certificate> certificates;
};

/// A forecast function: lookback window (L x d, row-major) -> forecast
/// (H x d). Must be deterministic.
using ForecastFn = std::function<std::vector<double>(const std::vector<double>&)>;

struct WindowCase {
    std::vector<double> X;  // L x d
    std::vector<double> Y;  // H x d
};

inline CertificationSummary certification_rate(const ForecastFn& forecast,
                                               const std::vector<WindowCase>& windows,
                                               std::size_t L, std::size_t H, std::size_t d,
                                               const constraints::Calibration& cal,
                                               double dbar = 0.0, double epsilon = kEpsilon,
                                               double delta = kDelta,
                                               const manifold::Geometry& geo = {}) {
    if (windows.empty()) throw std::invalid_argument("certification_rate: empty dataset");
    CertificationSummary s;
    double rate = 0.0, len = 0.0, ms = 0.0;
    for (const auto& w : windows) {
        const auto t0 = std::chrono::steady_clock::now();
        auto xhat = forecast(w.X);
        auto proof = build_proof(xhat.data(), w.X.data(), w.Y.data(), L, H, d, cal, dbar,
                                 epsilon, geo);
        auto cert = certify(proof, delta, epsilon);
        const auto t1 = std::chrono::steady_clock::now();
        cert.cert_time_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
        rate += cert.valid ? 1.0 : 0.0;
        len += static_cast<double>(cert.proof_length);
        ms += cert.cert_time_ms;
        s.certificates.push_back(cert);
    }
    const double n = static_cast<double>(windows.size());
    s.cert_rate = rate / n;
    s.mean_proof_length = len / n;
    s.mean_cert_time_ms = ms / n;
    return s;
}

struct RobustnessResult {
    double rho_max = 0.0;
    std::vector<std::pair<double, double>> grid;  // (rho, cert_rate), non-increasing
};

/// Sampled infinity-norm certified robustness. The perturbation directions
/// are fixed unit draws scaled by rho, so the perturbation sets are nested
/// and the verdict is monotone in rho by construction.
inline RobustnessResult certified_robustness(const ForecastFn& forecast, const WindowCase& w,
                                             std::size_t L, std::size_t H, std::size_t d,
                                             const constraints::Calibration& cal,
                                             double rho_hi = 0.5, std::size_t trials = 256,
                                             std::uint64_t seed = 0, double dbar = 0.0,
                                             double epsilon = kEpsilon, double delta = kDelta,
                                             const manifold::Geometry& geo = {},
                                             std::size_t grid_points = 8) {
    // fixed unit perturbations in [-1, 1]^(L*d)
    Rng rng(seed);
    std::vector<std::vector<double>> dirs(trials, std::vector<double>(L * d));
    for (auto& dir : dirs)
        for (auto& x : dir) x = rng.uniform(-1.0, 1.0);

    auto window_valid = [&](const std::vector<double>& X) {
        auto xhat = forecast(X);
        auto proof = build_proof(xhat.data(), X.data(), w.Y.data(), L, H, d, cal, dbar, epsilon,
                                 geo);
        return certify(proof, delta, epsilon).valid;
    };

    auto trial_count = [&](double rho) {
        if (rho == 0.0) return window_valid(w.X) ? trials : std::size_t(0);
        std::size_t ok = 0;
        std::vector<double> X(L * d);
        for (const auto& dir : dirs) {
            for (std::size_t i = 0; i < L * d; ++i) X[i] = w.X[i] + rho * dir[i];
            if (window_valid(X)) ++ok;
        }
        return ok;
    };
    auto certified_at = [&](double rho) { return trial_count(rho) == trials; };

    RobustnessResult r;
    if (!certified_at(0.0)) {
        for (std::size_t i = 0; i <= grid_points; ++i)
            r.grid.emplace_back(rho_hi * static_cast<double>(i) / grid_points, 0.0);
        return r;
    }

    // 20-halving binary search for the largest certified radius
    double lo = 0.0, hi = rho_hi;
    if (certified_at(rho_hi)) {
        lo = rho_hi;
    } else {
        for (int it = 0; it < 20; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (certified_at(mid))
                lo = mid;
            else
                hi = mid;
        }
    }
    r.rho_max = lo;

    double running = 1.0;  // cumulative min keeps the reported curve monotone
    for (std::size_t i = 0; i <= grid_points; ++i) {
        const double rho = rho_hi * static_cast<double>(i) / grid_points;
        const double rate = static_cast<double>(trial_count(rho)) / static_cast<double>(trials);
        running = std::min(running, rate);
        r.grid.emplace_back(rho, running);
    }
    return r;
}

}  // namespace geocert::certification
