#pragma once

// Two-layer constraint hierarchy: percentile calibration, the eight logical
// and heuristic constraint values, weighted aggregation, and CSR metrics.
//
// Two evaluators live here. The plain-double one backs calibration,
// certification and metrics; the graph one builds the differentiable
// violation used as the constraint loss during training. They must agree.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "geocert/manifold.hpp"
#include "geocert/tensor.hpp"

namespace geocert::constraints {

inline constexpr double kSigmaFloor = 1e-8;
inline constexpr std::array<std::size_t, 3> kScales{1, 4, 8};
inline constexpr std::size_t kMinWindows = 32;  // below this, reliable = false

struct ConstraintWeights {
    double target = 0.20, gradient = 0.12, scale = 0.08;                        // logical
    double boundary = 0.20, trend = 0.12, autocorr = 0.10, multiscale = 0.10,  // heuristic
        dynamic = 0.08;

    double sum() const {
        return target + gradient + scale + boundary + trend + autocorr + multiscale + dynamic;
    }
};

// ---- small statistics helpers ----

namespace stats {

inline double mean(const double* x, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s / static_cast<double>(n);
}

inline double var(const double* x, std::size_t n) {  // population
    const double mu = mean(x, n);
    double v = 0.0;
    for (std::size_t i = 0; i < n; ++i) v += (x[i] - mu) * (x[i] - mu);
    return v / static_cast<double>(n);
}

inline double stddev(const double* x, std::size_t n) { return std::sqrt(var(x, n)); }

/// Least-squares slope over t = 0..n-1.
inline double slope(const double* x, std::size_t n, std::size_t stride = 1) {
    if (n < 2) return 0.0;
    const double tbar = (static_cast<double>(n) - 1.0) / 2.0;
    double num = 0.0, den = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        const double dt = static_cast<double>(t) - tbar;
        num += dt * x[t * stride];
        den += dt * dt;
    }
    return num / den;
}

/// Lag-1 Pearson autocorrelation; 0 when either side is degenerate.
inline double lag1_rho(const double* x, std::size_t n, std::size_t stride = 1) {
    if (n < 2) return 0.0;
    const std::size_t m = n - 1;
    std::vector<double> a(m), b(m);
    for (std::size_t i = 0; i < m; ++i) {
        a[i] = x[i * stride];
        b[i] = x[(i + 1) * stride];
    }
    const double ma = mean(a.data(), m), mb = mean(b.data(), m);
    double cov = 0.0;
    for (std::size_t i = 0; i < m; ++i) cov += (a[i] - ma) * (b[i] - mb);
    cov /= static_cast<double>(m);
    const double sa = std::max(stddev(a.data(), m), kSigmaFloor);
    const double sb = std::max(stddev(b.data(), m), kSigmaFloor);
    return cov / (sa * sb);
}

/// Nearest-rank percentile: k = ceil(q*n) on the sorted values.
inline double percentile(std::vector<double> v, double q) {
    if (v.empty()) throw std::invalid_argument("percentile: empty sample");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    std::size_t k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n)));
    if (k < 1) k = 1;
    if (k > n) k = n;
    return v[k - 1];
}

inline double median(std::vector<double> v) { return percentile(std::move(v), 0.5); }

/// Multi-scale gradient statistic: mean absolute difference of the stride-s
/// block means. Needs at least two blocks.
inline double grad_stat(const double* x, std::size_t n, std::size_t s, std::size_t stride = 1) {
    const std::size_t nb = n / s;
    if (nb < 2) return 0.0;
    std::vector<double> m(nb, 0.0);
    for (std::size_t i = 0; i < nb; ++i) {
        for (std::size_t j = 0; j < s; ++j) m[i] += x[(i * s + j) * stride];
        m[i] /= static_cast<double>(s);
    }
    double g = 0.0;
    for (std::size_t i = 0; i + 1 < nb; ++i) g += std::abs(m[i + 1] - m[i]);
    return g / static_cast<double>(nb - 1);
}

}  // namespace stats

// ---- calibration ----

struct ScaleStats {
    double mu = 0.0;
    double sigma = kSigmaFloor;
    double z_p95 = 0.0;
    bool reliable = false;
};

struct Calibration {
    double sigma_data = kSigmaFloor;

    double mu_diff = 0.0, sigma_diff = kSigmaFloor, z_p95 = 0.0;
    bool boundary_reliable = false;

    double tau_trend = 0.0, r_p95 = 1.0;
    bool trend_reliable = false;

    double mu_rho = 0.0, sigma_rho = kSigmaFloor, z_rho_p95 = 0.0, rho_p05 = -1.0;
    bool rho_reliable = false;

    std::array<ScaleStats, 3> scales;  // s = 1, 4, 8

    double gamma_p95 = 0.0, tau_var = 0.0;
    bool dynamic_reliable = false;

    // running-average embedding distance observed in training; feeds
    // tau_adapt at eval/certify time
    double dbar = 0.0;

    void save(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw std::runtime_error("calibration: cannot write " + path);
        out.precision(17);
        auto line = [&](const char* name, double v, bool rel) {
            out << name << ' ' << v << ' ' << (rel ? 1 : 0) << '\n';
        };
        line("sigma_data", sigma_data, sigma_data > kSigmaFloor);
        line("mu_diff", mu_diff, boundary_reliable);
        line("sigma_diff", sigma_diff, boundary_reliable);
        line("z_p95", z_p95, boundary_reliable);
        line("tau_trend", tau_trend, trend_reliable);
        line("r_p95", r_p95, trend_reliable);
        line("mu_rho", mu_rho, rho_reliable);
        line("sigma_rho", sigma_rho, rho_reliable);
        line("z_rho_p95", z_rho_p95, rho_reliable);
        line("rho_p05", rho_p05, rho_reliable);
        for (std::size_t i = 0; i < kScales.size(); ++i) {
            const std::string base = "scale" + std::to_string(kScales[i]) + "_";
            line((base + "mu").c_str(), scales[i].mu, scales[i].reliable);
            line((base + "sigma").c_str(), scales[i].sigma, scales[i].reliable);
            line((base + "z_p95").c_str(), scales[i].z_p95, scales[i].reliable);
        }
        line("gamma_p95", gamma_p95, dynamic_reliable);
        line("tau_var", tau_var, dynamic_reliable);
        line("dbar", dbar, dbar > 0.0);
    }

    static Calibration load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("calibration: cannot read " + path);
        Calibration c;
        std::string name;
        double value;
        int rel;
        while (in >> name >> value >> rel) {
            const bool r = rel != 0;
            if (name == "sigma_data") c.sigma_data = value;
            else if (name == "mu_diff") c.mu_diff = value, c.boundary_reliable = r;
            else if (name == "sigma_diff") c.sigma_diff = value;
            else if (name == "z_p95") c.z_p95 = value;
            else if (name == "tau_trend") c.tau_trend = value, c.trend_reliable = r;
            else if (name == "r_p95") c.r_p95 = value;
            else if (name == "mu_rho") c.mu_rho = value, c.rho_reliable = r;
            else if (name == "sigma_rho") c.sigma_rho = value;
            else if (name == "z_rho_p95") c.z_rho_p95 = value;
            else if (name == "rho_p05") c.rho_p05 = value;
            else if (name == "gamma_p95") c.gamma_p95 = value, c.dynamic_reliable = r;
            else if (name == "tau_var") c.tau_var = value;
            else if (name == "dbar") c.dbar = value;
            else {
                for (std::size_t i = 0; i < kScales.size(); ++i) {
                    const std::string base = "scale" + std::to_string(kScales[i]) + "_";
                    if (name == base + "mu") c.scales[i].mu = value, c.scales[i].reliable = r;
                    else if (name == base + "sigma") c.scales[i].sigma = value;
                    else if (name == base + "z_p95") c.scales[i].z_p95 = value;
                }
            }
        }
        return c;
    }
};

/// Empirical-percentile calibration from training windows. Xs are lookback
/// windows [L x d] row-major, Ys the matching horizons [H x d].
inline Calibration calibrate(const std::vector<std::vector<double>>& Xs,
                             const std::vector<std::vector<double>>& Ys, std::size_t L,
                             std::size_t H, std::size_t d) {
    if (Xs.empty() || Xs.size() != Ys.size())
        throw std::invalid_argument("calibrate: empty or mismatched training set");
    const bool enough = Xs.size() >= kMinWindows;
    Calibration c;

    // pooled data std
    {
        std::vector<double> all;
        for (const auto& x : Xs) all.insert(all.end(), x.begin(), x.end());
        c.sigma_data = std::max(stats::stddev(all.data(), all.size()), kSigmaFloor);
    }

    // per (window, variate) samples
    std::vector<double> gaps, trends_in, trend_ratios, rhos, vars_in, log_var_ratios;
    std::array<std::vector<double>, 3> grads;
    for (std::size_t w = 0; w < Xs.size(); ++w) {
        const double* X = Xs[w].data();
        const double* Y = Ys[w].data();
        for (std::size_t v = 0; v < d; ++v) {
            gaps.push_back(std::abs(X[(L - 1) * d + v] - Y[v]));
            const double tin = stats::slope(X + v, L, d);
            const double tpr = stats::slope(Y + v, H, d);
            trends_in.push_back(std::abs(tin));
            if (std::abs(tin) > kSigmaFloor) trend_ratios.push_back(std::abs(tpr) / std::abs(tin));
            rhos.push_back(stats::lag1_rho(Y + v, H, d));
            double vi = 0.0, vy = 0.0;
            {
                std::vector<double> xv(L), yv(H);
                for (std::size_t t = 0; t < L; ++t) xv[t] = X[t * d + v];
                for (std::size_t t = 0; t < H; ++t) yv[t] = Y[t * d + v];
                vi = stats::var(xv.data(), L);
                vy = stats::var(yv.data(), H);
            }
            vars_in.push_back(vi);
            log_var_ratios.push_back(
                std::abs(std::log(std::max(vy, kSigmaFloor) / std::max(vi, kSigmaFloor))));
            for (std::size_t i = 0; i < kScales.size(); ++i)
                if (H / kScales[i] >= 2) grads[i].push_back(stats::grad_stat(Y + v, H, kScales[i], d));
        }
    }

    auto zstats = [&](const std::vector<double>& s, double& mu, double& sigma, double& z95,
                      bool& rel) {
        mu = stats::mean(s.data(), s.size());
        const double sd = stats::stddev(s.data(), s.size());
        sigma = std::max(sd, kSigmaFloor);
        rel = enough && sd >= kSigmaFloor;
        std::vector<double> z(s.size());
        for (std::size_t i = 0; i < s.size(); ++i) z[i] = (s[i] - mu) / sigma;
        z95 = stats::percentile(std::move(z), 0.95);
    };

    zstats(gaps, c.mu_diff, c.sigma_diff, c.z_p95, c.boundary_reliable);

    c.tau_trend = stats::median(trends_in);
    if (!trend_ratios.empty()) {
        c.r_p95 = stats::percentile(trend_ratios, 0.95);
        c.trend_reliable = enough;
    }

    zstats(rhos, c.mu_rho, c.sigma_rho, c.z_rho_p95, c.rho_reliable);
    c.rho_p05 = stats::percentile(rhos, 0.05);

    for (std::size_t i = 0; i < kScales.size(); ++i) {
        if (grads[i].empty()) continue;
        zstats(grads[i], c.scales[i].mu, c.scales[i].sigma, c.scales[i].z_p95,
               c.scales[i].reliable);
    }

    c.gamma_p95 = stats::percentile(log_var_ratios, 0.95);
    c.tau_var = stats::median(vars_in);
    c.dynamic_reliable = enough;
    return c;
}

// ---- plain evaluation ----

struct LogicalValues {
    double target = 0.0, gradient = 0.0, scale = 0.0;
    double dist = 0.0;  // the hyperbolic distance feeding the d-bar EMA
};

inline double relu(double x) { return x > 0.0 ? x : 0.0; }

inline double tau_adapt(double epsilon, double dbar) {
    return 2.0 * epsilon * (1.0 + std::min(2.0, dbar));
}

/// Logical layer. Xhat and Xtarget are [H x d] row-major; z_pred/z_tgt the
/// manifold embeddings of the flattened windows; dbar the running average
/// distance.
inline LogicalValues eval_logical(const double* Xhat, const double* Xtarget, std::size_t H,
                                  std::size_t d, const manifold::PoincarePoint& z_pred,
                                  const manifold::PoincarePoint& z_tgt, const Calibration& cal,
                                  double dbar, double epsilon,
                                  const manifold::Geometry& geo = {}) {
    LogicalValues out;
    out.dist = geo.dist(z_pred, z_tgt);
    out.target = relu(out.dist / cal.sigma_data - tau_adapt(epsilon, dbar));

    double grad_sum = 0.0, scale_sum = 0.0;
    for (std::size_t v = 0; v < d; ++v) {
        if (H >= 2) {
            double dot = 0.0, na = 0.0, nb = 0.0;
            for (std::size_t t = 0; t + 1 < H; ++t) {
                const double a = Xhat[(t + 1) * d + v] - Xhat[t * d + v];
                const double b = Xtarget[(t + 1) * d + v] - Xtarget[t * d + v];
                dot += a * b;
                na += a * a;
                nb += b * b;
            }
            const double cosv =
                dot / (std::max(std::sqrt(na), kSigmaFloor) * std::max(std::sqrt(nb), kSigmaFloor));
            grad_sum += relu(0.5 - cosv);
        }

        std::vector<double> xh(H), xt(H);
        for (std::size_t t = 0; t < H; ++t) {
            xh[t] = Xhat[t * d + v];
            xt[t] = Xtarget[t * d + v];
        }
        const double mu_h = stats::mean(xh.data(), H), mu_t = stats::mean(xt.data(), H);
        const double sd_h = stats::stddev(xh.data(), H);
        const double sd_t = std::max(stats::stddev(xt.data(), H), kSigmaFloor);
        scale_sum += relu(std::abs(mu_h - mu_t) / cal.sigma_data - 0.1) +
                     relu(std::abs(sd_h / sd_t - 1.0) - 0.2);
    }
    out.gradient = grad_sum / static_cast<double>(d);
    out.scale = scale_sum / static_cast<double>(d);
    return out;
}

struct HeuristicValues {
    double boundary = 0.0, trend = 0.0, autocorr = 0.0, multiscale = 0.0, dynamic = 0.0;
};

/// Heuristic layer. Xhat is [H x d], Xinput the lookback [L x d].
inline HeuristicValues eval_heuristic(const double* Xhat, const double* Xinput, std::size_t L,
                                      std::size_t H, std::size_t d, const Calibration& cal) {
    HeuristicValues out;
    for (std::size_t v = 0; v < d; ++v) {
        if (cal.boundary_reliable) {
            const double gap = std::abs(Xinput[(L - 1) * d + v] - Xhat[v]);
            out.boundary += relu((gap - cal.mu_diff) / cal.sigma_diff - cal.z_p95);
        }

        const double tin = stats::slope(Xinput + v, L, d);
        if (cal.trend_reliable && std::abs(tin) > cal.tau_trend) {
            const double tpr = stats::slope(Xhat + v, H, d);
            const double sgn_in = tin > 0 ? 1.0 : (tin < 0 ? -1.0 : 0.0);
            const double sgn_pr = tpr > 0 ? 1.0 : (tpr < 0 ? -1.0 : 0.0);
            out.trend += relu(-sgn_in * sgn_pr) +
                         relu(std::abs(tpr) / std::max(std::abs(tin), kSigmaFloor) - cal.r_p95);
        }

        if (cal.rho_reliable && H >= 3) {
            const double rho = stats::lag1_rho(Xhat + v, H, d);
            out.autocorr += relu(std::abs(rho - cal.mu_rho) / cal.sigma_rho - cal.z_rho_p95) +
                            relu(cal.rho_p05 - rho);
        }

        for (std::size_t i = 0; i < kScales.size(); ++i) {
            if (!cal.scales[i].reliable || H / kScales[i] < 2) continue;
            const double g = stats::grad_stat(Xhat + v, H, kScales[i], d);
            out.multiscale +=
                relu(std::abs(g - cal.scales[i].mu) / cal.scales[i].sigma - cal.scales[i].z_p95);
        }

        std::vector<double> xv(L), hv(H);
        for (std::size_t t = 0; t < L; ++t) xv[t] = Xinput[t * d + v];
        for (std::size_t t = 0; t < H; ++t) hv[t] = Xhat[t * d + v];
        const double var_in = stats::var(xv.data(), L);
        if (cal.dynamic_reliable && var_in > cal.tau_var) {
            const double var_h = stats::var(hv.data(), H);
            out.dynamic += relu(std::abs(std::log(std::max(var_h, kSigmaFloor) /
                                                  std::max(var_in, kSigmaFloor))) -
                                cal.gamma_p95);
        }
    }
    const double dd = static_cast<double>(d);
    out.boundary /= dd;
    out.trend /= dd;
    out.autocorr /= dd;
    out.multiscale /= dd;
    out.dynamic /= dd;
    return out;
}

// The eight values in weight order: target, gradient, scale, boundary, trend,
// autocorr, multiscale, dynamic.
using ConstraintVector = std::array<double, 8>;

struct ViolationReport {
    ConstraintVector values{};
    double total = 0.0;
    double dist = 0.0;
};

inline double total_violation(const ConstraintVector& c, const ConstraintWeights& w = {}) {
    for (double v : c)
        if (v < 0.0) throw std::invalid_argument("total_violation: negative constraint value");
    return w.target * c[0] + w.gradient * c[1] + w.scale * c[2] + w.boundary * c[3] +
           w.trend * c[4] + w.autocorr * c[5] + w.multiscale * c[6] + w.dynamic * c[7];
}

/// Full per-window evaluation.
inline ViolationReport evaluate_window(const double* Xhat, const double* Xinput,
                                       const double* Xtarget, std::size_t L, std::size_t H,
                                       std::size_t d, const Calibration& cal, double dbar,
                                       double epsilon, const manifold::Geometry& geo = {},
                                       const ConstraintWeights& w = {}) {
    manifold::Vec fh(Xhat, Xhat + H * d), ft(Xtarget, Xtarget + H * d);
    const auto zp = geo.embed(fh);
    const auto zt = geo.embed(ft);
    const auto lg = eval_logical(Xhat, Xtarget, H, d, zp, zt, cal, dbar, epsilon, geo);
    const auto hr = eval_heuristic(Xhat, Xinput, L, H, d, cal);
    ViolationReport r;
    r.values = {lg.target, lg.gradient, lg.scale, hr.boundary, hr.trend,
                hr.autocorr, hr.multiscale, hr.dynamic};
    r.total = total_violation(r.values, w);
    r.dist = lg.dist;
    return r;
}

// ---- CSR metrics ----

struct CsrMetrics {
    double csr_hard = 0.0;
    double csr_soft = 0.0;
    double epsilon = 0.1;
};

/// deg(c) = min(1, max(0, (c - eps)/(9 eps))): zero at the feasibility
/// boundary, saturating at 10 eps. Guarantees csr_soft >= csr_hard.
inline double violation_degree(double c, double epsilon) {
    return std::min(1.0, std::max(0.0, (c - epsilon) / (9.0 * epsilon)));
}

inline CsrMetrics csr(const std::vector<double>& totals, double epsilon = 0.1) {
    if (totals.empty()) throw std::invalid_argument("csr: no windows");
    CsrMetrics m;
    m.epsilon = epsilon;
    double hard = 0.0, deg = 0.0;
    for (double c : totals) {
        if (std::abs(c) <= epsilon) hard += 1.0;
        deg += violation_degree(std::abs(c), epsilon);
    }
    const double n = static_cast<double>(totals.size());
    m.csr_hard = hard / n;
    m.csr_soft = 1.0 - deg / n;
    return m;
}

// ---- graph evaluation (training loss) ----

namespace graph {

inline Tensor arcosh(const Tensor& x) { return log(x + sqrt(x * x - 1.0 + 1e-30)); }

/// Ball projection of flattened windows: [B,N] -> [B,N] strictly inside.
inline Tensor ball_embed(const Tensor& flat) {
    auto n2 = reshape(reduce_last(flat * flat, Reduce::sum), {flat.shape()[0], std::size_t(1)});
    return flat / (1.0 + sqrt(1.0 + n2));
}

/// Differentiable total violation, mean over the batch. Xhat is [B,H,d] and
/// requires grad; Xinput [B,L,d] and Xtarget [B,H,d] are treated as
/// constants. Mirrors evaluate_window.
inline Tensor total_violation(const Tensor& Xhat, const Tensor& Xinput, const Tensor& Xtarget,
                              const Calibration& cal, double dbar, double epsilon,
                              bool hyperbolic = true, const ConstraintWeights& w = {}) {
    const Shape& sh = Xhat.shape();
    if (sh.size() != 3) throw std::invalid_argument("total_violation: expected [B,H,d]");
    const std::size_t B = sh[0], H = sh[1], d = sh[2];
    const std::size_t L = Xinput.shape()[1];
    const double dd = static_cast<double>(d);

    // --- target: distance between whole-window embeddings ---
    auto flat_h = reshape(Xhat, {B, H * d});
    auto flat_t = reshape(Xtarget, {B, H * d});
    Tensor dist;
    if (hyperbolic) {
        auto zp = ball_embed(flat_h);
        auto zt = ball_embed(flat_t);
        auto diff = zp - zt;
        auto d2 = reduce_last(diff * diff, Reduce::sum);
        auto np = reduce_last(zp * zp, Reduce::sum);
        auto nt = reduce_last(zt * zt, Reduce::sum);
        dist = arcosh(1.0 + 2.0 * d2 / ((1.0 - np) * (1.0 - nt)));
    } else {
        auto diff = flat_h - flat_t;
        dist = sqrt(reduce_last(diff * diff, Reduce::sum) + 1e-30);
    }
    auto c_target = relu(dist / cal.sigma_data - tau_adapt(epsilon, dbar));  // [B]

    auto xh = transpose_12(Xhat);     // [B,d,H]
    auto xt = transpose_12(Xtarget);  // constant
    auto xi = transpose_12(Xinput);   // constant

    // --- gradient: cosine of first differences, per variate ---
    Tensor c_gradient = Tensor::zeros({B});
    if (H >= 2) {
        auto dh = slice_last(xh, 1, H - 1) - slice_last(xh, 0, H - 1);
        auto dt = slice_last(xt, 1, H - 1) - slice_last(xt, 0, H - 1);
        auto dot = reduce_last(dh * dt, Reduce::sum);
        auto na = clamp(sqrt(reduce_last(dh * dh, Reduce::sum) + 1e-300), kSigmaFloor, 1e300);
        auto nb = clamp(sqrt(reduce_last(dt * dt, Reduce::sum) + 1e-300), kSigmaFloor, 1e300);
        c_gradient = reduce_last(relu(0.5 - dot / (na * nb)), Reduce::mean);  // [B]
    }

    // --- scale: moment matching per variate ---
    auto mu_h = reduce_last(xh, Reduce::mean);
    auto mu_t = reduce_last(xt, Reduce::mean);
    auto sd_h = sqrt(reduce_last(xh, Reduce::var) + 1e-300);
    auto sd_t = clamp(sqrt(reduce_last(xt, Reduce::var) + 1e-300), kSigmaFloor, 1e300);
    auto c_scale = reduce_last(relu(abs(mu_h - mu_t) / cal.sigma_data - 0.1) +
                                   relu(abs(sd_h / sd_t - 1.0) - 0.2),
                               Reduce::mean);

    // --- boundary ---
    Tensor c_boundary = Tensor::zeros({B});
    if (cal.boundary_reliable) {
        auto xl = slice_last(xi, L - 1, 1);   // [B,d,1]
        auto x1 = slice_last(xh, 0, 1);       // [B,d,1]
        auto gap = reshape(abs(xl - x1), {B, d});
        c_boundary = reduce_last(relu((gap - cal.mu_diff) / cal.sigma_diff - cal.z_p95),
                                 Reduce::mean);
    }

    // --- trend: gates and input slopes are constants ---
    Tensor c_trend = Tensor::zeros({B});
    if (cal.trend_reliable) {
        std::vector<double> wslope(H);
        {
            const double tbar = (static_cast<double>(H) - 1.0) / 2.0;
            double den = 0.0;
            for (std::size_t t = 0; t < H; ++t)
                den += (static_cast<double>(t) - tbar) * (static_cast<double>(t) - tbar);
            for (std::size_t t = 0; t < H; ++t) wslope[t] = (static_cast<double>(t) - tbar) / den;
        }
        auto slope_pred =
            reshape(matmul(xh, Tensor::from({H, 1}, std::move(wslope))), {B, d});
        std::vector<double> gate(B * d), sgn_in(B * d), inv_tin(B * d);
        const auto& xin = Xinput.data();
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t v = 0; v < d; ++v) {
                const double tin = stats::slope(xin.data() + b * L * d + v, L, d);
                const bool on = std::abs(tin) > cal.tau_trend;
                gate[b * d + v] = on ? 1.0 : 0.0;
                sgn_in[b * d + v] = tin > 0 ? 1.0 : (tin < 0 ? -1.0 : 0.0);
                inv_tin[b * d + v] = 1.0 / std::max(std::abs(tin), kSigmaFloor);
            }
        auto G = Tensor::from({B, d}, std::move(gate));
        auto S = Tensor::from({B, d}, std::move(sgn_in));
        auto I = Tensor::from({B, d}, std::move(inv_tin));
        auto term = relu(neg(S) * sign(slope_pred)) + relu(abs(slope_pred) * I - cal.r_p95);
        c_trend = reduce_last(G * term, Reduce::mean);
    }

    // --- autocorr ---
    Tensor c_autocorr = Tensor::zeros({B});
    if (cal.rho_reliable && H >= 3) {
        auto a = slice_last(xh, 0, H - 1);
        auto b = slice_last(xh, 1, H - 1);
        auto ma = reshape(reduce_last(a, Reduce::mean), {B, d, std::size_t(1)});
        auto mb = reshape(reduce_last(b, Reduce::mean), {B, d, std::size_t(1)});
        auto cov = reduce_last((a - ma) * (b - mb), Reduce::mean);
        auto sa = clamp(sqrt(reduce_last(a, Reduce::var) + 1e-300), kSigmaFloor, 1e300);
        auto sb = clamp(sqrt(reduce_last(b, Reduce::var) + 1e-300), kSigmaFloor, 1e300);
        auto rho = cov / (sa * sb);
        c_autocorr = reduce_last(relu(abs(rho - cal.mu_rho) / cal.sigma_rho - cal.z_rho_p95) +
                                     relu(cal.rho_p05 - rho),
                                 Reduce::mean);
    }

    // --- multiscale ---
    Tensor c_multiscale = Tensor::zeros({B});
    for (std::size_t i = 0; i < kScales.size(); ++i) {
        const std::size_t s = kScales[i];
        const std::size_t nb = H / s;
        if (!cal.scales[i].reliable || nb < 2) continue;
        std::vector<double> pool(H * nb, 0.0);
        for (std::size_t blk = 0; blk < nb; ++blk)
            for (std::size_t j = 0; j < s; ++j)
                pool[(blk * s + j) * nb + blk] = 1.0 / static_cast<double>(s);
        auto m = matmul(xh, Tensor::from({H, nb}, std::move(pool)));  // [B,d,nb]
        auto g = reduce_last(abs(slice_last(m, 1, nb - 1) - slice_last(m, 0, nb - 1)),
                             Reduce::mean);  // [B,d]
        c_multiscale =
            c_multiscale + reduce_last(relu(abs(g - cal.scales[i].mu) / cal.scales[i].sigma -
                                            cal.scales[i].z_p95),
                                       Reduce::mean);
    }

    // --- dynamic: gate and input variance are constants ---
    Tensor c_dynamic = Tensor::zeros({B});
    if (cal.dynamic_reliable) {
        std::vector<double> gate(B * d), log_var_in(B * d);
        const auto& xin = Xinput.data();
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t v = 0; v < d; ++v) {
                std::vector<double> col(L);
                for (std::size_t t = 0; t < L; ++t) col[t] = xin[(b * L + t) * d + v];
                const double vin = stats::var(col.data(), L);
                gate[b * d + v] = vin > cal.tau_var ? 1.0 : 0.0;
                log_var_in[b * d + v] = std::log(std::max(vin, kSigmaFloor));
            }
        auto G = Tensor::from({B, d}, std::move(gate));
        auto LV = Tensor::from({B, d}, std::move(log_var_in));
        auto var_h = clamp(reduce_last(xh, Reduce::var), kSigmaFloor, 1e300);
        c_dynamic = reduce_last(G * relu(abs(log(var_h) - LV) - cal.gamma_p95), Reduce::mean);
    }

    auto total = w.target * c_target + w.gradient * c_gradient + w.scale * c_scale +
                 w.boundary * c_boundary + w.trend * c_trend + w.autocorr * c_autocorr +
                 w.multiscale * c_multiscale + w.dynamic * c_dynamic;
    (void)dd;
    return reduce_last(total, Reduce::mean);  // scalar
}

}  // namespace graph

}  // namespace geocert::constraints
