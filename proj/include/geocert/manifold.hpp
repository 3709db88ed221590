#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace geocert::manifold {

// Poincaré ball with curvature K = -1. Points are plain coordinate vectors
// kept strictly inside the unit ball by a numerical margin.
inline constexpr double kBallMargin = 1e-7;
inline constexpr double kMaxRadius = 0.999;  // feasible-projection radius cap

using Vec = std::vector<double>;

inline double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm(const Vec& a) { return std::sqrt(dot(a, a)); }

inline Vec scaled(const Vec& a, double c) {
    Vec out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * c;
    return out;
}

inline Vec axpy(const Vec& a, const Vec& b, double ca, double cb) {
    Vec out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = ca * a[i] + cb * b[i];
    return out;
}

struct PoincarePoint {
    Vec coords;

    double radius() const { return norm(coords); }
};

struct TangentVector {
    PoincarePoint base;
    Vec direction;
};

/// Renormalize onto the numerical ball: ||z|| <= 1 - margin.
inline PoincarePoint clip_to_ball(Vec z) {
    const double r = norm(z);
    const double rmax = 1.0 - kBallMargin;
    if (r > rmax) z = scaled(z, rmax / r);
    return {std::move(z)};
}

/// z = h / (1 + sqrt(1 + ||h||^2)); strictly inside the ball for finite h.
inline PoincarePoint project_to_ball(const Vec& h) {
    for (double x : h)
        if (!std::isfinite(x)) throw std::invalid_argument("project_to_ball: non-finite input");
    const double r2 = dot(h, h);
    const double denom = 1.0 + std::sqrt(1.0 + r2);
    return clip_to_ball(scaled(h, 1.0 / denom));
}

inline void check_inside(const PoincarePoint& p, const char* what) {
    if (p.radius() >= 1.0) throw std::invalid_argument(std::string(what) + ": point not inside ball");
}

inline double hyp_dist(const PoincarePoint& a, const PoincarePoint& b) {
    check_inside(a, "hyp_dist");
    check_inside(b, "hyp_dist");
    double d2 = 0.0;
    for (std::size_t i = 0; i < a.coords.size(); ++i) {
        const double d = a.coords[i] - b.coords[i];
        d2 += d * d;
    }
    const double na = dot(a.coords, a.coords);
    const double nb = dot(b.coords, b.coords);
    double arg = 1.0 + 2.0 * d2 / ((1.0 - na) * (1.0 - nb));
    if (arg < 1.0) arg = 1.0;
    return std::acosh(arg);
}

/// Möbius addition a ⊕ b on the curvature -1 ball.
inline Vec mobius_add(const Vec& a, const Vec& b) {
    const double ab = dot(a, b);
    const double na = dot(a, a);
    const double nb = dot(b, b);
    const double denom = 1.0 + 2.0 * ab + na * nb;
    const double ca = (1.0 + 2.0 * ab + nb) / denom;
    const double cb = (1.0 - na) / denom;
    return axpy(a, b, ca, cb);
}

inline double conformal_factor(const PoincarePoint& p) {
    return 2.0 / (1.0 - dot(p.coords, p.coords));
}

// exp_p(v) = p ⊕ tanh(||v||/2) v/||v||; the convention that makes
// exp_0(log_0(x)) the closed-form feasible projection (identity on the ball).
inline PoincarePoint exp_map(const PoincarePoint& p, const Vec& v) {
    check_inside(p, "exp_map");
    const double nv = norm(v);
    if (nv < 1e-300) return p;
    const double t = std::tanh(nv / 2.0);
    return clip_to_ball(mobius_add(p.coords, scaled(v, t / nv)));
}

inline TangentVector log_map(const PoincarePoint& p, const PoincarePoint& q) {
    check_inside(p, "log_map");
    check_inside(q, "log_map");
    const Vec w = mobius_add(scaled(p.coords, -1.0), q.coords);
    const double nw = norm(w);
    if (nw < 1e-300) return {p, Vec(p.coords.size(), 0.0)};
    const double c = 2.0 * std::atanh(std::min(nw, 1.0 - 1e-15)) / nw;
    return {p, scaled(w, c)};
}

/// Riemannian descent step: exp_z(-tau * grad^R) where the Euclidean gradient
/// is converted with the inverse conformal metric factor ((1-||z||^2)/2)^2.
inline PoincarePoint geodesic_constraint_step(const PoincarePoint& z, const Vec& euclidean_grad,
                                              double tau) {
    if (tau <= 0.0) throw std::invalid_argument("geodesic_constraint_step: tau must be positive");
    const double f = (1.0 - dot(z.coords, z.coords)) / 2.0;
    return exp_map(z, scaled(euclidean_grad, -tau * f * f));
}

/// Closed-form feasible projection Π(x) = tanh(||v||/2) v/||v||, v = log_0(x),
/// composed with the radius cap so that Π is idempotent.
inline PoincarePoint feasible_projection(const PoincarePoint& x) {
    check_inside(x, "feasible_projection");
    const double r = x.radius();
    if (r < 1e-300) return x;  // v = 0 convention: origin maps to origin
    const double vnorm = 2.0 * std::atanh(std::min(r, 1.0 - 1e-15));
    const double target = std::min(std::tanh(vnorm / 2.0), kMaxRadius);
    return {scaled(x.coords, target / r)};
}

/// Euclidean gradient of hyp_dist(p, q)^2 with respect to p.
inline Vec dist_sq_grad(const PoincarePoint& p, const PoincarePoint& q) {
    const double np = dot(p.coords, p.coords);
    const double nq = dot(q.coords, q.coords);
    double d2 = 0.0;
    for (std::size_t i = 0; i < p.coords.size(); ++i) {
        const double d = p.coords[i] - q.coords[i];
        d2 += d * d;
    }
    const double ap = 1.0 - np;
    const double aq = 1.0 - nq;
    const double u = 1.0 + 2.0 * d2 / (ap * aq);
    const double dist = std::acosh(std::max(u, 1.0));
    // d(dist^2)/du = 2*dist / sqrt(u^2 - 1); bounded as u -> 1+
    const double denom = std::sqrt(std::max(u * u - 1.0, 1e-30));
    const double c = 2.0 * dist / denom;
    // du/dp = (4/(ap*aq)) * (p - q) + (4*d2/(ap^2*aq)) * p
    Vec g(p.coords.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double diff = p.coords[i] - q.coords[i];
        g[i] = c * (4.0 / (ap * aq) * diff + 4.0 * d2 / (ap * ap * aq) * p.coords[i]);
    }
    return g;
}

/// Geometry switch used by constraints and certification; the Euclidean
/// variant backs the ablation where manifold operations are replaced by an
/// identity embedding and flat distances.
struct Geometry {
    bool hyperbolic = true;

    PoincarePoint embed(const Vec& h) const {
        if (hyperbolic) return project_to_ball(h);
        return {h};
    }

    /// Inverse of embed: z = h/(1+sqrt(1+|h|^2)) solves to h = 2z/(1-|z|^2).
    Vec unembed(const PoincarePoint& z) const {
        if (!hyperbolic) return z.coords;
        double r2 = 0.0;
        for (double x : z.coords) r2 += x * x;
        const double c = 2.0 / std::max(1.0 - r2, 1e-15);
        Vec h(z.coords.size());
        for (std::size_t i = 0; i < h.size(); ++i) h[i] = c * z.coords[i];
        return h;
    }

    double dist(const PoincarePoint& a, const PoincarePoint& b) const {
        if (hyperbolic) return hyp_dist(a, b);
        double d2 = 0.0;
        for (std::size_t i = 0; i < a.coords.size(); ++i) {
            const double d = a.coords[i] - b.coords[i];
            d2 += d * d;
        }
        return std::sqrt(d2);
    }

    Vec dist_sq_grad_p(const PoincarePoint& p, const PoincarePoint& q) const {
        if (hyperbolic) return dist_sq_grad(p, q);
        Vec g(p.coords.size());
        for (std::size_t i = 0; i < g.size(); ++i) g[i] = 2.0 * (p.coords[i] - q.coords[i]);
        return g;
    }

    PoincarePoint step(const PoincarePoint& z, const Vec& egrad, double tau) const {
        if (hyperbolic) return geodesic_constraint_step(z, egrad, tau);
        Vec out(z.coords.size());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = z.coords[i] - tau * egrad[i];
        return {std::move(out)};
    }

    PoincarePoint project_feasible(const PoincarePoint& x) const {
        if (hyperbolic) return feasible_projection(x);
        return x;
    }

    Vec log(const PoincarePoint& p, const PoincarePoint& q) const {
        if (hyperbolic) return log_map(p, q).direction;
        Vec out(q.coords.size());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = q.coords[i] - p.coords[i];
        return out;
    }
};

}  // namespace geocert::manifold
