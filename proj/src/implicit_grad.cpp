#include "fastbat/implicit_grad.hpp"

#include <algorithm>
#include <cmath>

#include "fastbat/attacks.hpp"

namespace fastbat {

IgModeKind ig_mode_from_string(const std::string& s) {
    if (s == "hessian_free") return IgModeKind::kHessianFree;
    if (s == "hessian_aware") return IgModeKind::kHessianAware;
    throw ContractError("unknown ig mode '" + s + "'");
}

std::string to_string(IgModeKind m) {
    return m == IgModeKind::kHessianFree ? "hessian_free" : "hessian_aware";
}

void IgMode::validate() const {
    if (mode == IgModeKind::kHessianAware && (cg_tol <= 0.0 || cg_max_iters < 1))
        throw ContractError("IgMode: cg_tol > 0 and cg_max_iters >= 1 required in aware mode");
}

std::vector<double> ig_vp_free(const Objective& attack_loss, const ParamVector& theta,
                               const TensorData& delta_star, const TensorData& v,
                               const ActiveMask& mask, double lambda) {
    if (lambda <= 0.0) throw ContractError("ig_vp_free: lambda must be positive");
    TensorData masked = hc_apply(v, mask);
    std::vector<double> out = mixed_partial_apply(attack_loss, theta, delta_star, masked);
    for (double& x : out) x *= -1.0 / lambda;
    return out;
}

namespace {

double vdot(const TensorData& a, const TensorData& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) s += a.data[i] * b.data[i];
    return s;
}

// Dense solve by Gaussian elimination with partial pivoting; the active-set
// systems are tiny (at most d per example).
std::vector<double> dense_solve(std::vector<std::vector<double>> m, std::vector<double> rhs) {
    const int n = static_cast<int>(rhs.size());
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
        if (std::abs(m[piv][col]) < 1e-300)
            throw NumericError("dense_solve: singular active-set system");
        std::swap(m[col], m[piv]);
        std::swap(rhs[col], rhs[piv]);
        for (int r = col + 1; r < n; ++r) {
            const double f = m[r][col] / m[col][col];
            if (f == 0.0) continue;
            for (int c = col; c < n; ++c) m[r][c] -= f * m[col][c];
            rhs[r] -= f * rhs[col];
        }
    }
    std::vector<double> x(n);
    for (int r = n - 1; r >= 0; --r) {
        double s = rhs[r];
        for (int c = r + 1; c < n; ++c) s -= m[r][c] * x[c];
        x[r] = s / m[r][r];
    }
    return x;
}

} // namespace

TensorData cg_solve_attack_hessian(const Objective& attack_loss, const ParamVector& theta,
                                   const TensorData& delta_star, const TensorData& rhs,
                                   double lambda, const IgMode& cfg) {
    const double b = delta_star.shape.empty() ? 1.0 : static_cast<double>(delta_star.shape[0]);
    auto apply_h = [&](const TensorData& u) {
        TensorData hu = hvp_delta(attack_loss, theta, delta_star, u);
        for (size_t i = 0; i < hu.data.size(); ++i)
            hu.data[i] = b * hu.data[i] + lambda * u.data[i];
        return hu;
    };

    TensorData x = TensorData::zeros(rhs.shape);
    TensorData r = rhs;
    TensorData p = r;
    double rr = vdot(r, r);
    const double target = cfg.cg_tol * std::max(1.0, std::sqrt(vdot(rhs, rhs)));
    if (std::sqrt(rr) <= target) return x;
    for (int it = 0; it < cfg.cg_max_iters; ++it) {
        TensorData hp = apply_h(p);
        const double php = vdot(p, hp);
        if (php <= 0.0)
            throw NumericError("cg_solve_attack_hessian: negative curvature detected; the "
                               "lower-level objective is not strongly convex here - increase lambda");
        const double alpha = rr / php;
        for (size_t i = 0; i < x.data.size(); ++i) {
            x.data[i] += alpha * p.data[i];
            r.data[i] -= alpha * hp.data[i];
        }
        const double rr_new = vdot(r, r);
        if (std::sqrt(rr_new) <= target) return x;
        const double beta = rr_new / rr;
        rr = rr_new;
        for (size_t i = 0; i < p.data.size(); ++i) p.data[i] = r.data[i] + beta * p.data[i];
    }
    throw NumericError("cg_solve_attack_hessian: no convergence within " +
                       std::to_string(cfg.cg_max_iters) + " iterations (residual above tolerance)");
}

namespace {

// Active-set correction u <- u - H^{-1} B0^T [B0 H^{-1} B0^T]^{-1} B0 u.
// B0 rows are signed coordinate basis vectors; the signs cancel, so the
// correction only needs the active coordinate indices.
TensorData active_set_correct(const Objective& attack_loss, const ParamVector& theta,
                              const TensorData& delta_star, const TensorData& u,
                              const ActiveMask& mask, double lambda, const IgMode& cfg) {
    std::vector<size_t> active;
    for (size_t i = 0; i < mask.interior.data.size(); ++i)
        if (mask.interior.data[i] == 0.0) active.push_back(i);
    if (active.empty()) return u;
    const size_t na = active.size();

    // Columns of H^{-1} E^T, one CG solve per active coordinate.
    std::vector<TensorData> hinv_cols;
    hinv_cols.reserve(na);
    for (size_t j : active) {
        TensorData e = TensorData::zeros(u.shape);
        e.data[j] = 1.0;
        hinv_cols.push_back(cg_solve_attack_hessian(attack_loss, theta, delta_star, e, lambda, cfg));
    }

    std::vector<std::vector<double>> m(na, std::vector<double>(na));
    std::vector<double> rhs(na);
    for (size_t k = 0; k < na; ++k) {
        for (size_t j = 0; j < na; ++j) m[k][j] = hinv_cols[j].data[active[k]];
        rhs[k] = u.data[active[k]];
    }
    std::vector<double> y = dense_solve(std::move(m), std::move(rhs));

    TensorData out = u;
    for (size_t j = 0; j < na; ++j)
        for (size_t i = 0; i < out.data.size(); ++i)
            out.data[i] -= hinv_cols[j].data[i] * y[j];
    return out;
}

} // namespace

std::vector<double> ig_vp_aware(const Objective& attack_loss, const ParamVector& theta,
                                const TensorData& delta_star, const TensorData& v,
                                const ActiveMask& mask, double lambda, const IgMode& cfg) {
    if (lambda <= 0.0) throw ContractError("ig_vp_aware: lambda must be positive");
    cfg.validate();
    TensorData u = cg_solve_attack_hessian(attack_loss, theta, delta_star, v, lambda, cfg);
    u = active_set_correct(attack_loss, theta, delta_star, u, mask, lambda, cfg);
    std::vector<double> out = mixed_partial_apply(attack_loss, theta, delta_star, u);
    for (double& x : out) x *= -1.0;
    return out;
}

TensorData ig_forward_aware(const Objective& attack_loss, const ParamVector& theta,
                            const TensorData& delta_star, const std::vector<double>& w,
                            const ActiveMask& mask, double lambda, const IgMode& cfg) {
    if (lambda <= 0.0) throw ContractError("ig_forward_aware: lambda must be positive");
    cfg.validate();
    // Per-example mixed product (grad_{delta theta} l_atk) w.
    TensorData mw = mixed_theta_to_delta(attack_loss, theta, delta_star, w);
    const double b = delta_star.shape.empty() ? 1.0 : static_cast<double>(delta_star.shape[0]);
    for (double& x : mw.data) x *= b;
    TensorData r = cg_solve_attack_hessian(attack_loss, theta, delta_star, mw, lambda, cfg);
    r = active_set_correct(attack_loss, theta, delta_star, r, mask, lambda, cfg);
    for (double& x : r.data) x *= -1.0;
    return r;
}

std::vector<double> total_upper_gradient(const Objective& train_loss, const Objective& attack_loss,
                                         const ParamVector& theta, const TensorData& z,
                                         double lambda, const ConstraintBox& box, const IgMode& cfg) {
    TensorData delta_star = lower_level_solve(attack_loss, theta, z, lambda, box);
    ActiveMask mask = active_mask(delta_star, box);

    ValueAndGrads vg = value_and_grad(train_loss, theta, delta_star);
    TensorData v = vg.grad_delta; // per-example rows
    const double b = v.shape.empty() ? 1.0 : static_cast<double>(v.shape[0]);
    for (double& x : v.data) x *= b;

    std::vector<double> ig = cfg.mode == IgModeKind::kHessianFree
                                 ? ig_vp_free(attack_loss, theta, delta_star, v, mask, lambda)
                                 : ig_vp_aware(attack_loss, theta, delta_star, v, mask, lambda, cfg);
    std::vector<double> out = vg.grad_theta;
    axpy(1.0, ig, out);
    return out;
}

} // namespace fastbat
