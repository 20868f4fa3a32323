#include "fastbat/oracle.hpp"

#include <algorithm>
#include <cmath>

#include "fastbat/rng.hpp"

namespace fastbat::oracle {

double default_fd_step(double inf_norm_of_point) { return 1e-5 * std::max(1.0, inf_norm_of_point); }

std::vector<double> fd_grad_theta(const Objective& f, const ParamVector& theta,
                                  const TensorData& delta, double h) {
    if (h <= 0.0) throw ContractError("fd_grad_theta: h must be positive");
    ParamVector t = theta;
    std::vector<double> g(static_cast<size_t>(theta.size()));
    for (int64_t i = 0; i < theta.size(); ++i) {
        const double orig = t.values()[i];
        t.values()[i] = orig + h;
        const double fp = value_of(f, t, delta);
        t.values()[i] = orig - h;
        const double fm = value_of(f, t, delta);
        t.values()[i] = orig;
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

TensorData fd_grad_delta(const Objective& f, const ParamVector& theta, const TensorData& delta,
                         double h) {
    if (h <= 0.0) throw ContractError("fd_grad_delta: h must be positive");
    TensorData d = delta;
    TensorData g = TensorData::zeros(delta.shape);
    for (size_t i = 0; i < d.data.size(); ++i) {
        const double orig = d.data[i];
        d.data[i] = orig + h;
        const double fp = value_of(f, theta, d);
        d.data[i] = orig - h;
        const double fm = value_of(f, theta, d);
        d.data[i] = orig;
        g.data[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

TensorData fd_hvp_delta(const Objective& f, const ParamVector& theta, const TensorData& delta,
                        const TensorData& v, double h) {
    TensorData dp = delta, dm = delta;
    for (size_t i = 0; i < delta.data.size(); ++i) {
        dp.data[i] += h * v.data[i];
        dm.data[i] -= h * v.data[i];
    }
    TensorData gp = grad_delta(f, theta, dp);
    TensorData gm = grad_delta(f, theta, dm);
    for (size_t i = 0; i < gp.data.size(); ++i) gp.data[i] = (gp.data[i] - gm.data[i]) / (2.0 * h);
    return gp;
}

std::vector<double> fd_mixed_partial(const Objective& f, const ParamVector& theta,
                                     const TensorData& delta, const TensorData& v, double h) {
    TensorData dp = delta, dm = delta;
    for (size_t i = 0; i < delta.data.size(); ++i) {
        dp.data[i] += h * v.data[i];
        dm.data[i] -= h * v.data[i];
    }
    std::vector<double> gp = grad_theta(f, theta, dp);
    std::vector<double> gm = grad_theta(f, theta, dm);
    for (size_t i = 0; i < gp.size(); ++i) gp[i] = (gp[i] - gm[i]) / (2.0 * h);
    return gp;
}

TensorData pgd_minimize(const GradField& grad, const ConstraintBox& box, const TensorData& init,
                        double step, int iters) {
    TensorData d = project(init, box);
    for (int it = 0; it < iters; ++it) {
        TensorData g = grad(d);
        for (size_t i = 0; i < d.data.size(); ++i) d.data[i] -= step * g.data[i];
        d = project(d, box);
    }
    return d;
}

namespace {

// Per-example gradient of a batch-mean objective: examples are independent,
// so scaling by the batch size recovers each row's own gradient.
TensorData per_example_grad_delta(const Objective& f, const ParamVector& theta,
                                  const TensorData& delta) {
    TensorData g = grad_delta(f, theta, delta);
    const double b = g.shape.empty() ? 1.0 : static_cast<double>(g.shape[0]);
    for (double& v : g.data) v *= b;
    return g;
}

} // namespace

TensorData sign_linearized_solve(const Objective& attack_loss, const ParamVector& theta,
                                 const TensorData& z, double lambda, const ConstraintBox& box) {
    if (lambda <= 0.0) throw ContractError("sign_linearized_solve: lambda must be positive");
    TensorData g = grad_delta(attack_loss, theta, z); // sign is scale-invariant per row
    TensorData d = z;
    for (size_t i = 0; i < d.data.size(); ++i) {
        const double s = g.data[i] > 0.0 ? 1.0 : (g.data[i] < 0.0 ? -1.0 : 0.0);
        d.data[i] -= s / lambda;
    }
    return project(d, box);
}

TensorData proximal_solve(const Objective& attack_loss, const ParamVector& theta,
                          const TensorData& z, double lambda, const ConstraintBox& box, double tol,
                          int max_iters) {
    if (lambda <= 0.0) throw ContractError("proximal_solve: lambda must be positive");
    TensorData d = project(z, box);
    const double step = 0.5 / lambda;
    for (int it = 0; it < max_iters; ++it) {
        TensorData g = per_example_grad_delta(attack_loss, theta, d);
        TensorData next = d;
        for (size_t i = 0; i < d.data.size(); ++i)
            next.data[i] -= step * (g.data[i] + lambda * (d.data[i] - z.data[i]));
        next = project(next, box);
        double move = 0.0;
        for (size_t i = 0; i < d.data.size(); ++i)
            move = std::max(move, std::abs(next.data[i] - d.data[i]));
        d = std::move(next);
        if (move < tol) break;
    }
    return d;
}

SensitivityResult fd_lower_level_sensitivity(const LowerSolver& solver, const ParamVector& theta,
                                             const std::vector<double>& w, double h,
                                             const ConstraintBox& box) {
    ParamVector tp = theta, tm = theta;
    axpy(+h, w, tp.values());
    axpy(-h, w, tm.values());
    TensorData dp = solver(tp);
    TensorData dm = solver(tm);
    TensorData d0 = solver(theta);

    SensitivityResult res;
    res.directional = dp;
    for (size_t i = 0; i < dp.data.size(); ++i)
        res.directional.data[i] = (dp.data[i] - dm.data[i]) / (2.0 * h);

    const auto m0 = active_mask(d0, box).interior;
    const auto mp = active_mask(dp, box).interior;
    const auto mm = active_mask(dm, box).interior;
    res.active_set_stable = (m0.data == mp.data) && (m0.data == mm.data);
    return res;
}

double hessian_norm_probe(const Objective& attack_loss, const ParamVector& theta,
                          const TensorData& delta, int probes, uint64_t seed) {
    if (probes < 1) throw ContractError("hessian_norm_probe: probes must be >= 1");
    Rng rng(seed);
    const double b = delta.shape.empty() ? 1.0 : static_cast<double>(delta.shape[0]);
    TensorData v = TensorData::zeros(delta.shape);
    for (double& x : v.data) x = rng.next_gauss();
    double nv = 0.0;
    for (double x : v.data) nv += x * x;
    nv = std::sqrt(nv);
    if (nv == 0.0) return 0.0;
    for (double& x : v.data) x /= nv;

    double est = 0.0;
    for (int it = 0; it < probes; ++it) {
        TensorData hv = hvp_delta(attack_loss, theta, delta, v);
        for (double& x : hv.data) x *= b; // per-example Hessian
        double n = 0.0;
        for (double x : hv.data) n += x * x;
        n = std::sqrt(n);
        est = n;
        if (n < 1e-300) return 0.0;
        for (size_t i = 0; i < v.data.size(); ++i) v.data[i] = hv.data[i] / n;
    }
    return est;
}

ConvergenceSummary convergence_monitor(const std::vector<double>& hist) {
    if (hist.empty()) throw ContractError("convergence_monitor: history is empty");
    ConvergenceSummary s;
    const size_t T = hist.size();
    const size_t half = std::max<size_t>(1, T / 2);
    double sum = 0.0, sum_half = 0.0;
    s.running_min = hist[0];
    for (size_t i = 0; i < T; ++i) {
        sum += hist[i];
        if (i < half) sum_half += hist[i];
        s.running_min = std::min(s.running_min, hist[i]);
    }
    s.avg_full = sum / static_cast<double>(T);
    s.avg_half = sum_half / static_cast<double>(half);
    s.ratio = s.avg_half != 0.0 ? s.avg_full / s.avg_half : 1.0;
    return s;
}

} // namespace fastbat::oracle
