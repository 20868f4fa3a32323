#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "fastbat/constraints.hpp"
#include "fastbat/diff_ops.hpp"
#include "fastbat/param_vector.hpp"
#include "fastbat/tensor.hpp"

namespace fastbat::oracle {

// Independent validation machinery. Everything here is built from objective
// *values* (finite differences) or from first-order gradients that are
// themselves FD-validated, never from the second-order paths it checks.

double default_fd_step(double inf_norm_of_point);

// Central differences per theta coordinate.
std::vector<double> fd_grad_theta(const Objective& f, const ParamVector& theta,
                                  const TensorData& delta, double h);
// Central differences per delta coordinate.
TensorData fd_grad_delta(const Objective& f, const ParamVector& theta, const TensorData& delta,
                         double h);

// FD-of-gradient oracles for the second-order products:
// (grad_delta f(delta + h v) - grad_delta f(delta - h v)) / (2h)
TensorData fd_hvp_delta(const Objective& f, const ParamVector& theta, const TensorData& delta,
                        const TensorData& v, double h);
// (grad_theta f(delta + h v) - grad_theta f(delta - h v)) / (2h)
std::vector<double> fd_mixed_partial(const Objective& f, const ParamVector& theta,
                                     const TensorData& delta, const TensorData& v, double h);

// Generic projected gradient descent on an explicit per-example gradient
// field; the iterative minimizer used to validate closed-form solutions.
using GradField = std::function<TensorData(const TensorData& delta)>;
TensorData pgd_minimize(const GradField& grad, const ConstraintBox& box, const TensorData& init,
                        double step, int iters);

// Closed form of the sign-linearized lower-level problem:
// project(z - (1/lambda) sign(grad_delta l_atk(theta, x+z))), sign(0) = 0.
TensorData sign_linearized_solve(const Objective& attack_loss, const ParamVector& theta,
                                 const TensorData& z, double lambda, const ConstraintBox& box);

// High-precision minimizer of the proximal lower-level objective
//   l_atk(theta, x+delta) + (lambda/2) ||delta - z||^2  over the box,
// per example. This is the problem whose KKT sensitivity the Hessian-aware
// implicit gradient describes exactly.
TensorData proximal_solve(const Objective& attack_loss, const ParamVector& theta,
                          const TensorData& z, double lambda, const ConstraintBox& box,
                          double tol = 1e-12, int max_iters = 20000);

struct SensitivityResult {
    TensorData directional; // (delta*(theta+hw) - delta*(theta-hw)) / (2h)
    bool active_set_stable = false;
};

// FD directional derivative of a lower-level solver w.r.t. theta; the flag
// reports whether the active set was identical at theta +/- h w (comparisons
// are only meaningful when it is).
using LowerSolver = std::function<TensorData(const ParamVector& theta)>;
SensitivityResult fd_lower_level_sensitivity(const LowerSolver& solver,
                                             const ParamVector& theta,
                                             const std::vector<double>& w, double h,
                                             const ConstraintBox& box);

// Power-iteration estimate of ||grad^2_delta l_atk|| (spectral norm of the
// per-example attack Hessian) using Hessian-vector products.
double hessian_norm_probe(const Objective& attack_loss, const ParamVector& theta,
                          const TensorData& delta, int probes, uint64_t seed);

struct ConvergenceSummary {
    double avg_full = 0.0;    // (1/T) sum over all T entries
    double avg_half = 0.0;    // (1/(T/2)) sum over the first T/2 entries
    double ratio = 0.0;       // avg_full / avg_half
    double running_min = 0.0;
};

// Prefix averages of a squared-gradient-norm history.
ConvergenceSummary convergence_monitor(const std::vector<double>& grad_sq_history);

} // namespace fastbat::oracle
