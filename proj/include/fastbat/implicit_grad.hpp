#pragma once

#include <string>
#include <vector>

#include "fastbat/constraints.hpp"
#include "fastbat/diff_ops.hpp"

namespace fastbat {

enum class IgModeKind { kHessianFree, kHessianAware };

IgModeKind ig_mode_from_string(const std::string& s);
std::string to_string(IgModeKind m);

struct IgMode {
    IgModeKind mode = IgModeKind::kHessianFree;
    double cg_tol = 1e-10;   // relative residual target (aware mode)
    int cg_max_iters = 500;  // aware mode

    void validate() const;
};

// Hessian-free implicit-gradient-vector product: for per-example rows v
// ([B,d], typically the per-example grad_delta of l_tr at delta*), returns
// the theta-shaped batch-mean product
//   -(1/lambda) * mixed_partial_apply(l_atk, theta, delta*, H_C v).
std::vector<double> ig_vp_free(const Objective& attack_loss, const ParamVector& theta,
                               const TensorData& delta_star, const TensorData& v,
                               const ActiveMask& mask, double lambda);

// Hessian-aware product: u = (grad^2_delta l_atk + lambda I)^{-1} v via
// matrix-free conjugate gradients, followed by the dense active-set
// correction u - H^{-1} B0^T [B0 H^{-1} B0^T]^{-1} B0 u, then
// -mixed_partial_apply(l_atk, theta, delta*, corrected u).
// Throws NumericError if CG stalls or detects negative curvature.
std::vector<double> ig_vp_aware(const Objective& attack_loss, const ParamVector& theta,
                                const TensorData& delta_star, const TensorData& v,
                                const ActiveMask& mask, double lambda, const IgMode& cfg);

// Forward-mode Hessian-aware IG: the delta-shaped directional derivative
// (d delta*/d theta) w for a theta-direction w, with the same active-set
// correction. Validated against fd_lower_level_sensitivity.
TensorData ig_forward_aware(const Objective& attack_loss, const ParamVector& theta,
                            const TensorData& delta_star, const std::vector<double>& w,
                            const ActiveMask& mask, double lambda, const IgMode& cfg);

// Full upper-level gradient (stochastic gradient of the batch objective):
// solves the lower level at linearization point z, then returns
// grad_theta l_tr(theta, delta*) plus the selected IG-vector product applied
// to the per-example rows of grad_delta l_tr.
std::vector<double> total_upper_gradient(const Objective& train_loss, const Objective& attack_loss,
                                         const ParamVector& theta, const TensorData& z,
                                         double lambda, const ConstraintBox& box, const IgMode& cfg);

// Matrix-free CG solve of (per-example Hessian of l_atk + lambda I) u = rhs.
// Exposed for the oracle suite.
TensorData cg_solve_attack_hessian(const Objective& attack_loss, const ParamVector& theta,
                                   const TensorData& delta_star, const TensorData& rhs,
                                   double lambda, const IgMode& cfg);

} // namespace fastbat
