#pragma once

#include "fastbat/tensor.hpp"

namespace fastbat {

// Per-coordinate feasible box for perturbation rows:
// p_i = max(-eps, -x_i), q_i = min(eps, 1 - x_i), so that
// ||delta||_inf <= eps and x + delta stays in [0, 1].
struct ConstraintBox {
    TensorData p;
    TensorData q;
    double epsilon = 0.0;
};

// Strict-interior indicator per coordinate; the complement is the active set.
struct ActiveMask {
    TensorData interior; // 0/1, delta-shaped
};

// Default tolerance used when classifying boundary coordinates.
double default_active_tol(double epsilon);

// Rejects x outside [0,1]; does not clamp silently.
ConstraintBox build_box(const TensorData& x, double epsilon);

// Elementwise clamp to [p, q] (the Euclidean projection for a separable box).
TensorData project(const TensorData& v, const ConstraintBox& box);

// interior_i = 1 iff p_i + tau < delta_i < q_i - tau. Degenerate coordinates
// (p_i == q_i) are always active. delta must satisfy the box within tau.
ActiveMask active_mask(const TensorData& delta, const ConstraintBox& box, double tau);
ActiveMask active_mask(const TensorData& delta, const ConstraintBox& box);

// v .* interior, i.e. (I - B0^T B0) v with B0 the active rows of [I; -I].
TensorData hc_apply(const TensorData& v, const ActiveMask& mask);

} // namespace fastbat
