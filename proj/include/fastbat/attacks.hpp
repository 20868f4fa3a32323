#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fastbat/constraints.hpp"
#include "fastbat/diff_ops.hpp"
#include "fastbat/model.hpp"
#include "fastbat/rng.hpp"

namespace fastbat {

enum class LinearizationKind { kUniformRandom, kRandomCorner, kOneStepSignPgd, kOneStepPgdNoSign };

LinearizationKind linearization_from_string(const std::string& s);
std::string to_string(LinearizationKind k);

struct LinearizationScheme {
    LinearizationKind kind = LinearizationKind::kOneStepPgdNoSign;
    double step = 0.0; // warm-up kinds only; <= 0 means "use 1/lambda"
};

struct PgdConfig {
    int steps = 1;
    int restarts = 1;
    double step_size = 0.0;
    uint64_t rng_seed = 0;

    void validate() const;
};

// Per-example gradient rows of a batch-mean objective w.r.t. delta.
TensorData per_example_grad_delta(const Objective& f, const ParamVector& theta,
                                  const TensorData& delta);

// Uniform draw from the box, one independent stream per example row.
TensorData uniform_in_box(const ConstraintBox& box, Rng rng);

// One-step sign attack: project(delta0 + alpha sign(grad_delta l_tr)).
TensorData sign_step(const Objective& train_loss, const ParamVector& theta, const TensorData& delta0,
                     double alpha, const ConstraintBox& box);

// Exact minimizer of the first-order-linearized proximal lower level:
// project(z - (1/lambda) grad_delta l_atk(theta, x+z)) with per-example
// gradients.
TensorData lower_level_solve(const Objective& attack_loss, const ParamVector& theta,
                             const TensorData& z, double lambda, const ConstraintBox& box);

struct PgdResult {
    TensorData delta;               // per-example worst perturbation
    std::vector<double> loss;       // per-example achieved l_tr
};

// Multi-step multi-restart evaluation PGD maximizing cross-entropy. Restart r
// uses the child stream ("pgd_restart", r), so best-of-(r+1) extends
// best-of-r chains.
PgdResult pgd_attack(const Mlp& model, const ParamVector& theta, const TensorData& x,
                     const std::vector<int>& y, const ConstraintBox& box, const PgdConfig& cfg);

// The four linearization-point schemes; warm-up kinds consume the attack /
// train objectives.
TensorData make_linearization_point(const LinearizationScheme& scheme, const Objective& train_loss,
                                    const Objective& attack_loss, const ParamVector& theta,
                                    const ConstraintBox& box, double lambda, Rng rng);

} // namespace fastbat
