#pragma once

#include <functional>
#include <vector>

#include "fastbat/param_vector.hpp"
#include "fastbat/tensor.hpp"

namespace fastbat {

// A recorded scalar objective of (theta, delta) for a fixed data batch:
// given theta leaf vars (one per ParamVector segment) and the delta leaf var
// ([B, d]), record the batch-mean loss on the tape and return it.
using Objective = std::function<Var(Tape&, const std::vector<Var>& theta, Var delta)>;

struct RecordedObjective {
    Tape tape;
    std::vector<ValueId> theta_ids;
    ValueId delta_id = -1;
    ValueId loss_id = -1;
};

// Records theta/delta as leaves and evaluates the objective.
RecordedObjective record(const Objective& f, const ParamVector& theta, const TensorData& delta);

// Flattens per-segment gradient nodes into a theta-length buffer.
std::vector<double> flatten_theta_grads(const Tape& tape, const ParamVector& layout,
                                        const std::vector<ValueId>& grads);

struct ValueAndGrads {
    double value = 0.0;
    std::vector<double> grad_theta; // flat, theta-shaped
    TensorData grad_delta;          // [B, d]
};

// Value and exact reverse-mode gradients w.r.t. theta and delta.
ValueAndGrads value_and_grad(const Objective& f, const ParamVector& theta, const TensorData& delta);

double value_of(const Objective& f, const ParamVector& theta, const TensorData& delta);
std::vector<double> grad_theta(const Objective& f, const ParamVector& theta, const TensorData& delta);
TensorData grad_delta(const Objective& f, const ParamVector& theta, const TensorData& delta);

// Hessian-vector product in delta: grad_delta of <grad_delta f, v>, exact
// grad-of-grad on a single tape. v must be delta-shaped.
TensorData hvp_delta(const Objective& f, const ParamVector& theta, const TensorData& delta,
                     const TensorData& v);

// Mixed second-order product: grad_theta of <grad_delta f, v>. Returns a flat
// theta-shaped buffer; batch-mean semantics follow f.
std::vector<double> mixed_partial_apply(const Objective& f, const ParamVector& theta,
                                        const TensorData& delta, const TensorData& v);

// Transposed mixed product: grad_delta of <grad_theta f, w> for a
// theta-direction w. Used by the forward-mode implicit-gradient path.
TensorData mixed_theta_to_delta(const Objective& f, const ParamVector& theta,
                                const TensorData& delta, const std::vector<double>& w);

} // namespace fastbat
