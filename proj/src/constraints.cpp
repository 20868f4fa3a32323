#include "fastbat/constraints.hpp"

#include <algorithm>
#include <cmath>

namespace fastbat {

double default_active_tol(double epsilon) { return 1e-8 * std::max(1.0, epsilon); }

ConstraintBox build_box(const TensorData& x, double epsilon) {
    if (epsilon < 0.0) throw ContractError("build_box: epsilon must be >= 0");
    for (double v : x.data)
        if (!(v >= 0.0 && v <= 1.0))
            throw ContractError("build_box: x has entry " + std::to_string(v) + " outside [0,1]");
    ConstraintBox box;
    box.epsilon = epsilon;
    box.p = x;
    box.q = x;
    for (size_t i = 0; i < x.data.size(); ++i) {
        box.p.data[i] = std::max(-epsilon, -x.data[i]);
        box.q.data[i] = std::min(epsilon, 1.0 - x.data[i]);
    }
    return box;
}

TensorData project(const TensorData& v, const ConstraintBox& box) {
    if (!v.same_shape(box.p))
        throw ContractError("project: shape mismatch " + shape_str(v.shape) + " vs box " +
                            shape_str(box.p.shape));
    TensorData out = v;
    for (size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = std::clamp(out.data[i], box.p.data[i], box.q.data[i]);
    return out;
}

ActiveMask active_mask(const TensorData& delta, const ConstraintBox& box, double tau) {
    if (!delta.same_shape(box.p)) throw ContractError("active_mask: shape mismatch");
    ActiveMask m;
    m.interior = TensorData::zeros(delta.shape);
    for (size_t i = 0; i < delta.data.size(); ++i) {
        const double d = delta.data[i], p = box.p.data[i], q = box.q.data[i];
        if (d < p - tau || d > q + tau)
            throw ContractError("active_mask: delta violates box beyond tolerance at index " +
                                std::to_string(i));
        if (p == q) continue; // zero feasible width: permanently active
        m.interior.data[i] = (d > p + tau && d < q - tau) ? 1.0 : 0.0;
    }
    return m;
}

ActiveMask active_mask(const TensorData& delta, const ConstraintBox& box) {
    return active_mask(delta, box, default_active_tol(box.epsilon));
}

TensorData hc_apply(const TensorData& v, const ActiveMask& mask) {
    if (!v.same_shape(mask.interior)) throw ContractError("hc_apply: shape mismatch");
    TensorData out = v;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= mask.interior.data[i];
    return out;
}

} // namespace fastbat
