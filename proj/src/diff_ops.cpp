#include "fastbat/diff_ops.hpp"

namespace fastbat {

RecordedObjective record(const Objective& f, const ParamVector& theta, const TensorData& delta) {
    if (!delta.all_finite()) throw ContractError("record: delta contains non-finite values");
    if (!theta.all_finite()) throw ContractError("record: theta contains non-finite values");
    RecordedObjective r;
    std::vector<Var> theta_vars;
    theta_vars.reserve(theta.num_segments());
    for (int i = 0; i < theta.num_segments(); ++i) {
        ValueId id = r.tape.leaf(theta.unpack(i));
        r.theta_ids.push_back(id);
        theta_vars.emplace_back(r.tape, id);
    }
    r.delta_id = r.tape.leaf(delta);
    Var loss = f(r.tape, theta_vars, Var(r.tape, r.delta_id));
    if (loss.val().data.size() != 1)
        throw ContractError("objective must be scalar-valued, got " + shape_str(loss.val().shape));
    r.loss_id = loss.id;
    return r;
}

std::vector<double> flatten_theta_grads(const Tape& tape, const ParamVector& layout,
                                        const std::vector<ValueId>& grads) {
    std::vector<double> out(static_cast<size_t>(layout.size()), 0.0);
    for (int i = 0; i < layout.num_segments(); ++i) {
        const auto& g = tape.val(grads[i]);
        std::copy(g.data.begin(), g.data.end(), out.begin() + layout.segment(i).offset);
    }
    return out;
}

ValueAndGrads value_and_grad(const Objective& f, const ParamVector& theta, const TensorData& delta) {
    RecordedObjective r = record(f, theta, delta);
    std::vector<ValueId> wrt = r.theta_ids;
    wrt.push_back(r.delta_id);
    auto grads = r.tape.gradient(r.loss_id, wrt);
    ValueAndGrads out;
    out.value = r.tape.val(r.loss_id).item();
    out.grad_delta = r.tape.val(grads.back());
    grads.pop_back();
    out.grad_theta = flatten_theta_grads(r.tape, theta, grads);
    return out;
}

double value_of(const Objective& f, const ParamVector& theta, const TensorData& delta) {
    RecordedObjective r = record(f, theta, delta);
    return r.tape.val(r.loss_id).item();
}

std::vector<double> grad_theta(const Objective& f, const ParamVector& theta, const TensorData& delta) {
    RecordedObjective r = record(f, theta, delta);
    auto grads = r.tape.gradient(r.loss_id, r.theta_ids);
    return flatten_theta_grads(r.tape, theta, grads);
}

TensorData grad_delta(const Objective& f, const ParamVector& theta, const TensorData& delta) {
    RecordedObjective r = record(f, theta, delta);
    auto grads = r.tape.gradient(r.loss_id, std::vector<ValueId>{r.delta_id});
    return r.tape.val(grads[0]);
}

TensorData hvp_delta(const Objective& f, const ParamVector& theta, const TensorData& delta,
                     const TensorData& v) {
    if (!v.same_shape(delta))
        throw ContractError("hvp_delta: v shape " + shape_str(v.shape) + " != delta shape " +
                            shape_str(delta.shape));
    RecordedObjective r = record(f, theta, delta);
    ValueId g = r.tape.gradient(r.loss_id, std::vector<ValueId>{r.delta_id})[0];
    ValueId s = r.tape.sum_all(r.tape.mul(g, r.tape.leaf(v)));
    ValueId h = r.tape.gradient(s, std::vector<ValueId>{r.delta_id})[0];
    return r.tape.val(h);
}

std::vector<double> mixed_partial_apply(const Objective& f, const ParamVector& theta,
                                        const TensorData& delta, const TensorData& v) {
    if (!v.same_shape(delta))
        throw ContractError("mixed_partial_apply: v shape " + shape_str(v.shape) +
                            " != delta shape " + shape_str(delta.shape));
    RecordedObjective r = record(f, theta, delta);
    ValueId g = r.tape.gradient(r.loss_id, std::vector<ValueId>{r.delta_id})[0];
    ValueId s = r.tape.sum_all(r.tape.mul(g, r.tape.leaf(v)));
    auto grads = r.tape.gradient(s, r.theta_ids);
    return flatten_theta_grads(r.tape, theta, grads);
}

TensorData mixed_theta_to_delta(const Objective& f, const ParamVector& theta,
                                const TensorData& delta, const std::vector<double>& w) {
    if (static_cast<int64_t>(w.size()) != theta.size())
        throw ContractError("mixed_theta_to_delta: direction length mismatch");
    RecordedObjective r = record(f, theta, delta);
    auto theta_grads = r.tape.gradient(r.loss_id, r.theta_ids);
    // s = <grad_theta f, w>, accumulated segment by segment.
    ValueId s = -1;
    for (int i = 0; i < theta.num_segments(); ++i) {
        const auto& seg = theta.segment(i);
        const int64_t n = shape_numel(seg.shape);
        std::vector<double> wseg(w.begin() + seg.offset, w.begin() + seg.offset + n);
        ValueId wleaf = r.tape.leaf(TensorData(seg.shape, std::move(wseg)));
        ValueId term = r.tape.sum_all(r.tape.mul(theta_grads[i], wleaf));
        s = s < 0 ? term : r.tape.add(s, term);
    }
    ValueId out = r.tape.gradient(s, std::vector<ValueId>{r.delta_id})[0];
    return r.tape.val(out);
}

} // namespace fastbat
