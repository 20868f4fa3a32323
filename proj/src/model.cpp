#include "fastbat/model.hpp"

#include <cmath>

namespace fastbat {

Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::kRelu;
    if (s == "softplus") return Activation::kSoftplus;
    if (s == "swish") return Activation::kSwish;
    throw ContractError("unknown activation '" + s + "' (expected relu|softplus|swish)");
}

std::string to_string(Activation a) {
    switch (a) {
        case Activation::kRelu: return "relu";
        case Activation::kSoftplus: return "softplus";
        case Activation::kSwish: return "swish";
    }
    return "?";
}

Mlp::Mlp(ModelSpec spec) : spec_(std::move(spec)) {
    if (spec_.input_dim <= 0 || spec_.num_classes <= 0)
        throw ContractError("ModelSpec: input_dim and num_classes must be positive");
    layer_sizes_.push_back(spec_.input_dim);
    for (int h : spec_.hidden_dims) {
        if (h <= 0) throw ContractError("ModelSpec: hidden dims must be positive");
        layer_sizes_.push_back(h);
    }
    layer_sizes_.push_back(spec_.num_classes);
}

ParamVector Mlp::zero_params() const {
    ParamVector p;
    for (size_t l = 0; l + 1 < layer_sizes_.size(); ++l) {
        const std::string tag = "layer" + std::to_string(l);
        p.add_segment(tag + ".W", {layer_sizes_[l], layer_sizes_[l + 1]});
        p.add_segment(tag + ".b", {layer_sizes_[l + 1]});
    }
    return p;
}

ParamVector Mlp::init_params() const {
    ParamVector p = zero_params();
    Rng root(spec_.seed);
    for (int i = 0; i < p.num_segments(); ++i) {
        const auto& seg = p.segment(i);
        const int fan_in = seg.shape.size() == 2 ? seg.shape[0]
                                                 : layer_sizes_[static_cast<size_t>(i / 2)];
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        Rng r = root.stream(seg.name);
        TensorData t = p.unpack(i);
        for (double& v : t.data) v = r.uniform(-bound, bound);
        p.pack(i, t);
    }
    return p;
}

int64_t Mlp::param_count() const {
    int64_t n = 0;
    for (size_t l = 0; l + 1 < layer_sizes_.size(); ++l)
        n += static_cast<int64_t>(layer_sizes_[l]) * layer_sizes_[l + 1] + layer_sizes_[l + 1];
    return n;
}

Var Mlp::logits(Tape& tape, const std::vector<Var>& theta, Var input) const {
    if (static_cast<size_t>(theta.size()) != 2 * (layer_sizes_.size() - 1))
        throw ContractError("Mlp::logits: wrong parameter segment count");
    const auto& in = input.val();
    if (in.shape.size() != 2 || in.cols() != spec_.input_dim)
        throw ContractError("Mlp::logits: input shape " + shape_str(in.shape) + ", expected [B," +
                            std::to_string(spec_.input_dim) + "]");
    ValueId h = input.id;
    const size_t layers = layer_sizes_.size() - 1;
    for (size_t l = 0; l < layers; ++l) {
        h = tape.add_row(tape.matmul(h, theta[2 * l].id), theta[2 * l + 1].id);
        if (l + 1 == layers) break;
        switch (spec_.activation) {
            case Activation::kRelu: h = tape.relu(h); break;
            case Activation::kSoftplus: h = tape.softplus(h); break;
            case Activation::kSwish: h = tape.swish(h); break;
        }
    }
    return {tape, h};
}

TensorData Mlp::logits_value(const ParamVector& theta, const TensorData& input) const {
    // A throwaway tape keeps one forward-pass implementation; evaluation
    // batches are small enough that recording cost is negligible.
    Tape tape;
    std::vector<Var> tv;
    for (int i = 0; i < theta.num_segments(); ++i) tv.emplace_back(tape, tape.leaf(theta.unpack(i)));
    return logits(tape, tv, Var(tape, tape.leaf(input))).val();
}

Objective make_train_loss(const Mlp& model, TensorData x, std::vector<int> y) {
    return [&model, x = std::move(x), y = std::move(y)](Tape& tape, const std::vector<Var>& theta,
                                                        Var delta) -> Var {
        if (!delta.val().same_shape(x))
            throw ContractError("train loss: delta shape " + shape_str(delta.val().shape) +
                                " != x shape " + shape_str(x.shape));
        Var input{tape, tape.add(tape.leaf(x), delta.id)};
        Var z = model.logits(tape, theta, input);
        return {tape, tape.softmax_xent_mean(z.id, y)};
    };
}

Objective make_attack_loss(const Mlp& model, TensorData x, std::vector<int> y,
                           AttackObjective kind) {
    Objective train = make_train_loss(model, std::move(x), std::move(y));
    switch (kind) {
        case AttackObjective::kNegTrainLoss:
            return [train = std::move(train)](Tape& tape, const std::vector<Var>& theta,
                                              Var delta) -> Var {
                Var l = train(tape, theta, delta);
                return {tape, tape.scale(-1.0, l.id)};
            };
    }
    throw ContractError("make_attack_loss: unknown objective kind");
}

Objective make_input_loss(const Mlp& model, std::vector<int> y) {
    return [&model, y = std::move(y)](Tape& tape, const std::vector<Var>& theta, Var input) -> Var {
        Var z = model.logits(tape, theta, input);
        return {tape, tape.softmax_xent_mean(z.id, y)};
    };
}

} // namespace fastbat
