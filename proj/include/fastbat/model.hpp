#pragma once

#include <string>
#include <vector>

#include "fastbat/diff_ops.hpp"
#include "fastbat/param_vector.hpp"
#include "fastbat/rng.hpp"
#include "fastbat/tensor.hpp"

namespace fastbat {

enum class Activation { kRelu, kSoftplus, kSwish };

Activation activation_from_string(const std::string& s);
std::string to_string(Activation a);

struct ModelSpec {
    int input_dim = 0;
    std::vector<int> hidden_dims = {64, 64};
    int num_classes = 0;
    Activation activation = Activation::kRelu;
    uint64_t seed = 0;
};

// MLP classifier. Parameters live in a ParamVector with segments
// "layerK.W" / "layerK.b"; construction is deterministic given the seed.
class Mlp {
  public:
    explicit Mlp(ModelSpec spec);

    const ModelSpec& spec() const { return spec_; }
    // Fresh parameters, per-layer uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)].
    ParamVector init_params() const;
    // Zero-valued parameters with the same layout (gradient buffers, tests).
    ParamVector zero_params() const;
    int64_t param_count() const;

    // Records logits for a [B, input_dim] input already on the tape.
    Var logits(Tape& tape, const std::vector<Var>& theta, Var input) const;

    // Plain (non-recorded) forward pass for evaluation hot paths.
    TensorData logits_value(const ParamVector& theta, const TensorData& input) const;

  private:
    ModelSpec spec_;
    std::vector<int> layer_sizes_; // input_dim, hidden..., num_classes
};

// Attack objective choice for the lower level. The default is the negated
// training loss (the min-max-equivalent setting).
enum class AttackObjective { kNegTrainLoss };

// Batch-mean cross-entropy of the model on x + delta.
Objective make_train_loss(const Mlp& model, TensorData x, std::vector<int> y);
// Attack loss; kNegTrainLoss gives exactly -train_loss.
Objective make_attack_loss(const Mlp& model, TensorData x, std::vector<int> y,
                           AttackObjective kind = AttackObjective::kNegTrainLoss);

// Batch-mean cross-entropy of the model on clean x, as a function of theta
// and the *input* leaf (delta plays the role of x itself). Used by the
// gradient-alignment metric.
Objective make_input_loss(const Mlp& model, std::vector<int> y);

} // namespace fastbat
