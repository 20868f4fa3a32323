#pragma once

#include <functional>
#include <string>
#include <vector>

#include "fastbat/attacks.hpp"
#include "fastbat/data.hpp"
#include "fastbat/implicit_grad.hpp"
#include "fastbat/metrics.hpp"
#include "fastbat/model.hpp"

namespace fastbat {

enum class TrainMethod { kFastAt, kPgd2At, kFastAtGa, kFastBat };

TrainMethod method_from_string(const std::string& s);
std::string to_string(TrainMethod m);

struct TrainRunConfig {
    TrainMethod method = TrainMethod::kFastAt;
    int epochs = 10;
    int batch_size = 128;
    double epsilon = 8.0 / 255.0;
    double lambda = 0.0;       // <= 0: use the Fast-AT-compatible default 1/(1.25 eps)
    double alpha2_ratio = 0.1; // alpha2 = alpha2_ratio * alpha1 * lambda
    double lr_peak = 0.2;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    double ga_coeff = 0.0; // fast_at_ga only
    LinearizationScheme linearization;
    IgMode ig_mode;
    uint64_t seed = 0;
    bool early_stop = true;
    // Evaluation attack (fast-suite scale-down of 50-step / 10-restart PGD).
    int eval_pgd_steps = 20;
    int eval_pgd_restarts = 3;
    double eval_pgd_step_size = 0.0; // <= 0: eps / 4
    int ga_eval_samples = 1;
    // When false, epoch_seconds is recorded as 0 so fixed-seed metrics files
    // are bit-identical across runs.
    bool record_timing = true;

    double effective_lambda() const;
    void validate() const;
};

struct OptimizerState {
    std::vector<double> velocity; // theta-shaped, zero-initialized
    int64_t step_count = 0;
};

// Piecewise-linear cyclic schedule: 0 at t=0, lr_peak at t=T/2, 0 at t=T.
double cyclic_lr(int64_t t, int64_t total_steps, double lr_peak);

// Momentum SGD with coupled weight decay:
// v <- momentum v + (grad + wd theta); theta <- theta - lr v.
void sgd_step(ParamVector& theta, const std::vector<double>& grad, OptimizerState& state, double lr,
              double momentum, double weight_decay);

// Optional replacement for the Fast-BAT lower-level solver (the oracle
// suite injects the sign-linearized closed form here to reproduce Fast-AT).
using LowerLevelSolver = std::function<TensorData(
    const Objective& attack_loss, const ParamVector& theta, const TensorData& z, double lambda,
    const ConstraintBox& box)>;

// Single parameter updates on one batch. Each consumes the per-step RNG
// stream deterministically.
void fast_at_step(const Mlp& model, ParamVector& theta, OptimizerState& state, const TensorData& x,
                  const std::vector<int>& y, const TrainRunConfig& cfg, double lr, Rng rng);
void pgd2_at_step(const Mlp& model, ParamVector& theta, OptimizerState& state, const TensorData& x,
                  const std::vector<int>& y, const TrainRunConfig& cfg, double lr, Rng rng);
void fast_at_ga_step(const Mlp& model, ParamVector& theta, OptimizerState& state,
                     const TensorData& x, const std::vector<int>& y, const TrainRunConfig& cfg,
                     double lr, Rng rng);
void fast_bat_step(const Mlp& model, ParamVector& theta, OptimizerState& state, const TensorData& x,
                   const std::vector<int>& y, const TrainRunConfig& cfg, double lr, Rng rng,
                   const LowerLevelSolver& solver = {});

struct TrainResult {
    ParamVector theta;     // best (early_stop) or final checkpoint
    int best_epoch = 0;    // 1-based; 0 when no epochs ran
    std::vector<MetricsRow> history;
};

// Full training loop: epochs of the selected step function with per-epoch
// SA / RA-PGD / GA evaluation on the held-out split.
TrainResult train(const Mlp& model, const TrainRunConfig& cfg, const Dataset& dataset,
                  const LowerLevelSolver& solver = {});

} // namespace fastbat
