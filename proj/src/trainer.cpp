#include "fastbat/trainer.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <string>

#include "fastbat/constraints.hpp"

namespace fastbat {

TrainMethod method_from_string(const std::string& s) {
    if (s == "fast_at") return TrainMethod::kFastAt;
    if (s == "pgd2_at") return TrainMethod::kPgd2At;
    if (s == "fast_at_ga") return TrainMethod::kFastAtGa;
    if (s == "fast_bat") return TrainMethod::kFastBat;
    throw ContractError("unknown training method '" + s +
                        "' (expected fast_at, pgd2_at, fast_at_ga, fast_bat)");
}

std::string to_string(TrainMethod m) {
    switch (m) {
        case TrainMethod::kFastAt: return "fast_at";
        case TrainMethod::kPgd2At: return "pgd2_at";
        case TrainMethod::kFastAtGa: return "fast_at_ga";
        case TrainMethod::kFastBat: return "fast_bat";
    }
    return "?";
}

double TrainRunConfig::effective_lambda() const {
    return lambda > 0.0 ? lambda : 1.0 / (1.25 * epsilon);
}

void TrainRunConfig::validate() const {
    if (epochs < 0) throw ContractError("epochs must be >= 0");
    if (batch_size <= 0) throw ContractError("batch_size must be positive");
    if (epsilon <= 0.0) throw ContractError("epsilon must be positive");
    if (lr_peak < 0.0) throw ContractError("lr_peak must be >= 0");
    if (momentum < 0.0 || momentum >= 1.0) throw ContractError("momentum must be in [0, 1)");
    if (weight_decay < 0.0) throw ContractError("weight_decay must be >= 0");
    if (alpha2_ratio < 0.0) throw ContractError("alpha2_ratio must be >= 0");
    if (ga_coeff < 0.0) throw ContractError("ga_coeff must be >= 0");
    if (eval_pgd_steps <= 0 || eval_pgd_restarts <= 0)
        throw ContractError("evaluation PGD needs positive steps and restarts");
    if (ga_eval_samples <= 0) throw ContractError("ga_eval_samples must be positive");
    ig_mode.validate();
}

double cyclic_lr(int64_t t, int64_t total_steps, double lr_peak) {
    if (total_steps <= 0) return 0.0;
    const double frac = static_cast<double>(t) / static_cast<double>(total_steps);
    const double tri = frac <= 0.5 ? 2.0 * frac : 2.0 * (1.0 - frac);
    return lr_peak * std::max(0.0, tri);
}

void sgd_step(ParamVector& theta, const std::vector<double>& grad, OptimizerState& state, double lr,
              double momentum, double weight_decay) {
    auto& v = state.velocity;
    auto& th = theta.values();
    if (grad.size() != th.size() || v.size() != th.size())
        throw ContractError("sgd_step: gradient/velocity size mismatch");
    for (size_t i = 0; i < th.size(); ++i) {
        v[i] = momentum * v[i] + (grad[i] + weight_decay * th[i]);
        th[i] -= lr * v[i];
    }
    ++state.step_count;
}

namespace {

// Uniform draw from the full cube [-eps, eps]^d, one child stream per row
// (same layout discipline as uniform_in_box, but ignoring the pixel box).
TensorData uniform_in_cube(const std::vector<int>& shape, double eps, Rng rng) {
    TensorData d = TensorData::zeros(shape);
    const int rows = d.shape.size() == 2 ? d.shape[0] : 1;
    const int64_t row_len = d.size() / rows;
    for (int r = 0; r < rows; ++r) {
        Rng rr = rng.stream("row", static_cast<uint64_t>(r));
        for (int64_t j = 0; j < row_len; ++j)
            d.data[r * row_len + j] = rr.uniform(-eps, eps);
    }
    return d;
}

} // namespace

void fast_at_step(const Mlp& model, ParamVector& theta, OptimizerState& state, const TensorData& x,
                  const std::vector<int>& y, const TrainRunConfig& cfg, double lr, Rng rng) {
    Objective ltr = make_train_loss(model, x, y);
    ConstraintBox box = build_box(x, cfg.epsilon);
    TensorData delta0 = uniform_in_box(box, rng.stream("delta0"));
    TensorData delta = sign_step(ltr, theta, delta0, 1.25 * cfg.epsilon, box);
    std::vector<double> g = grad_theta(ltr, theta, delta);
    sgd_step(theta, g, state, lr, cfg.momentum, cfg.weight_decay);
}

void pgd2_at_step(const Mlp& model, ParamVector& theta, OptimizerState& state, const TensorData& x,
                  const std::vector<int>& y, const TrainRunConfig& cfg, double lr, Rng rng) {
    Objective ltr = make_train_loss(model, x, y);
    ConstraintBox box = build_box(x, cfg.epsilon);
    TensorData delta = uniform_in_box(box, rng.stream("delta0"));
    delta = sign_step(ltr, theta, delta, 0.5 * cfg.epsilon, box);
    delta = sign_step(ltr, theta, delta, 0.5 * cfg.epsilon, box);
    std::vector<double> g = grad_theta(ltr, theta, delta);
    sgd_step(theta, g, state, lr, cfg.momentum, cfg.weight_decay);
}

void fast_at_ga_step(const Mlp& model, ParamVector& theta, OptimizerState& state,
                     const TensorData& x, const std::vector<int>& y, const TrainRunConfig& cfg,
                     double lr, Rng rng) {
    Objective ltr = make_train_loss(model, x, y);
    ConstraintBox box = build_box(x, cfg.epsilon);
    TensorData delta0 = uniform_in_box(box, rng.stream("delta0"));
    TensorData delta = sign_step(ltr, theta, delta0, 1.25 * cfg.epsilon, box);

    TensorData eta = uniform_in_cube(x.shape, cfg.epsilon, rng.stream("ga_eta"));
    TensorData x_eta = x;
    for (size_t i = 0; i < x_eta.data.size(); ++i) x_eta.data[i] += eta.data[i];

    // One tape so the alignment penalty's grad-of-grad terms reach theta.
    Tape tape;
    std::vector<Var> th;
    std::vector<ValueId> th_ids;
    th.reserve(static_cast<size_t>(theta.num_segments()));
    for (int i = 0; i < theta.num_segments(); ++i) {
        ValueId id = tape.leaf(theta.unpack(i));
        th_ids.push_back(id);
        th.emplace_back(tape, id);
    }
    Var l_adv = ltr(tape, th, Var(tape, tape.leaf(delta)));

    Objective lin = make_input_loss(model, y);
    const ValueId xv = tape.leaf(x);
    const ValueId xp = tape.leaf(x_eta);
    Var l_clean = lin(tape, th, Var(tape, xv));
    Var l_pert = lin(tape, th, Var(tape, xp));
    const ValueId gx = tape.gradient(l_clean.id, std::array{xv})[0];
    const ValueId gp = tape.gradient(l_pert.id, std::array{xp})[0];

    const ValueId dotv = tape.row_sum(tape.mul(gx, gp)); // [B,1]
    const ValueId na = tape.row_sum(tape.mul(gx, gx));
    const ValueId nb = tape.row_sum(tape.mul(gp, gp));

    // Rows with a vanishing gradient norm contribute cosine 0; the mask also
    // lifts the sqrt argument to 1 there so the backward pass stays finite.
    const TensorData& nav = tape.val(na);
    const TensorData& nbv = tape.val(nb);
    TensorData keep = TensorData::zeros(nav.shape);
    TensorData drop = TensorData::zeros(nav.shape);
    TensorData ones = TensorData::zeros(nav.shape);
    for (size_t i = 0; i < keep.data.size(); ++i) {
        const bool ok = nav.data[i] * nbv.data[i] > 0.0;
        keep.data[i] = ok ? 1.0 : 0.0;
        drop.data[i] = ok ? 0.0 : 1.0;
        ones.data[i] = 1.0;
    }
    const ValueId keep_id = tape.leaf(std::move(keep));
    const ValueId denom = tape.sqrt(tape.add(tape.mul(na, nb), tape.leaf(std::move(drop))));
    const ValueId cosr = tape.div(tape.mul(dotv, keep_id), denom);
    Var penalty{tape, tape.mean_all(tape.sub(tape.leaf(std::move(ones)), cosr))};

    Var total = l_adv + cfg.ga_coeff * penalty;
    std::vector<ValueId> grads = tape.gradient(total.id, th_ids);
    std::vector<double> g = flatten_theta_grads(tape, theta, grads);
    sgd_step(theta, g, state, lr, cfg.momentum, cfg.weight_decay);
}

void fast_bat_step(const Mlp& model, ParamVector& theta, OptimizerState& state, const TensorData& x,
                   const std::vector<int>& y, const TrainRunConfig& cfg, double lr, Rng rng,
                   const LowerLevelSolver& solver) {
    Objective ltr = make_train_loss(model, x, y);
    Objective latk = make_attack_loss(model, x, y);
    ConstraintBox box = build_box(x, cfg.epsilon);
    const double lam = cfg.effective_lambda();

    TensorData z = make_linearization_point(cfg.linearization, ltr, latk, theta, box, lam,
                                            rng.stream("delta0"));
    TensorData dstar =
        solver ? solver(latk, theta, z, lam, box) : lower_level_solve(latk, theta, z, lam, box);

    ValueAndGrads vg = value_and_grad(ltr, theta, dstar);
    std::vector<double> g = vg.grad_theta;
    const double ratio = cfg.alpha2_ratio * lam; // alpha2 / alpha1
    if (ratio > 0.0) {
        ActiveMask mask = active_mask(dstar, box);
        // Per-example gradient rows of the batch-mean loss.
        TensorData v = vg.grad_delta;
        const double rows = v.shape.size() == 2 ? v.shape[0] : 1;
        for (double& e : v.data) e *= rows;
        std::vector<double> ig =
            cfg.ig_mode.mode == IgModeKind::kHessianFree
                ? ig_vp_free(latk, theta, dstar, v, mask, lam)
                : ig_vp_aware(latk, theta, dstar, v, mask, lam, cfg.ig_mode);
        axpy(ratio, ig, g);
    }
    sgd_step(theta, g, state, lr, cfg.momentum, cfg.weight_decay);
}

namespace {

void shuffle_indices(std::vector<int>& idx, Rng rng) {
    for (size_t i = idx.size(); i > 1; --i) {
        const size_t j = static_cast<size_t>(rng.next_u64() % i);
        std::swap(idx[i - 1], idx[j]);
    }
}

} // namespace

TrainResult train(const Mlp& model, const TrainRunConfig& cfg, const Dataset& dataset,
                  const LowerLevelSolver& solver) {
    cfg.validate();
    if (dataset.train_idx.empty() || dataset.test_idx.empty())
        throw ContractError("train: dataset needs non-empty train and test splits");

    Rng root(cfg.seed);
    TrainResult out;
    out.theta = model.init_params();
    OptimizerState state;
    state.velocity.assign(static_cast<size_t>(out.theta.size()), 0.0);

    const int n_train = static_cast<int>(dataset.train_idx.size());
    const int64_t steps_per_epoch = (n_train + cfg.batch_size - 1) / cfg.batch_size;
    const int64_t total_steps = steps_per_epoch * cfg.epochs;

    const TensorData x_test = dataset.features_at(dataset.test_idx);
    const std::vector<int> y_test = dataset.labels_at(dataset.test_idx);
    const TensorData x_train = dataset.features_at(dataset.train_idx);
    const std::vector<int> y_train = dataset.labels_at(dataset.train_idx);
    const Objective clean_train_loss = make_train_loss(model, x_train, y_train);
    const TensorData zero_delta = TensorData::zeros(x_train.shape);

    ParamVector best = out.theta;
    double best_ra = -1.0;
    int64_t global_step = 0;

    std::vector<int> order = dataset.train_idx;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        shuffle_indices(order, root.stream("shuffle", static_cast<uint64_t>(epoch)));

        double last_lr = 0.0;
        for (int start = 0; start < n_train; start += cfg.batch_size) {
            const int end = std::min(start + cfg.batch_size, n_train);
            std::vector<int> bidx(order.begin() + start, order.begin() + end);
            const TensorData xb = dataset.features_at(bidx);
            const std::vector<int> yb = dataset.labels_at(bidx);
            const double lr = cyclic_lr(global_step, total_steps, cfg.lr_peak);
            last_lr = lr;
            Rng srng = root.stream("step", static_cast<uint64_t>(global_step));
            switch (cfg.method) {
                case TrainMethod::kFastAt:
                    fast_at_step(model, out.theta, state, xb, yb, cfg, lr, srng);
                    break;
                case TrainMethod::kPgd2At:
                    pgd2_at_step(model, out.theta, state, xb, yb, cfg, lr, srng);
                    break;
                case TrainMethod::kFastAtGa:
                    fast_at_ga_step(model, out.theta, state, xb, yb, cfg, lr, srng);
                    break;
                case TrainMethod::kFastBat:
                    fast_bat_step(model, out.theta, state, xb, yb, cfg, lr, srng, solver);
                    break;
            }
            ++global_step;
            if (!out.theta.all_finite())
                throw NumericError("training diverged: non-finite parameters after step " +
                                   std::to_string(global_step - 1));
        }

        MetricsRow row;
        row.epoch = epoch + 1;
        row.lr = last_lr;
        row.train_loss = value_of(clean_train_loss, out.theta, zero_delta);
        row.sa_percent = standard_accuracy(model, out.theta, x_test, y_test);
        PgdConfig eval;
        eval.steps = cfg.eval_pgd_steps;
        eval.restarts = cfg.eval_pgd_restarts;
        eval.step_size =
            cfg.eval_pgd_step_size > 0.0 ? cfg.eval_pgd_step_size : cfg.epsilon / 4.0;
        eval.rng_seed = root.stream("eval_pgd", static_cast<uint64_t>(epoch)).next_u64();
        row.ra_pgd_percent = robust_accuracy(model, out.theta, x_test, y_test, eval, cfg.epsilon);
        row.ga_score = ga_score(model, out.theta, x_test, y_test, cfg.epsilon, cfg.ga_eval_samples,
                                root.stream("ga_eval", static_cast<uint64_t>(epoch)).next_u64());
        const auto t1 = std::chrono::steady_clock::now();
        row.epoch_seconds =
            cfg.record_timing ? std::chrono::duration<double>(t1 - t0).count() : 0.0;
        out.history.push_back(row);

        if (row.ra_pgd_percent > best_ra) {
            best_ra = row.ra_pgd_percent;
            best = out.theta;
            out.best_epoch = epoch + 1;
        }
    }

    if (cfg.early_stop && out.best_epoch > 0) out.theta = best;
    return out;
}

} // namespace fastbat
