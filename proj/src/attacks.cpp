#include "fastbat/attacks.hpp"

#include <algorithm>
#include <cmath>

namespace fastbat {

LinearizationKind linearization_from_string(const std::string& s) {
    if (s == "uniform_random") return LinearizationKind::kUniformRandom;
    if (s == "random_corner") return LinearizationKind::kRandomCorner;
    if (s == "one_step_sign_pgd") return LinearizationKind::kOneStepSignPgd;
    if (s == "one_step_pgd_no_sign") return LinearizationKind::kOneStepPgdNoSign;
    throw ContractError("unknown linearization scheme '" + s + "'");
}

std::string to_string(LinearizationKind k) {
    switch (k) {
        case LinearizationKind::kUniformRandom: return "uniform_random";
        case LinearizationKind::kRandomCorner: return "random_corner";
        case LinearizationKind::kOneStepSignPgd: return "one_step_sign_pgd";
        case LinearizationKind::kOneStepPgdNoSign: return "one_step_pgd_no_sign";
    }
    return "?";
}

void PgdConfig::validate() const {
    if (steps < 1 || restarts < 1 || step_size <= 0.0)
        throw ContractError("PgdConfig: steps >= 1, restarts >= 1, step_size > 0 required");
}

TensorData per_example_grad_delta(const Objective& f, const ParamVector& theta,
                                  const TensorData& delta) {
    TensorData g = grad_delta(f, theta, delta);
    const double b = g.shape.empty() ? 1.0 : static_cast<double>(g.shape[0]);
    for (double& v : g.data) v *= b;
    return g;
}

TensorData uniform_in_box(const ConstraintBox& box, Rng rng) {
    TensorData d = TensorData::zeros(box.p.shape);
    const int rows = d.shape.size() == 2 ? d.shape[0] : 1;
    const int64_t row_len = d.size() / rows;
    for (int r = 0; r < rows; ++r) {
        Rng rr = rng.stream("row", static_cast<uint64_t>(r));
        for (int64_t j = 0; j < row_len; ++j) {
            const int64_t i = r * row_len + j;
            d.data[i] = rr.uniform(box.p.data[i], box.q.data[i]);
        }
    }
    return d;
}

TensorData sign_step(const Objective& train_loss, const ParamVector& theta, const TensorData& delta0,
                     double alpha, const ConstraintBox& box) {
    TensorData g = grad_delta(train_loss, theta, delta0);
    TensorData d = delta0;
    for (size_t i = 0; i < d.data.size(); ++i) {
        const double s = g.data[i] > 0.0 ? 1.0 : (g.data[i] < 0.0 ? -1.0 : 0.0);
        d.data[i] += alpha * s;
    }
    return project(d, box);
}

TensorData lower_level_solve(const Objective& attack_loss, const ParamVector& theta,
                             const TensorData& z, double lambda, const ConstraintBox& box) {
    if (lambda <= 0.0) throw ContractError("lower_level_solve: lambda must be positive");
    TensorData g = per_example_grad_delta(attack_loss, theta, z);
    TensorData d = z;
    for (size_t i = 0; i < d.data.size(); ++i) d.data[i] -= g.data[i] / lambda;
    return project(d, box);
}

namespace {

std::vector<double> per_example_xent(const Mlp& model, const ParamVector& theta,
                                     const TensorData& x_plus_delta, const std::vector<int>& y) {
    TensorData z = model.logits_value(theta, x_plus_delta);
    const int rows = z.rows(), cols = z.cols();
    std::vector<double> out(rows);
    for (int i = 0; i < rows; ++i) {
        const double* r = z.data.data() + static_cast<size_t>(i) * cols;
        const double mx = *std::max_element(r, r + cols);
        double lse = 0.0;
        for (int j = 0; j < cols; ++j) lse += std::exp(r[j] - mx);
        out[i] = mx + std::log(lse) - r[y[i]];
    }
    return out;
}

} // namespace

PgdResult pgd_attack(const Mlp& model, const ParamVector& theta, const TensorData& x,
                     const std::vector<int>& y, const ConstraintBox& box, const PgdConfig& cfg) {
    cfg.validate();
    const int rows = x.rows();
    Objective train = make_train_loss(model, x, y);
    Rng root(cfg.rng_seed);

    PgdResult best;
    best.delta = TensorData::zeros(x.shape);
    best.loss.assign(rows, -1.0);

    for (int r = 0; r < cfg.restarts; ++r) {
        TensorData d = uniform_in_box(box, root.stream("pgd_restart", static_cast<uint64_t>(r)));
        for (int s = 0; s < cfg.steps; ++s) d = sign_step(train, theta, d, cfg.step_size, box);
        TensorData xd = x;
        for (size_t i = 0; i < xd.data.size(); ++i) xd.data[i] += d.data[i];
        std::vector<double> loss = per_example_xent(model, theta, xd, y);
        const int64_t row_len = x.size() / rows;
        for (int i = 0; i < rows; ++i) {
            if (loss[i] > best.loss[i]) {
                best.loss[i] = loss[i];
                std::copy(d.data.begin() + i * row_len, d.data.begin() + (i + 1) * row_len,
                          best.delta.data.begin() + i * row_len);
            }
        }
    }
    return best;
}

TensorData make_linearization_point(const LinearizationScheme& scheme, const Objective& train_loss,
                                    const Objective& attack_loss, const ParamVector& theta,
                                    const ConstraintBox& box, double lambda, Rng rng) {
    const double step = scheme.step > 0.0 ? scheme.step : 1.0 / lambda;
    switch (scheme.kind) {
        case LinearizationKind::kUniformRandom:
            return uniform_in_box(box, rng);
        case LinearizationKind::kRandomCorner: {
            TensorData z = TensorData::zeros(box.p.shape);
            const int rows = z.shape.size() == 2 ? z.shape[0] : 1;
            const int64_t row_len = z.size() / rows;
            for (int r = 0; r < rows; ++r) {
                Rng rr = rng.stream("lin_corner", static_cast<uint64_t>(r));
                for (int64_t j = 0; j < row_len; ++j) {
                    const int64_t i = r * row_len + j;
                    z.data[i] = rr.next_bool() ? box.q.data[i] : box.p.data[i];
                }
            }
            return z;
        }
        case LinearizationKind::kOneStepSignPgd:
            return sign_step(train_loss, theta, TensorData::zeros(box.p.shape), step, box);
        case LinearizationKind::kOneStepPgdNoSign: {
            TensorData zero = TensorData::zeros(box.p.shape);
            TensorData g = per_example_grad_delta(attack_loss, theta, zero);
            for (size_t i = 0; i < zero.data.size(); ++i) zero.data[i] = -step * g.data[i];
            return project(zero, box);
        }
    }
    throw ContractError("make_linearization_point: unknown scheme");
}

} // namespace fastbat
