#include <cmath>

#include "doctest.h"
#include "fastbat/attacks.hpp"
#include "fastbat/oracle.hpp"
#include "test_helpers.hpp"

using namespace fastbat;
using namespace fastbat::testing;

namespace {

// f = sum(delta .* delta) + <c, delta>: central differences are exact for
// quadratics up to rounding, so the oracle itself can be pinned hard.
Objective quadratic(TensorData c) {
    return [c](Tape& t, const std::vector<Var>&, Var d) {
        return Var(t, t.add(t.sum_all(t.mul(d.id, d.id)), t.sum_all(t.mul(d.id, t.leaf(c)))));
    };
}

} // namespace

TEST_CASE("FD gradients are near-exact on a quadratic") {
    Rng rng(1);
    TensorData c = rand_tensor({2, 3}, rng);
    TensorData d = rand_tensor({2, 3}, rng);
    ParamVector empty;
    Objective f = quadratic(c);
    TensorData g = oracle::fd_grad_delta(f, empty, d, 1e-4);
    for (size_t i = 0; i < d.data.size(); ++i)
        CHECK(g.data[i] == doctest::Approx(2.0 * d.data[i] + c.data[i]).epsilon(1e-9));
}

TEST_CASE("FD theta gradient sees through the parameter segments") {
    // f = <w, delta> summed: grad_w = delta.
    Objective f = [](Tape& t, const std::vector<Var>& th, Var d) {
        return Var(t, t.sum_all(t.mul(th[0].id, d.id)));
    };
    Rng rng(2);
    ParamVector theta = rand_params({{"w", {2, 2}}}, rng);
    TensorData d = rand_tensor({2, 2}, rng);
    auto g = oracle::fd_grad_theta(f, theta, d, 1e-5);
    for (size_t i = 0; i < d.data.size(); ++i)
        CHECK(g[i] == doctest::Approx(d.data[i]).epsilon(1e-9));
}

TEST_CASE("default step scales with the magnitude of the point") {
    CHECK(oracle::default_fd_step(0.5) == doctest::Approx(1e-5));
    CHECK(oracle::default_fd_step(100.0) == doctest::Approx(1e-3));
}

TEST_CASE("projected gradient descent finds the constrained quadratic minimum") {
    // min (d - t)^2 over the box: solution is project(t).
    Rng rng(3);
    TensorData x = rand_tensor({1, 4}, rng, 0.0, 1.0);
    ConstraintBox box = build_box(x, 0.1);
    TensorData target = rand_tensor({1, 4}, rng, -0.5, 0.5);
    auto field = [&](const TensorData& d) {
        TensorData g = d;
        for (size_t i = 0; i < g.data.size(); ++i) g.data[i] = 2.0 * (d.data[i] - target.data[i]);
        return g;
    };
    TensorData got = oracle::pgd_minimize(field, box, TensorData::zeros({1, 4}), 0.4, 300);
    CHECK(max_abs_diff(got, project(target, box)) < 1e-10);
}

TEST_CASE("proximal solve with huge lambda returns the projected anchor") {
    Rng rng(4);
    TensorData c = rand_tensor({1, 4}, rng);
    Objective f = quadratic(c);
    ParamVector empty;
    TensorData x = rand_tensor({1, 4}, rng, 0.0, 1.0);
    ConstraintBox box = build_box(x, 0.2);
    TensorData z = rand_tensor({1, 4}, rng, -0.4, 0.4);
    TensorData got = oracle::proximal_solve(f, empty, z, 1e10, box);
    CHECK(max_abs_diff(got, project(z, box)) < 1e-8);
}

TEST_CASE("proximal solve satisfies the projected stationarity condition") {
    Rng rng(5);
    TensorData c = rand_tensor({2, 3}, rng);
    Objective f = quadratic(c);
    ParamVector empty;
    TensorData x = rand_tensor({2, 3}, rng, 0.0, 1.0);
    ConstraintBox box = build_box(x, 0.15);
    TensorData z = rand_tensor({2, 3}, rng, -0.3, 0.3);
    const double lambda = 2.0;
    TensorData d = oracle::proximal_solve(f, empty, z, lambda, box);
    // Fixed point: d == project(d - s * (grad + lambda (d - z))) for any s > 0.
    TensorData step = d;
    const double B = 2.0;
    for (size_t i = 0; i < d.data.size(); ++i) {
        const double g = B * (2.0 * d.data[i] + c.data[i]) + lambda * (d.data[i] - z.data[i]);
        step.data[i] = d.data[i] - 0.1 * g;
    }
    CHECK(max_abs_diff(project(step, box), d) < 1e-9);
}

TEST_CASE("sign-linearized solve maps zero gradient coordinates to the anchor") {
    TensorData c({1, 3}, {1.0, 0.0, -2.0});
    Objective f = [c](Tape& t, const std::vector<Var>&, Var d) {
        return Var(t, t.sum_all(t.mul(d.id, t.leaf(c))));
    };
    ParamVector empty;
    TensorData x = TensorData::filled({1, 3}, 0.5);
    ConstraintBox box = build_box(x, 0.3);
    TensorData z({1, 3}, {0.05, 0.07, -0.04});
    TensorData got = oracle::sign_linearized_solve(f, empty, z, 10.0, box);
    CHECK(got.data[0] == doctest::Approx(z.data[0] - 0.1));
    CHECK(got.data[1] == doctest::Approx(z.data[1])); // sign(0) = 0
    CHECK(got.data[2] == doctest::Approx(z.data[2] + 0.1));
}

TEST_CASE("the Hessian probe recovers the top curvature of a diagonal quadratic") {
    // f = 0.5 * sum(q_i d_i^2): per-example Hessian is diag(q); spectral norm 3.
    TensorData q({1, 4}, {3.0, -1.0, 0.5, 2.0});
    Objective f = [q](Tape& t, const std::vector<Var>&, Var d) {
        return Var(t, t.scale(0.5, t.sum_all(t.mul(t.leaf(q), t.mul(d.id, d.id)))));
    };
    ParamVector empty;
    TensorData at = TensorData::filled({1, 4}, 0.1);
    const double nrm = oracle::hessian_norm_probe(f, empty, at, 200, 9);
    CHECK(nrm == doctest::Approx(3.0).epsilon(1e-6));
}

TEST_CASE("convergence monitor prefix averages") {
    std::vector<double> hist = {4.0, 2.0, 2.0, 0.0};
    auto s = oracle::convergence_monitor(hist);
    CHECK(s.avg_full == doctest::Approx(2.0));
    CHECK(s.avg_half == doctest::Approx(3.0));
    CHECK(s.ratio == doctest::Approx(2.0 / 3.0));
    CHECK(s.running_min == doctest::Approx(0.0));
    auto c = oracle::convergence_monitor({5.0, 5.0, 5.0, 5.0});
    CHECK(c.ratio == doctest::Approx(1.0));
}

TEST_CASE("FD sensitivity of a theta-independent solver is zero and stable") {
    Rng rng(6);
    TensorData x = rand_tensor({1, 3}, rng, 0.0, 1.0);
    ConstraintBox box = build_box(x, 0.1);
    ParamVector theta = rand_params({{"w", {2}}}, rng);
    TensorData fixed = uniform_in_box(box, Rng(3));
    auto solver = [&](const ParamVector&) { return fixed; };
    std::vector<double> w = {1.0, 0.0};
    auto r = oracle::fd_lower_level_sensitivity(solver, theta, w, 1e-5, box);
    CHECK(r.active_set_stable);
    for (double e : r.directional.data) CHECK(e == 0.0);
}
