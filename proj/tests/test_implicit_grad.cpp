#include <Eigen/Dense>
#include <cmath>

#include "doctest.h"
#include "fastbat/attacks.hpp"
#include "fastbat/implicit_grad.hpp"
#include "fastbat/model.hpp"
#include "fastbat/oracle.hpp"
#include "test_helpers.hpp"

using namespace fastbat;
using namespace fastbat::testing;

namespace {

// Bilinear coupling f(theta, delta) = sum((delta A) .* w): zero delta-curvature,
// so the regularized Hessian is exactly lambda I and the Hessian-aware path
// must collapse onto the Hessian-free one.
Objective bilinear(TensorData a) {
    return [a](Tape& t, const std::vector<Var>& th, Var d) {
        return Var(t, t.sum_all(t.mul(t.matmul(d.id, t.leaf(a)), th[0].id)));
    };
}

Mlp small_mlp(uint64_t seed = 31) {
    ModelSpec s;
    s.input_dim = 4;
    s.hidden_dims = {5};
    s.num_classes = 3;
    s.activation = Activation::kSoftplus;
    s.seed = seed;
    return Mlp(s);
}

struct Instance {
    Mlp model = small_mlp();
    ParamVector theta;
    TensorData x, delta, v;
    std::vector<int> y;
    ConstraintBox box;
    Objective atk;
};

Instance make_instance(uint64_t seed, double eps = 0.1) {
    Instance in;
    Rng rng(seed);
    in.theta = in.model.init_params();
    in.x = rand_tensor({2, 4}, rng, 0.1, 0.9);
    in.y = {static_cast<int>(rng.next_u64() % 3), static_cast<int>(rng.next_u64() % 3)};
    in.box = build_box(in.x, eps);
    in.delta = project(rand_tensor({2, 4}, rng, -2 * eps, 2 * eps), in.box);
    in.v = rand_tensor({2, 4}, rng);
    in.atk = make_attack_loss(in.model, in.x, in.y);
    return in;
}

} // namespace

TEST_CASE("zero curvature collapses the aware path onto the free path") {
    Rng rng(1);
    TensorData a = rand_tensor({4, 3}, rng);
    Objective f = bilinear(a);
    ParamVector theta = rand_params({{"w", {2, 3}}}, rng);
    TensorData x = rand_tensor({2, 4}, rng, 0.2, 0.8);
    ConstraintBox box = build_box(x, 0.1);
    TensorData delta = project(rand_tensor({2, 4}, rng, -0.2, 0.2), box);
    TensorData v = rand_tensor({2, 4}, rng);
    ActiveMask mask = active_mask(delta, box);
    const double lambda = 3.7;
    IgMode cfg;
    auto free = ig_vp_free(f, theta, delta, v, mask, lambda);
    auto aware = ig_vp_aware(f, theta, delta, v, mask, lambda, cfg);
    CHECK(max_abs_diff(free, aware) < 1e-10);
}

TEST_CASE("an all-active solution kills the implicit term") {
    Instance in = make_instance(2);
    // Pin every coordinate to the boundary.
    TensorData corner = in.box.q;
    ActiveMask mask = active_mask(corner, in.box);
    for (double e : mask.interior.data) CHECK(e == 0.0);
    auto g_free = ig_vp_free(in.atk, in.theta, corner, in.v, mask, 5.0);
    for (double e : g_free) CHECK(e == 0.0);
    IgMode cfg;
    auto g_aware = ig_vp_aware(in.atk, in.theta, corner, in.v, mask, 5.0, cfg);
    CHECK(norm_inf(g_aware) < 1e-12);
}

TEST_CASE("the free product is linear in v and scales like 1/lambda") {
    Instance in = make_instance(3);
    ActiveMask mask = active_mask(in.delta, in.box);
    Rng rng(4);
    TensorData v2 = rand_tensor({2, 4}, rng);
    TensorData vsum = in.v;
    for (size_t i = 0; i < vsum.data.size(); ++i) vsum.data[i] += v2.data[i];
    auto g1 = ig_vp_free(in.atk, in.theta, in.delta, in.v, mask, 5.0);
    auto g2 = ig_vp_free(in.atk, in.theta, in.delta, v2, mask, 5.0);
    auto gs = ig_vp_free(in.atk, in.theta, in.delta, vsum, mask, 5.0);
    std::vector<double> want(g1.size());
    for (size_t i = 0; i < g1.size(); ++i) want[i] = g1[i] + g2[i];
    CHECK(max_abs_diff(gs, want) < 1e-12);
    auto gh = ig_vp_free(in.atk, in.theta, in.delta, in.v, mask, 2.5);
    for (size_t i = 0; i < g1.size(); ++i)
        CHECK(gh[i] == doctest::Approx(2.0 * g1[i]).epsilon(1e-12));
}

TEST_CASE("matrix-free CG matches a dense Hessian solve") {
    Instance in = make_instance(5);
    const double lambda = 4.0;
    const int B = 2, d = 4, n = B * d;
    // Dense per-example-regularized Hessian via HVPs against basis vectors.
    // hvp_delta carries batch-mean semantics, so scale rows by B.
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
    for (int j = 0; j < n; ++j) {
        TensorData e = TensorData::zeros({B, d});
        e.data[static_cast<size_t>(j)] = 1.0;
        TensorData col = hvp_delta(in.atk, in.theta, in.delta, e);
        for (int i = 0; i < n; ++i) H(i, j) = static_cast<double>(B) * col.data[static_cast<size_t>(i)];
    }
    H += lambda * Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd rhs(n);
    for (int i = 0; i < n; ++i) rhs(i) = in.v.data[static_cast<size_t>(i)];
    Eigen::VectorXd want = H.ldlt().solve(rhs);
    IgMode cfg;
    TensorData got = cg_solve_attack_hessian(in.atk, in.theta, in.delta, in.v, lambda, cfg);
    for (int i = 0; i < n; ++i)
        CHECK(got.data[static_cast<size_t>(i)] == doctest::Approx(want(i)).epsilon(1e-7));
}

TEST_CASE("negative curvature is reported, not silently inverted") {
    // Concave objective in delta: f = -sum(delta^2) has Hessian -2I; with
    // lambda = 1 the regularized operator is indefinite.
    Objective f = [](Tape& t, const std::vector<Var>&, Var d) {
        return Var(t, t.scale(-1.0, t.sum_all(t.mul(d.id, d.id))));
    };
    ParamVector empty;
    TensorData delta = TensorData::filled({1, 3}, 0.1);
    TensorData rhs = TensorData::filled({1, 3}, 1.0);
    IgMode cfg;
    CHECK_THROWS_AS(cg_solve_attack_hessian(f, empty, delta, rhs, 1.0, cfg), NumericError);
}

TEST_CASE("forward-mode sensitivity matches FD on the proximal lower level") {
    // Small soft-net instance; keep only trials where the FD active set is
    // stable around theta.
    int checked = 0;
    for (uint64_t seed = 10; seed < 20 && checked < 3; ++seed) {
        Instance in = make_instance(seed);
        const double lambda = 25.0;
        Rng rng(seed * 7 + 1);
        TensorData z = uniform_in_box(in.box, rng.stream("z"));
        TensorData dstar = oracle::proximal_solve(in.atk, in.theta, z, lambda, in.box);
        ActiveMask mask = active_mask(dstar, in.box);
        std::vector<double> w(static_cast<size_t>(in.theta.size()));
        for (double& e : w) e = rng.uniform(-1, 1);
        const double wn = norm2(w);
        for (double& e : w) e /= wn;
        auto solver = [&](const ParamVector& th) {
            return oracle::proximal_solve(in.atk, th, z, lambda, in.box);
        };
        auto fd = oracle::fd_lower_level_sensitivity(solver, in.theta, w, 1e-5, in.box);
        if (!fd.active_set_stable) continue;
        IgMode cfg;
        TensorData got = ig_forward_aware(in.atk, in.theta, dstar, w, mask, lambda, cfg);
        CHECK(max_abs_diff(got, fd.directional) < 1e-5);
        // Active coordinates cannot move.
        for (size_t i = 0; i < got.data.size(); ++i)
            if (mask.interior.data[i] == 0.0) CHECK(std::abs(got.data[i]) < 1e-12);
        ++checked;
    }
    CHECK(checked >= 1);
}

TEST_CASE("aware product is the adjoint of the forward sensitivity") {
    // <ig_vp_aware(v), w> should equal <v, ig_forward_aware(w)> up to the
    // batch-mean convention: the vp path applies mixed partials of the
    // batch-mean loss while the forward path propagates per-example rows.
    Instance in = make_instance(23);
    const double lambda = 25.0;
    TensorData dstar = oracle::proximal_solve(in.atk, in.theta, in.delta, lambda, in.box);
    ActiveMask mask = active_mask(dstar, in.box);
    Rng rng(6);
    std::vector<double> w(static_cast<size_t>(in.theta.size()));
    for (double& e : w) e = rng.uniform(-1, 1);
    IgMode cfg;
    auto vp = ig_vp_aware(in.atk, in.theta, dstar, in.v, mask, lambda, cfg);
    TensorData fwd = ig_forward_aware(in.atk, in.theta, dstar, w, mask, lambda, cfg);
    const double B = 2.0;
    double lhs = dot(vp, w);
    double rhs = 0.0;
    for (size_t i = 0; i < fwd.data.size(); ++i) rhs += in.v.data[i] * fwd.data[i];
    CHECK(lhs == doctest::Approx(rhs / B).epsilon(1e-8));
}

TEST_CASE("total upper gradient reduces to the plain gradient when alpha2 weighting is external") {
    // total_upper_gradient always includes the implicit term; on a fully
    // saturated lower-level solution it must equal the plain theta gradient.
    Instance in = make_instance(8, /*eps=*/0.02);
    const double lambda = 1e-3; // tiny lambda -> huge steps -> saturated solution
    Objective tr = make_train_loss(in.model, in.x, in.y);
    TensorData z = TensorData::zeros({2, 4});
    IgMode cfg;
    TensorData dstar = lower_level_solve(in.atk, in.theta, z, lambda, in.box);
    ActiveMask mask = active_mask(dstar, in.box);
    bool saturated = true;
    for (double e : mask.interior.data) saturated = saturated && e == 0.0;
    if (saturated) {
        auto total = total_upper_gradient(tr, in.atk, in.theta, z, lambda, in.box, cfg);
        auto plain = grad_theta(tr, in.theta, dstar);
        CHECK(max_abs_diff(total, plain) < 1e-12);
    } else {
        CHECK(saturated); // the construction should saturate; fail loudly if not
    }
}

TEST_CASE("mode strings and validation") {
    CHECK(ig_mode_from_string("hessian_free") == IgModeKind::kHessianFree);
    CHECK(ig_mode_from_string("hessian_aware") == IgModeKind::kHessianAware);
    CHECK_THROWS_AS(ig_mode_from_string("exact"), ContractError);
    IgMode bad;
    bad.mode = IgModeKind::kHessianAware;
    bad.cg_max_iters = 0;
    CHECK_THROWS_AS(bad.validate(), ContractError);
}
