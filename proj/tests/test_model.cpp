#include <cmath>

#include "doctest.h"
#include "fastbat/model.hpp"
#include "fastbat/oracle.hpp"
#include "test_helpers.hpp"

using namespace fastbat;
using namespace fastbat::testing;

namespace {

ModelSpec small_spec(Activation act = Activation::kRelu) {
    ModelSpec s;
    s.input_dim = 6;
    s.hidden_dims = {5, 4};
    s.num_classes = 3;
    s.activation = act;
    s.seed = 17;
    return s;
}

} // namespace

TEST_CASE("init is deterministic and respects per-layer fan-in bounds") {
    Mlp m(small_spec());
    ParamVector a = m.init_params();
    ParamVector b = m.init_params();
    CHECK(max_abs_diff(a.values(), b.values()) == 0.0);
    CHECK(a.size() == m.param_count());
    // layer0.W has fan_in = 6
    TensorData w0 = a.unpack(0);
    CHECK(w0.shape == std::vector<int>{6, 5});
    for (double v : w0.data) CHECK(std::abs(v) <= 1.0 / std::sqrt(6.0));
    ModelSpec other = small_spec();
    other.seed = 18;
    CHECK(max_abs_diff(Mlp(other).init_params().values(), a.values()) > 0.0);
}

TEST_CASE("zero parameters give uniform logits and loss ln(C)") {
    Mlp m(small_spec());
    ParamVector theta = m.zero_params();
    Rng rng(1);
    TensorData x = rand_tensor({4, 6}, rng, 0.0, 1.0);
    std::vector<int> y = {0, 1, 2, 1};
    Objective f = make_train_loss(m, x, y);
    CHECK(value_of(f, theta, TensorData::zeros({4, 6})) ==
          doctest::Approx(std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("logits shape contract and batch independence") {
    Mlp m(small_spec());
    ParamVector theta = m.init_params();
    Rng rng(2);
    TensorData x = rand_tensor({5, 6}, rng, 0.0, 1.0);
    TensorData out = m.logits_value(theta, x);
    CHECK(out.shape == std::vector<int>{5, 3});
    // Row i of the batch output equals the single-example output.
    for (int i = 0; i < 5; ++i) {
        TensorData xi = TensorData::zeros({1, 6});
        for (int j = 0; j < 6; ++j) xi.data[j] = x.data[i * 6 + j];
        TensorData oi = m.logits_value(theta, xi);
        for (int j = 0; j < 3; ++j) CHECK(oi.data[j] == out.data[i * 3 + j]);
    }
    CHECK_THROWS_AS(m.logits_value(theta, TensorData::zeros({2, 7})), ContractError);
}

TEST_CASE("softplus and relu nets agree far from the kink") {
    // One hidden layer with hand-picked weights so every pre-activation is
    // +-50; softplus(t) - relu(t) decays like exp(-|t|), so the two nets must
    // agree to far below 1e-6 there.
    ModelSpec rs;
    rs.input_dim = 2;
    rs.hidden_dims = {2};
    rs.num_classes = 2;
    rs.seed = 1;
    ModelSpec ss = rs;
    rs.activation = Activation::kRelu;
    ss.activation = Activation::kSoftplus;
    Mlp mr(rs), ms(ss);
    ParamVector theta = mr.zero_params();
    theta.pack(0, TensorData({2, 2}, {60.0, -60.0, 40.0, -40.0})); // layer0.W
    theta.pack(1, TensorData({2}, {0.0, 0.0}));                    // layer0.b
    theta.pack(2, TensorData({2, 2}, {0.7, -0.3, 0.2, 0.9}));      // layer1.W
    theta.pack(3, TensorData({2}, {0.1, -0.1}));                   // layer1.b
    TensorData x({1, 2}, {0.5, 0.5}); // pre-activations: +50, -50
    TensorData lr = mr.logits_value(theta, x);
    TensorData ls = ms.logits_value(theta, x);
    CHECK(max_abs_diff(lr, ls) < 1e-12);
}

TEST_CASE("attack loss is the exact negation of the train loss") {
    Mlp m(small_spec(Activation::kSoftplus));
    ParamVector theta = m.init_params();
    Rng rng(4);
    TensorData x = rand_tensor({3, 6}, rng, 0.0, 1.0);
    TensorData d = rand_tensor({3, 6}, rng, -0.05, 0.05);
    std::vector<int> y = {2, 0, 1};
    Objective tr = make_train_loss(m, x, y);
    Objective atk = make_attack_loss(m, x, y);
    CHECK(value_of(atk, theta, d) == -value_of(tr, theta, d));
    TensorData gt = grad_delta(tr, theta, d);
    TensorData ga = grad_delta(atk, theta, d);
    for (size_t i = 0; i < gt.data.size(); ++i) CHECK(ga.data[i] == -gt.data[i]);
}

TEST_CASE("model gradients match FD for every activation") {
    for (Activation act : {Activation::kRelu, Activation::kSoftplus, Activation::kSwish}) {
        Mlp m(small_spec(act));
        ParamVector theta = m.init_params();
        Rng rng(5);
        TensorData x = rand_tensor({3, 6}, rng, 0.05, 0.95);
        TensorData d = rand_tensor({3, 6}, rng, -0.03, 0.03);
        std::vector<int> y = {1, 2, 0};
        Objective f = make_train_loss(m, x, y);
        auto g = grad_theta(f, theta, d);
        auto fd = oracle::fd_grad_theta(f, theta, d, 1e-6);
        CHECK(rel_err(g, fd) < 2e-7);
    }
}

TEST_CASE("input loss treats the perturbation slot as the input itself") {
    Mlp m(small_spec());
    ParamVector theta = m.init_params();
    Rng rng(6);
    TensorData x = rand_tensor({2, 6}, rng, 0.0, 1.0);
    std::vector<int> y = {0, 2};
    Objective via_input = make_input_loss(m, y);
    Objective via_train = make_train_loss(m, x, y);
    CHECK(value_of(via_input, theta, x) == value_of(via_train, theta, TensorData::zeros({2, 6})));
}

TEST_CASE("string round-trips") {
    for (Activation a : {Activation::kRelu, Activation::kSoftplus, Activation::kSwish})
        CHECK(activation_from_string(to_string(a)) == a);
    CHECK_THROWS_AS(activation_from_string("tanh"), ContractError);
}
