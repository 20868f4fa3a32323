#include <cmath>
#include <sstream>

#include "doctest.h"
#include "fastbat/metrics.hpp"
#include "test_helpers.hpp"

using namespace fastbat;
using namespace fastbat::testing;

namespace {

Mlp tiny_mlp(uint64_t seed = 51) {
    ModelSpec s;
    s.input_dim = 3;
    s.hidden_dims = {6};
    s.num_classes = 4;
    s.activation = Activation::kRelu;
    s.seed = seed;
    return Mlp(s);
}

} // namespace

TEST_CASE("csv schema and value round-trip") {
    CHECK(metrics_csv_header() == "epoch,lr,train_loss,sa,ra_pgd,ga_score,epoch_seconds");
    MetricsRow r;
    r.epoch = 3;
    r.lr = 0.1 + 1e-17;
    r.train_loss = 1.0 / 3.0;
    r.sa_percent = 87.5;
    r.ra_pgd_percent = 60.25;
    r.ga_score = -0.125;
    r.epoch_seconds = 0.0;
    std::string line = metrics_csv_row(r);
    // %.17g round-trips doubles exactly.
    std::stringstream ss(line);
    std::string tok;
    std::getline(ss, tok, ',');
    CHECK(tok == "3");
    std::getline(ss, tok, ',');
    CHECK(std::stod(tok) == r.lr);
    std::getline(ss, tok, ',');
    CHECK(std::stod(tok) == r.train_loss);
}

TEST_CASE("argmax prediction breaks ties toward the lowest class") {
    Mlp m = tiny_mlp();
    ParamVector zero = m.zero_params(); // all logits identical
    Rng rng(1);
    TensorData x = rand_tensor({6, 3}, rng, 0.0, 1.0);
    auto pred = predict(m, zero, x);
    for (int p : pred) CHECK(p == 0);
    std::vector<int> y = {0, 0, 1, 2, 3, 0};
    CHECK(standard_accuracy(m, zero, x, y) == doctest::Approx(50.0));
}

TEST_CASE("robust accuracy collapses to standard accuracy as eps -> 0") {
    Mlp m = tiny_mlp();
    ParamVector theta = m.init_params();
    Rng rng(2);
    TensorData x = rand_tensor({10, 3}, rng, 0.05, 0.95);
    std::vector<int> y;
    for (int i = 0; i < 10; ++i) y.push_back(static_cast<int>(rng.next_u64() % 4));
    PgdConfig cfg{5, 2, 1e-12, 3};
    const double sa = standard_accuracy(m, theta, x, y);
    const double ra = robust_accuracy(m, theta, x, y, cfg, 1e-11);
    CHECK(ra == doctest::Approx(sa));
}

TEST_CASE("robust accuracy never exceeds a fuller attack's budget ordering") {
    Mlp m = tiny_mlp();
    ParamVector theta = m.init_params();
    Rng rng(3);
    TensorData x = rand_tensor({12, 3}, rng, 0.0, 1.0);
    std::vector<int> y;
    for (int i = 0; i < 12; ++i) y.push_back(static_cast<int>(rng.next_u64() % 4));
    PgdConfig weak{2, 1, 0.05, 5};
    PgdConfig strong{10, 3, 0.05, 5};
    CHECK(robust_accuracy(m, theta, x, y, strong, 0.2) <=
          robust_accuracy(m, theta, x, y, weak, 0.2) + 1e-12);
}

TEST_CASE("alignment score is exactly one at zero radius") {
    Mlp m = tiny_mlp();
    ParamVector theta = m.init_params();
    Rng rng(4);
    TensorData x = rand_tensor({5, 3}, rng, 0.1, 0.9);
    std::vector<int> y = {0, 1, 2, 3, 0};
    CHECK(ga_score(m, theta, x, y, 0.0, 2, 11) == doctest::Approx(1.0).epsilon(1e-12));
    const double g = ga_score(m, theta, x, y, 0.3, 2, 11);
    CHECK(g <= 1.0 + 1e-12);
    CHECK(g >= -1.0 - 1e-12);
    CHECK(ga_score(m, theta, x, y, 0.3, 2, 11) == g); // deterministic
}

TEST_CASE("landscape grid centres on the clean loss") {
    Mlp m = tiny_mlp();
    ParamVector theta = m.init_params();
    Rng rng(5);
    TensorData img = rand_tensor({1, 3}, rng, 0.2, 0.8);
    LandscapeGrid grid = loss_landscape(m, theta, img, 2, 0.1, 5, 17);
    REQUIRE(grid.xs.size() == 5);
    REQUIRE(grid.ys.size() == 5);
    Objective f = make_train_loss(m, img, {2});
    const double clean = value_of(f, theta, TensorData::zeros({1, 3}));
    CHECK(grid.z[2][2] == doctest::Approx(clean).epsilon(1e-14));
    for (const auto& row : grid.z)
        for (double v : row) CHECK(std::isfinite(v));
    CHECK_THROWS_AS(loss_landscape(m, theta, img, 2, 0.1, 4, 17), ContractError);
    // CSV has one header line plus one line per y.
    std::string csv = landscape_csv(grid);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 6);
}

TEST_CASE("overfitting collapse triggers on a halved running maximum") {
    CHECK(detect_catastrophic_overfitting({40.0, 42.0, 10.0}) == 3);
    CHECK(detect_catastrophic_overfitting({40.0, 42.0, 25.0}) == std::nullopt);
    CHECK(!detect_catastrophic_overfitting({10.0, 20.0, 30.0}).has_value());
    CHECK_THROWS_AS(detect_catastrophic_overfitting({50.0}), ContractError);
    CHECK(detect_catastrophic_overfitting({50.0, 60.0, 29.0, 80.0}) == 3);
}
