#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fastbat/attacks.hpp"
#include "fastbat/data.hpp"
#include "fastbat/model.hpp"

namespace fastbat {

// One-epoch measurement record; the metrics CSV schema is
// epoch,lr,train_loss,sa,ra_pgd,ga_score,epoch_seconds.
struct MetricsRow {
    int epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double sa_percent = 0.0;
    double ra_pgd_percent = 0.0;
    double ga_score = 0.0;
    double epoch_seconds = 0.0;
};

std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsRow& row);

// Argmax predictions with deterministic tie-break (lowest class index wins).
std::vector<int> predict(const Mlp& model, const ParamVector& theta, const TensorData& x);

double standard_accuracy(const Mlp& model, const ParamVector& theta, const TensorData& x,
                         const std::vector<int>& y);

double robust_accuracy(const Mlp& model, const ParamVector& theta, const TensorData& x,
                       const std::vector<int>& y, const PgdConfig& cfg, double epsilon);

// Monte-Carlo gradient-alignment score:
// mean over examples/samples of cos(grad_x l(x), grad_x l(x + eta)),
// eta ~ U[-eps, eps]^d (the pure cube, ignoring the pixel box). Zero-norm
// gradients contribute cosine 0.
double ga_score(const Mlp& model, const ParamVector& theta, const TensorData& x,
                const std::vector<int>& y, double epsilon, int samples, uint64_t seed);

struct LandscapeGrid {
    std::vector<double> xs;
    std::vector<double> ys;
    std::vector<std::vector<double>> z; // z[i][j] = loss at (xs[i] along r1, ys[j] along r2)
    uint64_t r2_seed = 0;
};

// Loss surface loss(image + x r1 + y r2) with r1 = sign(grad loss(image)) and
// r2 Rademacher(0.5); grid_n must be odd so the centre is the clean loss.
LandscapeGrid loss_landscape(const Mlp& model, const ParamVector& theta, const TensorData& image,
                             int label, double grid_extent, int grid_n, uint64_t r2_seed);

// CSV: header row of xs, then one row per y with a leading y value.
std::string landscape_csv(const LandscapeGrid& grid);

// First epoch (1-based) where RA-PGD falls below 50% of its running maximum.
std::optional<int> detect_catastrophic_overfitting(const std::vector<double>& ra_history);

} // namespace fastbat
