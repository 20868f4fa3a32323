#include "fastbat/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace fastbat {

namespace {

std::string fmt_double(double v) {
    // Locale-independent shortest round-trip formatting.
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

std::string metrics_csv_header() { return "epoch,lr,train_loss,sa,ra_pgd,ga_score,epoch_seconds"; }

std::string metrics_csv_row(const MetricsRow& r) {
    std::ostringstream os;
    os << r.epoch << ',' << fmt_double(r.lr) << ',' << fmt_double(r.train_loss) << ','
       << fmt_double(r.sa_percent) << ',' << fmt_double(r.ra_pgd_percent) << ','
       << fmt_double(r.ga_score) << ',' << fmt_double(r.epoch_seconds);
    return os.str();
}

std::vector<int> predict(const Mlp& model, const ParamVector& theta, const TensorData& x) {
    TensorData z = model.logits_value(theta, x);
    const int rows = z.rows(), cols = z.cols();
    std::vector<int> out(rows);
    for (int i = 0; i < rows; ++i) {
        int best = 0;
        for (int j = 1; j < cols; ++j)
            if (z.data[i * cols + j] > z.data[i * cols + best]) best = j;
        out[i] = best;
    }
    return out;
}

double standard_accuracy(const Mlp& model, const ParamVector& theta, const TensorData& x,
                         const std::vector<int>& y) {
    if (y.empty()) throw ContractError("standard_accuracy: empty dataset");
    std::vector<int> pred = predict(model, theta, x);
    int correct = 0;
    for (size_t i = 0; i < y.size(); ++i) correct += pred[i] == y[i];
    return 100.0 * correct / static_cast<double>(y.size());
}

double robust_accuracy(const Mlp& model, const ParamVector& theta, const TensorData& x,
                       const std::vector<int>& y, const PgdConfig& cfg, double epsilon) {
    ConstraintBox box = build_box(x, epsilon);
    PgdResult atk = pgd_attack(model, theta, x, y, box, cfg);
    TensorData xd = x;
    for (size_t i = 0; i < xd.data.size(); ++i) xd.data[i] += atk.delta.data[i];
    return standard_accuracy(model, theta, xd, y);
}

double ga_score(const Mlp& model, const ParamVector& theta, const TensorData& x,
                const std::vector<int>& y, double epsilon, int samples, uint64_t seed) {
    if (samples < 1) throw ContractError("ga_score: samples must be >= 1");
    const int rows = x.rows(), d = x.cols();
    Objective input_loss = make_input_loss(model, y);
    TensorData g_clean = grad_delta(input_loss, theta, x);

    Rng root(seed);
    double total = 0.0;
    for (int s = 0; s < samples; ++s) {
        TensorData xp = x;
        for (int r = 0; r < rows; ++r) {
            Rng rr = root.stream("ga_eta", static_cast<uint64_t>(s) * rows + r);
            for (int j = 0; j < d; ++j) xp.data[r * d + j] += rr.uniform(-epsilon, epsilon);
        }
        TensorData g_pert = grad_delta(input_loss, theta, xp);
        for (int r = 0; r < rows; ++r) {
            double dot = 0.0, na = 0.0, nb = 0.0;
            for (int j = 0; j < d; ++j) {
                const double a = g_clean.data[r * d + j], b = g_pert.data[r * d + j];
                dot += a * b;
                na += a * a;
                nb += b * b;
            }
            total += (na > 0.0 && nb > 0.0) ? dot / std::sqrt(na * nb) : 0.0;
        }
    }
    return total / (static_cast<double>(samples) * rows);
}

LandscapeGrid loss_landscape(const Mlp& model, const ParamVector& theta, const TensorData& image,
                             int label, double grid_extent, int grid_n, uint64_t r2_seed) {
    if (grid_n < 1 || grid_n % 2 == 0)
        throw ContractError("loss_landscape: grid_n must be odd and positive");
    if (image.shape.size() != 2 || image.rows() != 1)
        throw ContractError("loss_landscape: image must be a [1,d] tensor");
    const int d = image.cols();

    Objective input_loss = make_input_loss(model, {label});
    TensorData g = grad_delta(input_loss, theta, image);
    TensorData r1 = g;
    for (double& v : r1.data) v = v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
    TensorData r2 = TensorData::zeros(image.shape);
    Rng rng = Rng(r2_seed).stream("rademacher");
    for (double& v : r2.data) v = rng.next_bool() ? 1.0 : -1.0;

    LandscapeGrid grid;
    grid.r2_seed = r2_seed;
    for (int i = 0; i < grid_n; ++i) {
        const double c = grid_n == 1 ? 0.0
                                     : -grid_extent + 2.0 * grid_extent * i / (grid_n - 1);
        grid.xs.push_back(c);
        grid.ys.push_back(c);
    }
    grid.z.assign(grid_n, std::vector<double>(grid_n, 0.0));
    for (int i = 0; i < grid_n; ++i) {
        for (int j = 0; j < grid_n; ++j) {
            TensorData pt = image;
            for (int k = 0; k < d; ++k)
                pt.data[k] += grid.xs[i] * r1.data[k] + grid.ys[j] * r2.data[k];
            grid.z[i][j] = value_of(input_loss, theta, pt);
        }
    }
    return grid;
}

std::string landscape_csv(const LandscapeGrid& grid) {
    std::ostringstream os;
    os << "y\\x";
    for (double x : grid.xs) os << ',' << fmt_double(x);
    os << '\n';
    for (size_t j = 0; j < grid.ys.size(); ++j) {
        os << fmt_double(grid.ys[j]);
        for (size_t i = 0; i < grid.xs.size(); ++i) os << ',' << fmt_double(grid.z[i][j]);
        os << '\n';
    }
    return os.str();
}

std::optional<int> detect_catastrophic_overfitting(const std::vector<double>& ra_history) {
    if (ra_history.size() < 2)
        throw ContractError("detect_catastrophic_overfitting: history length must be >= 2");
    double running_max = ra_history[0];
    for (size_t i = 1; i < ra_history.size(); ++i) {
        if (ra_history[i] < 0.5 * running_max) return static_cast<int>(i) + 1;
        running_max = std::max(running_max, ra_history[i]);
    }
    return std::nullopt;
}

} // namespace fastbat
