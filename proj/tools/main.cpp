// fastbat: robust-training toolkit command line.
//
// Subcommands:
//   train      bilevel / one-step adversarial training with per-epoch metrics
//   eval       standard + robust accuracy of a checkpoint
//   ga         gradient-alignment score of a checkpoint
//   landscape  perturbation-plane loss surface CSV
//   check      fast self-check of the derivative machinery
//
// Every flag can also be given in a flat `key = value` config file
// (--config); command-line flags win over the file, the file wins over
// built-in defaults. Unknown config keys are errors.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fastbat/checkpoint.hpp"
#include "fastbat/data.hpp"
#include "fastbat/metrics.hpp"
#include "fastbat/oracle.hpp"
#include "fastbat/trainer.hpp"

using namespace fastbat;

namespace {

struct DataOpts {
    std::string kind = "two_moons"; // two_moons | blobs | idx
    int n = 400;
    double noise = 0.1;
    int centers = 3;
    double spread = 0.08;
    int dim = 2;
    std::string images, labels;
    int limit = 0;
    uint64_t seed = 0;
};

struct ModelOpts {
    std::vector<int> hidden = {64};
    std::string activation = "relu";
    uint64_t seed = 0;
};

void add_data_opts(CLI::App* cmd, DataOpts& d) {
    cmd->add_option("--dataset", d.kind, "two_moons, blobs, or idx")
        ->check(CLI::IsMember({"two_moons", "blobs", "idx"}));
    cmd->add_option("--n", d.n, "synthetic dataset size");
    cmd->add_option("--noise", d.noise, "two-moons noise level");
    cmd->add_option("--centers", d.centers, "blob count");
    cmd->add_option("--spread", d.spread, "blob spread");
    cmd->add_option("--dim", d.dim, "blob dimensionality");
    cmd->add_option("--images", d.images, "IDX image file");
    cmd->add_option("--labels", d.labels, "IDX label file");
    cmd->add_option("--limit", d.limit, "keep only the first N IDX examples");
    cmd->add_option("--data-seed", d.seed, "dataset generation seed");
}

void add_model_opts(CLI::App* cmd, ModelOpts& m) {
    cmd->add_option("--hidden", m.hidden, "hidden layer widths");
    cmd->add_option("--activation", m.activation, "relu, softplus, or swish");
    cmd->add_option("--model-seed", m.seed, "parameter init seed");
}

Dataset make_dataset(const DataOpts& d) {
    if (d.kind == "two_moons") return gen_two_moons(d.n, d.noise, d.seed);
    if (d.kind == "blobs") return gen_blobs(d.n, d.centers, d.spread, d.seed, d.dim);
    if (d.images.empty() || d.labels.empty())
        throw ContractError("--dataset idx requires --images and --labels");
    return load_mnist_idx(d.images, d.labels, d.limit);
}

Mlp make_model(const Dataset& ds, const ModelOpts& m) {
    ModelSpec spec;
    spec.input_dim = ds.dim();
    spec.hidden_dims = m.hidden;
    spec.num_classes = ds.num_classes;
    spec.activation = activation_from_string(m.activation);
    spec.seed = m.seed;
    return Mlp(spec);
}

void write_metrics(const std::string& path, const std::vector<MetricsRow>& rows) {
    std::ofstream f(path);
    if (!f) throw ContractError("cannot open metrics file: " + path);
    f << metrics_csv_header() << '\n';
    for (const auto& r : rows) f << metrics_csv_row(r) << '\n';
}

int cmd_train(const DataOpts& dopt, const ModelOpts& mopt, TrainRunConfig& cfg,
              const std::string& method, const std::string& lin, const std::string& ig,
              const std::string& metrics_out, const std::string& ckpt_out) {
    cfg.method = method_from_string(method);
    cfg.linearization.kind = linearization_from_string(lin);
    cfg.ig_mode.mode = ig_mode_from_string(ig);
    Dataset ds = make_dataset(dopt);
    Mlp model = make_model(ds, mopt);
    TrainResult result = train(model, cfg, ds);
    if (!metrics_out.empty()) write_metrics(metrics_out, result.history);
    if (!ckpt_out.empty()) save_checkpoint(ckpt_out, result.theta);
    for (const auto& r : result.history) std::cout << metrics_csv_row(r) << '\n';
    if (!result.history.empty()) {
        std::vector<double> ra;
        for (const auto& r : result.history) ra.push_back(r.ra_pgd_percent);
        auto co = ra.size() >= 2 ? detect_catastrophic_overfitting(ra) : std::nullopt;
        std::cout << "best_epoch=" << result.best_epoch
                  << " ra=" << result.history.back().ra_pgd_percent
                  << " collapse=" << (co ? std::to_string(*co) : std::string("none")) << '\n';
    }
    return 0;
}

int cmd_eval(const DataOpts& dopt, const ModelOpts& mopt, const std::string& ckpt, double eps,
             int steps, int restarts, double step_size, uint64_t seed) {
    Dataset ds = make_dataset(dopt);
    Mlp model = make_model(ds, mopt);
    ParamVector theta = load_checkpoint(ckpt);
    if (!theta.same_layout(model.init_params()))
        throw ContractError("checkpoint layout does not match the requested model");
    TensorData x = ds.features_at(ds.test_idx);
    std::vector<int> y = ds.labels_at(ds.test_idx);
    PgdConfig cfg{steps, restarts, step_size > 0 ? step_size : eps / 4.0, seed};
    std::cout << "sa=" << standard_accuracy(model, theta, x, y)
              << " ra_pgd=" << robust_accuracy(model, theta, x, y, cfg, eps) << '\n';
    return 0;
}

int cmd_ga(const DataOpts& dopt, const ModelOpts& mopt, const std::string& ckpt, double eps,
           int samples, uint64_t seed) {
    Dataset ds = make_dataset(dopt);
    Mlp model = make_model(ds, mopt);
    ParamVector theta = load_checkpoint(ckpt);
    TensorData x = ds.features_at(ds.test_idx);
    std::vector<int> y = ds.labels_at(ds.test_idx);
    std::cout << "ga_score=" << ga_score(model, theta, x, y, eps, samples, seed) << '\n';
    return 0;
}

int cmd_landscape(const DataOpts& dopt, const ModelOpts& mopt, const std::string& ckpt, int index,
                  double extent, int grid_n, uint64_t seed, const std::string& out) {
    Dataset ds = make_dataset(dopt);
    Mlp model = make_model(ds, mopt);
    ParamVector theta = load_checkpoint(ckpt);
    if (index < 0 || index >= ds.size()) throw ContractError("--index out of range");
    TensorData img = ds.features_at({index});
    LandscapeGrid grid =
        loss_landscape(model, theta, img, ds.labels[static_cast<size_t>(index)], extent, grid_n, seed);
    std::string csv = landscape_csv(grid);
    if (out.empty()) {
        std::cout << csv;
    } else {
        std::ofstream f(out);
        if (!f) throw ContractError("cannot open output file: " + out);
        f << csv;
    }
    return 0;
}

// Quick derivative sanity sweep: exact gradients against central differences
// on a few random soft-activation networks.
int cmd_check(uint64_t seed) {
    int failures = 0;
    for (int trial = 0; trial < 3; ++trial) {
        ModelSpec spec;
        spec.input_dim = 5;
        spec.hidden_dims = {6};
        spec.num_classes = 3;
        spec.activation = Activation::kSoftplus;
        spec.seed = seed + static_cast<uint64_t>(trial);
        Mlp model(spec);
        ParamVector theta = model.init_params();
        Rng rng(seed * 31 + static_cast<uint64_t>(trial));
        TensorData x = TensorData::zeros({2, 5});
        for (double& v : x.data) v = rng.uniform(0.0, 1.0);
        std::vector<int> y = {static_cast<int>(rng.next_u64() % 3),
                              static_cast<int>(rng.next_u64() % 3)};
        TensorData d = TensorData::zeros({2, 5});
        for (double& v : d.data) v = rng.uniform(-0.05, 0.05);
        Objective f = make_train_loss(model, x, y);
        auto g = grad_theta(f, theta, d);
        auto fd = oracle::fd_grad_theta(f, theta, d, 1e-6);
        double num = 0.0, den = 1.0;
        for (size_t i = 0; i < g.size(); ++i) {
            num = std::max(num, std::abs(g[i] - fd[i]));
            den = std::max(den, std::abs(fd[i]));
        }
        const double rel = num / den;
        std::cout << "gradient check " << trial << ": rel_err=" << rel
                  << (rel < 1e-5 ? " ok" : " FAIL") << '\n';
        if (rel >= 1e-5) ++failures;
    }
    if (failures) throw NumericError("derivative self-check failed");
    std::cout << "all checks passed\n";
    return 0;
}

std::string trim(const std::string& s) {
    const size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

// Flat `key = value` config support. Each key becomes `--key`; values are
// appended only for keys the command line does not already set, so flags win
// over the file and the file wins over defaults. Unknown keys surface as
// unexpected-argument parse errors (exit 2).
std::vector<std::string> apply_config(std::vector<std::string> args) {
    std::string config_path;
    std::vector<std::string> out;
    for (size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config") {
            if (i + 1 >= args.size()) throw ContractError("--config needs a path");
            config_path = args[++i];
        } else if (args[i].rfind("--config=", 0) == 0) {
            config_path = args[i].substr(9);
        } else {
            out.push_back(args[i]);
        }
    }
    if (config_path.empty()) return out;
    std::ifstream f(config_path);
    if (!f) throw ContractError("cannot open config file: " + config_path);
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ContractError("config line " + std::to_string(lineno) +
                                ": expected `key = value`, got: " + line);
        const std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ContractError("config line " + std::to_string(lineno) + ": empty key");
        if (value.size() >= 2 && ((value.front() == '"' && value.back() == '"') ||
                                  (value.front() == '\'' && value.back() == '\'')))
            value = value.substr(1, value.size() - 2);
        const std::string flag = "--" + key;
        bool already = false;
        for (const auto& a : out)
            if (a == flag || a.rfind(flag + "=", 0) == 0) already = true;
        if (already) continue;
        // Multi-token values feed vector options; single tokens use the
        // `--key=value` form so boolean flags accept true/false too.
        std::vector<std::string> toks;
        std::stringstream ss(value);
        std::string t;
        while (ss >> t) toks.push_back(t);
        if (toks.size() == 1) {
            out.push_back(flag + "=" + toks[0]);
        } else if (toks.empty()) {
            out.push_back(flag);
            out.push_back("");
        } else {
            out.push_back(flag);
            for (const auto& tok : toks) out.push_back(tok);
        }
    }
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"fastbat: bilevel adversarial training toolkit"};
    app.require_subcommand(1);
    app.footer("Any option may also come from a flat `key = value` file via --config;\n"
               "explicit flags override the file.");

    DataOpts dopt;
    ModelOpts mopt;

    // train
    TrainRunConfig cfg;
    std::string method = "fast_bat", lin = "one_step_pgd_no_sign", ig = "hessian_free";
    std::string metrics_out = "metrics.csv", ckpt_out;
    CLI::App* tr = app.add_subcommand("train", "run adversarial training");
    add_data_opts(tr, dopt);
    add_model_opts(tr, mopt);
    tr->add_option("--method", method, "fast_at, pgd2_at, fast_at_ga, or fast_bat");
    tr->add_option("--epochs", cfg.epochs);
    tr->add_option("--batch-size", cfg.batch_size);
    tr->add_option("--epsilon", cfg.epsilon, "l-inf perturbation radius");
    tr->add_option("--lambda", cfg.lambda, "proximal strength; <=0 uses 1/(1.25 eps)");
    tr->add_option("--alpha2-ratio", cfg.alpha2_ratio, "implicit-term weight: alpha2 = r*alpha1*lambda");
    tr->add_option("--lr-peak", cfg.lr_peak, "cyclic schedule peak");
    tr->add_option("--momentum", cfg.momentum);
    tr->add_option("--weight-decay", cfg.weight_decay);
    tr->add_option("--ga-coeff", cfg.ga_coeff, "alignment penalty weight (fast_at_ga)");
    tr->add_option("--linearization", lin,
                   "uniform_random, random_corner, one_step_sign_pgd, one_step_pgd_no_sign");
    tr->add_option("--lin-step", cfg.linearization.step, "warm-up step; <=0 uses 1/lambda");
    tr->add_option("--ig-mode", ig, "hessian_free or hessian_aware");
    tr->add_option("--seed", cfg.seed, "training RNG seed");
    bool no_early_stop = false, no_timing = false;
    tr->add_flag("--no-early-stop", no_early_stop, "keep the final epoch instead of the best");
    tr->add_flag("--no-timing", no_timing, "write epoch_seconds as 0 for bit-reproducible CSVs");
    tr->add_option("--eval-pgd-steps", cfg.eval_pgd_steps);
    tr->add_option("--eval-pgd-restarts", cfg.eval_pgd_restarts);
    tr->add_option("--eval-pgd-step-size", cfg.eval_pgd_step_size);
    tr->add_option("--metrics-out", metrics_out, "metrics CSV path (empty: skip)");
    tr->add_option("--ckpt-out", ckpt_out, "checkpoint output path");

    // eval
    std::string eval_ckpt;
    double eval_eps = 0.1, eval_step = 0.0;
    int eval_steps = 50, eval_restarts = 10;
    uint64_t eval_seed = 0;
    CLI::App* ev = app.add_subcommand("eval", "evaluate SA / RA-PGD of a checkpoint");
    add_data_opts(ev, dopt);
    add_model_opts(ev, mopt);
    ev->add_option("--ckpt", eval_ckpt)->required();
    ev->add_option("--epsilon", eval_eps);
    ev->add_option("--pgd-steps", eval_steps);
    ev->add_option("--pgd-restarts", eval_restarts);
    ev->add_option("--pgd-step-size", eval_step, "<=0 uses eps/4");
    ev->add_option("--seed", eval_seed);

    // ga
    std::string ga_ckpt;
    double ga_eps = 0.1;
    int ga_samples = 8;
    uint64_t ga_seed = 0;
    CLI::App* ga = app.add_subcommand("ga", "gradient-alignment score of a checkpoint");
    add_data_opts(ga, dopt);
    add_model_opts(ga, mopt);
    ga->add_option("--ckpt", ga_ckpt)->required();
    ga->add_option("--epsilon", ga_eps);
    ga->add_option("--samples", ga_samples);
    ga->add_option("--seed", ga_seed);

    // landscape
    std::string ls_ckpt, ls_out;
    int ls_index = 0, ls_grid = 21;
    double ls_extent = 0.1;
    uint64_t ls_seed = 0;
    CLI::App* ls = app.add_subcommand("landscape", "loss surface around one example");
    add_data_opts(ls, dopt);
    add_model_opts(ls, mopt);
    ls->add_option("--ckpt", ls_ckpt)->required();
    ls->add_option("--index", ls_index, "example index");
    ls->add_option("--extent", ls_extent, "half-width of the grid");
    ls->add_option("--grid-n", ls_grid, "odd grid resolution");
    ls->add_option("--seed", ls_seed, "random-direction seed");
    ls->add_option("--out", ls_out, "CSV path (default: stdout)");

    // check
    uint64_t check_seed = 1;
    CLI::App* ck = app.add_subcommand("check", "derivative self-check");
    ck->add_option("--seed", check_seed);

    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    try {
        args = apply_config(std::move(args));
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    try {
        std::reverse(args.begin(), args.end()); // CLI11 consumes from the back
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (tr->parsed()) {
            cfg.early_stop = !no_early_stop;
            cfg.record_timing = !no_timing;
            return cmd_train(dopt, mopt, cfg, method, lin, ig, metrics_out, ckpt_out);
        }
        if (ev->parsed())
            return cmd_eval(dopt, mopt, eval_ckpt, eval_eps, eval_steps, eval_restarts, eval_step,
                            eval_seed);
        if (ga->parsed()) return cmd_ga(dopt, mopt, ga_ckpt, ga_eps, ga_samples, ga_seed);
        if (ls->parsed())
            return cmd_landscape(dopt, mopt, ls_ckpt, ls_index, ls_extent, ls_grid, ls_seed, ls_out);
        if (ck->parsed()) return cmd_check(check_seed);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
