#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "addernet/analysis.hpp"
#include "addernet/data.hpp"
#include "addernet/network.hpp"
#include "addernet/optim.hpp"
#include "addernet/report.hpp"

namespace addernet::app {

/// How filter layers compute their response during training.
enum class LayerMode { AdderL1, AdderLpSchedule, AdderL2, Conv };

std::string to_string(LayerMode mode);
LayerMode layer_mode_from_string(const std::string& name);
LayerKind learned_kind(LayerMode mode);

std::string to_string(GradientMode mode);
GradientMode gradient_mode_from_string(const std::string& name);

// -- training ------------------------------------------------------------------

struct TrainConfig {
    std::filesystem::path data_dir = "data/mnist-subset";
    std::size_t train_limit = 0;  // 0 keeps every sample
    std::size_t test_limit = 0;
    std::string arch = "lenet5bn";  // or a JSON spec file
    LayerMode mode = LayerMode::AdderLpSchedule;
    bool conv_ends = false;
    GradientMode grad_mode = GradientMode::FullPrecision;
    std::size_t epochs = 10;
    std::size_t batch = 256;
    LrSchedule schedule{ScheduleKind::Cosine, 0.1, 2.0};
    OptimizerConfig optimizer{};
    std::optional<std::size_t> e_decay;  // default: 75% of epochs
    bool bn_recalibrate = true;  // BN statistics over the training set before each evaluation
    std::uint64_t seed = 0;
    std::filesystem::path out_dir;  // empty: no files

    std::size_t decay_epochs() const;
    Metadata metadata() const;
};

struct EpochRow {
    std::size_t epoch = 0;
    double p = 0.0;
    double lr = 0.0;
    double train_loss = 0.0;
    double train_acc = 0.0;
    double test_acc = 0.0;
    double wall_seconds = 0.0;
};

struct TrainResult {
    std::vector<EpochRow> rows;
    double final_test_acc = 0.0;
};

/// Fraction of samples whose eval-mode prediction matches the label.
double accuracy(const Network& net, const LabeledDataset& ds, std::size_t chunk = 512);
/// Eval-mode mean loss and accuracy.
std::pair<double, double> evaluate(const Network& net, const LabeledDataset& ds, std::size_t chunk = 512);

TrainResult train_classifier(Network& net, const LabeledDataset& train, const LabeledDataset& test,
                             const TrainConfig& config);

/// Loads data, builds the network and trains. Writes metrics.csv,
/// timing.csv and model.ckpt under out_dir when it is set.
TrainResult run_train(const TrainConfig& config);

struct SweepConfig {
    TrainConfig base;
    std::vector<double> etas{0.05, 0.1, 0.2, 0.5};
    std::vector<std::size_t> e_decays{0, 2, 3};
    double target = 0.97;
};

struct SweepRow {
    std::string axis;
    double value = 0.0;
    double test_acc = 0.0;
    bool reached = false;
};

/// Trains once per eta (at the base E_decay) and once per E_decay (at the
/// base eta). Writes sweep.csv under base.out_dir when it is set.
std::vector<SweepRow> run_sweep(const SweepConfig& config);

// -- toy tasks -----------------------------------------------------------------

struct ToyConfig {
    ToyTask task = ToyTask::UnitBall;
    std::size_t hidden = 1;
    LayerMode mode = LayerMode::AdderL1;  // conv gives the multiplicative MLP
    GradientMode grad_mode = GradientMode::FullPrecision;
    std::size_t samples = 1000;
    std::size_t iterations = 10000;
    std::size_t batch = 128;
    LrSchedule schedule{ScheduleKind::Cosine, 0.1, 2.0};
    OptimizerConfig optimizer{};
    std::size_t grid = 128;
    bool standardize = false;     // divide coordinates by the generator's stddev
    bool recalibrate_bn = false;  // final BN statistics from the whole training set
    std::uint64_t seed = 0;
    std::filesystem::path out_dir;

    Metadata metadata() const;
};

struct ToyResult {
    double train_acc = 0.0;
    double final_loss = 0.0;
    LabelGrid grid;
};

GridBounds toy_bounds(ToyTask task);
ToyResult run_toy(const ToyConfig& config);

// -- constructions, propositions, reports ---------------------------------------

struct ApproxConfig {
    std::size_t instances = 50;
    std::size_t probes = 10000;
    std::vector<std::string> targets{"tent", "gaussian", "sine-product"};
    std::size_t dim = 2;
    std::vector<std::size_t> sweep{16, 64, 256};
    double epsilon = 0.25;
    std::size_t seeds = 5;
    std::size_t mc_samples = 20000;
    std::uint64_t seed = 0;
    std::filesystem::path out_dir;

    Metadata metadata() const;
};

struct ApproxRow {
    std::string construction;
    std::string target;
    std::size_t size = 0;  // terms, mask rows or N
    double epsilon = 0.0;
    double value = 0.0;  // residual or mean L1 error
    double std_error = 0.0;
};

std::vector<ApproxRow> run_approx(const ApproxConfig& config);

struct PropsConfig {
    std::int64_t denominator = 12;
    std::vector<std::int64_t> x_nums{0, 1, 5, 6, 7, 12, 17, 24};
    std::vector<std::int64_t> f0_nums{-6, -1, 0, 3, 4};
    std::vector<std::int64_t> alpha_nums{2, 3, 4, 5, 7};
    std::vector<double> full_alphas{0.1, 0.25, 0.5, 0.75, 0.9, 0.99};
    double y = -1.0;
    std::size_t max_iters = 2000;
    std::filesystem::path out_dir;

    Metadata metadata() const;
};

struct PropsRow {
    std::string mode;
    double x = 0.0;
    double f0 = 0.0;
    double alpha = 0.0;
    bool criterion = false;  // sign: integrality; full: alpha < 1
    bool converged = false;
    std::size_t steps = 0;
    double amplitude = 0.0;
    bool monotone = true;
    double closed_form_error = 0.0;
};

std::vector<PropsRow> run_props(const PropsConfig& config);

struct GradCheckConfig {
    std::size_t instances = 100;
    std::size_t coords = 100;
    double step = 1e-4;          // single layers and losses
    double network_step = 1e-5;  // whole networks (ReLU / max-pool kinks)
    double tolerance = 1e-5;
    std::uint64_t seed = 0;
    std::filesystem::path out_dir;

    Metadata metadata() const;
};

struct GradCheckRow {
    std::string check;
    double factor = 1.0;  // numeric slope / implemented gradient
    double step = 0.0;
    double tolerance = 0.0;
    std::size_t instances = 0;
    std::size_t checked = 0;
    std::size_t excluded = 0;
    double max_rel_error = 0.0;
    bool passed = false;
};

std::vector<GradCheckRow> run_gradcheck(const GradCheckConfig& config);

struct VarianceConfig {
    std::size_t kernel = 3;
    std::size_t in_channels = 512;
    std::size_t out_channels = 64;
    std::size_t rows = 2000;
    std::vector<double> var_f{1e-3};
    double var_x = 1.0;
    std::filesystem::path data_dir = "data/mnist-subset";
    std::size_t batch = 64;
    std::size_t seeds = 5;
    std::uint64_t seed = 0;
    std::filesystem::path out_dir;

    Metadata metadata() const;
};

struct VarianceResult {
    std::vector<VarianceReport> variance;
    std::vector<std::vector<GradNormRow>> grad_norms;  // one table per seed
    std::string batch_source;
};

/// Variance rows for every var_f (plus the 1 / (d^2 c_in) consistency
/// point) and per-seed gradient-norm tables on one data batch.
VarianceResult run_variance(const VarianceConfig& config);

struct OpCountConfig {
    std::string arch = "lenet5bn";
    bool conv_ends = false;
    std::filesystem::path out_dir;

    Metadata metadata() const;
};

struct OpCountResult {
    OpCountReport conv;
    OpCountReport adder;
};

OpCountResult run_opcount(const OpCountConfig& config);

/// Spec for an architecture name ("lenet5bn") or a JSON spec file, with every
/// filter layer set to `kind`.
NetworkSpec resolve_arch(const std::string& arch, LayerKind kind, bool conv_ends);

}  // namespace addernet::app
