#include <chrono>
#include <cmath>
#include <stdexcept>

#include "addernet/app.hpp"
#include "addernet/checkpoint.hpp"

namespace addernet::app {

namespace {

double batch_accuracy(const Tensor& logits, std::span<const int> labels, bool binary) {
    const std::size_t n = labels.size();
    const std::size_t classes = logits.size() / n;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < n; ++i) {
        int pred = 0;
        if (binary) {
            pred = binary_prediction(logits[i]);
        } else {
            const double* row = logits.data() + i * classes;
            pred = static_cast<int>(std::max_element(row, row + classes) - row);
        }
        correct += pred == labels[i] ? 1 : 0;
    }
    return static_cast<double>(correct);
}

double mode_p(LayerMode mode, const PSchedule& sched, double epoch) {
    switch (mode) {
        case LayerMode::AdderL1: return 1.0;
        case LayerMode::AdderL2: return 2.0;
        case LayerMode::AdderLpSchedule: return p_at_epoch(sched, epoch);
        case LayerMode::Conv: return 2.0;
    }
    return 1.0;
}

void check_training_config(std::size_t batch, const OptimizerConfig& opt, const LrSchedule& schedule) {
    if (batch < 2) {
        throw std::invalid_argument("batch size must be at least 2 (batch normalization needs batch statistics)");
    }
    OptimizerState(opt).validate();
    if (!(schedule.lr0 > 0.0)) {
        throw std::invalid_argument("initial learning rate must be positive");
    }
}

// A trailing single-sample batch has no batch variance in the 1x1 layers.
std::vector<std::vector<std::size_t>> training_batches(std::size_t n, std::size_t batch, Rng& rng) {
    auto batches = shuffle_batches(n, batch, rng);
    if (batches.size() > 1 && batches.back().size() < 2) {
        batches.pop_back();
    }
    return batches;
}

}  // namespace

std::size_t TrainConfig::decay_epochs() const {
    if (e_decay) {
        return *e_decay;
    }
    return static_cast<std::size_t>(std::llround(0.75 * static_cast<double>(epochs)));
}

Metadata TrainConfig::metadata() const {
    return {
        {"command", "train"},
        {"data_dir", data_dir.string()},
        {"train_limit", std::to_string(train_limit)},
        {"test_limit", std::to_string(test_limit)},
        {"arch", arch},
        {"mode", to_string(mode)},
        {"conv_ends", conv_ends ? "true" : "false"},
        {"grad_mode", to_string(grad_mode)},
        {"epochs", std::to_string(epochs)},
        {"batch", std::to_string(batch)},
        {"schedule", to_string(schedule.kind)},
        {"lr0", format_double(schedule.lr0)},
        {"power", format_double(schedule.power)},
        {"momentum", format_double(optimizer.momentum)},
        {"weight_decay", format_double(optimizer.weight_decay)},
        {"eta", format_double(optimizer.eta)},
        {"adaptive", optimizer.adaptive ? "true" : "false"},
        {"e_decay", std::to_string(decay_epochs())},
        {"bn_recalibrate", bn_recalibrate ? "true" : "false"},
        {"seed", std::to_string(seed)},
    };
}

TrainResult train_classifier(Network& net, const LabeledDataset& train, const LabeledDataset& test,
                             const TrainConfig& config) {
    check_training_config(config.batch, config.optimizer, config.schedule);
    train.validate();
    const bool binary = net.spec().loss == LossHead::SigmoidBce;
    const PSchedule psched{config.decay_epochs(), config.epochs};
    if (psched.decay_epochs > config.epochs) {
        throw std::invalid_argument("E_decay exceeds the number of epochs");
    }
    Rng shuffle_rng = Rng(config.seed).fork(1);
    OptimizerState state(config.optimizer);
    const std::size_t per_epoch = (train.size() + config.batch - 1) / config.batch;
    const std::size_t total_steps = per_epoch * config.epochs;

    TrainResult result;
    const auto clock_start = std::chrono::steady_clock::now();
    auto elapsed = [&] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_start).count();
    };

    auto recalibrate = [&] {
        if (config.bn_recalibrate) {
            recalibrate_bn(net, train.inputs, config.batch);
        }
    };

    net.set_p(mode_p(config.mode, psched, 0.0));
    {
        recalibrate();
        const auto [loss, acc] = evaluate(net, train);
        const double test_acc = test.size() ? accuracy(net, test) : 0.0;
        result.rows.push_back({0, mode_p(config.mode, psched, 0.0), lr_at(config.schedule, 0, total_steps), loss,
                               acc, test_acc, elapsed()});
    }

    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        const double p = mode_p(config.mode, psched, static_cast<double>(epoch));
        net.set_p(p);
        const double epoch_lr = lr_at(config.schedule, step, total_steps);
        double loss_sum = 0.0;
        double correct = 0.0;
        std::size_t seen = 0;
        for (const auto& batch : training_batches(train.size(), config.batch, shuffle_rng)) {
            const Tensor inputs = gather_inputs(train, batch);
            const auto labels = gather_labels(train, batch);
            const ForwardTrace trace = forward_pass(net, inputs, Phase::Train);
            const LossResult loss = binary ? sigmoid_bce(trace.output, labels)
                                           : softmax_cross_entropy(trace.output, labels);
            if (!std::isfinite(loss.loss)) {
                throw std::runtime_error("training diverged: non-finite loss at step " + std::to_string(step));
            }
            const Gradients grads = backward_pass(net, trace, loss.grad, config.grad_mode);
            nag_step(net, grads, state, lr_at(config.schedule, std::min(step, total_steps), total_steps));
            ++step;
            loss_sum += loss.loss * static_cast<double>(batch.size());
            correct += batch_accuracy(trace.output, labels, binary);
            seen += batch.size();
        }
        ++state.epoch;
        recalibrate();
        const double test_acc = test.size() ? accuracy(net, test) : 0.0;
        result.rows.push_back({epoch + 1, p, epoch_lr, loss_sum / static_cast<double>(seen),
                               correct / static_cast<double>(seen), test_acc, elapsed()});
    }
    result.final_test_acc = result.rows.back().test_acc;
    return result;
}

TrainResult run_train(const TrainConfig& config) {
    if (!mnist_dir_available(config.data_dir)) {
        throw std::runtime_error("MNIST files not found in '" + config.data_dir.string() +
                                 "' (expected train-images-idx3-ubyte, train-labels-idx1-ubyte, "
                                 "t10k-images-idx3-ubyte, t10k-labels-idx1-ubyte)");
    }
    MnistSplit split = load_mnist_dir(config.data_dir);
    const LabeledDataset train = take_prefix(split.train, config.train_limit);
    const LabeledDataset test = take_prefix(split.test, config.test_limit);

    Rng init = Rng(config.seed).fork(0);
    Network net = build_network(resolve_arch(config.arch, learned_kind(config.mode), config.conv_ends), init);
    TrainResult result = train_classifier(net, train, test, config);

    if (!config.out_dir.empty()) {
        std::filesystem::create_directories(config.out_dir);
        Metadata meta = config.metadata();
        meta.emplace_back("pixel_mean", format_double(split.stats.mean));
        meta.emplace_back("pixel_std", format_double(split.stats.stddev));
        meta.emplace_back("train_samples", std::to_string(train.size()));
        meta.emplace_back("test_samples", std::to_string(test.size()));
        CsvWriter csv(config.out_dir / "metrics.csv", meta,
                      {"epoch", "p", "lr", "train_loss", "train_acc", "test_acc"});
        CsvWriter timing(config.out_dir / "timing.csv", {{"command", "train"}, {"seed", std::to_string(config.seed)}},
                         {"epoch", "wall_seconds"});
        for (const auto& r : result.rows) {
            csv.cell(r.epoch).cell(r.p).cell(r.lr).cell(r.train_loss).cell(r.train_acc).cell(r.test_acc);
            csv.end_row();
            timing.cell(r.epoch).cell(r.wall_seconds);
            timing.end_row();
        }
        save_checkpoint(config.out_dir / "model.ckpt", net, nullptr,
                        {{"epochs", config.epochs}, {"seed", config.seed}, {"test_acc", result.final_test_acc}});
    }
    return result;
}

std::vector<SweepRow> run_sweep(const SweepConfig& config) {
    std::vector<SweepRow> rows;
    auto run = [&](const std::string& axis, double value, TrainConfig cfg) {
        cfg.out_dir.clear();
        const TrainResult r = run_train(cfg);
        rows.push_back({axis, value, r.final_test_acc, r.final_test_acc >= config.target});
    };
    for (double eta : config.etas) {
        TrainConfig cfg = config.base;
        cfg.optimizer.eta = eta;
        run("eta", eta, cfg);
    }
    for (std::size_t e : config.e_decays) {
        TrainConfig cfg = config.base;
        cfg.e_decay = e;
        run("e_decay", static_cast<double>(e), cfg);
    }
    if (!config.base.out_dir.empty()) {
        std::filesystem::create_directories(config.base.out_dir);
        Metadata meta = config.base.metadata();
        meta.front().second = "sweep";
        meta.emplace_back("target", format_double(config.target));
        CsvWriter csv(config.base.out_dir / "sweep.csv", meta, {"axis", "value", "test_acc", "reached_target"});
        for (const auto& r : rows) {
            csv.cell(r.axis).cell(r.value).cell(r.test_acc).cell(r.reached);
            csv.end_row();
        }
    }
    return rows;
}

}  // namespace addernet::app
