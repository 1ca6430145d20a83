#include <cmath>
#include <memory>
#include <stdexcept>

#include "addernet/app.hpp"

namespace addernet::app {

Metadata ToyConfig::metadata() const {
    return {
        {"command", "toy"},
        {"task", to_string(task)},
        {"hidden", std::to_string(hidden)},
        {"mode", to_string(mode)},
        {"grad_mode", to_string(grad_mode)},
        {"samples", std::to_string(samples)},
        {"iterations", std::to_string(iterations)},
        {"batch", std::to_string(batch)},
        {"schedule", to_string(schedule.kind)},
        {"lr0", format_double(schedule.lr0)},
        {"momentum", format_double(optimizer.momentum)},
        {"weight_decay", format_double(optimizer.weight_decay)},
        {"eta", format_double(optimizer.eta)},
        {"adaptive", optimizer.adaptive ? "true" : "false"},
        {"grid", std::to_string(grid)},
        {"standardize", standardize ? "true" : "false"},
        {"recalibrate_bn", recalibrate_bn ? "true" : "false"},
        {"seed", std::to_string(seed)},
    };
}

GridBounds toy_bounds(ToyTask task) {
    const double r = task == ToyTask::MultiBall ? 45.0 : 30.0;
    return {-r, r, -r, r};
}

ToyResult run_toy(const ToyConfig& config) {
    if (config.hidden == 0) {
        throw std::invalid_argument("toy: hidden units must be at least 1");
    }
    if (config.batch < 2) {
        throw std::invalid_argument("toy: batch size must be at least 2");
    }
    if (config.grid == 0) {
        throw std::invalid_argument("toy: grid resolution must be positive");
    }
    OptimizerState state(config.optimizer);
    Rng data_rng = Rng(config.seed).fork(2);
    LabeledDataset train = gen_toy(config.task, config.samples, data_rng);
    const double scale = config.standardize ? toy_stddev(config.task) : 1.0;
    for (std::size_t i = 0; i < train.inputs.size(); ++i) {
        train.inputs[i] /= scale;
    }
    Rng init = Rng(config.seed).fork(0);
    Network net = build_network(two_layer_net(2, config.hidden, learned_kind(config.mode)), init);
    Rng shuffle_rng = Rng(config.seed).fork(1);

    // lp schedule: p reaches 1 after 75% of the iterations.
    const double decay_iters = 0.75 * static_cast<double>(config.iterations);
    auto p_at = [&](std::size_t it) {
        switch (config.mode) {
            case LayerMode::AdderL1: return 1.0;
            case LayerMode::AdderL2:
            case LayerMode::Conv: return 2.0;
            case LayerMode::AdderLpSchedule:
                return decay_iters > 0.0 ? std::max(1.0, 2.0 - static_cast<double>(it) / decay_iters) : 1.0;
        }
        return 1.0;
    };

    std::unique_ptr<CsvWriter> csv;
    if (!config.out_dir.empty()) {
        std::filesystem::create_directories(config.out_dir);
        csv = std::make_unique<CsvWriter>(config.out_dir / "toy.csv", config.metadata(),
                                          std::vector<std::string>{"iteration", "p", "lr", "batch_loss", "train_loss",
                                                                   "train_acc"});
    }
    const std::size_t log_every = 500;
    ToyResult result;
    auto log_row = [&](std::size_t it, double p, double lr, double batch_loss) {
        const auto [loss, acc] = evaluate(net, train);
        result.train_acc = acc;
        result.final_loss = loss;
        if (csv) {
            csv->cell(it).cell(p).cell(lr).cell(batch_loss).cell(loss).cell(acc);
            csv->end_row();
        }
    };

    std::vector<std::vector<std::size_t>> batches;
    std::size_t cursor = 0;
    double last_loss = 0.0;
    for (std::size_t it = 0; it < config.iterations; ++it) {
        if (cursor == batches.size()) {
            batches = shuffle_batches(train.size(), config.batch, shuffle_rng);
            if (batches.size() > 1 && batches.back().size() < 2) {
                batches.pop_back();
            }
            cursor = 0;
        }
        const auto& batch = batches[cursor++];
        const double p = p_at(it);
        net.set_p(p);
        const double lr = lr_at(config.schedule, it, config.iterations);
        const ForwardTrace trace = forward_pass(net, gather_inputs(train, batch), Phase::Train);
        const auto labels = gather_labels(train, batch);
        const LossResult loss = sigmoid_bce(trace.output, labels);
        if (!std::isfinite(loss.loss)) {
            throw std::runtime_error("toy training diverged at iteration " + std::to_string(it));
        }
        const Gradients grads = backward_pass(net, trace, loss.grad, config.grad_mode);
        nag_step(net, grads, state, lr);
        last_loss = loss.loss;
        if ((it + 1) % log_every == 0 && it + 1 < config.iterations) {
            log_row(it + 1, p, lr, last_loss);
        }
    }
    if (config.recalibrate_bn) {
        recalibrate_bn(net, train.inputs);
    }
    log_row(config.iterations, p_at(config.iterations), lr_at(config.schedule, config.iterations, config.iterations),
            last_loss);

    GridBounds bounds = toy_bounds(config.task);
    bounds.x_min /= scale;
    bounds.x_max /= scale;
    bounds.y_min /= scale;
    bounds.y_max /= scale;
    result.grid = predict_grid(net, bounds, config.grid, config.grid);
    if (!config.out_dir.empty()) {
        write_pgm(config.out_dir / "boundary.pgm", result.grid);
    }
    return result;
}

}  // namespace addernet::app
