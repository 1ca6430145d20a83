#include "addernet/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace addernet {

std::string to_string(ScheduleKind kind) {
    switch (kind) {
        case ScheduleKind::Cosine: return "cosine";
        case ScheduleKind::Polynomial: return "poly";
        case ScheduleKind::Constant: return "constant";
    }
    return "unknown";
}

ScheduleKind schedule_kind_from_string(const std::string& name) {
    for (auto kind : {ScheduleKind::Cosine, ScheduleKind::Polynomial, ScheduleKind::Constant}) {
        if (to_string(kind) == name) {
            return kind;
        }
    }
    throw std::invalid_argument("unknown learning-rate schedule '" + name + "'");
}

double lr_at(const LrSchedule& schedule, std::size_t step, std::size_t total_steps) {
    if (step > total_steps) {
        throw std::invalid_argument("lr_at: step " + std::to_string(step) + " beyond total " +
                                    std::to_string(total_steps));
    }
    if (total_steps == 0 || schedule.kind == ScheduleKind::Constant) {
        return schedule.lr0;
    }
    const double progress = static_cast<double>(step) / static_cast<double>(total_steps);
    if (schedule.kind == ScheduleKind::Cosine) {
        return schedule.lr0 * (1.0 + std::cos(std::numbers::pi * progress)) / 2.0;
    }
    return schedule.lr0 * std::pow(1.0 - progress, schedule.power);
}

double p_at_epoch(const PSchedule& schedule, double epoch) {
    if (epoch < 0.0) {
        throw std::invalid_argument("p_at_epoch: negative epoch");
    }
    if (schedule.decay_epochs == 0 || epoch >= static_cast<double>(schedule.decay_epochs)) {
        return 1.0;
    }
    return 2.0 - epoch / static_cast<double>(schedule.decay_epochs);
}

double adaptive_scale(std::span<const double> grad, double eta) {
    const double norm = reduce_l2_norm(grad);
    if (norm < 1e-12) {
        return 0.0;
    }
    return eta * std::sqrt(static_cast<double>(grad.size())) / norm;
}

OptimizerState::OptimizerState(OptimizerConfig cfg) : config(cfg) {
    validate();
}

void OptimizerState::validate() const {
    if (!(config.momentum >= 0.0 && config.momentum < 1.0)) {
        throw std::invalid_argument("momentum must lie in [0, 1)");
    }
    if (!(config.weight_decay >= 0.0)) {
        throw std::invalid_argument("weight decay must be non-negative");
    }
    if (!(config.eta > 0.0)) {
        throw std::invalid_argument("eta must be positive");
    }
}

std::vector<double> nag_step(Network& net, const Gradients& grads, OptimizerState& state, double lr) {
    auto params = net.parameters();
    if (grads.size() != params.size()) {
        throw std::invalid_argument("nag_step: expected " + std::to_string(params.size()) + " gradients, got " +
                                    std::to_string(grads.size()));
    }
    if (state.velocity.empty()) {
        for (const auto& ref : params) {
            state.velocity.emplace_back(ref.value->shape());
        }
    }
    if (state.velocity.size() != params.size()) {
        throw std::invalid_argument("nag_step: optimizer state belongs to another network");
    }

    const OptimizerConfig& cfg = state.config;
    std::vector<double> scales(params.size(), 1.0);
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& w = *params[i].value;
        const Tensor& g = grads[i];
        Tensor& v = state.velocity[i];
        if (g.shape() != w.shape() || v.shape() != w.shape()) {
            throw std::invalid_argument("nag_step: gradient shape " + shape_to_string(g.shape()) +
                                        " does not match parameter " + shape_to_string(w.shape()));
        }
        const bool adder = params[i].role == ParamRole::AdderFilter;
        const bool decays = adder || params[i].role == ParamRole::ConvFilter;
        const double scale = adder && cfg.adaptive ? adaptive_scale(g, cfg.eta) : 1.0;
        scales[i] = scale;
        const double wd = decays ? cfg.weight_decay : 0.0;
        for (std::size_t k = 0; k < w.size(); ++k) {
            const double step_grad = scale * g[k] + wd * w[k];
            v[k] = cfg.momentum * v[k] + step_grad;
            w[k] -= lr * (step_grad + cfg.momentum * v[k]);
        }
    }
    ++state.step;
    net.mark_updated();
    return scales;
}

}  // namespace addernet
