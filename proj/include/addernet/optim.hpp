#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "addernet/network.hpp"
#include "addernet/tensor.hpp"

namespace addernet {

enum class ScheduleKind { Cosine, Polynomial, Constant };

std::string to_string(ScheduleKind kind);
ScheduleKind schedule_kind_from_string(const std::string& name);

struct LrSchedule {
    ScheduleKind kind = ScheduleKind::Cosine;
    double lr0 = 0.1;
    double power = 2.0;  // polynomial only
};

/// Global learning rate at `step` of `total_steps`.
double lr_at(const LrSchedule& schedule, std::size_t step, std::size_t total_steps);

/// p falls linearly from 2 at epoch 0 to 1 at `decay_epochs`, then stays at 1.
struct PSchedule {
    std::size_t decay_epochs = 0;
    std::size_t total_epochs = 0;
};

double p_at_epoch(const PSchedule& schedule, double epoch);

/// eta * sqrt(k) / |grad|_2, or 0 when the gradient vanishes.
double adaptive_scale(std::span<const double> grad, double eta);
inline double adaptive_scale(const Tensor& grad, double eta) { return adaptive_scale(grad.values(), eta); }

struct OptimizerConfig {
    double momentum = 0.9;
    double weight_decay = 5e-4;
    double eta = 0.2;
    bool adaptive = true;  // per-adder-layer scaling
};

struct OptimizerState {
    OptimizerConfig config;
    std::vector<Tensor> velocity;  // aligned with Network::parameters()
    std::uint64_t step = 0;
    std::uint64_t epoch = 0;

    explicit OptimizerState(OptimizerConfig cfg = {});
    void validate() const;
};

/// One Nesterov step at global rate `lr`:
///   g <- alpha_l g (adder filters, when adaptive), g <- g + wd w (filters)
///   v <- m v + g,  w <- w - lr (g + m v)
/// BN parameters take no weight decay. Returns the adaptive scale applied to
/// each parameter (1 for non-adder parameters).
std::vector<double> nag_step(Network& net, const Gradients& grads, OptimizerState& state, double lr);

}  // namespace addernet
