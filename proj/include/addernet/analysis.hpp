#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "addernet/tensor.hpp"

namespace addernet {

// -- proposition simulations ---------------------------------------------------

struct ConvergenceTrace {
    std::vector<std::vector<double>> iterates;  // f^0, f^1, ...
    std::vector<double> objective;              // ||x - f|_1 - y| per iterate
    bool converged = false;
    std::size_t steps = 0;   // updates performed
    double amplitude = 0.0;  // max_i |f^last_i - f^prev_i|, 0 when converged
};

/// Sign descent f <- f - alpha sgn(f - x) on ||x - f|_1 - y| with y < 0.
/// Differences below 1e-12 count as zero.
ConvergenceTrace simulate_sign_descent(std::span<const double> x, std::span<const double> f0, double y, double alpha,
                                       std::size_t max_iters);

/// Full-precision descent f <- f - alpha (f - x).
ConvergenceTrace simulate_full_descent(std::span<const double> x, std::span<const double> f0, double y, double alpha,
                                       std::size_t max_iters);

/// True when (x - f0) / alpha is an integer, decided on integer numerators
/// over a shared denominator.
bool sign_descent_criterion(std::int64_t x_num, std::int64_t f0_num, std::int64_t alpha_num);

// -- variance ------------------------------------------------------------------

struct VarianceReport {
    std::size_t kernel = 0;
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    double var_x = 0.0;
    double var_f = 0.0;
    std::size_t samples = 0;  // output elements per layer kind
    double conv_empirical = 0.0;
    double conv_predicted = 0.0;    // d^2 c_in Var[X] Var[F]
    double adder_empirical = 0.0;
    double adder_predicted = 0.0;   // sqrt(pi/2) d^2 c_in (Var[X] + Var[F])
    double adder_exact_gauss = 0.0;  // (1 - 2/pi) d^2 c_in (Var[X] + Var[F])

    double ratio() const { return conv_empirical > 0.0 ? adder_empirical / conv_empirical : 0.0; }
};

/// Pre-normalization output variance of an l1 adder layer and a conv layer
/// over `rows` independent patches; requires rows * c_out >= 1e4.
VarianceReport variance_report(std::size_t kernel, std::size_t in_channels, std::size_t out_channels, double var_x,
                               double var_f, std::size_t rows, Rng& rng);

// -- gradient norms at initialization ------------------------------------------

struct GradNormRow {
    std::size_t layer = 0;  // 1-based index among learned layers
    double adder = 0.0;
    double conv = 0.0;
};

/// l2 norms of the filter gradients of freshly built adder and conv
/// LeNet-5-BN networks on one batch; both start from `seed`.
std::vector<GradNormRow> grad_norm_table(const Tensor& batch, std::span<const int> labels, std::uint64_t seed);

bool adder_below_conv(const std::vector<GradNormRow>& rows);

// -- finite differences ----------------------------------------------------------

struct FiniteDiffReport {
    double max_rel_error = 0.0;
    std::size_t worst_index = 0;
    std::size_t checked = 0;
    std::vector<std::size_t> excluded;  // kinks: one-sided slopes disagree
    bool passed = true;
};

struct FiniteDiffOptions {
    double step = 1e-6;
    double tolerance = 1e-5;
    double expected_factor = 1.0;  // numeric slope == factor * analytic
    bool exclude_kinks = true;
    double kink_threshold = 1e-2;
};

/// Compares central differences of `loss` at `params` against `analytic` on
/// the listed coordinates. Relative error is |a - b| / max(|a|, |b|, 1e-8).
FiniteDiffReport finite_diff_check(const std::function<double(std::span<const double>)>& loss,
                                   std::span<const double> params, std::span<const double> analytic,
                                   std::span<const std::size_t> coords, FiniteDiffOptions options = {});

double relative_error(double a, double b);

/// `count` distinct coordinates of 0..n-1 (all of them when count >= n).
std::vector<std::size_t> sample_coordinates(std::size_t n, std::size_t count, Rng& rng);

}  // namespace addernet
