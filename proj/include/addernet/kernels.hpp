#pragma once

// Inner loops of the adder and convolution layers, expressed over patch
// matrices produced by im2col. Each kernel exists twice: a plain serial
// reference used by the tests, and an OpenMP version used by the layers.
// The OpenMP kernels assign every output element to exactly one thread and
// accumulate it in a fixed order, so results do not depend on thread count.

#include <cstddef>
#include <span>

namespace addernet::kernels {

/// rows x width patch matrix against count x width filter matrix.
struct PatchDims {
    std::size_t rows = 0;
    std::size_t width = 0;
    std::size_t filters = 0;
};

enum class FilterGradRule {
    Sign,        // sgn(X - F), values in {-1, 0, +1}
    Difference,  // X - F
};

/// sgn with sgn(0) = 0.
inline double sign_of(double z) noexcept {
    return static_cast<double>((z > 0.0) - (z < 0.0));
}

/// sgn(z) * |z|^(p-1); exact at p = 1 and p = 2, zero at z = 0.
double signed_power(double z, double exponent_minus_one) noexcept;

namespace serial {

// out[r, t] = -sum_k |cols[r, k] - filters[t, k]|^p
void adder_forward(std::span<const double> cols, std::span<const double> filters, PatchDims dims, double p,
                   std::span<double> out);
// grad[t, k] = sum_r up[r, t] * rule(cols[r, k] - filters[t, k])
void adder_grad_filters(std::span<const double> cols, std::span<const double> filters,
                        std::span<const double> upstream, PatchDims dims, FilterGradRule rule,
                        std::span<double> grad);
// grad_cols[r, k] = sum_t up[r, t] * sgn(F - X) |F - X|^(p-1)
void adder_grad_cols(std::span<const double> cols, std::span<const double> filters,
                     std::span<const double> upstream, PatchDims dims, double p, std::span<double> grad_cols);

void conv_forward(std::span<const double> cols, std::span<const double> filters, PatchDims dims,
                  std::span<double> out);
void conv_grad_filters(std::span<const double> cols, std::span<const double> upstream, PatchDims dims,
                       std::span<double> grad);
void conv_grad_cols(std::span<const double> filters, std::span<const double> upstream, PatchDims dims,
                    std::span<double> grad_cols);

}  // namespace serial

namespace omp {

void adder_forward(std::span<const double> cols, std::span<const double> filters, PatchDims dims, double p,
                   std::span<double> out);
void adder_grad_filters(std::span<const double> cols, std::span<const double> filters,
                        std::span<const double> upstream, PatchDims dims, FilterGradRule rule,
                        std::span<double> grad);
void adder_grad_cols(std::span<const double> cols, std::span<const double> filters,
                     std::span<const double> upstream, PatchDims dims, double p, std::span<double> grad_cols);

void conv_forward(std::span<const double> cols, std::span<const double> filters, PatchDims dims,
                  std::span<double> out);
void conv_grad_filters(std::span<const double> cols, std::span<const double> upstream, PatchDims dims,
                       std::span<double> grad);
void conv_grad_cols(std::span<const double> filters, std::span<const double> upstream, PatchDims dims,
                    std::span<double> grad_cols);

}  // namespace omp

}  // namespace addernet::kernels
