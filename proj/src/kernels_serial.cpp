#include <cmath>

#include "addernet/kernels.hpp"

namespace addernet::kernels {

double signed_power(double z, double exponent_minus_one) noexcept {
    if (z == 0.0) {
        return 0.0;
    }
    if (exponent_minus_one == 0.0) {
        return sign_of(z);
    }
    if (exponent_minus_one == 1.0) {
        return z;
    }
    return std::copysign(std::pow(std::fabs(z), exponent_minus_one), z);
}

namespace serial {

void adder_forward(std::span<const double> cols, std::span<const double> filters, PatchDims dims, double p,
                   std::span<double> out) {
    for (std::size_t r = 0; r < dims.rows; ++r) {
        for (std::size_t t = 0; t < dims.filters; ++t) {
            double distance = 0.0;
            for (std::size_t k = 0; k < dims.width; ++k) {
                distance += std::pow(std::fabs(cols[r * dims.width + k] - filters[t * dims.width + k]), p);
            }
            out[r * dims.filters + t] = -distance;
        }
    }
}

void adder_grad_filters(std::span<const double> cols, std::span<const double> filters,
                        std::span<const double> upstream, PatchDims dims, FilterGradRule rule,
                        std::span<double> grad) {
    for (std::size_t t = 0; t < dims.filters; ++t) {
        for (std::size_t k = 0; k < dims.width; ++k) {
            double sum = 0.0;
            for (std::size_t r = 0; r < dims.rows; ++r) {
                const double diff = cols[r * dims.width + k] - filters[t * dims.width + k];
                const double local = rule == FilterGradRule::Sign ? sign_of(diff) : diff;
                sum += upstream[r * dims.filters + t] * local;
            }
            grad[t * dims.width + k] = sum;
        }
    }
}

void adder_grad_cols(std::span<const double> cols, std::span<const double> filters,
                     std::span<const double> upstream, PatchDims dims, double p, std::span<double> grad_cols) {
    for (std::size_t r = 0; r < dims.rows; ++r) {
        for (std::size_t k = 0; k < dims.width; ++k) {
            double sum = 0.0;
            for (std::size_t t = 0; t < dims.filters; ++t) {
                const double diff = filters[t * dims.width + k] - cols[r * dims.width + k];
                sum += upstream[r * dims.filters + t] * signed_power(diff, p - 1.0);
            }
            grad_cols[r * dims.width + k] = sum;
        }
    }
}

void conv_forward(std::span<const double> cols, std::span<const double> filters, PatchDims dims,
                  std::span<double> out) {
    for (std::size_t r = 0; r < dims.rows; ++r) {
        for (std::size_t t = 0; t < dims.filters; ++t) {
            double sum = 0.0;
            for (std::size_t k = 0; k < dims.width; ++k) {
                sum += cols[r * dims.width + k] * filters[t * dims.width + k];
            }
            out[r * dims.filters + t] = sum;
        }
    }
}

void conv_grad_filters(std::span<const double> cols, std::span<const double> upstream, PatchDims dims,
                       std::span<double> grad) {
    for (std::size_t t = 0; t < dims.filters; ++t) {
        for (std::size_t k = 0; k < dims.width; ++k) {
            double sum = 0.0;
            for (std::size_t r = 0; r < dims.rows; ++r) {
                sum += upstream[r * dims.filters + t] * cols[r * dims.width + k];
            }
            grad[t * dims.width + k] = sum;
        }
    }
}

void conv_grad_cols(std::span<const double> filters, std::span<const double> upstream, PatchDims dims,
                    std::span<double> grad_cols) {
    for (std::size_t r = 0; r < dims.rows; ++r) {
        for (std::size_t k = 0; k < dims.width; ++k) {
            double sum = 0.0;
            for (std::size_t t = 0; t < dims.filters; ++t) {
                sum += upstream[r * dims.filters + t] * filters[t * dims.width + k];
            }
            grad_cols[r * dims.width + k] = sum;
        }
    }
}

}  // namespace serial
}  // namespace addernet::kernels
