#include <cmath>

#include "addernet/kernels.hpp"

namespace addernet::kernels::omp {

namespace {

using Index = std::ptrdiff_t;

template <class Term>
void adder_forward_impl(const double* cols, const double* filters, PatchDims dims, double* out, Term term) {
    const auto rows = static_cast<Index>(dims.rows);
    const std::size_t width = dims.width;
#pragma omp parallel for schedule(static)
    for (Index r = 0; r < rows; ++r) {
        const double* x = cols + static_cast<std::size_t>(r) * width;
        double* y = out + static_cast<std::size_t>(r) * dims.filters;
        for (std::size_t t = 0; t < dims.filters; ++t) {
            const double* f = filters + t * width;
            double distance = 0.0;
#pragma omp simd reduction(+ : distance)
            for (std::size_t k = 0; k < width; ++k) {
                distance += term(x[k] - f[k]);
            }
            y[t] = -distance;
        }
    }
}

template <class Local>
void adder_grad_cols_impl(const double* cols, const double* filters, const double* upstream, PatchDims dims,
                          double* grad_cols, Local local) {
    const auto rows = static_cast<Index>(dims.rows);
    const std::size_t width = dims.width;
#pragma omp parallel for schedule(static)
    for (Index r = 0; r < rows; ++r) {
        const double* x = cols + static_cast<std::size_t>(r) * width;
        const double* up = upstream + static_cast<std::size_t>(r) * dims.filters;
        double* g = grad_cols + static_cast<std::size_t>(r) * width;
        std::fill(g, g + width, 0.0);
        for (std::size_t t = 0; t < dims.filters; ++t) {
            const double u = up[t];
            if (u == 0.0) {
                continue;
            }
            const double* f = filters + t * width;
#pragma omp simd
            for (std::size_t k = 0; k < width; ++k) {
                g[k] += u * local(f[k] - x[k]);
            }
        }
    }
}

}  // namespace

void adder_forward(std::span<const double> cols, std::span<const double> filters, PatchDims dims, double p,
                   std::span<double> out) {
    if (p == 1.0) {
        adder_forward_impl(cols.data(), filters.data(), dims, out.data(), [](double z) { return std::fabs(z); });
    } else if (p == 2.0) {
        adder_forward_impl(cols.data(), filters.data(), dims, out.data(), [](double z) { return z * z; });
    } else {
        adder_forward_impl(cols.data(), filters.data(), dims, out.data(),
                           [p](double z) { return std::pow(std::fabs(z), p); });
    }
}

void adder_grad_filters(std::span<const double> cols, std::span<const double> filters,
                        std::span<const double> upstream, PatchDims dims, FilterGradRule rule,
                        std::span<double> grad) {
    const auto count = static_cast<Index>(dims.filters);
    const std::size_t width = dims.width;
#pragma omp parallel for schedule(static)
    for (Index ti = 0; ti < count; ++ti) {
        const auto t = static_cast<std::size_t>(ti);
        const double* f = filters.data() + t * width;
        double* g = grad.data() + t * width;
        std::fill(g, g + width, 0.0);
        for (std::size_t r = 0; r < dims.rows; ++r) {
            const double u = upstream[r * dims.filters + t];
            if (u == 0.0) {
                continue;
            }
            const double* x = cols.data() + r * width;
            if (rule == FilterGradRule::Difference) {
#pragma omp simd
                for (std::size_t k = 0; k < width; ++k) {
                    g[k] += u * (x[k] - f[k]);
                }
            } else {
#pragma omp simd
                for (std::size_t k = 0; k < width; ++k) {
                    g[k] += u * sign_of(x[k] - f[k]);
                }
            }
        }
    }
}

void adder_grad_cols(std::span<const double> cols, std::span<const double> filters,
                     std::span<const double> upstream, PatchDims dims, double p, std::span<double> grad_cols) {
    if (p == 1.0) {
        adder_grad_cols_impl(cols.data(), filters.data(), upstream.data(), dims, grad_cols.data(),
                             [](double z) { return sign_of(z); });
    } else if (p == 2.0) {
        adder_grad_cols_impl(cols.data(), filters.data(), upstream.data(), dims, grad_cols.data(),
                             [](double z) { return z; });
    } else {
        const double e = p - 1.0;
        adder_grad_cols_impl(cols.data(), filters.data(), upstream.data(), dims, grad_cols.data(),
                             [e](double z) { return signed_power(z, e); });
    }
}

void conv_forward(std::span<const double> cols, std::span<const double> filters, PatchDims dims,
                  std::span<double> out) {
    const auto rows = static_cast<Index>(dims.rows);
    const std::size_t width = dims.width;
#pragma omp parallel for schedule(static)
    for (Index r = 0; r < rows; ++r) {
        const double* x = cols.data() + static_cast<std::size_t>(r) * width;
        double* y = out.data() + static_cast<std::size_t>(r) * dims.filters;
        for (std::size_t t = 0; t < dims.filters; ++t) {
            const double* f = filters.data() + t * width;
            double sum = 0.0;
#pragma omp simd reduction(+ : sum)
            for (std::size_t k = 0; k < width; ++k) {
                sum += x[k] * f[k];
            }
            y[t] = sum;
        }
    }
}

void conv_grad_filters(std::span<const double> cols, std::span<const double> upstream, PatchDims dims,
                       std::span<double> grad) {
    const auto count = static_cast<Index>(dims.filters);
    const std::size_t width = dims.width;
#pragma omp parallel for schedule(static)
    for (Index ti = 0; ti < count; ++ti) {
        const auto t = static_cast<std::size_t>(ti);
        double* g = grad.data() + t * width;
        std::fill(g, g + width, 0.0);
        for (std::size_t r = 0; r < dims.rows; ++r) {
            const double u = upstream[r * dims.filters + t];
            if (u == 0.0) {
                continue;
            }
            const double* x = cols.data() + r * width;
#pragma omp simd
            for (std::size_t k = 0; k < width; ++k) {
                g[k] += u * x[k];
            }
        }
    }
}

void conv_grad_cols(std::span<const double> filters, std::span<const double> upstream, PatchDims dims,
                    std::span<double> grad_cols) {
    const auto rows = static_cast<Index>(dims.rows);
    const std::size_t width = dims.width;
#pragma omp parallel for schedule(static)
    for (Index r = 0; r < rows; ++r) {
        const double* up = upstream.data() + static_cast<std::size_t>(r) * dims.filters;
        double* g = grad_cols.data() + static_cast<std::size_t>(r) * width;
        std::fill(g, g + width, 0.0);
        for (std::size_t t = 0; t < dims.filters; ++t) {
            const double u = up[t];
            if (u == 0.0) {
                continue;
            }
            const double* f = filters.data() + t * width;
#pragma omp simd
            for (std::size_t k = 0; k < width; ++k) {
                g[k] += u * f[k];
            }
        }
    }
}

}  // namespace addernet::kernels::omp
