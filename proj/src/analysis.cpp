#include "addernet/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "addernet/kernels.hpp"
#include "addernet/layers.hpp"
#include "addernet/network.hpp"

namespace addernet {

namespace {

constexpr double kZeroTol = 1e-12;

double sign_tol(double z) {
    return std::abs(z) < kZeroTol ? 0.0 : kernels::sign_of(z);
}

double gap_l1(std::span<const double> x, std::span<const double> f) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        s += std::abs(x[i] - f[i]);
    }
    return s;
}

template <class Update>
ConvergenceTrace simulate(std::span<const double> x, std::span<const double> f0, double y, double alpha,
                          std::size_t max_iters, Update update) {
    if (x.size() != f0.size() || x.empty()) {
        throw std::invalid_argument("proposition simulation: x and f0 must have the same non-zero length");
    }
    if (!(alpha > 0.0)) {
        throw std::invalid_argument("proposition simulation: alpha must be positive");
    }
    if (!(y < 0.0)) {
        throw std::invalid_argument("proposition simulation: the reduction requires y < 0");
    }
    ConvergenceTrace trace;
    std::vector<double> f(f0.begin(), f0.end());
    auto record = [&] {
        trace.iterates.push_back(f);
        trace.objective.push_back(std::abs(gap_l1(x, f) - y));
    };
    record();
    while (gap_l1(x, f) >= kZeroTol && trace.steps < max_iters) {
        for (std::size_t i = 0; i < f.size(); ++i) {
            f[i] = update(f[i], x[i]);
        }
        ++trace.steps;
        record();
    }
    trace.converged = gap_l1(x, f) < kZeroTol;
    if (!trace.converged && trace.iterates.size() >= 2) {
        const auto& last = trace.iterates.back();
        const auto& prev = trace.iterates[trace.iterates.size() - 2];
        for (std::size_t i = 0; i < last.size(); ++i) {
            trace.amplitude = std::max(trace.amplitude, std::abs(last[i] - prev[i]));
        }
    }
    return trace;
}

}  // namespace

ConvergenceTrace simulate_sign_descent(std::span<const double> x, std::span<const double> f0, double y, double alpha,
                                       std::size_t max_iters) {
    return simulate(x, f0, y, alpha, max_iters,
                    [alpha](double f, double xi) { return f - alpha * sign_tol(f - xi); });
}

ConvergenceTrace simulate_full_descent(std::span<const double> x, std::span<const double> f0, double y, double alpha,
                                       std::size_t max_iters) {
    return simulate(x, f0, y, alpha, max_iters, [alpha](double f, double xi) { return f - alpha * (f - xi); });
}

bool sign_descent_criterion(std::int64_t x_num, std::int64_t f0_num, std::int64_t alpha_num) {
    if (alpha_num <= 0) {
        throw std::invalid_argument("sign_descent_criterion: alpha must be positive");
    }
    return (x_num - f0_num) % alpha_num == 0;
}

// ---------------------------------------------------------------------------

namespace {

double population_variance(std::span<const double> v) {
    const double n = static_cast<double>(v.size());
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double sq = 0.0;
    for (double x : v) {
        sq += (x - mean) * (x - mean);
    }
    return sq / n;
}

}  // namespace

VarianceReport variance_report(std::size_t kernel, std::size_t in_channels, std::size_t out_channels, double var_x,
                               double var_f, std::size_t rows, Rng& rng) {
    if (kernel == 0 || in_channels == 0 || out_channels == 0 || rows == 0) {
        throw std::invalid_argument("variance_report: dimensions must be positive");
    }
    if (var_x < 0.0 || var_f < 0.0) {
        throw std::invalid_argument("variance_report: variances must be non-negative");
    }
    if (rows * out_channels < 10000) {
        throw std::invalid_argument("variance_report: need at least 1e4 output elements, got " +
                                    std::to_string(rows * out_channels));
    }
    const std::size_t width = kernel * kernel * in_channels;
    const kernels::PatchDims dims{rows, width, out_channels};
    const Tensor cols = randn_seeded(rng, {rows, width}, 0.0, std::sqrt(var_x));
    const Tensor filters = randn_seeded(rng, {out_channels, width}, 0.0, std::sqrt(var_f));
    std::vector<double> conv(rows * out_channels), adder(rows * out_channels);
    kernels::omp::conv_forward(cols.values(), filters.values(), dims, conv);
    kernels::omp::adder_forward(cols.values(), filters.values(), dims, 1.0, adder);

    VarianceReport r;
    r.kernel = kernel;
    r.in_channels = in_channels;
    r.out_channels = out_channels;
    r.var_x = var_x;
    r.var_f = var_f;
    r.samples = rows * out_channels;
    const double k = static_cast<double>(width);
    r.conv_empirical = population_variance(conv);
    r.conv_predicted = k * var_x * var_f;
    r.adder_empirical = population_variance(adder);
    r.adder_predicted = std::sqrt(std::numbers::pi / 2.0) * k * (var_x + var_f);
    r.adder_exact_gauss = (1.0 - 2.0 / std::numbers::pi) * k * (var_x + var_f);
    return r;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<double> filter_grad_norms(LayerKind kind, const Tensor& batch, std::span<const int> labels,
                                      std::uint64_t seed) {
    Rng rng(seed);
    Network net = build_network(lenet5_bn(kind), rng);
    net.set_p(1.0);
    const ForwardTrace trace = forward_pass(net, batch, Phase::Train);
    const LossResult loss = softmax_cross_entropy(trace.output, labels);
    const Gradients grads = backward_pass(net, trace, loss.grad, GradientMode::FullPrecision);
    const auto params = net.parameters();
    std::vector<double> norms;
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i].role == ParamRole::AdderFilter || params[i].role == ParamRole::ConvFilter) {
            norms.push_back(reduce_l2_norm(grads[i]));
        }
    }
    return norms;
}

}  // namespace

std::vector<GradNormRow> grad_norm_table(const Tensor& batch, std::span<const int> labels, std::uint64_t seed) {
    const auto adder = filter_grad_norms(LayerKind::Adder, batch, labels, seed);
    const auto conv = filter_grad_norms(LayerKind::Conv, batch, labels, seed);
    if (adder.size() != conv.size()) {
        throw std::logic_error("grad_norm_table: architecture mismatch between the pair");
    }
    std::vector<GradNormRow> rows;
    for (std::size_t i = 0; i < adder.size(); ++i) {
        rows.push_back({i + 1, adder[i], conv[i]});
    }
    return rows;
}

bool adder_below_conv(const std::vector<GradNormRow>& rows) {
    return !rows.empty() && std::all_of(rows.begin(), rows.end(), [](const GradNormRow& r) { return r.adder < r.conv; });
}

// ---------------------------------------------------------------------------

double relative_error(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

FiniteDiffReport finite_diff_check(const std::function<double(std::span<const double>)>& loss,
                                   std::span<const double> params, std::span<const double> analytic,
                                   std::span<const std::size_t> coords, FiniteDiffOptions options) {
    if (!(options.step > 0.0)) {
        throw std::invalid_argument("finite_diff_check: step must be positive");
    }
    if (analytic.size() != params.size()) {
        throw std::invalid_argument("finite_diff_check: gradient and parameter sizes differ");
    }
    std::vector<double> theta(params.begin(), params.end());
    auto eval = [&]() {
        const double v = loss(theta);
        if (!std::isfinite(v)) {
            throw std::runtime_error("finite_diff_check: non-finite loss");
        }
        return v;
    };
    const double base = eval();
    FiniteDiffReport report;
    const double h = options.step;
    for (std::size_t idx : coords) {
        if (idx >= theta.size()) {
            throw std::out_of_range("finite_diff_check: coordinate out of range");
        }
        const double saved = theta[idx];
        theta[idx] = saved + h;
        const double up = eval();
        theta[idx] = saved - h;
        const double down = eval();
        theta[idx] = saved;
        const double central = (up - down) / (2.0 * h);
        if (options.exclude_kinks) {
            const double forward = (up - base) / h;
            const double backward = (base - down) / h;
            if (std::abs(forward - backward) > options.kink_threshold * std::max(1.0, std::abs(central))) {
                report.excluded.push_back(idx);
                continue;
            }
        }
        const double err = relative_error(central, options.expected_factor * analytic[idx]);
        ++report.checked;
        if (err > report.max_rel_error) {
            report.max_rel_error = err;
            report.worst_index = idx;
        }
    }
    report.passed = report.max_rel_error <= options.tolerance;
    return report;
}

std::vector<std::size_t> sample_coordinates(std::size_t n, std::size_t count, Rng& rng) {
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    if (count >= n) {
        return all;
    }
    for (std::size_t i = 0; i < count; ++i) {
        const auto j = i + static_cast<std::size_t>(rng.below(n - i));
        std::swap(all[i], all[j]);
    }
    all.resize(count);
    std::sort(all.begin(), all.end());
    return all;
}

}  // namespace addernet
