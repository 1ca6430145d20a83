#include "addernet/layers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "addernet/kernels.hpp"

namespace addernet {

namespace {

void require(bool condition, const std::string& message) {
    if (!condition) {
        throw std::invalid_argument(message);
    }
}

kernels::PatchDims dims_of(const Patches& patches, std::size_t filter_count) {
    return {patches.rows(), patches.geom.patch_size(), filter_count};
}

void check_filters_against(const Tensor& filters, const Patches& patches, const char* who) {
    require(filters.rank() == 4, std::string(who) + ": filters must be {c_out, d, d, c_in}");
    require(filters.dim(1) == patches.geom.kernel && filters.dim(2) == patches.geom.kernel,
            std::string(who) + ": filter kernel does not match patches");
    require(filters.dim(3) == patches.geom.in_c,
            std::string(who) + ": channel mismatch, filters expect " + std::to_string(filters.dim(3)) +
                " input channels but input has " + std::to_string(patches.geom.in_c));
}

Shape output_shape(const Patches& patches, std::size_t filter_count) {
    return {patches.batch, patches.geom.out_h(), patches.geom.out_w(), filter_count};
}

void check_upstream(const Tensor& upstream, const Patches& patches, std::size_t filter_count, const char* who) {
    require(upstream.shape() == output_shape(patches, filter_count),
            std::string(who) + ": upstream shape " + shape_to_string(upstream.shape()) +
                " does not match layer output " + shape_to_string(output_shape(patches, filter_count)));
}

}  // namespace

AdderLayerParams make_adder_layer(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                                  std::size_t stride, std::size_t padding, Rng& rng) {
    AdderLayerParams params;
    params.filters = randn_seeded(rng, {out_channels, kernel, kernel, in_channels}, 0.0, 1.0);
    params.stride = stride;
    params.padding = padding;
    return params;
}

ConvLayerParams make_conv_layer(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                                std::size_t stride, std::size_t padding, Rng& rng) {
    ConvLayerParams params;
    const double stddev = 1.0 / std::sqrt(static_cast<double>(kernel * kernel * in_channels));
    params.filters = randn_seeded(rng, {out_channels, kernel, kernel, in_channels}, 0.0, stddev);
    params.stride = stride;
    params.padding = padding;
    return params;
}

// ---------------------------------------------------------------------------

Patches extract_patches(const Tensor& input, std::size_t kernel, std::size_t stride, std::size_t padding) {
    require(input.rank() == 4, "expected an NHWC batch, got " + shape_to_string(input.shape()));
    Patches patches;
    patches.batch = input.dim(0);
    patches.geom = WindowGeometry{input.dim(1), input.dim(2), input.dim(3), kernel, stride, padding};
    patches.geom.validate();
    const std::size_t per_sample = input.size() / patches.batch;
    if (patches.geom.is_pointwise()) {
        patches.cols = input.reshaped({patches.rows(), patches.geom.patch_size()});
        return patches;
    }
    patches.cols = Tensor({patches.rows(), patches.geom.patch_size()});
    const std::size_t cols_per_sample = patches.geom.positions() * patches.geom.patch_size();
    const auto batch = static_cast<std::ptrdiff_t>(patches.batch);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t n = 0; n < batch; ++n) {
        im2col_into(input.data() + static_cast<std::size_t>(n) * per_sample, patches.geom,
                    patches.cols.data() + static_cast<std::size_t>(n) * cols_per_sample);
    }
    return patches;
}

Tensor fold_patches(const Tensor& grad_cols, const WindowGeometry& geom, std::size_t batch) {
    const Shape shape{batch, geom.in_h, geom.in_w, geom.in_c};
    if (geom.is_pointwise()) {
        return grad_cols.reshaped(shape);
    }
    Tensor out(shape);
    const std::size_t per_sample = geom.in_h * geom.in_w * geom.in_c;
    const std::size_t cols_per_sample = geom.positions() * geom.patch_size();
    const auto count = static_cast<std::ptrdiff_t>(batch);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t n = 0; n < count; ++n) {
        col2im_add(grad_cols.data() + static_cast<std::size_t>(n) * cols_per_sample, geom,
                   out.data() + static_cast<std::size_t>(n) * per_sample);
    }
    return out;
}

// ---------------------------------------------------------------------------

Tensor adder_forward(const AdderLayerParams& params, const Patches& patches) {
    check_filters_against(params.filters, patches, "adder_forward");
    require(params.p >= 1.0 && params.p <= 2.0, "adder_forward: p must lie in [1, 2]");
    Tensor out(output_shape(patches, params.out_channels()));
    kernels::omp::adder_forward(patches.cols.values(), params.filters.values(),
                                dims_of(patches, params.out_channels()), params.p, out.values());
    return out;
}

Tensor adder_forward(const AdderLayerParams& params, const Tensor& input) {
    return adder_forward(params, extract_patches(input, params.kernel(), params.stride, params.padding));
}

Tensor adder_grad_filters(const AdderLayerParams& params, const Patches& patches, const Tensor& upstream,
                          GradientMode mode) {
    check_filters_against(params.filters, patches, "adder_grad_filters");
    check_upstream(upstream, patches, params.out_channels(), "adder_grad_filters");
    Tensor grad(params.filters.shape());
    const auto rule =
        mode == GradientMode::SignGrad ? kernels::FilterGradRule::Sign : kernels::FilterGradRule::Difference;
    kernels::omp::adder_grad_filters(patches.cols.values(), params.filters.values(), upstream.values(),
                                     dims_of(patches, params.out_channels()), rule, grad.values());
    return grad;
}

Tensor adder_grad_filters(const AdderLayerParams& params, const Tensor& input, const Tensor& upstream,
                          GradientMode mode) {
    return adder_grad_filters(params, extract_patches(input, params.kernel(), params.stride, params.padding),
                              upstream, mode);
}

Tensor adder_grad_input(const AdderLayerParams& params, const Patches& patches, const Tensor& upstream) {
    check_filters_against(params.filters, patches, "adder_grad_input");
    check_upstream(upstream, patches, params.out_channels(), "adder_grad_input");
    require(params.p >= 1.0 && params.p <= 2.0, "adder_grad_input: p must lie in [1, 2]");
    Tensor grad_cols(patches.cols.shape());
    kernels::omp::adder_grad_cols(patches.cols.values(), params.filters.values(), upstream.values(),
                                  dims_of(patches, params.out_channels()), params.p, grad_cols.values());
    return fold_patches(grad_cols, patches.geom, patches.batch);
}

Tensor adder_grad_input(const AdderLayerParams& params, const Tensor& input, const Tensor& upstream) {
    return adder_grad_input(params, extract_patches(input, params.kernel(), params.stride, params.padding),
                            upstream);
}

// ---------------------------------------------------------------------------

Tensor conv_forward(const ConvLayerParams& params, const Patches& patches) {
    check_filters_against(params.filters, patches, "conv_forward");
    Tensor out(output_shape(patches, params.out_channels()));
    kernels::omp::conv_forward(patches.cols.values(), params.filters.values(),
                               dims_of(patches, params.out_channels()), out.values());
    return out;
}

Tensor conv_forward(const ConvLayerParams& params, const Tensor& input) {
    return conv_forward(params, extract_patches(input, params.kernel(), params.stride, params.padding));
}

ConvGrads conv_grad(const ConvLayerParams& params, const Patches& patches, const Tensor& upstream) {
    check_filters_against(params.filters, patches, "conv_grad");
    check_upstream(upstream, patches, params.out_channels(), "conv_grad");
    const auto dims = dims_of(patches, params.out_channels());
    ConvGrads grads;
    grads.filters = Tensor(params.filters.shape());
    kernels::omp::conv_grad_filters(patches.cols.values(), upstream.values(), dims, grads.filters.values());
    Tensor grad_cols(patches.cols.shape());
    kernels::omp::conv_grad_cols(params.filters.values(), upstream.values(), dims, grad_cols.values());
    grads.input = fold_patches(grad_cols, patches.geom, patches.batch);
    return grads;
}

ConvGrads conv_grad(const ConvLayerParams& params, const Tensor& input, const Tensor& upstream) {
    return conv_grad(params, extract_patches(input, params.kernel(), params.stride, params.padding), upstream);
}

// ---------------------------------------------------------------------------

BatchNormParams BatchNormParams::identity(std::size_t channels) {
    BatchNormParams params;
    params.gamma = Tensor({channels}, 1.0);
    params.beta = Tensor({channels}, 0.0);
    params.running_mean = Tensor({channels}, 0.0);
    params.running_var = Tensor({channels}, 1.0);
    return params;
}

namespace {

std::size_t bn_rows(const BatchNormParams& params, const Tensor& input, const char* who) {
    require(input.rank() >= 1 && input.shape().back() == params.channels(),
            std::string(who) + ": input " + shape_to_string(input.shape()) + " does not have " +
                std::to_string(params.channels()) + " channels on the last axis");
    return input.size() / params.channels();
}

}  // namespace

namespace {

Tensor bn_normalize(const BatchNormParams& params, const Tensor& input, std::size_t rows, Tensor mean,
                    Tensor inv_std, Phase phase, BatchNormCache* cache) {
    const std::size_t channels = params.channels();
    Tensor normalized(input.shape());
    Tensor out(input.shape());
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < channels; ++c) {
            const std::size_t i = r * channels + c;
            normalized[i] = (input[i] - mean[c]) * inv_std[c];
            out[i] = params.gamma[c] * normalized[i] + params.beta[c];
        }
    }
    if (cache != nullptr) {
        cache->normalized = std::move(normalized);
        cache->inv_std = std::move(inv_std);
        cache->phase = phase;
    }
    return out;
}

}  // namespace

Tensor bn_forward_eval(const BatchNormParams& params, const Tensor& input, BatchNormCache* cache) {
    const std::size_t channels = params.channels();
    const std::size_t rows = bn_rows(params, input, "bn_forward");
    Tensor inv_std({channels});
    for (std::size_t c = 0; c < channels; ++c) {
        inv_std[c] = 1.0 / std::sqrt(params.running_var[c] + params.eps);
    }
    return bn_normalize(params, input, rows, params.running_mean, std::move(inv_std), Phase::Eval, cache);
}

Tensor bn_forward(BatchNormParams& params, const Tensor& input, Phase phase, BatchNormCache* cache) {
    if (phase == Phase::Eval) {
        return bn_forward_eval(params, input, cache);
    }
    const std::size_t channels = params.channels();
    const std::size_t rows = bn_rows(params, input, "bn_forward");
    require(rows >= 2, "bn_forward: train phase needs at least 2 values per channel");
    Tensor mean({channels});
    Tensor var({channels});
    Tensor inv_std({channels});
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < channels; ++c) {
            mean[c] += input[r * channels + c];
        }
    }
    for (std::size_t c = 0; c < channels; ++c) {
        mean[c] /= static_cast<double>(rows);
    }
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < channels; ++c) {
            const double d = input[r * channels + c] - mean[c];
            var[c] += d * d;
        }
    }
    const double unbias = static_cast<double>(rows) / static_cast<double>(rows - 1);
    for (std::size_t c = 0; c < channels; ++c) {
        var[c] /= static_cast<double>(rows);
        inv_std[c] = 1.0 / std::sqrt(var[c] + params.eps);
        params.running_mean[c] = (1.0 - params.momentum) * params.running_mean[c] + params.momentum * mean[c];
        params.running_var[c] = (1.0 - params.momentum) * params.running_var[c] + params.momentum * var[c] * unbias;
    }
    return bn_normalize(params, input, rows, std::move(mean), std::move(inv_std), Phase::Train, cache);
}

BatchNormGrads bn_backward(const BatchNormParams& params, const BatchNormCache& cache, const Tensor& upstream) {
    const std::size_t channels = params.channels();
    const std::size_t rows = bn_rows(params, upstream, "bn_backward");
    require(upstream.shape() == cache.normalized.shape(), "bn_backward: upstream does not match cached forward");

    BatchNormGrads grads{Tensor(upstream.shape()), Tensor({channels}), Tensor({channels})};
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < channels; ++c) {
            const std::size_t i = r * channels + c;
            grads.beta[c] += upstream[i];
            grads.gamma[c] += upstream[i] * cache.normalized[i];
        }
    }
    if (cache.phase == Phase::Eval) {
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < channels; ++c) {
                const std::size_t i = r * channels + c;
                grads.input[i] = params.gamma[c] * cache.inv_std[c] * upstream[i];
            }
        }
        return grads;
    }
    // dx = gamma / (m sigma) * (m dy - sum dy - x_hat * sum(dy x_hat))
    const double m = static_cast<double>(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < channels; ++c) {
            const std::size_t i = r * channels + c;
            grads.input[i] = params.gamma[c] * cache.inv_std[c] / m *
                             (m * upstream[i] - grads.beta[c] - cache.normalized[i] * grads.gamma[c]);
        }
    }
    return grads;
}

BatchNormGrads bn_backward(const BatchNormParams& params, const Tensor& input, const Tensor& upstream) {
    BatchNormParams scratch = params;
    BatchNormCache cache;
    bn_forward(scratch, input, Phase::Train, &cache);
    return bn_backward(params, cache, upstream);
}

// ---------------------------------------------------------------------------

Tensor relu_forward(const Tensor& input) {
    Tensor out(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) {
        out[i] = input[i] > 0.0 ? input[i] : 0.0;
    }
    return out;
}

Tensor relu_backward(const Tensor& input, const Tensor& upstream) {
    require(input.shape() == upstream.shape(), "relu_backward: shape mismatch");
    Tensor grad(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) {
        grad[i] = input[i] > 0.0 ? upstream[i] : 0.0;
    }
    return grad;
}

Tensor maxpool_forward(const Tensor& input, std::size_t window, MaxPoolCache* cache) {
    require(input.rank() == 4, "maxpool_forward: expected an NHWC batch");
    require(window >= 1 && input.dim(1) >= window && input.dim(2) >= window, "maxpool_forward: window too large");
    const std::size_t batch = input.dim(0);
    const std::size_t in_h = input.dim(1);
    const std::size_t in_w = input.dim(2);
    const std::size_t channels = input.dim(3);
    const std::size_t out_h = in_h / window;
    const std::size_t out_w = in_w / window;
    Tensor out({batch, out_h, out_w, channels});
    std::vector<std::size_t> argmax(out.size());
    for (std::size_t n = 0; n < batch; ++n) {
        for (std::size_t y = 0; y < out_h; ++y) {
            for (std::size_t x = 0; x < out_w; ++x) {
                for (std::size_t c = 0; c < channels; ++c) {
                    std::size_t best = ((n * in_h + y * window) * in_w + x * window) * channels + c;
                    for (std::size_t i = 0; i < window; ++i) {
                        for (std::size_t j = 0; j < window; ++j) {
                            const std::size_t idx =
                                ((n * in_h + y * window + i) * in_w + x * window + j) * channels + c;
                            if (input[idx] > input[best]) {
                                best = idx;
                            }
                        }
                    }
                    const std::size_t o = ((n * out_h + y) * out_w + x) * channels + c;
                    out[o] = input[best];
                    argmax[o] = best;
                }
            }
        }
    }
    if (cache != nullptr) {
        cache->input_shape = input.shape();
        cache->argmax = std::move(argmax);
    }
    return out;
}

Tensor maxpool_backward(const MaxPoolCache& cache, const Tensor& upstream) {
    require(upstream.size() == cache.argmax.size(), "maxpool_backward: upstream does not match cached forward");
    Tensor grad(cache.input_shape);
    for (std::size_t o = 0; o < upstream.size(); ++o) {
        grad[cache.argmax[o]] += upstream[o];
    }
    return grad;
}

// ---------------------------------------------------------------------------

double sigmoid(double z) noexcept {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

LossResult softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
    const std::size_t batch = labels.size();
    require(batch > 0, "softmax_cross_entropy: empty batch");
    require(logits.size() % batch == 0, "softmax_cross_entropy: logits do not split into the batch");
    const std::size_t classes = logits.size() / batch;
    require(logits.shape().back() == classes, "softmax_cross_entropy: class axis must be last");

    LossResult result{0.0, Tensor(logits.shape())};
    for (std::size_t n = 0; n < batch; ++n) {
        const int label = labels[n];
        require(label >= 0 && static_cast<std::size_t>(label) < classes,
                "softmax_cross_entropy: label " + std::to_string(label) + " out of range");
        const double* z = logits.data() + n * classes;
        const double peak = *std::max_element(z, z + classes);
        double total = 0.0;
        for (std::size_t k = 0; k < classes; ++k) {
            total += std::exp(z[k] - peak);
        }
        const double log_total = std::log(total);
        result.loss += log_total + peak - z[label];
        double* g = result.grad.data() + n * classes;
        for (std::size_t k = 0; k < classes; ++k) {
            g[k] = std::exp(z[k] - peak - log_total) / static_cast<double>(batch);
        }
        g[label] -= 1.0 / static_cast<double>(batch);
    }
    result.loss /= static_cast<double>(batch);
    return result;
}

LossResult sigmoid_bce(const Tensor& logits, std::span<const int> labels) {
    const std::size_t batch = labels.size();
    require(batch > 0, "sigmoid_bce: empty batch");
    require(logits.size() == batch, "sigmoid_bce: expected one logit per sample");
    LossResult result{0.0, Tensor(logits.shape())};
    for (std::size_t n = 0; n < batch; ++n) {
        const int label = labels[n];
        require(label == 0 || label == 1, "sigmoid_bce: label " + std::to_string(label) + " is not binary");
        const double z = logits[n];
        // max(z, 0) - z y + log(1 + exp(-|z|))
        result.loss += std::max(z, 0.0) - z * label + std::log1p(std::exp(-std::fabs(z)));
        result.grad[n] = (sigmoid(z) - label) / static_cast<double>(batch);
    }
    result.loss /= static_cast<double>(batch);
    return result;
}

// ---------------------------------------------------------------------------

double l2_adder_conv_identity(const Tensor& adder_out, const Tensor& conv_out, const Tensor& input,
                              const Tensor& filters, std::size_t stride, std::size_t padding) {
    require(adder_out.shape() == conv_out.shape(), "l2_adder_conv_identity: output shapes differ");
    const Patches patches = extract_patches(input, filters.dim(1), stride, padding);
    check_filters_against(filters, patches, "l2_adder_conv_identity");
    const std::size_t count = filters.dim(0);
    const std::size_t width = patches.geom.patch_size();
    require(adder_out.shape() == output_shape(patches, count), "l2_adder_conv_identity: output shape mismatch");

    std::vector<double> filter_sq(count, 0.0);
    for (std::size_t t = 0; t < count; ++t) {
        for (std::size_t k = 0; k < width; ++k) {
            filter_sq[t] += filters[t * width + k] * filters[t * width + k];
        }
    }
    double worst = 0.0;
    for (std::size_t r = 0; r < patches.rows(); ++r) {
        double patch_sq = 0.0;
        for (std::size_t k = 0; k < width; ++k) {
            patch_sq += patches.cols[r * width + k] * patches.cols[r * width + k];
        }
        for (std::size_t t = 0; t < count; ++t) {
            const std::size_t i = r * count + t;
            worst = std::max(worst, std::fabs(adder_out[i] - 2.0 * conv_out[i] + patch_sq + filter_sq[t]));
        }
    }
    return worst;
}

}  // namespace addernet
