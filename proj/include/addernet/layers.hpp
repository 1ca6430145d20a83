#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "addernet/tensor.hpp"

namespace addernet {

/// How adder filter gradients are formed in the backward pass.
enum class GradientMode {
    SignGrad,       // sgn(X - F)
    FullPrecision,  // X - F, used for every p
};

enum class Phase { Train, Eval };

/// Filters are stored {c_out, d, d, c_in} so each filter is one contiguous
/// row matching an im2col row.
struct AdderLayerParams {
    Tensor filters;
    std::size_t stride = 1;
    std::size_t padding = 0;
    double p = 2.0;

    std::size_t kernel() const { return filters.dim(1); }
    std::size_t in_channels() const { return filters.dim(3); }
    std::size_t out_channels() const { return filters.dim(0); }
};

struct ConvLayerParams {
    Tensor filters;  // {c_out, d, d, c_in}
    std::size_t stride = 1;
    std::size_t padding = 0;

    std::size_t kernel() const { return filters.dim(1); }
    std::size_t in_channels() const { return filters.dim(3); }
    std::size_t out_channels() const { return filters.dim(0); }
};

/// Adder filters start from N(0, 1) per element.
AdderLayerParams make_adder_layer(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                                  std::size_t stride, std::size_t padding, Rng& rng);
/// Convolution filters start from N(0, 1 / (d^2 c_in)).
ConvLayerParams make_conv_layer(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                                std::size_t stride, std::size_t padding, Rng& rng);

/// im2col over a batch: rows are (sample, out_y, out_x), columns (i, j, k).
struct Patches {
    Tensor cols;
    WindowGeometry geom;
    std::size_t batch = 0;

    std::size_t rows() const { return batch * geom.positions(); }
};

Patches extract_patches(const Tensor& input, std::size_t kernel, std::size_t stride, std::size_t padding);
/// Adjoint of extract_patches, returning an NHWC gradient.
Tensor fold_patches(const Tensor& grad_cols, const WindowGeometry& geom, std::size_t batch);

// -- adder layer -------------------------------------------------------------

/// Y(m, n, t) = -sum |X(m+i, n+j, k) - F(i, j, k, t)|^p for an NHWC batch.
Tensor adder_forward(const AdderLayerParams& params, const Tensor& input);
Tensor adder_forward(const AdderLayerParams& params, const Patches& patches);

/// Surrogate filter gradient: upstream-weighted (X - F), or sgn(X - F) in
/// SignGrad mode. Differs from the analytic gradient of the forward by the
/// factor p at p = 2.
Tensor adder_grad_filters(const AdderLayerParams& params, const Tensor& input, const Tensor& upstream,
                          GradientMode mode);
Tensor adder_grad_filters(const AdderLayerParams& params, const Patches& patches, const Tensor& upstream,
                          GradientMode mode);

/// Input gradient with local term sgn(F - X) |F - X|^(p-1).
Tensor adder_grad_input(const AdderLayerParams& params, const Tensor& input, const Tensor& upstream);
Tensor adder_grad_input(const AdderLayerParams& params, const Patches& patches, const Tensor& upstream);

// -- convolution -------------------------------------------------------------

Tensor conv_forward(const ConvLayerParams& params, const Tensor& input);
Tensor conv_forward(const ConvLayerParams& params, const Patches& patches);

struct ConvGrads {
    Tensor filters;
    Tensor input;
};

ConvGrads conv_grad(const ConvLayerParams& params, const Tensor& input, const Tensor& upstream);
ConvGrads conv_grad(const ConvLayerParams& params, const Patches& patches, const Tensor& upstream);

// -- batch normalization -----------------------------------------------------

/// Per-channel normalization over every axis but the last.
struct BatchNormParams {
    Tensor gamma;
    Tensor beta;
    Tensor running_mean;
    Tensor running_var;
    double eps = 1e-5;
    double momentum = 0.1;

    static BatchNormParams identity(std::size_t channels);
    std::size_t channels() const { return gamma.size(); }
};

struct BatchNormCache {
    Tensor normalized;  // x_hat
    Tensor inv_std;     // per channel
    Phase phase = Phase::Train;
};

/// Train phase uses batch statistics and updates the running averages
/// (unbiased variance); eval phase uses the running statistics.
Tensor bn_forward(BatchNormParams& params, const Tensor& input, Phase phase, BatchNormCache* cache = nullptr);
Tensor bn_forward_eval(const BatchNormParams& params, const Tensor& input, BatchNormCache* cache = nullptr);

struct BatchNormGrads {
    Tensor input;
    Tensor gamma;
    Tensor beta;
};

BatchNormGrads bn_backward(const BatchNormParams& params, const BatchNormCache& cache, const Tensor& upstream);
/// Recomputes train-phase batch statistics from the input.
BatchNormGrads bn_backward(const BatchNormParams& params, const Tensor& input, const Tensor& upstream);

// -- activations and pooling -------------------------------------------------

Tensor relu_forward(const Tensor& input);
/// Passes upstream where input > 0; the subgradient at 0 is 0.
Tensor relu_backward(const Tensor& input, const Tensor& upstream);

struct MaxPoolCache {
    Shape input_shape;
    std::vector<std::size_t> argmax;
};

/// Non-overlapping window x window max pooling over NHWC.
Tensor maxpool_forward(const Tensor& input, std::size_t window, MaxPoolCache* cache = nullptr);
Tensor maxpool_backward(const MaxPoolCache& cache, const Tensor& upstream);

// -- losses ------------------------------------------------------------------

struct LossResult {
    double loss = 0.0;  // mean over the batch
    Tensor grad;        // d(loss) / d(logits)
};

/// logits: batch-major with the class axis last.
LossResult softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);
/// One logit per sample; labels in {0, 1}.
LossResult sigmoid_bce(const Tensor& logits, std::span<const int> labels);

double sigmoid(double z) noexcept;
/// Class 1 iff sigmoid(logit) > 0.5.
inline int binary_prediction(double logit) noexcept { return logit > 0.0 ? 1 : 0; }

// -- identities --------------------------------------------------------------

/// max |Y_l2 - 2 Y_conv + |patch|^2 + |F_t|^2| over all outputs, for l2 adder
/// and convolution outputs computed from the same input and filters.
double l2_adder_conv_identity(const Tensor& adder_out, const Tensor& conv_out, const Tensor& input,
                              const Tensor& filters, std::size_t stride, std::size_t padding);

}  // namespace addernet
