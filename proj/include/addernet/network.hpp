#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "addernet/layers.hpp"
#include "addernet/tensor.hpp"

namespace addernet {

enum class LayerKind { Adder, Conv, BatchNorm, Relu, MaxPool, Flatten };
enum class LossHead { SoftmaxCrossEntropy, SigmoidBce };

std::string to_string(LayerKind kind);
LayerKind layer_kind_from_string(const std::string& name);
std::string to_string(LossHead head);
LossHead loss_head_from_string(const std::string& name);

struct LayerSpec {
    LayerKind kind = LayerKind::Relu;
    std::size_t out_channels = 0;  // adder / conv
    std::size_t kernel = 1;        // adder / conv; window for max pooling
    std::size_t stride = 1;
    std::size_t padding = 0;

    bool operator==(const LayerSpec&) const = default;
};

struct NetworkSpec {
    std::string name = "custom";
    Shape input_shape;  // {H, W, C}
    std::vector<LayerSpec> layers;
    LossHead loss = LossHead::SoftmaxCrossEntropy;

    /// Per-layer output shapes {H, W, C}; throws std::invalid_argument when
    /// adjacent layers do not compose.
    std::vector<Shape> layer_output_shapes() const;
    Shape output_shape() const;
    void validate() const { (void)layer_output_shapes(); }

    bool operator==(const NetworkSpec&) const = default;
};

/// LeNet-5 with batch normalization after every filter layer, 32x32x1 input:
/// 5x5x6 - pool - 5x5x16 - pool - 400x120 - 120x84 - 84x10. `learned` picks
/// adder or convolution layers; `conv_ends` keeps the first and last filter
/// layers multiplicative.
NetworkSpec lenet5_bn(LayerKind learned, bool conv_ends = false);

/// Two-layer net on a 1x1xin_features input: filter layer (n units), BN,
/// ReLU, filter layer (1 unit), BN; sigmoid BCE head.
NetworkSpec two_layer_net(std::size_t in_features, std::size_t hidden, LayerKind learned);

struct ReluLayer {};
struct MaxPoolLayer {
    std::size_t window = 2;
};
struct FlattenLayer {};

using Layer = std::variant<AdderLayerParams, ConvLayerParams, BatchNormParams, ReluLayer, MaxPoolLayer, FlattenLayer>;

enum class ParamRole { AdderFilter, ConvFilter, BnGamma, BnBeta };

std::string to_string(ParamRole role);

struct ParamRef {
    std::size_t layer = 0;
    ParamRole role = ParamRole::ConvFilter;
    Tensor* value = nullptr;
};

struct ConstParamRef {
    std::size_t layer = 0;
    ParamRole role = ParamRole::ConvFilter;
    const Tensor* value = nullptr;
};

class Network {
public:
    Network(NetworkSpec spec, std::vector<Layer> layers);

    const NetworkSpec& spec() const noexcept { return spec_; }
    std::vector<Layer>& layers() noexcept { return layers_; }
    const std::vector<Layer>& layers() const noexcept { return layers_; }

    /// Trainable tensors in a fixed order (filters, then gamma and beta per BN).
    std::vector<ParamRef> parameters();
    std::vector<ConstParamRef> parameters() const;
    std::size_t parameter_count() const;

    /// Sets the norm exponent of every adder layer.
    void set_p(double p);

    /// Incremented whenever parameters change; traces remember it.
    std::uint64_t version() const noexcept { return version_; }
    void mark_updated() noexcept { ++version_; }

private:
    NetworkSpec spec_;
    std::vector<Layer> layers_;
    std::uint64_t version_ = 0;
};

/// Initializes every layer from `rng` in layer order.
Network build_network(const NetworkSpec& spec, Rng& rng);

using LayerCache = std::variant<std::monostate, Patches, BatchNormCache, Tensor, MaxPoolCache, Shape>;

struct ForwardTrace {
    std::uint64_t network_version = 0;
    Phase phase = Phase::Train;
    std::vector<LayerCache> caches;
    Tensor output;
};

/// Runs the batch (N x H x W x C) through the network. Train phase updates
/// BN running statistics.
ForwardTrace forward_pass(Network& net, const Tensor& batch, Phase phase);
/// Eval-phase outputs without keeping a trace.
Tensor predict(const Network& net, const Tensor& batch);
/// Replaces every BN layer's running statistics with the average batch
/// statistics over `inputs`, taken in train-phase chunks of `chunk` samples
/// (0: one pass over the whole set).
void recalibrate_bn(Network& net, const Tensor& inputs, std::size_t chunk = 0);

/// One gradient per entry of net.parameters(), same order.
using Gradients = std::vector<Tensor>;

Gradients backward_pass(const Network& net, const ForwardTrace& trace, const Tensor& loss_grad,
                        GradientMode mode);

struct LayerOps {
    std::size_t layer = 0;
    LayerKind kind = LayerKind::Conv;
    std::uint64_t multiplications = 0;
    std::uint64_t additions = 0;
};

/// Per forward pass of one sample. BN, activations and pooling are omitted;
/// subtractions count as additions.
struct OpCountReport {
    std::vector<LayerOps> layers;
    std::uint64_t multiplications = 0;
    std::uint64_t additions = 0;
    std::uint64_t xnor = 0;
};

OpCountReport count_ops(const NetworkSpec& spec);
OpCountReport count_ops(const NetworkSpec& spec, const Shape& input_shape);

struct GridBounds {
    double x_min = -1.0;
    double x_max = 1.0;
    double y_min = -1.0;
    double y_max = 1.0;
};

/// Row 0 is the top (largest y) of the domain; pixel centers are sampled.
struct LabelGrid {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<int> labels;

    int at(std::size_t r, std::size_t c) const { return labels[r * cols + c]; }
};

LabelGrid predict_grid(const Network& net, const GridBounds& bounds, std::size_t rows, std::size_t cols);

}  // namespace addernet
