#include "addernet/network.hpp"

#include <algorithm>
#include <stdexcept>

namespace addernet {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

[[noreturn]] void fail(const std::string& message) {
    throw std::invalid_argument(message);
}

bool is_filter_layer(LayerKind kind) {
    return kind == LayerKind::Adder || kind == LayerKind::Conv;
}

}  // namespace

std::string to_string(LayerKind kind) {
    switch (kind) {
        case LayerKind::Adder: return "adder";
        case LayerKind::Conv: return "conv";
        case LayerKind::BatchNorm: return "bn";
        case LayerKind::Relu: return "relu";
        case LayerKind::MaxPool: return "maxpool";
        case LayerKind::Flatten: return "flatten";
    }
    return "unknown";
}

LayerKind layer_kind_from_string(const std::string& name) {
    for (auto kind : {LayerKind::Adder, LayerKind::Conv, LayerKind::BatchNorm, LayerKind::Relu, LayerKind::MaxPool,
                      LayerKind::Flatten}) {
        if (to_string(kind) == name) {
            return kind;
        }
    }
    fail("unknown layer kind '" + name + "'");
}

std::string to_string(LossHead head) {
    return head == LossHead::SoftmaxCrossEntropy ? "softmax-ce" : "sigmoid-bce";
}

LossHead loss_head_from_string(const std::string& name) {
    if (name == "softmax-ce") {
        return LossHead::SoftmaxCrossEntropy;
    }
    if (name == "sigmoid-bce") {
        return LossHead::SigmoidBce;
    }
    fail("unknown loss head '" + name + "'");
}

std::string to_string(ParamRole role) {
    switch (role) {
        case ParamRole::AdderFilter: return "adder-filter";
        case ParamRole::ConvFilter: return "conv-filter";
        case ParamRole::BnGamma: return "bn-gamma";
        case ParamRole::BnBeta: return "bn-beta";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------

std::vector<Shape> NetworkSpec::layer_output_shapes() const {
    if (input_shape.size() != 3 || shape_volume(input_shape) == 0) {
        fail("network input shape must be {H, W, C} with positive extents");
    }
    std::vector<Shape> shapes;
    Shape current = input_shape;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const LayerSpec& layer = layers[i];
        const std::string where = "layer " + std::to_string(i) + " (" + to_string(layer.kind) + ")";
        switch (layer.kind) {
            case LayerKind::Adder:
            case LayerKind::Conv: {
                if (layer.out_channels == 0) {
                    fail(where + ": out_channels must be positive");
                }
                WindowGeometry g{current[0], current[1], current[2], layer.kernel, layer.stride, layer.padding};
                try {
                    g.validate();
                } catch (const std::invalid_argument& e) {
                    fail(where + ": " + e.what());
                }
                current = {g.out_h(), g.out_w(), layer.out_channels};
                break;
            }
            case LayerKind::MaxPool:
                if (layer.kernel == 0 || current[0] < layer.kernel || current[1] < layer.kernel) {
                    fail(where + ": pooling window does not fit " + shape_to_string(current));
                }
                current = {current[0] / layer.kernel, current[1] / layer.kernel, current[2]};
                break;
            case LayerKind::Flatten:
                current = {1, 1, shape_volume(current)};
                break;
            case LayerKind::BatchNorm:
            case LayerKind::Relu:
                break;
        }
        shapes.push_back(current);
    }
    if (loss == LossHead::SigmoidBce && shape_volume(current) != 1) {
        fail("sigmoid-bce head needs a single output, network produces " + shape_to_string(current));
    }
    return shapes;
}

Shape NetworkSpec::output_shape() const {
    const auto shapes = layer_output_shapes();
    return shapes.empty() ? input_shape : shapes.back();
}

NetworkSpec lenet5_bn(LayerKind learned, bool conv_ends) {
    if (!is_filter_layer(learned)) {
        fail("lenet5_bn: learned layer kind must be adder or conv");
    }
    const LayerKind ends = conv_ends ? LayerKind::Conv : learned;
    NetworkSpec spec;
    spec.name = std::string("lenet5bn-") + to_string(learned) + (conv_ends ? "-convends" : "");
    spec.input_shape = {32, 32, 1};
    spec.loss = LossHead::SoftmaxCrossEntropy;
    auto filter = [](LayerKind kind, std::size_t channels, std::size_t kernel) {
        return LayerSpec{kind, channels, kernel, 1, 0};
    };
    const LayerSpec bn{LayerKind::BatchNorm};
    const LayerSpec relu{LayerKind::Relu};
    const LayerSpec pool{LayerKind::MaxPool, 0, 2, 2, 0};
    spec.layers = {
        filter(ends, 6, 5),      bn, relu, pool,
        filter(learned, 16, 5),  bn, relu, pool,
        LayerSpec{LayerKind::Flatten},
        filter(learned, 120, 1), bn, relu,
        filter(learned, 84, 1),  bn, relu,
        filter(ends, 10, 1),     bn,
    };
    return spec;
}

NetworkSpec two_layer_net(std::size_t in_features, std::size_t hidden, LayerKind learned) {
    if (!is_filter_layer(learned)) {
        fail("two_layer_net: learned layer kind must be adder or conv");
    }
    NetworkSpec spec;
    spec.name = std::string("two-layer-") + to_string(learned) + "-" + std::to_string(hidden);
    spec.input_shape = {1, 1, in_features};
    spec.loss = LossHead::SigmoidBce;
    spec.layers = {
        LayerSpec{learned, hidden, 1, 1, 0},
        LayerSpec{LayerKind::BatchNorm},
        LayerSpec{LayerKind::Relu},
        LayerSpec{learned, 1, 1, 1, 0},
        LayerSpec{LayerKind::BatchNorm},
    };
    return spec;
}

// ---------------------------------------------------------------------------

Network::Network(NetworkSpec spec, std::vector<Layer> layers) : spec_(std::move(spec)), layers_(std::move(layers)) {
    spec_.validate();
    if (layers_.size() != spec_.layers.size()) {
        fail("network has " + std::to_string(layers_.size()) + " layers but spec lists " +
             std::to_string(spec_.layers.size()));
    }
}

std::vector<ParamRef> Network::parameters() {
    std::vector<ParamRef> refs;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        std::visit(Overloaded{
                       [&](AdderLayerParams& l) { refs.push_back({i, ParamRole::AdderFilter, &l.filters}); },
                       [&](ConvLayerParams& l) { refs.push_back({i, ParamRole::ConvFilter, &l.filters}); },
                       [&](BatchNormParams& l) {
                           refs.push_back({i, ParamRole::BnGamma, &l.gamma});
                           refs.push_back({i, ParamRole::BnBeta, &l.beta});
                       },
                       [](auto&) {},
                   },
                   layers_[i]);
    }
    return refs;
}

std::vector<ConstParamRef> Network::parameters() const {
    std::vector<ConstParamRef> refs;
    for (const auto& ref : const_cast<Network*>(this)->parameters()) {
        refs.push_back({ref.layer, ref.role, ref.value});
    }
    return refs;
}

std::size_t Network::parameter_count() const {
    std::size_t count = 0;
    for (const auto& ref : parameters()) {
        count += ref.value->size();
    }
    return count;
}

void Network::set_p(double p) {
    if (!(p >= 1.0 && p <= 2.0)) {
        fail("norm exponent p must lie in [1, 2]");
    }
    for (auto& layer : layers_) {
        if (auto* adder = std::get_if<AdderLayerParams>(&layer)) {
            adder->p = p;
        }
    }
}

Network build_network(const NetworkSpec& spec, Rng& rng) {
    spec.validate();
    std::vector<Layer> layers;
    Shape current = spec.input_shape;
    const auto shapes = spec.layer_output_shapes();
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& l = spec.layers[i];
        switch (l.kind) {
            case LayerKind::Adder:
                layers.emplace_back(make_adder_layer(current[2], l.out_channels, l.kernel, l.stride, l.padding, rng));
                break;
            case LayerKind::Conv:
                layers.emplace_back(make_conv_layer(current[2], l.out_channels, l.kernel, l.stride, l.padding, rng));
                break;
            case LayerKind::BatchNorm:
                layers.emplace_back(BatchNormParams::identity(current[2]));
                break;
            case LayerKind::Relu:
                layers.emplace_back(ReluLayer{});
                break;
            case LayerKind::MaxPool:
                layers.emplace_back(MaxPoolLayer{l.kernel});
                break;
            case LayerKind::Flatten:
                layers.emplace_back(FlattenLayer{});
                break;
        }
        current = shapes[i];
    }
    return Network(spec, std::move(layers));
}

// ---------------------------------------------------------------------------

namespace {

void check_batch(const NetworkSpec& spec, const Tensor& batch) {
    if (batch.rank() != 4 || batch.dim(1) != spec.input_shape[0] || batch.dim(2) != spec.input_shape[1] ||
        batch.dim(3) != spec.input_shape[2]) {
        fail("batch shape " + shape_to_string(batch.shape()) + " does not match network input " +
             shape_to_string(spec.input_shape));
    }
}

Tensor flatten(const Tensor& x) {
    return x.reshaped({x.dim(0), 1, 1, x.size() / x.dim(0)});
}

}  // namespace

ForwardTrace forward_pass(Network& net, const Tensor& batch, Phase phase) {
    check_batch(net.spec(), batch);
    ForwardTrace trace;
    trace.network_version = net.version();
    trace.phase = phase;
    trace.caches.reserve(net.layers().size());
    Tensor x = batch;
    for (auto& layer : net.layers()) {
        x = std::visit(Overloaded{
                           [&](AdderLayerParams& l) {
                               Patches patches = extract_patches(x, l.kernel(), l.stride, l.padding);
                               Tensor y = adder_forward(l, patches);
                               trace.caches.emplace_back(std::move(patches));
                               return y;
                           },
                           [&](ConvLayerParams& l) {
                               Patches patches = extract_patches(x, l.kernel(), l.stride, l.padding);
                               Tensor y = conv_forward(l, patches);
                               trace.caches.emplace_back(std::move(patches));
                               return y;
                           },
                           [&](BatchNormParams& l) {
                               BatchNormCache cache;
                               Tensor y = bn_forward(l, x, phase, &cache);
                               trace.caches.emplace_back(std::move(cache));
                               return y;
                           },
                           [&](ReluLayer&) {
                               Tensor y = relu_forward(x);
                               trace.caches.emplace_back(std::move(x));
                               return y;
                           },
                           [&](MaxPoolLayer& l) {
                               MaxPoolCache cache;
                               Tensor y = maxpool_forward(x, l.window, &cache);
                               trace.caches.emplace_back(std::move(cache));
                               return y;
                           },
                           [&](FlattenLayer&) {
                               trace.caches.emplace_back(x.shape());
                               return flatten(x);
                           },
                       },
                       layer);
    }
    trace.output = std::move(x);
    return trace;
}

Tensor predict(const Network& net, const Tensor& batch) {
    check_batch(net.spec(), batch);
    Tensor x = batch;
    for (const auto& layer : net.layers()) {
        x = std::visit(Overloaded{
                           [&](const AdderLayerParams& l) { return adder_forward(l, x); },
                           [&](const ConvLayerParams& l) { return conv_forward(l, x); },
                           [&](const BatchNormParams& l) { return bn_forward_eval(l, x); },
                           [&](const ReluLayer&) { return relu_forward(x); },
                           [&](const MaxPoolLayer& l) { return maxpool_forward(x, l.window); },
                           [&](const FlattenLayer&) { return flatten(x); },
                       },
                       layer);
    }
    return x;
}

Gradients backward_pass(const Network& net, const ForwardTrace& trace, const Tensor& loss_grad, GradientMode mode) {
    if (trace.network_version != net.version() || trace.caches.size() != net.layers().size()) {
        fail("backward_pass: trace is stale or belongs to another network");
    }
    if (loss_grad.shape() != trace.output.shape()) {
        fail("backward_pass: loss gradient " + shape_to_string(loss_grad.shape()) + " does not match output " +
             shape_to_string(trace.output.shape()));
    }
    const auto params = net.parameters();
    Gradients grads(params.size());
    // Index of the first parameter of each layer.
    std::vector<std::size_t> first_param(net.layers().size(), params.size());
    for (std::size_t i = params.size(); i-- > 0;) {
        first_param[params[i].layer] = i;
    }

    Tensor upstream = loss_grad;
    for (std::size_t li = net.layers().size(); li-- > 0;) {
        const bool need_input_grad = li > 0;
        const auto& cache = trace.caches[li];
        upstream = std::visit(
            Overloaded{
                [&](const AdderLayerParams& l) {
                    const auto& patches = std::get<Patches>(cache);
                    grads[first_param[li]] = adder_grad_filters(l, patches, upstream, mode);
                    return need_input_grad ? adder_grad_input(l, patches, upstream) : Tensor{};
                },
                [&](const ConvLayerParams& l) {
                    const auto& patches = std::get<Patches>(cache);
                    ConvGrads g = conv_grad(l, patches, upstream);
                    grads[first_param[li]] = std::move(g.filters);
                    return std::move(g.input);
                },
                [&](const BatchNormParams& l) {
                    BatchNormGrads g = bn_backward(l, std::get<BatchNormCache>(cache), upstream);
                    grads[first_param[li]] = std::move(g.gamma);
                    grads[first_param[li] + 1] = std::move(g.beta);
                    return std::move(g.input);
                },
                [&](const ReluLayer&) { return relu_backward(std::get<Tensor>(cache), upstream); },
                [&](const MaxPoolLayer&) { return maxpool_backward(std::get<MaxPoolCache>(cache), upstream); },
                [&](const FlattenLayer&) { return upstream.reshaped(std::get<Shape>(cache)); },
            },
            net.layers()[li]);
        if (!need_input_grad) {
            break;
        }
    }
    return grads;
}

// ---------------------------------------------------------------------------

OpCountReport count_ops(const NetworkSpec& spec, const Shape& input_shape) {
    NetworkSpec resized = spec;
    resized.input_shape = input_shape;
    const auto shapes = resized.layer_output_shapes();
    OpCountReport report;
    Shape current = input_shape;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& l = spec.layers[i];
        if (is_filter_layer(l.kind)) {
            const Shape& out = shapes[i];
            const std::uint64_t macs = static_cast<std::uint64_t>(l.kernel) * l.kernel * current[2] *
                                       l.out_channels * out[0] * out[1];
            LayerOps ops{i, l.kind, 0, 0};
            if (l.kind == LayerKind::Conv) {
                ops.multiplications = macs;
                ops.additions = macs;
            } else {
                ops.additions = 2 * macs;
            }
            report.multiplications += ops.multiplications;
            report.additions += ops.additions;
            report.layers.push_back(ops);
        }
        current = shapes[i];
    }
    return report;
}

OpCountReport count_ops(const NetworkSpec& spec) {
    return count_ops(spec, spec.input_shape);
}

// ---------------------------------------------------------------------------

void recalibrate_bn(Network& net, const Tensor& inputs, std::size_t chunk) {
    check_batch(net.spec(), inputs);
    const std::size_t n = inputs.shape()[0];
    if (chunk == 0 || chunk > n) {
        chunk = n;
    }
    std::vector<BatchNormParams*> bns;
    for (auto& layer : net.layers()) {
        if (auto* bn = std::get_if<BatchNormParams>(&layer)) {
            bns.push_back(bn);
        }
    }
    std::vector<double> saved;
    for (auto* bn : bns) {
        saved.push_back(bn->momentum);
    }
    const std::size_t row = inputs.size() / n;
    std::size_t k = 0;
    // A trailing chunk of one sample has no batch variance; fold it away.
    for (std::size_t start = 0; start + 1 < n; start += chunk, ++k) {
        std::size_t count = std::min(chunk, n - start);
        if (n - start - count == 1) {
            ++count;
        }
        Shape shape = inputs.shape();
        shape[0] = count;
        const auto first = inputs.values().begin() + static_cast<std::ptrdiff_t>(start * row);
        Tensor part(shape, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(count * row)));
        for (auto* bn : bns) {
            bn->momentum = 1.0 / static_cast<double>(k + 1);  // running average of chunk statistics
        }
        (void)forward_pass(net, part, Phase::Train);
        if (count > chunk) {
            break;
        }
    }
    for (std::size_t i = 0; i < bns.size(); ++i) {
        bns[i]->momentum = saved[i];
    }
}

LabelGrid predict_grid(const Network& net, const GridBounds& bounds, std::size_t rows, std::size_t cols) {
    if (net.spec().input_shape != Shape{1, 1, 2}) {
        fail("predict_grid needs a network with a 2-D input, got " + shape_to_string(net.spec().input_shape));
    }
    if (rows == 0 || cols == 0) {
        fail("predict_grid: resolution must be positive");
    }
    LabelGrid grid{rows, cols, std::vector<int>(rows * cols)};
    const double dx = (bounds.x_max - bounds.x_min) / static_cast<double>(cols);
    const double dy = (bounds.y_max - bounds.y_min) / static_cast<double>(rows);
    constexpr std::size_t kChunk = 4096;
    const std::size_t total = rows * cols;
    for (std::size_t start = 0; start < total; start += kChunk) {
        const std::size_t count = std::min(kChunk, total - start);
        Tensor batch({count, 1, 1, 2});
        for (std::size_t i = 0; i < count; ++i) {
            const std::size_t r = (start + i) / cols;
            const std::size_t c = (start + i) % cols;
            batch[2 * i] = bounds.x_min + (static_cast<double>(c) + 0.5) * dx;
            batch[2 * i + 1] = bounds.y_max - (static_cast<double>(r) + 0.5) * dy;
        }
        const Tensor logits = predict(net, batch);
        for (std::size_t i = 0; i < count; ++i) {
            grid.labels[start + i] = binary_prediction(logits[i]);
        }
    }
    return grid;
}

}  // namespace addernet
