#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

#include "addernet/app.hpp"

namespace addernet::app {

namespace {

using LossFn = std::function<double(std::span<const double>)>;

// One randomized instance: parameters, implemented gradient (already
// multiplied by the expected factor) and the loss that produced it.
struct Instance {
    std::vector<double> theta;
    std::vector<double> grad;
    LossFn loss;
};

std::vector<double> concat(std::initializer_list<const Tensor*> parts) {
    std::vector<double> out;
    for (const Tensor* t : parts) {
        out.insert(out.end(), t->values().begin(), t->values().end());
    }
    return out;
}

Tensor slice(std::span<const double> theta, std::size_t offset, const Shape& shape) {
    const std::size_t n = shape_volume(shape);
    return Tensor(shape, std::vector<double>(theta.begin() + static_cast<std::ptrdiff_t>(offset),
                                             theta.begin() + static_cast<std::ptrdiff_t>(offset + n)));
}

double weighted_sum(const Tensor& y, const Tensor& w) {
    return dot(y.values(), w.values());
}

// Random small geometry: batch 2, 4-5 pixels per side, 1-2 channels.
struct Geometry {
    std::size_t n, h, w, c, kernel, out, stride, padding;
};

Geometry random_geometry(Rng& rng) {
    Geometry g{};
    g.n = 2;
    g.h = 4 + rng.below(2);
    g.w = 4 + rng.below(2);
    g.c = 1 + rng.below(2);
    g.kernel = 1 + rng.below(3);
    g.out = 1 + rng.below(3);
    g.stride = 1 + rng.below(2);
    g.padding = rng.below(2);
    return g;
}

Instance conv_instance(Rng& rng) {
    const Geometry g = random_geometry(rng);
    const ConvLayerParams base = make_conv_layer(g.c, g.out, g.kernel, g.stride, g.padding, rng);
    const Tensor x = randn_seeded(rng, {g.n, g.h, g.w, g.c}, 0.0, 1.0);
    const Tensor y = conv_forward(base, x);
    const Tensor w = randn_seeded(rng, y.shape(), 0.0, 1.0);
    const Shape fshape = base.filters.shape();
    const Shape xshape = x.shape();
    const ConvGrads grads = conv_grad(base, x, w);
    Instance inst{concat({&base.filters, &x}), concat({&grads.filters, &grads.input}), {}};
    inst.loss = [=](std::span<const double> theta) {
        ConvLayerParams p = base;
        p.filters = slice(theta, 0, fshape);
        return weighted_sum(conv_forward(p, slice(theta, shape_volume(fshape), xshape)), w);
    };
    return inst;
}

Instance adder_instance(Rng& rng, double p, bool with_filters) {
    const Geometry g = random_geometry(rng);
    AdderLayerParams base = make_adder_layer(g.c, g.out, g.kernel, g.stride, g.padding, rng);
    base.p = p;
    const Tensor x = randn_seeded(rng, {g.n, g.h, g.w, g.c}, 0.0, 1.0);
    const Tensor y = adder_forward(base, x);
    const Tensor w = randn_seeded(rng, y.shape(), 0.0, 0.2);
    const Shape fshape = base.filters.shape();
    const Shape xshape = x.shape();
    // The surrogate omits the chain factor p of d|z|^p / dz; at p = 2 it is 2.
    const double factor = p;
    Tensor gx = adder_grad_input(base, x, w);
    Instance inst;
    if (with_filters) {
        Tensor gf = adder_grad_filters(base, x, w, GradientMode::FullPrecision);
        inst.theta = concat({&base.filters, &x});
        inst.grad = concat({&gf, &gx});
    } else {
        inst.theta = concat({&x});
        inst.grad = concat({&gx});
    }
    for (double& v : inst.grad) {
        v *= factor;
    }
    inst.loss = [=](std::span<const double> theta) {
        AdderLayerParams q = base;
        std::size_t offset = 0;
        if (with_filters) {
            q.filters = slice(theta, 0, fshape);
            offset = shape_volume(fshape);
        }
        return weighted_sum(adder_forward(q, slice(theta, offset, xshape)), w);
    };
    return inst;
}

Instance bn_instance(Rng& rng) {
    const std::size_t c = 1 + rng.below(3);
    const Shape xshape{3 + rng.below(4), 1 + rng.below(2), 1 + rng.below(2), c};
    BatchNormParams base = BatchNormParams::identity(c);
    base.gamma = randn_seeded(rng, {c}, 1.0, 0.5);
    base.beta = randn_seeded(rng, {c}, 0.0, 0.5);
    const Tensor x = randn_seeded(rng, xshape, 0.5, 2.0);
    const Tensor w = randn_seeded(rng, xshape, 0.0, 1.0);
    BatchNormParams scratch = base;
    BatchNormCache cache;
    (void)bn_forward(scratch, x, Phase::Train, &cache);
    const BatchNormGrads grads = bn_backward(base, cache, w);
    Instance inst{concat({&x, &base.gamma, &base.beta}), concat({&grads.input, &grads.gamma, &grads.beta}), {}};
    inst.loss = [=](std::span<const double> theta) {
        BatchNormParams q = base;
        const std::size_t nx = shape_volume(xshape);
        q.gamma = slice(theta, nx, {c});
        q.beta = slice(theta, nx + c, {c});
        return weighted_sum(bn_forward(q, slice(theta, 0, xshape), Phase::Train), w);
    };
    return inst;
}

Instance relu_instance(Rng& rng) {
    const Shape shape{2, 3, 3, 2};
    Tensor x = randn_seeded(rng, shape, 0.0, 1.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        // Keep samples away from the kink at 0.
        if (std::abs(x[i]) < 0.05) {
            x[i] = x[i] < 0.0 ? -0.05 : 0.05;
        }
    }
    const Tensor w = randn_seeded(rng, shape, 0.0, 1.0);
    const Tensor g = relu_backward(x, w);
    Instance inst{concat({&x}), concat({&g}), {}};
    inst.loss = [=](std::span<const double> theta) { return weighted_sum(relu_forward(slice(theta, 0, shape)), w); };
    return inst;
}

Instance softmax_instance(Rng& rng) {
    const std::size_t n = 2 + rng.below(4);
    const std::size_t k = 2 + rng.below(8);
    const Tensor logits = randn_seeded(rng, {n, k}, 0.0, 2.0);
    std::vector<int> labels(n);
    for (auto& l : labels) {
        l = static_cast<int>(rng.below(k));
    }
    const LossResult r = softmax_cross_entropy(logits, labels);
    Instance inst{concat({&logits}), concat({&r.grad}), {}};
    inst.loss = [=](std::span<const double> theta) {
        return softmax_cross_entropy(slice(theta, 0, {n, k}), labels).loss;
    };
    return inst;
}

Instance bce_instance(Rng& rng) {
    const std::size_t n = 2 + rng.below(8);
    const Tensor logits = randn_seeded(rng, {n, 1}, 0.0, 3.0);
    std::vector<int> labels(n);
    for (auto& l : labels) {
        l = static_cast<int>(rng.below(2));
    }
    const LossResult r = sigmoid_bce(logits, labels);
    Instance inst{concat({&logits}), concat({&r.grad}), {}};
    inst.loss = [=](std::span<const double> theta) { return sigmoid_bce(slice(theta, 0, {n, 1}), labels).loss; };
    return inst;
}

// Small end-to-end network (~200 parameters); `first` is the kind of the
// first filter layer. No BN after the last layer: it would make the earlier
// BN shift exactly gradient-free, leaving only round-off to compare.
Instance network_instance(Rng& rng, LayerKind first) {
    NetworkSpec spec;
    spec.name = "gradcheck";
    spec.input_shape = {4, 4, 2};
    spec.loss = LossHead::SoftmaxCrossEntropy;
    spec.layers = {
        LayerSpec{first, 4, 3, 1, 1}, LayerSpec{LayerKind::BatchNorm}, LayerSpec{LayerKind::Relu},
        LayerSpec{LayerKind::MaxPool, 0, 2, 2, 0}, LayerSpec{LayerKind::Flatten},
        LayerSpec{LayerKind::Conv, 8, 1, 1, 0},
    };
    auto net = std::make_shared<Network>(build_network(spec, rng));
    net->set_p(2.0);
    const Tensor x = randn_seeded(rng, {3, 4, 4, 2}, 0.0, 1.0);
    std::vector<int> labels(3);
    for (auto& l : labels) {
        l = static_cast<int>(rng.below(8));
    }
    const ForwardTrace trace = forward_pass(*net, x, Phase::Train);
    const LossResult loss = softmax_cross_entropy(trace.output, labels);
    const Gradients grads = backward_pass(*net, trace, loss.grad, GradientMode::FullPrecision);
    Instance inst;
    const auto params = net->parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double factor = params[i].role == ParamRole::AdderFilter ? 2.0 : 1.0;
        for (double v : params[i].value->values()) {
            inst.theta.push_back(v);
        }
        for (double g : grads[i].values()) {
            inst.grad.push_back(factor * g);
        }
    }
    inst.loss = [net, x, labels](std::span<const double> theta) {
        std::size_t offset = 0;
        for (const auto& ref : net->parameters()) {
            std::copy_n(theta.begin() + static_cast<std::ptrdiff_t>(offset), ref.value->size(), ref.value->data());
            offset += ref.value->size();
        }
        net->mark_updated();
        return softmax_cross_entropy(forward_pass(*net, x, Phase::Train).output, labels).loss;
    };
    return inst;
}

}  // namespace

Metadata GradCheckConfig::metadata() const {
    return {
        {"command", "gradcheck"},          {"instances", std::to_string(instances)},
        {"coords", std::to_string(coords)}, {"step", format_double(step)},
        {"network_step", format_double(network_step)},
        {"tolerance", format_double(tolerance)}, {"seed", std::to_string(seed)},
    };
}

std::vector<GradCheckRow> run_gradcheck(const GradCheckConfig& config) {
    struct Check {
        std::string name;
        double factor;
        double tolerance;
        std::function<Instance(Rng&)> make;
        double step = 0.0;  // 0: config.step
    };
    const double net_tol = std::max(config.tolerance, 1e-4);
    const double tight_tol = std::min(config.tolerance, 1e-6);
    const double net_step = config.network_step;
    const std::vector<Check> checks{
        {"conv", 1.0, config.tolerance, conv_instance},
        {"bn", 1.0, config.tolerance, bn_instance},
        {"relu", 1.0, tight_tol, relu_instance},
        {"softmax-ce", 1.0, tight_tol, softmax_instance},
        {"sigmoid-bce", 1.0, tight_tol, bce_instance},
        {"adder-p2", 2.0, config.tolerance, [](Rng& r) { return adder_instance(r, 2.0, true); }},
        {"adder-p1-input", 1.0, config.tolerance, [](Rng& r) { return adder_instance(r, 1.0, false); }},
        {"network-conv", 1.0, net_tol, [](Rng& r) { return network_instance(r, LayerKind::Conv); }, net_step},
        {"network-adder-p2", 2.0, net_tol, [](Rng& r) { return network_instance(r, LayerKind::Adder); }, net_step},
    };
    std::vector<GradCheckRow> rows;
    for (std::size_t c = 0; c < checks.size(); ++c) {
        const Check& check = checks[c];
        const double step = check.step > 0.0 ? check.step : config.step;
        GradCheckRow row{check.name, check.factor, step, check.tolerance, config.instances};
        Rng rng = Rng(config.seed).fork(100 + c);
        for (std::size_t i = 0; i < config.instances; ++i) {
            Rng local = rng.fork(i);
            const Instance inst = check.make(local);
            const auto coords = sample_coordinates(inst.theta.size(), config.coords, local);
            FiniteDiffOptions opts;
            opts.step = step;
            opts.tolerance = check.tolerance;
            const FiniteDiffReport rep = finite_diff_check(inst.loss, inst.theta, inst.grad, coords, opts);
            row.checked += rep.checked;
            row.excluded += rep.excluded.size();
            row.max_rel_error = std::max(row.max_rel_error, rep.max_rel_error);
        }
        row.passed = row.checked > 0 && row.max_rel_error <= check.tolerance;
        rows.push_back(row);
    }
    if (!config.out_dir.empty()) {
        std::filesystem::create_directories(config.out_dir);
        CsvWriter csv(config.out_dir / "gradcheck.csv", config.metadata(),
                      {"check", "factor", "step", "tolerance", "instances", "checked", "excluded", "max_rel_error", "passed"});
        for (const auto& r : rows) {
            csv.cell(r.check).cell(r.factor).cell(r.step).cell(r.tolerance).cell(r.instances).cell(r.checked).cell(r.excluded);
            csv.cell(r.max_rel_error).cell(r.passed);
            csv.end_row();
        }
    }
    return rows;
}

}  // namespace addernet::app
