#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "addernet/app.hpp"
#include "addernet/checkpoint.hpp"

namespace addernet::app {

std::string to_string(LayerMode mode) {
    switch (mode) {
        case LayerMode::AdderL1: return "adder-l1";
        case LayerMode::AdderLpSchedule: return "adder-lp-schedule";
        case LayerMode::AdderL2: return "adder-l2";
        case LayerMode::Conv: return "conv";
    }
    return "unknown";
}

LayerMode layer_mode_from_string(const std::string& name) {
    for (auto mode : {LayerMode::AdderL1, LayerMode::AdderLpSchedule, LayerMode::AdderL2, LayerMode::Conv}) {
        if (to_string(mode) == name) {
            return mode;
        }
    }
    throw std::invalid_argument("unknown layer mode '" + name +
                                "' (expected adder-l1, adder-lp-schedule, adder-l2 or conv)");
}

LayerKind learned_kind(LayerMode mode) {
    return mode == LayerMode::Conv ? LayerKind::Conv : LayerKind::Adder;
}

std::string to_string(GradientMode mode) {
    return mode == GradientMode::SignGrad ? "sign" : "full";
}

GradientMode gradient_mode_from_string(const std::string& name) {
    if (name == "sign") {
        return GradientMode::SignGrad;
    }
    if (name == "full") {
        return GradientMode::FullPrecision;
    }
    throw std::invalid_argument("unknown gradient mode '" + name + "' (expected full or sign)");
}

NetworkSpec resolve_arch(const std::string& arch, LayerKind kind, bool conv_ends) {
    if (arch == "lenet5bn") {
        return lenet5_bn(kind, conv_ends);
    }
    NetworkSpec spec = load_spec_file(arch);
    for (auto& layer : spec.layers) {
        if (layer.kind == LayerKind::Adder || layer.kind == LayerKind::Conv) {
            layer.kind = kind;
        }
    }
    spec.validate();
    return spec;
}

std::pair<double, double> evaluate(const Network& net, const LabeledDataset& ds, std::size_t chunk) {
    if (ds.size() == 0) {
        return {0.0, 0.0};
    }
    const bool binary = net.spec().loss == LossHead::SigmoidBce;
    double loss_sum = 0.0;
    std::size_t correct = 0;
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < ds.size(); start += chunk) {
        const std::size_t end = std::min(ds.size(), start + chunk);
        idx.resize(end - start);
        std::iota(idx.begin(), idx.end(), start);
        const Tensor logits = predict(net, gather_inputs(ds, idx));
        const auto labels = gather_labels(ds, idx);
        const LossResult loss = binary ? sigmoid_bce(logits, labels) : softmax_cross_entropy(logits, labels);
        loss_sum += loss.loss * static_cast<double>(idx.size());
        const std::size_t classes = logits.size() / idx.size();
        for (std::size_t i = 0; i < idx.size(); ++i) {
            int pred = 0;
            if (binary) {
                pred = binary_prediction(logits[i]);
            } else {
                const double* row = logits.data() + i * classes;
                pred = static_cast<int>(std::max_element(row, row + classes) - row);
            }
            correct += pred == labels[i] ? 1 : 0;
        }
    }
    const double n = static_cast<double>(ds.size());
    return {loss_sum / n, static_cast<double>(correct) / n};
}

double accuracy(const Network& net, const LabeledDataset& ds, std::size_t chunk) {
    return evaluate(net, ds, chunk).second;
}

}  // namespace addernet::app
