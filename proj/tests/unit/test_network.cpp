#include <doctest.h>

#include <stdexcept>

#include "addernet/checkpoint.hpp"
#include "addernet/network.hpp"

using namespace addernet;

TEST_CASE("lenet5 shapes") {
    const NetworkSpec spec = lenet5_bn(LayerKind::Adder);
    CHECK(spec.input_shape == Shape{32, 32, 1});
    CHECK(spec.output_shape() == Shape{1, 1, 10});
    const NetworkSpec mixed = lenet5_bn(LayerKind::Adder, true);
    std::size_t convs = 0, adders = 0;
    for (const auto& l : mixed.layers) {
        convs += l.kind == LayerKind::Conv;
        adders += l.kind == LayerKind::Adder;
    }
    CHECK(convs == 2);
    CHECK(adders == 3);
    CHECK_THROWS_AS(lenet5_bn(LayerKind::Relu), std::invalid_argument);
}

TEST_CASE("op counts for lenet5") {
    // 28*28*6*25 + 10*10*16*150 + 400*120 + 120*84 + 84*10
    const std::uint64_t macs = 117600 + 240000 + 48000 + 10080 + 840;
    const auto conv = count_ops(lenet5_bn(LayerKind::Conv));
    CHECK(conv.multiplications == macs);
    CHECK(conv.additions == macs);
    const auto adder = count_ops(lenet5_bn(LayerKind::Adder));
    CHECK(adder.multiplications == 0);
    CHECK(adder.additions == 2 * macs);
    CHECK(adder.layers.size() == 5);
}

TEST_CASE("invalid specs are rejected") {
    NetworkSpec spec;
    spec.input_shape = {4, 4, 1};
    spec.layers = {{LayerKind::Conv, 2, 5, 1, 0}};
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    CHECK_THROWS_AS(layer_kind_from_string("dense"), std::invalid_argument);
    CHECK(layer_kind_from_string(to_string(LayerKind::MaxPool)) == LayerKind::MaxPool);
    CHECK(loss_head_from_string(to_string(LossHead::SigmoidBce)) == LossHead::SigmoidBce);
}

TEST_CASE("build, forward and backward are deterministic and shaped") {
    const NetworkSpec spec = lenet5_bn(LayerKind::Adder);
    Rng r1(9), r2(9);
    Network a = build_network(spec, r1);
    Network b = build_network(spec, r2);
    Rng data(1);
    const Tensor x = randn_seeded(data, {4, 32, 32, 1}, 0.0, 1.0);
    const ForwardTrace ta = forward_pass(a, x, Phase::Train);
    const ForwardTrace tb = forward_pass(b, x, Phase::Train);
    CHECK(ta.output == tb.output);
    CHECK(ta.output.shape() == Shape{4, 1, 1, 10});
    const Tensor up(ta.output.shape(), 0.1);
    const Gradients g = backward_pass(a, ta, up, GradientMode::FullPrecision);
    const auto params = a.parameters();
    REQUIRE(g.size() == params.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        CHECK(g[i].shape() == params[i].value->shape());
    }
    CHECK(a.parameter_count() > 60000);
}

TEST_CASE("a stale trace is refused after the parameters change") {
    const NetworkSpec spec = two_layer_net(2, 3, LayerKind::Adder);
    Rng rng(2);
    Network net = build_network(spec, rng);
    const Tensor x = randn_seeded(rng, {4, 1, 1, 2}, 0.0, 1.0);
    const ForwardTrace t = forward_pass(net, x, Phase::Train);
    net.mark_updated();
    CHECK_THROWS(backward_pass(net, t, Tensor(t.output.shape(), 1.0), GradientMode::FullPrecision));
}

TEST_CASE("recalibration sets running stats to the average batch statistics") {
    const NetworkSpec spec = two_layer_net(2, 2, LayerKind::Conv);
    Rng rng(3);
    Network net = build_network(spec, rng);
    const Tensor x = randn_seeded(rng, {10, 1, 1, 2}, 1.0, 2.0);
    recalibrate_bn(net, x);
    Rng again(3);
    Network fresh = build_network(spec, again);
    // one chunk: running stats equal the batch statistics of a momentum-1 pass
    for (auto& layer : fresh.layers()) {
        if (auto* bn = std::get_if<BatchNormParams>(&layer)) {
            bn->momentum = 1.0;
        }
    }
    forward_pass(fresh, x, Phase::Train);
    for (std::size_t i = 0; i < net.layers().size(); ++i) {
        if (const auto* bn = std::get_if<BatchNormParams>(&net.layers()[i])) {
            const auto& ref = std::get<BatchNormParams>(fresh.layers()[i]);
            CHECK(bn->momentum == 0.1);
            for (std::size_t c = 0; c < bn->channels(); ++c) {
                CHECK(bn->running_mean[c] == doctest::Approx(ref.running_mean[c]));
                CHECK(bn->running_var[c] == doctest::Approx(ref.running_var[c]));
            }
        }
    }
}

TEST_CASE("predict_grid orientation") {
    // single conv unit on (x, y) with weight (0, 1): class 1 iff y > 0
    NetworkSpec spec;
    spec.input_shape = {1, 1, 2};
    spec.layers = {{LayerKind::Conv, 1, 1, 1, 0}};
    spec.loss = LossHead::SigmoidBce;
    Rng rng(0);
    Network net = build_network(spec, rng);
    std::get<ConvLayerParams>(net.layers()[0]).filters = Tensor({1, 1, 1, 2}, {0.0, 1.0});
    const LabelGrid grid = predict_grid(net, {-1, 1, -1, 1}, 4, 4);
    CHECK(grid.at(0, 0) == 1);
    CHECK(grid.at(3, 3) == 0);
}

TEST_CASE("spec json and checkpoint round trip") {
    const NetworkSpec spec = lenet5_bn(LayerKind::Adder, true);
    CHECK(spec_from_json(spec_to_json(spec)) == spec);
    CHECK_THROWS_AS(spec_from_json(nlohmann::json::object()), std::invalid_argument);

    Rng rng(4);
    Network net = build_network(two_layer_net(2, 3, LayerKind::Adder), rng);
    OptimizerState opt;
    const auto path = std::filesystem::temp_directory_path() / "addernet_unit.ckpt";
    save_checkpoint(path, net, &opt, {{"note", "x"}});
    const Checkpoint back = load_checkpoint(path);
    CHECK(back.network.spec() == net.spec());
    const auto pa = net.parameters();
    const auto pb = back.network.parameters();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
        CHECK(*pa[i].value == *pb[i].value);
    }
    CHECK(back.optimizer.has_value());
    CHECK(back.extra["note"] == "x");
    std::filesystem::remove(path);
}
