#include <doctest.h>

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "addernet/optim.hpp"

using namespace addernet;

namespace {

Network one_adder_layer(Rng& rng) {
    NetworkSpec spec;
    spec.input_shape = {3, 3, 2};
    spec.layers = {{LayerKind::Adder, 4, 3, 1, 0}, {LayerKind::BatchNorm}};
    return build_network(spec, rng);
}

}  // namespace

TEST_CASE("cosine and polynomial schedules") {
    const LrSchedule cos{ScheduleKind::Cosine, 0.1, 2.0};
    CHECK(lr_at(cos, 0, 100) == doctest::Approx(0.1));
    CHECK(lr_at(cos, 50, 100) == doctest::Approx(0.05));
    CHECK(lr_at(cos, 100, 100) == doctest::Approx(0.0).scale(1.0));
    const LrSchedule poly{ScheduleKind::Polynomial, 0.1, 2.0};
    CHECK(lr_at(poly, 50, 100) == doctest::Approx(0.025));
    CHECK(lr_at({ScheduleKind::Constant, 0.3, 1.0}, 70, 100) == 0.3);
    CHECK_THROWS_AS(lr_at(cos, 101, 100), std::invalid_argument);
    CHECK(schedule_kind_from_string("cosine") == ScheduleKind::Cosine);
}

TEST_CASE("p schedule") {
    const PSchedule s{4, 10};
    CHECK(p_at_epoch(s, 0) == 2.0);
    CHECK(p_at_epoch(s, 2) == doctest::Approx(1.5));
    CHECK(p_at_epoch(s, 4) == 1.0);
    CHECK(p_at_epoch(s, 9) == 1.0);
    CHECK(p_at_epoch({0, 10}, 0) == 1.0);
}

TEST_CASE("adaptive scale") {
    const std::vector<double> g{3.0, 4.0, 0.0, 0.0};
    CHECK(adaptive_scale(g, 0.2) == doctest::Approx(0.2 * 2.0 / 5.0));
    const std::vector<double> zero(4, 0.0);
    CHECK(adaptive_scale(zero, 0.2) == 0.0);
}

TEST_CASE("applied adder update has norm lr * eta * sqrt(k) for any gradient scale") {
    for (double c : {0.01, 1.0, 100.0}) {
        Rng rng(1);
        Network net = one_adder_layer(rng);
        const Tensor before = *net.parameters()[0].value;
        OptimizerState state({0.0, 0.0, 0.2, true});
        Gradients g;
        Rng grng(2);
        for (const auto& p : net.parameters()) {
            g.push_back(randn_seeded(grng, p.value->shape(), 0.0, c));
        }
        const auto scales = nag_step(net, g, state, 0.5);
        const Tensor& after = *net.parameters()[0].value;
        double sq = 0.0;
        for (std::size_t i = 0; i < after.size(); ++i) {
            sq += (after[i] - before[i]) * (after[i] - before[i]);
        }
        const double expected = 0.5 * 0.2 * std::sqrt(static_cast<double>(after.size()));
        CHECK(std::abs(std::sqrt(sq) - expected) < 1e-9);
        CHECK(scales[1] == 1.0);
    }
}

TEST_CASE("nesterov step without adaptive scaling") {
    Rng rng(3);
    Network net = one_adder_layer(rng);
    OptimizerState state({0.9, 0.0, 0.2, false});
    const auto params = net.parameters();
    Gradients g;
    for (const auto& p : params) {
        g.emplace_back(p.value->shape(), 1.0);
    }
    const double w0 = (*params[0].value)[0];
    nag_step(net, g, state, 0.1);
    // v = 1, w -= lr (g + m v) = 0.1 * 1.9
    CHECK((*params[0].value)[0] == doctest::Approx(w0 - 0.19));
    nag_step(net, g, state, 0.1);
    // v = 1.9, w -= 0.1 * (1 + 0.9 * 1.9)
    CHECK((*params[0].value)[0] == doctest::Approx(w0 - 0.19 - 0.271));
}

TEST_CASE("weight decay applies to filters only") {
    Rng rng(4);
    Network net = one_adder_layer(rng);
    OptimizerState state({0.0, 0.5, 0.2, false});
    auto params = net.parameters();
    params[1].value->fill(2.0);  // gamma
    Gradients g;
    for (const auto& p : params) {
        g.emplace_back(p.value->shape(), 0.0);
    }
    const double w0 = (*params[0].value)[0];
    nag_step(net, g, state, 1.0);
    CHECK((*params[0].value)[0] == doctest::Approx(w0 * 0.5));
    CHECK((*params[1].value)[0] == 2.0);
}

TEST_CASE("optimizer validation") {
    CHECK_THROWS_AS(OptimizerState({1.0, 0.0, 0.2, true}), std::invalid_argument);
    CHECK_THROWS_AS(OptimizerState({0.9, -1.0, 0.2, true}), std::invalid_argument);
    CHECK_THROWS_AS(OptimizerState({0.9, 0.0, 0.0, true}), std::invalid_argument);
}
