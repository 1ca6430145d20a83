#include <doctest.h>

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "addernet/analysis.hpp"

using namespace addernet;

TEST_CASE("finite differences of a quadratic") {
    const std::vector<double> theta{3.0};
    const std::vector<double> grad{6.0};
    const std::vector<std::size_t> coords{0};
    auto loss = [](std::span<const double> t) { return t[0] * t[0]; };
    const auto r = finite_diff_check(loss, theta, grad, coords);
    CHECK(r.passed);
    CHECK(r.max_rel_error < 1e-6);
    const std::vector<double> wrong{5.0};
    CHECK_FALSE(finite_diff_check(loss, theta, wrong, coords).passed);
}

TEST_CASE("finite differences exclude kinks and reject bad input") {
    const std::vector<double> theta{0.0, 2.0};
    const std::vector<double> grad{0.0, 1.0};
    const std::vector<std::size_t> coords{0, 1};
    auto loss = [](std::span<const double> t) { return std::abs(t[0]) + t[1]; };
    const auto r = finite_diff_check(loss, theta, grad, coords);
    CHECK(r.passed);
    CHECK(r.excluded == std::vector<std::size_t>{0});
    CHECK(r.checked == 1);
    auto nan_loss = [](std::span<const double>) { return std::nan(""); };
    CHECK_THROWS_AS(finite_diff_check(nan_loss, theta, grad, coords), std::runtime_error);
    FiniteDiffOptions bad;
    bad.step = 0.0;
    CHECK_THROWS_AS(finite_diff_check(loss, theta, grad, coords, bad), std::invalid_argument);
}

TEST_CASE("relative error and coordinate sampling") {
    CHECK(relative_error(1.0, 1.0) == 0.0);
    CHECK(relative_error(0.0, 1e-9) == doctest::Approx(0.1));
    Rng rng(1);
    const auto c = sample_coordinates(50, 10, rng);
    CHECK(c.size() == 10);
    CHECK(std::is_sorted(c.begin(), c.end()));
    CHECK(std::adjacent_find(c.begin(), c.end()) == c.end());
    CHECK(sample_coordinates(5, 10, rng).size() == 5);
}

TEST_CASE("sign descent: converges iff the gap is a multiple of alpha") {
    const std::vector<double> x{0.5}, f0{0.0};
    const auto osc = simulate_sign_descent(x, f0, -1.0, 0.2, 100);
    CHECK_FALSE(osc.converged);
    CHECK(osc.amplitude <= 0.2 + 1e-12);
    const auto conv = simulate_sign_descent(x, f0, -1.0, 0.25, 100);
    CHECK(conv.converged);
    CHECK(conv.steps == 2);
    // in twelfths: x = 6, f0 = 0, alpha = 3 or 4
    CHECK(sign_descent_criterion(6, 0, 3));
    CHECK_FALSE(sign_descent_criterion(6, 0, 4));
    CHECK(sign_descent_criterion(-7, 5, 4));
    CHECK_THROWS(sign_descent_criterion(1, 0, 0));
}

TEST_CASE("full descent follows the closed form") {
    const std::vector<double> x{1.0}, f0{0.0};
    const auto t = simulate_full_descent(x, f0, -1.0, 0.5, 3);
    REQUIRE(t.iterates.size() == 4);
    CHECK(t.iterates[3][0] == doctest::Approx(0.875));
    for (std::size_t k = 1; k < t.objective.size(); ++k) {
        CHECK(t.objective[k] < t.objective[k - 1]);
    }
    const auto one = simulate_full_descent(x, f0, -1.0, 1.0, 10);
    CHECK(one.converged);
    CHECK(one.steps == 1);
    const auto fixed = simulate_full_descent(x, x, -1.0, 0.3, 10);
    CHECK(fixed.converged);
    CHECK(fixed.steps == 0);
    CHECK_THROWS(simulate_full_descent(x, f0, 1.0, 0.5, 10));
}

TEST_CASE("variance report") {
    Rng rng(2);
    // Var[F] = 1 / (d^2 c_in) keeps the conv output variance at Var[X]
    const auto r = variance_report(3, 16, 20, 1.0, 1.0 / 144.0, 1000, rng);
    CHECK(r.conv_predicted == doctest::Approx(1.0));
    CHECK(std::abs(r.conv_empirical / r.conv_predicted - 1.0) < 0.1);
    CHECK(r.samples == 20000);
    CHECK_THROWS_AS(variance_report(3, 16, 2, 1.0, 1.0, 10, rng), std::invalid_argument);

    Rng rng2(3);
    const auto big = variance_report(3, 512, 20, 1.0, 1e-3, 600, rng2);
    CHECK(big.ratio() >= 10.0);
}

TEST_CASE("gradient norm table on an all-zero batch is finite") {
    const Tensor zeros({4, 32, 32, 1}, 0.0);
    const std::vector<int> labels{0, 1, 2, 3};
    const auto rows = grad_norm_table(zeros, labels, 0);
    CHECK(rows.size() == 5);
    for (const auto& r : rows) {
        CHECK(std::isfinite(r.adder));
        CHECK(std::isfinite(r.conv));
    }
}
