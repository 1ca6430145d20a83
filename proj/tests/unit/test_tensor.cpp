#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "addernet/kernels.hpp"
#include "addernet/tensor.hpp"

using namespace addernet;

TEST_CASE("shape helpers") {
    CHECK(shape_volume({2, 3, 4}) == 24);
    CHECK(shape_volume({}) == 1);
    CHECK(shape_to_string({2, 3}) == "[2x3]");
}

TEST_CASE("tensor construction and reshape") {
    Tensor t({2, 2, 2, 3}, 1.5);
    CHECK(t.size() == 24);
    t.at(1, 0, 1, 2) = 7.0;
    CHECK(t[1 * 12 + 0 * 6 + 1 * 3 + 2] == 7.0);
    CHECK(t.reshaped({4, 6}).shape() == Shape{4, 6});
    CHECK_THROWS_AS((void)t.reshaped({5, 5}), std::invalid_argument);
    CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>{1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("rng is a pure function of seed and counter") {
    Rng a(42), b(42), c(43);
    for (int i = 0; i < 100; ++i) {
        const auto va = a.next_u64();
        CHECK(va == b.next_u64());
        CHECK(va != c.next_u64());
    }
    CHECK(a.counter() == 100);
}

TEST_CASE("rng distributions") {
    Rng rng(7);
    double sum = 0.0, sq = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        const double z = rng.normal();
        sum += z;
        sq += z * z;
    }
    // 5 standard errors
    CHECK(std::abs(sum / n) < 5.0 / std::sqrt(n));
    CHECK(std::abs(sq / n - 1.0) < 5.0 * std::sqrt(2.0 / n));

    std::set<std::uint64_t> seen;
    for (int i = 0; i < 1000; ++i) {
        const auto k = rng.below(6);
        REQUIRE(k < 6);
        seen.insert(k);
    }
    CHECK(seen.size() == 6);
}

TEST_CASE("forked streams differ from the parent and each other") {
    const Rng root(5);
    Rng f1 = root.fork(1), f2 = root.fork(2), f1b = root.fork(1);
    Rng parent = root;
    const auto a = f1.next_u64();
    CHECK(a == f1b.next_u64());
    CHECK(a != f2.next_u64());
    CHECK(a != parent.next_u64());
}

TEST_CASE("window geometry") {
    WindowGeometry g{28, 28, 1, 5, 1, 2};
    CHECK(g.out_h() == 28);
    CHECK(g.patch_size() == 25);
    WindowGeometry bad{3, 3, 1, 5, 1, 0};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("im2col on a hand-sized map") {
    // 3x3 single channel, values 1..9, kernel 2, stride 1, no padding
    Tensor x({3, 3, 1}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
    const Tensor cols = im2col(x, 2, 1, 0);
    REQUIRE(cols.shape() == Shape{4, 4});
    const std::vector<double> expected{1, 2, 4, 5, 2, 3, 5, 6, 4, 5, 7, 8, 5, 6, 8, 9};
    for (std::size_t i = 0; i < expected.size(); ++i) {
        CHECK(cols[i] == expected[i]);
    }
    const Tensor padded = im2col(x, 3, 1, 1);
    CHECK(padded.shape() == Shape{9, 9});
    CHECK(padded[0] == 0.0);   // top-left corner of the first window is padding
    CHECK(padded[4] == 1.0);   // its center is x(0, 0)
}

TEST_CASE("col2im is the adjoint of im2col") {
    Rng rng(3);
    const WindowGeometry g{6, 5, 3, 3, 2, 1};
    const Tensor x = randn_seeded(rng, {6, 5, 3}, 0.0, 1.0);
    const Tensor cols = im2col(x, g.kernel, g.stride, g.padding);
    const Tensor y = randn_seeded(rng, cols.shape(), 0.0, 1.0);
    const double lhs = dot(cols.values(), y.values());
    const double rhs = dot(x.values(), col2im(y, g).values());
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("reductions") {
    Tensor t({2}, {3.0, 4.0});
    CHECK(reduce_l2_norm(t) == 5.0);
    CHECK(all_finite(t));
    t[0] = std::nan("");
    CHECK_FALSE(all_finite(t));
}

// The reference accumulates in a different order, so agreement is to round-off.
TEST_CASE("serial and OpenMP kernels agree") {
    Rng rng(11);
    const kernels::PatchDims dims{37, 19, 5};
    const Tensor cols = randn_seeded(rng, {dims.rows, dims.width}, 0.0, 1.0);
    const Tensor filters = randn_seeded(rng, {dims.filters, dims.width}, 0.0, 1.0);
    const Tensor up = randn_seeded(rng, {dims.rows, dims.filters}, 0.0, 1.0);
    auto same = [](const std::vector<double>& a, const std::vector<double>& b) {
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (std::abs(a[i] - b[i]) > 1e-12 * std::max(1.0, std::abs(a[i]))) {
                return false;
            }
        }
        return a.size() == b.size();
    };

    for (double p : {1.0, 1.5, 2.0}) {
        std::vector<double> s(dims.rows * dims.filters), o(s.size());
        kernels::serial::adder_forward(cols.values(), filters.values(), dims, p, s);
        kernels::omp::adder_forward(cols.values(), filters.values(), dims, p, o);
        CHECK(same(s, o));
        std::vector<double> gs(dims.rows * dims.width), go(gs.size());
        kernels::serial::adder_grad_cols(cols.values(), filters.values(), up.values(), dims, p, gs);
        kernels::omp::adder_grad_cols(cols.values(), filters.values(), up.values(), dims, p, go);
        CHECK(same(gs, go));
    }
    for (auto rule : {kernels::FilterGradRule::Sign, kernels::FilterGradRule::Difference}) {
        std::vector<double> s(dims.filters * dims.width), o(s.size());
        kernels::serial::adder_grad_filters(cols.values(), filters.values(), up.values(), dims, rule, s);
        kernels::omp::adder_grad_filters(cols.values(), filters.values(), up.values(), dims, rule, o);
        CHECK(same(s, o));
    }
    std::vector<double> s(dims.rows * dims.filters), o(s.size());
    kernels::serial::conv_forward(cols.values(), filters.values(), dims, s);
    kernels::omp::conv_forward(cols.values(), filters.values(), dims, o);
    CHECK(same(s, o));
    std::vector<double> fs(dims.filters * dims.width), fo(fs.size());
    kernels::serial::conv_grad_filters(cols.values(), up.values(), dims, fs);
    kernels::omp::conv_grad_filters(cols.values(), up.values(), dims, fo);
    CHECK(same(fs, fo));
    std::vector<double> cs(dims.rows * dims.width), co(cs.size());
    kernels::serial::conv_grad_cols(filters.values(), up.values(), dims, cs);
    kernels::omp::conv_grad_cols(filters.values(), up.values(), dims, co);
    CHECK(same(cs, co));
}

TEST_CASE("signed power") {
    CHECK(kernels::signed_power(-3.0, 1.0) == -3.0);
    CHECK(kernels::signed_power(-3.0, 0.0) == -1.0);
    CHECK(kernels::signed_power(0.0, 0.5) == 0.0);
    CHECK(kernels::signed_power(4.0, 0.5) == doctest::Approx(2.0));
}
