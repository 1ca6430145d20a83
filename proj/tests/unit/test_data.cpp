#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include "addernet/data.hpp"

using namespace addernet;

TEST_CASE("toy labels") {
    CHECK(unit_ball_label(0, 0) == 1);
    CHECK_FALSE(unit_ball_label(12, 0).has_value());
    CHECK(unit_ball_label(0, -20) == 0);
    CHECK(multi_ball_label(10, 10) == 1);
    CHECK(multi_ball_label(-5, -12) == 1);
    CHECK(multi_ball_label(10, -10) == 0);
    CHECK(linear_label(3, 4) == 1);
    CHECK(linear_label(-3, 4) == 0);
    CHECK(linear_label(0, -4) == 1);
}

TEST_CASE("toy generators") {
    Rng rng(1);
    const auto ball = gen_unit_ball(500, rng);
    CHECK(ball.size() == 500);
    CHECK(ball.inputs.shape() == Shape{500, 1, 1, 2});
    for (std::size_t i = 0; i < ball.size(); ++i) {
        const double r = std::hypot(ball.inputs[2 * i], ball.inputs[2 * i + 1]);
        CHECK((r <= 10.0 || r >= 15.0));
        CHECK(ball.labels[i] == *unit_ball_label(ball.inputs[2 * i], ball.inputs[2 * i + 1]));
    }
    Rng a(2), b(2);
    CHECK(gen_toy(ToyTask::Linear, 50, a).inputs == gen_toy(ToyTask::Linear, 50, b).inputs);
    CHECK(toy_task_from_string(to_string(ToyTask::MultiBall)) == ToyTask::MultiBall);
    CHECK_THROWS(toy_task_from_string("spiral"));
}

TEST_CASE("idx round trip and malformed files") {
    const auto dir = std::filesystem::temp_directory_path() / "addernet_unit_idx";
    std::filesystem::create_directories(dir);
    IdxImages img{2, 3, {0, 1, 2, 3, 4, 5, 250, 251, 252, 253, 254, 255}};
    const std::vector<std::uint8_t> labels{7, 1};
    write_idx_images(dir / "img", img);
    write_idx_labels(dir / "lab", labels);
    const IdxImages back = read_idx_images(dir / "img");
    CHECK(back.rows == 2);
    CHECK(back.cols == 3);
    CHECK(back.pixels == img.pixels);
    CHECK(read_idx_labels(dir / "lab") == labels);
    {
        std::ofstream bad(dir / "bad", std::ios::binary);
        bad << "junk";
    }
    CHECK_THROWS(read_idx_images(dir / "bad"));
    CHECK_THROWS(read_idx_labels(dir / "missing"));
    CHECK_FALSE(mnist_dir_available(dir));
    std::filesystem::remove_all(dir);
}

TEST_CASE("pixel statistics") {
    IdxImages img{1, 2, {0, 255, 0, 255}};
    const PixelStats s = pixel_stats(img);
    CHECK(s.mean == doctest::Approx(0.5));
    CHECK(s.stddev == doctest::Approx(0.5));
}

TEST_CASE("shuffled batches partition the index set") {
    Rng rng(3);
    const auto batches = shuffle_batches(103, 10, rng);
    CHECK(batches.size() == 11);
    CHECK(batches.back().size() == 3);
    std::set<std::size_t> all;
    for (const auto& b : batches) {
        all.insert(b.begin(), b.end());
    }
    CHECK(all.size() == 103);
    CHECK(*all.rbegin() == 102);
}

TEST_CASE("gather and prefix") {
    Rng rng(4);
    const auto ds = gen_linear(20, rng);
    const std::vector<std::size_t> idx{5, 2};
    const Tensor x = gather_inputs(ds, idx);
    CHECK(x.shape() == Shape{2, 1, 1, 2});
    CHECK(x[0] == ds.inputs[10]);
    CHECK(gather_labels(ds, idx)[1] == ds.labels[2]);
    CHECK(take_prefix(ds, 7).size() == 7);
    CHECK(take_prefix(ds, 0).size() == 20);
}
