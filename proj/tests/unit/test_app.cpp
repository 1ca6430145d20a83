#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "addernet/app.hpp"

using namespace addernet;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("addernet_unit_" + name);
    fs::remove_all(dir);
    return dir;
}

}  // namespace

TEST_CASE("format_double round trips") {
    for (double v : {0.1, 1.0 / 3.0, -2.5e-17, 1e300, 0.0}) {
        CHECK(std::stod(format_double(v)) == v);
    }
    CHECK(format_double(0.5) == "0.5");
}

TEST_CASE("pgm bytes for a 2x2 checker") {
    const LabelGrid g{2, 2, {0, 1, 1, 0}};
    const std::string expected = std::string("P5\n2 2\n255\n") + '\0' + '\xff' + '\xff' + '\0';
    CHECK(pgm_bytes(g) == expected);
    const LabelGrid u{1, 3, {1, 1, 1}};
    CHECK(pgm_bytes(u).substr(11) == std::string(3, '\xff'));
    CHECK_THROWS(write_pgm("/nonexistent-dir/x.pgm", g));
}

TEST_CASE("csv writer emits metadata then header") {
    const auto dir = scratch("csv");
    fs::create_directories(dir);
    {
        CsvWriter csv(dir / "a.csv", {{"seed", "3"}}, {"x", "ok"});
        csv.cell(0.25).cell(true);
        csv.end_row();
    }
    CHECK(slurp(dir / "a.csv") == "# seed=3\nx,ok\n0.25,true\n");
    fs::remove_all(dir);
}

TEST_CASE("props grid matches the criterion") {
    app::PropsConfig cfg;
    const auto rows = app::run_props(cfg);
    std::size_t sign = 0;
    for (const auto& r : rows) {
        if (r.mode == "sign") {
            ++sign;
            CHECK(r.converged == r.criterion);
        } else {
            CHECK(r.converged);
            CHECK(r.monotone);
            CHECK(r.closed_form_error < 1e-12);
        }
    }
    CHECK(sign == 200);
}

TEST_CASE("short toy run is deterministic and writes its outputs") {
    app::ToyConfig cfg;
    cfg.iterations = 50;
    cfg.samples = 100;
    cfg.grid = 16;
    cfg.out_dir = scratch("toy_a");
    const auto a = app::run_toy(cfg);
    const auto dir_a = cfg.out_dir;
    cfg.out_dir = scratch("toy_b");
    const auto b = app::run_toy(cfg);
    CHECK(a.train_acc == b.train_acc);
    CHECK(a.grid.labels == b.grid.labels);
    CHECK(a.grid.labels.size() == 256);
    for (const auto& entry : fs::directory_iterator(dir_a)) {
        const auto other = cfg.out_dir / entry.path().filename();
        CHECK(slurp(entry.path()) == slurp(other));
    }
    fs::remove_all(dir_a);
    fs::remove_all(cfg.out_dir);
}

TEST_CASE("training on a synthetic set for zero and one epochs") {
    Rng rng(1);
    LabeledDataset train{"synthetic", randn_seeded(rng, {16, 32, 32, 1}, 0.0, 1.0), {}, 10};
    for (int i = 0; i < 16; ++i) {
        train.labels.push_back(i % 10);
    }
    app::TrainConfig cfg;
    cfg.batch = 8;
    cfg.epochs = 0;
    {
        Rng init(0);
        Network net = build_network(lenet5_bn(LayerKind::Adder), init);
        const auto r = app::train_classifier(net, train, train, cfg);
        CHECK(r.rows.size() == 1);
        CHECK(r.rows[0].p == 1.0);  // E_decay rounds to 0 epochs
    }
    cfg.epochs = 1;
    Rng init(0);
    Network net = build_network(lenet5_bn(LayerKind::Adder), init);
    const auto r = app::train_classifier(net, train, train, cfg);
    CHECK(r.rows.size() == 2);
    CHECK(r.rows[1].p == 2.0);  // the only epoch runs at the start of the p schedule
    CHECK(std::isfinite(r.rows[1].train_loss));
    cfg.batch = 1;
    CHECK_THROWS(app::train_classifier(net, train, train, cfg));
}

TEST_CASE("run_train without data reports the missing files") {
    app::TrainConfig cfg;
    cfg.data_dir = "/nonexistent";
    CHECK_THROWS_WITH_AS(app::run_train(cfg), doctest::Contains("MNIST files not found"), std::runtime_error);
}

TEST_CASE("op count report") {
    const auto r = app::run_opcount({});
    CHECK(r.adder.multiplications == 0);
    CHECK(r.adder.additions == 2 * r.conv.multiplications);
}

TEST_CASE("name parsing") {
    CHECK(app::layer_mode_from_string("adder-lp-schedule") == app::LayerMode::AdderLpSchedule);
    CHECK(app::gradient_mode_from_string(app::to_string(GradientMode::SignGrad)) == GradientMode::SignGrad);
    CHECK_THROWS(app::layer_mode_from_string("adder-l3"));
}
