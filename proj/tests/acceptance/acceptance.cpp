// Acceptance checks. Prints one line per criterion:
//   criterion <n> PASS|FAIL|SKIP <seconds>s <details>
// Exit status: 0 all selected criteria pass, 1 any failure, 77 everything
// selected was skipped.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "addernet/app.hpp"
#include "addernet/approx.hpp"
#include "addernet/layers.hpp"

using namespace addernet;
namespace fs = std::filesystem;

namespace {

enum class Verdict { Pass, Fail, Skip };

struct Outcome {
    Verdict verdict = Verdict::Fail;
    std::string details;
};

std::string fmt(const char* f, ...) {
    va_list args;
    va_start(args, f);
    char buf[1024];
    std::vsnprintf(buf, sizeof buf, f, args);
    va_end(args);
    return buf;
}

Outcome verdict(bool ok, std::string details) {
    return {ok ? Verdict::Pass : Verdict::Fail, std::move(details)};
}

struct Settings {
    std::string cli;
    fs::path mnist_dir;
    fs::path work_dir;
};

// -- 1 -------------------------------------------------------------------------

Outcome gradient_oracles(const Settings&) {
    const auto rows = app::run_gradcheck({});
    const std::vector<std::string> plain{"conv", "bn", "relu", "softmax-ce", "sigmoid-bce"};
    bool ok = true;
    std::string details;
    for (const auto& r : rows) {
        const bool listed = std::find(plain.begin(), plain.end(), r.check) != plain.end();
        const bool adder = r.check == "adder-p2";
        if (!listed && !adder) {
            continue;
        }
        const bool row_ok = r.checked >= 100 && r.max_rel_error <= 1e-4 && (!adder || r.factor == 2.0);
        ok = ok && row_ok;
        details += fmt("%s=%.1e ", r.check.c_str(), r.max_rel_error);
    }
    return verdict(ok, details + "(limit 1e-4, adder-p2 against 2x the surrogate)");
}

// -- 2 -------------------------------------------------------------------------

Outcome l2_identity(const Settings&) {
    Rng rng(2024);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        Rng local = rng.fork(static_cast<std::uint64_t>(trial));
        const std::size_t c_in = 1 + local.below(4);
        const std::size_t c_out = 1 + local.below(6);
        const std::size_t kernel = 1 + local.below(3);
        const std::size_t stride = 1 + local.below(2);
        const std::size_t padding = local.below(kernel);
        const std::size_t h = kernel + local.below(6);
        const std::size_t w = kernel + local.below(6);
        const std::size_t batch = 1 + local.below(3);
        AdderLayerParams a = make_adder_layer(c_in, c_out, kernel, stride, padding, local);
        a.p = 2.0;
        const ConvLayerParams c{a.filters, stride, padding};
        const Tensor x = randn_seeded(local, {batch, h, w, c_in}, 0.0, 1.0);
        worst = std::max(worst, l2_adder_conv_identity(adder_forward(a, x), conv_forward(c, x), x, a.filters,
                                                       stride, padding));
    }
    return verdict(worst < 1e-9, fmt("max residual %.2e over 50 configurations (limit 1e-9)", worst));
}

// -- 3 -------------------------------------------------------------------------

Outcome propositions(const Settings&) {
    const auto rows = app::run_props({});
    std::size_t sign = 0, agree = 0, full = 0, full_ok = 0;
    double closed = 0.0;
    for (const auto& r : rows) {
        if (r.mode == "sign") {
            ++sign;
            agree += r.converged == r.criterion;
        } else {
            ++full;
            full_ok += r.alpha > 0.0 && r.alpha < 1.0 && r.converged && r.monotone;
            closed = std::max(closed, r.closed_form_error);
        }
    }
    const bool ok = sign == 200 && agree == sign && full > 0 && full_ok == full && closed <= 1e-12;
    return verdict(ok, fmt("sign agreement %zu/%zu; full descent converged and monotone %zu/%zu; "
                           "closed-form error %.1e",
                           agree, sign, full_ok, full, closed));
}

// -- 4 -------------------------------------------------------------------------

Outcome adaptive_lr(const Settings&) {
    NetworkSpec spec;
    spec.input_shape = {6, 6, 3};
    spec.layers = {{LayerKind::Adder, 4, 3, 1, 1}, {LayerKind::BatchNorm}, {LayerKind::Adder, 5, 3, 1, 0}};
    const double lr = 0.37, eta = 0.2;
    double identity_err = 0.0, invariance_err = 0.0;
    for (std::uint64_t trial = 0; trial < 20; ++trial) {
        std::vector<std::vector<double>> updates;
        for (double c : {0.01, 1.0, 100.0}) {
            Rng init(trial);
            Network net = build_network(spec, init);
            std::vector<Tensor> before;
            for (const auto& p : net.parameters()) {
                before.push_back(*p.value);
            }
            Rng grad_rng = Rng(trial).fork(7);
            Gradients g;
            for (const auto& p : net.parameters()) {
                Tensor t = randn_seeded(grad_rng, p.value->shape(), 0.0, 1.0);
                for (double& v : t.values()) {
                    v *= c;
                }
                g.push_back(std::move(t));
            }
            OptimizerState state({0.0, 0.0, eta, true});
            nag_step(net, g, state, lr);
            std::vector<double> flat;
            const auto params = net.parameters();
            for (std::size_t i = 0; i < params.size(); ++i) {
                if (params[i].role != ParamRole::AdderFilter) {
                    continue;
                }
                double sq = 0.0;
                for (std::size_t k = 0; k < before[i].size(); ++k) {
                    const double d = (*params[i].value)[k] - before[i][k];
                    sq += d * d;
                    flat.push_back(d);
                }
                const double expected = lr * eta * std::sqrt(static_cast<double>(before[i].size()));
                identity_err = std::max(identity_err, std::abs(std::sqrt(sq) - expected));
            }
            updates.push_back(std::move(flat));
        }
        for (std::size_t k = 0; k < updates[0].size(); ++k) {
            invariance_err = std::max({invariance_err, std::abs(updates[1][k] - updates[0][k]),
                                       std::abs(updates[2][k] - updates[1][k])});
        }
    }
    const bool ok = identity_err <= 1e-9 && invariance_err <= 1e-9;
    return verdict(ok, fmt("| |update| - lr*eta*sqrt(k) | max %.1e; rescaling c in {0.01,1,100} changes the "
                           "update by at most %.1e (limit 1e-9)",
                           identity_err, invariance_err));
}

// -- 5 -------------------------------------------------------------------------

Outcome toy_tasks(const Settings&) {
    struct Item {
        const char* name;
        ToyTask task;
        std::size_t hidden;
        app::LayerMode mode;
        bool at_most;  // mlp on the ball is expected to fail
        double bound;
    };
    const std::vector<Item> items{
        {"ball adder n=1 >=99%", ToyTask::UnitBall, 1, app::LayerMode::AdderL1, false, 0.99},
        {"multiball adder n=5 >=99%", ToyTask::MultiBall, 5, app::LayerMode::AdderL1, false, 0.99},
        {"linear adder n=3 >=99%", ToyTask::Linear, 3, app::LayerMode::AdderL1, false, 0.99},
        {"linear mlp n=3 >=99%", ToyTask::Linear, 3, app::LayerMode::Conv, false, 0.99},
        {"ball mlp n=1 <=97%", ToyTask::UnitBall, 1, app::LayerMode::Conv, true, 0.97},
    };
    bool ok = true;
    std::string details;
    for (const auto& item : items) {
        std::size_t passed = 0;
        std::string accs;
        for (std::uint64_t seed = 0; seed < 3; ++seed) {
            app::ToyConfig cfg;
            cfg.task = item.task;
            cfg.hidden = item.hidden;
            cfg.mode = item.mode;
            cfg.seed = seed;
            cfg.grid = 8;
            const double acc = app::run_toy(cfg).train_acc;
            passed += item.at_most ? acc <= item.bound : acc >= item.bound;
            accs += fmt("%s%.1f", seed ? "/" : "", 100.0 * acc);
        }
        const bool item_ok = passed >= 2;
        ok = ok && item_ok;
        details += fmt("[%s: %s%% %s] ", item.name, accs.c_str(), item_ok ? "ok" : "red");
    }
    return verdict(ok, details + "(majority of seeds 0,1,2)");
}

// -- 6 -------------------------------------------------------------------------

Outcome mnist(const Settings& s) {
    if (s.mnist_dir.empty() || !mnist_dir_available(s.mnist_dir)) {
        return {Verdict::Skip, "no MNIST files (set ADDERNET_MNIST_DIR)"};
    }
    app::TrainConfig cfg;
    cfg.data_dir = s.mnist_dir;
    cfg.epochs = 10;
    const auto result = app::run_train(cfg);
    const auto& last = result.rows.back();
    return verdict(result.final_test_acc >= 0.985,
                   fmt("adder LeNet-5-BN, 10 epochs on %s (%zu train samples): test accuracy %.2f%% "
                       "(target 98.5%%), %.0f s",
                       s.mnist_dir.string().c_str(), load_mnist_dir(s.mnist_dir).train.size(),
                       100.0 * result.final_test_acc, last.wall_seconds));
}

// -- 7 -------------------------------------------------------------------------

Outcome op_counts(const Settings&) {
    const auto r = app::run_opcount({});
    const double conv_mult = static_cast<double>(r.conv.multiplications);
    const double rel = std::abs(conv_mult - 435e3) / 435e3;
    const double add_ratio = static_cast<double>(r.adder.additions) / conv_mult;
    const bool ok = rel <= 0.10 && r.adder.multiplications == 0 && std::abs(add_ratio - 2.0) <= 0.05;
    return verdict(ok, fmt("conv multiplications %llu (%.1f%% from 435K); adder multiplications %llu, "
                           "additions %llu = %.3fx conv multiplications",
                           static_cast<unsigned long long>(r.conv.multiplications), 100.0 * rel,
                           static_cast<unsigned long long>(r.adder.multiplications),
                           static_cast<unsigned long long>(r.adder.additions), add_ratio));
}

// -- 8 -------------------------------------------------------------------------

Outcome constructions(const Settings&) {
    app::ApproxConfig cfg;
    const auto rows = app::run_approx(cfg);
    double lemma1 = 1.0, lemma2 = 1.0;
    std::map<std::string, std::vector<double>> sweep;
    for (const auto& r : rows) {
        if (r.construction == "lemma1-max-residual") {
            lemma1 = r.value;
        } else if (r.construction == "lemma2-max-residual") {
            lemma2 = r.value;
        } else if (r.construction == "phi-N-l1-error") {
            sweep[r.target].push_back(r.value);
        }
    }
    bool decreasing = sweep.size() == cfg.targets.size();
    for (const auto& [name, errs] : sweep) {
        decreasing = decreasing && errs.size() == 3 && errs[0] > errs[1] && errs[1] > errs[2];
    }

    // tent kernel: support [-1, 1], peak 1 at 0, unit integral. The ReLU form
    // leaves round-off of order 1e-16 outside the support.
    bool support = tent_r(0.0) == 1.0;
    double outside = 0.0;
    for (int i = -300; i <= 300; ++i) {
        const double t = i / 100.0;
        const double v = tent_r(std::abs(t));
        support = support && v >= -1e-12 && v <= 1.0;
        if (std::abs(t) >= 1.0) {
            outside = std::max(outside, std::abs(v));
        }
    }
    support = support && outside <= 1e-12;
    const double integral = trapezoid([](double t) { return tent_r(std::abs(t)); }, -2.0, 2.0, 4000);
    const double c0_2d = tent_c0(2);
    double integral_2d = 0.0;
    const std::size_t cells = 1000;
    const double h = 2.0 / cells;
    for (std::size_t i = 0; i < cells; ++i) {
        for (std::size_t j = 0; j < cells; ++j) {
            const double x = -1.0 + (i + 0.5) * h, y = -1.0 + (j + 0.5) * h;
            integral_2d += tent_r(std::abs(x) + std::abs(y)) * h * h / c0_2d;
        }
    }
    const bool unit = std::abs(integral - 1.0) <= 1e-6 && std::abs(integral_2d - 1.0) <= 1e-5;

    // E[phi_N(x)] = psi_eps(x)
    const TargetFunction f = make_target("gaussian", 2);
    const double eps = cfg.epsilon;
    const NormEstimates norms{l1_norm_quadrature(f, 1000), c0_2d};
    const std::vector<std::vector<double>> probes{{0.0, 0.0}, {0.3, -0.2}, {-0.5, 0.5}, {0.7, 0.1}, {-0.9, -0.8}};
    const std::size_t replicates = 400;
    std::vector<std::vector<double>> values(probes.size());
    Rng rng(77);
    for (std::size_t m = 0; m < replicates; ++m) {
        Rng local = rng.fork(m);
        const TentApproximator phi = build_phi_N(f, 64, eps, local, norms);
        for (std::size_t k = 0; k < probes.size(); ++k) {
            values[k].push_back(phi(probes[k]));
        }
    }
    double worst_z = 0.0;
    for (std::size_t k = 0; k < probes.size(); ++k) {
        const double n = static_cast<double>(replicates);
        const double mean = std::accumulate(values[k].begin(), values[k].end(), 0.0) / n;
        double sq = 0.0;
        for (double v : values[k]) {
            sq += (v - mean) * (v - mean);
        }
        const double se = std::sqrt(sq / (n - 1.0) / n);
        const double psi = psi_epsilon(f, probes[k], eps, c0_2d, 600);
        worst_z = std::max(worst_z, std::abs(mean - psi) / se);
    }

    const bool ok = lemma1 < 1e-9 && lemma2 < 1e-9 && support && unit && worst_z <= 3.0 && decreasing;
    std::string sweep_txt;
    for (const auto& [name, errs] : sweep) {
        sweep_txt += name + "=";
        for (std::size_t i = 0; i < errs.size(); ++i) {
            sweep_txt += fmt("%s%.3g", i ? ">" : "", errs[i]);
        }
        sweep_txt += " ";
    }
    return verdict(ok, fmt("lemma1 %.1e, lemma2 %.1e (limit 1e-9); tent support/peak %s (max |r| outside %.0e), integral 1D %.8f 2D %.6f; "
                           "expectation identity max |z| %.2f at 5 probes (limit 3); L1 error over N=16,64,256: %s",
                           lemma1, lemma2, support ? "ok" : "bad", outside, integral, integral_2d, worst_z,
                           sweep_txt.c_str()));
}

// -- 9 -------------------------------------------------------------------------

Outcome variance(const Settings& s) {
    app::VarianceConfig cfg;
    cfg.data_dir = s.mnist_dir;
    const auto r = app::run_variance(cfg);
    double worst_conv = 0.0;
    double ratio = 0.0;
    for (const auto& v : r.variance) {
        worst_conv = std::max(worst_conv, std::abs(v.conv_empirical / v.conv_predicted - 1.0));
        if (v.var_f == 1e-3) {
            ratio = v.ratio();
        }
    }
    std::size_t ordered = 0;
    for (const auto& table : r.grad_norms) {
        ordered += adder_below_conv(table);
    }
    const bool ok = worst_conv <= 0.10 && ratio >= 10.0 && ordered >= 4;
    return verdict(ok, fmt("conv variance within %.1f%% of d^2 c_in Var[X] Var[F] (limit 10%%); adder/conv ratio "
                           "%.0f at Var[F]=1e-3 (limit 10); gradient-norm ordering in %zu/%zu seeds on %s batch",
                           100.0 * worst_conv, ratio, ordered, r.grad_norms.size(), r.batch_source.c_str()));
}

// -- 10 ------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome determinism(const Settings& s) {
    if (s.cli.empty() || !fs::exists(s.cli)) {
        return {Verdict::Fail, "CLI binary not found: " + s.cli};
    }
    std::vector<std::pair<std::string, std::string>> runs{
        {"toy", "toy --task ball --iterations 300 --grid 32 --seed 3"},
        {"approx", "approx --instances 5 --probes 200 --seeds 2 --mc-samples 2000"},
        {"props", "props"},
        {"gradcheck", "gradcheck --instances 3 --coords 20"},
        {"variance", "variance --rows 200 --in-channels 64 --seeds 2 --batch 8 --data-dir /nonexistent"},
        {"opcount", "opcount"},
    };
    const bool have_mnist = !s.mnist_dir.empty() && mnist_dir_available(s.mnist_dir);
    if (have_mnist) {
        const std::string data = " --data-dir '" + s.mnist_dir.string() + "'";
        runs.push_back({"train", "train --train-limit 256 --test-limit 128 --epochs 1 --batch 64" + data});
        runs.push_back({"sweep", "sweep --train-limit 128 --test-limit 64 --epochs 1 --batch 64 --etas 0.2 "
                                 "--e-decays 0" + data});
    }
    fs::remove_all(s.work_dir);
    std::size_t files = 0;
    std::vector<std::string> differing;
    for (const auto& [name, args] : runs) {
        std::vector<fs::path> dirs;
        for (const char* tag : {"a", "b"}) {
            const fs::path out = s.work_dir / name / tag;
            const std::string cmd = "'" + s.cli + "' " + args + " --out '" + out.string() + "' > /dev/null 2>&1";
            if (std::system(cmd.c_str()) != 0) {
                return {Verdict::Fail, "command failed: " + cmd};
            }
            dirs.push_back(out);
        }
        for (const auto& entry : fs::directory_iterator(dirs[0])) {
            const auto file = entry.path().filename();
            if (file == "timing.csv") {
                continue;  // wall-clock seconds
            }
            ++files;
            if (slurp(entry.path()) != slurp(dirs[1] / file)) {
                differing.push_back(name + "/" + file.string());
            }
        }
    }
    std::string diff;
    for (const auto& d : differing) {
        diff += " " + d;
    }
    return verdict(differing.empty() && files > 0,
                   fmt("%zu subcommands, %zu output files compared byte for byte%s%s", runs.size(), files,
                       have_mnist ? "" : " (train/sweep skipped: no MNIST files)",
                       differing.empty() ? "" : (", differing:" + diff).c_str()));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App cli{"Acceptance checks", "acceptance"};
    std::vector<int> selected;
    Settings settings;
    settings.cli = ADDERNET_CLI_PATH;
    settings.work_dir = fs::temp_directory_path() / "addernet_acceptance";
    if (const char* env = std::getenv("ADDERNET_MNIST_DIR")) {
        settings.mnist_dir = env;
    } else {
        settings.mnist_dir = ADDERNET_DEFAULT_MNIST_DIR;
    }
    std::string mnist_dir = settings.mnist_dir.string();
    cli.add_option("-c,--criterion", selected, "criteria to run (default: all)")->check(CLI::Range(1, 10));
    cli.add_option("--cli", settings.cli, "path of the addernet binary");
    cli.add_option("--mnist-dir", mnist_dir, "MNIST IDX directory");
    cli.add_option("--work-dir", settings.work_dir, "scratch directory for the determinism runs");
    CLI11_PARSE(cli, argc, argv);
    settings.mnist_dir = mnist_dir;
    if (selected.empty()) {
        selected = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    }

    const std::map<int, std::function<Outcome(const Settings&)>> criteria{
        {1, gradient_oracles}, {2, l2_identity}, {3, propositions}, {4, adaptive_lr}, {5, toy_tasks},
        {6, mnist},            {7, op_counts},   {8, constructions}, {9, variance},   {10, determinism},
    };
    // runtime limits in seconds
    const std::map<int, double> limits{{1, 60}, {2, 10}, {3, 10}, {4, 1},  {5, 300},
                                       {6, 3600}, {7, 1}, {8, 120}, {9, 60}, {10, 0}};

    bool any_fail = false, all_skip = true;
    for (int id : selected) {
        const auto start = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = criteria.at(id)(settings);
        } catch (const std::exception& e) {
            out = {Verdict::Fail, std::string("error: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const double limit = limits.at(id);
        if (out.verdict == Verdict::Pass && limit > 0.0 && secs > limit) {
            out.verdict = Verdict::Fail;
            out.details += fmt("; runtime %.1f s exceeds %.0f s", secs, limit);
        }
        const char* tag = out.verdict == Verdict::Pass ? "PASS" : out.verdict == Verdict::Fail ? "FAIL" : "SKIP";
        std::printf("criterion %d %s %.1fs %s\n", id, tag, secs, out.details.c_str());
        std::fflush(stdout);
        any_fail = any_fail || out.verdict == Verdict::Fail;
        all_skip = all_skip && out.verdict == Verdict::Skip;
    }
    return any_fail ? 1 : all_skip ? 77 : 0;
}
