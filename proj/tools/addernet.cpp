// Command-line driver for every experiment in the library.
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <string>

#include <CLI11.hpp>

#include "addernet/app.hpp"

using namespace addernet;
using namespace addernet::app;

namespace {

// Exit codes: 1 runtime failure, 2 usage, 3 missing or malformed input data.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

int fail(const std::string& kind, const std::string& message, int code) {
    std::cerr << "error: " << kind << ": " << message << '\n';
    return code;
}

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string config_placeholder;

void add_config(CLI::App* sub) {
    sub->add_option("--config", config_placeholder, "key=value file; command-line flags override it");
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return "";
    }
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

// Replaces `<sub> ... --config FILE ...` by `<sub> --key=value ... ...`,
// leaving out keys that are also given on the command line.
std::vector<std::string> expand_config(CLI::App& cli, std::vector<std::string> args) {
    auto it = std::find_if(args.begin(), args.end(),
                           [](const std::string& a) { return a == "--config" || a.starts_with("--config="); });
    if (it == args.end() || it == args.begin()) {
        return args;
    }
    std::string path;
    if (*it == "--config") {
        if (std::next(it) == args.end()) {
            throw ConfigError("--config needs a file name");
        }
        path = *std::next(it);
        args.erase(it, std::next(it, 2));
    } else {
        path = it->substr(9);
        args.erase(it);
    }
    CLI::App* sub = cli.get_subcommand_no_throw(args.front());
    if (sub == nullptr) {
        throw ConfigError("--config must follow a subcommand");
    }
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read config file " + path);
    }
    std::vector<std::string> tokens;
    std::string line;
    for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
        line = trim(line);
        if (line.empty() || line.front() == '#') {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key=value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const CLI::Option* opt = sub->get_option_no_throw("--" + key);
        if (opt == nullptr || key == "config") {
            throw ConfigError(path + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
        }
        const bool overridden = std::any_of(args.begin() + 1, args.end(), [&](const std::string& a) {
            return a.starts_with("-") && opt->check_name(a.substr(0, a.find('=')));
        });
        if (!overridden) {
            tokens.push_back("--" + key + "=" + value);
        }
    }
    args.insert(args.begin() + 1, tokens.begin(), tokens.end());
    return args;
}

void add_optimizer(CLI::App* sub, LrSchedule& schedule, std::string& schedule_name, OptimizerConfig& opt) {
    sub->add_option("--lr", schedule.lr0, "initial learning rate")->capture_default_str();
    sub->add_option("--schedule", schedule_name, "cosine | poly | constant")->capture_default_str();
    sub->add_option("--power", schedule.power, "polynomial schedule power")->capture_default_str();
    sub->add_option("--momentum", opt.momentum)->capture_default_str();
    sub->add_option("--weight-decay", opt.weight_decay)->capture_default_str();
    sub->add_option("--eta", opt.eta, "adaptive learning-rate coefficient")->capture_default_str();
    sub->add_flag("--adaptive,!--no-adaptive", opt.adaptive, "scale adder-layer gradients")->capture_default_str();
}

struct TrainArgs {
    TrainConfig cfg;
    std::string mode = "adder-lp-schedule";
    std::string grad = "full";
    std::string schedule = "cosine";
    long long e_decay = -1;
    std::string out = "runs/train";
};

void add_train_options(CLI::App* sub, TrainArgs& a) {
    add_config(sub);
    sub->add_option("--data-dir", a.cfg.data_dir, "directory with the four MNIST IDX files")->capture_default_str();
    sub->add_option("--train-limit", a.cfg.train_limit, "use the first N training images (0 = all)");
    sub->add_option("--test-limit", a.cfg.test_limit, "use the first N test images (0 = all)");
    sub->add_option("--arch", a.cfg.arch, "lenet5bn or a JSON network spec file")->capture_default_str();
    sub->add_option("--mode", a.mode, "adder-l1 | adder-lp-schedule | adder-l2 | conv")->capture_default_str();
    sub->add_flag("--conv-ends", a.cfg.conv_ends, "keep the first and last filter layers multiplicative");
    sub->add_option("--grad-mode", a.grad, "full | sign")->capture_default_str();
    sub->add_option("--epochs", a.cfg.epochs)->capture_default_str();
    sub->add_option("--batch", a.cfg.batch)->capture_default_str();
    sub->add_option("--e-decay", a.e_decay, "epoch at which p reaches 1 (default 75% of epochs)");
    sub->add_flag("--bn-recalibrate,!--no-bn-recalibrate", a.cfg.bn_recalibrate,
                  "BN statistics over the training set before each evaluation")
        ->capture_default_str();
    sub->add_option("--seed", a.cfg.seed)->capture_default_str();
    sub->add_option("--out", a.out, "output directory")->capture_default_str();
    add_optimizer(sub, a.cfg.schedule, a.schedule, a.cfg.optimizer);
}

TrainConfig resolve(TrainArgs& a) {
    TrainConfig cfg = a.cfg;
    cfg.mode = layer_mode_from_string(a.mode);
    cfg.grad_mode = gradient_mode_from_string(a.grad);
    cfg.schedule.kind = schedule_kind_from_string(a.schedule);
    if (a.e_decay >= 0) {
        cfg.e_decay = static_cast<std::size_t>(a.e_decay);
    }
    cfg.out_dir = a.out;
    if (!mnist_dir_available(cfg.data_dir)) {
        throw DataError("MNIST files not found in '" + cfg.data_dir.string() +
                        "' (expected train-images-idx3-ubyte, train-labels-idx1-ubyte, t10k-images-idx3-ubyte, "
                        "t10k-labels-idx1-ubyte)");
    }
    return cfg;
}

std::string pct(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f%%", 100.0 * v);
    return buf;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App cli{"Adder neural networks: training, toy tasks, constructions and reports", "addernet"};
    cli.require_subcommand(1);

    // train
    TrainArgs train;
    auto* train_cmd = cli.add_subcommand("train", "train a classifier on MNIST IDX files");
    add_train_options(train_cmd, train);

    // sweep
    TrainArgs sweep;
    sweep.out = "runs/sweep";
    sweep.cfg.epochs = 4;
    std::vector<double> sweep_etas{0.05, 0.1, 0.2, 0.5};
    std::vector<std::size_t> sweep_decays{0, 2, 3};
    double sweep_target = 0.97;
    auto* sweep_cmd = cli.add_subcommand("sweep", "eta and E_decay sweep on an MNIST subset");
    add_train_options(sweep_cmd, sweep);
    sweep_cmd->add_option("--etas", sweep_etas)->delimiter(',')->capture_default_str();
    sweep_cmd->add_option("--e-decays", sweep_decays)->delimiter(',')->capture_default_str();
    sweep_cmd->add_option("--target", sweep_target, "accuracy every point must reach")->capture_default_str();

    // toy
    ToyConfig toy;
    std::string toy_task = "ball";
    std::string toy_net = "adder";
    std::string toy_mode = "adder-l1";
    std::string toy_grad = "full";
    std::string toy_schedule = "cosine";
    std::string toy_out = "runs/toy";
    auto* toy_cmd = cli.add_subcommand("toy", "two-layer nets on the 2-D toy tasks");
    add_config(toy_cmd);
    toy_cmd->add_option("--task", toy_task, "ball | multiball | linear")->capture_default_str();
    toy_cmd->add_option("--hidden,-n", toy.hidden, "hidden units")->capture_default_str();
    toy_cmd->add_option("--net", toy_net, "adder | mlp")->capture_default_str();
    toy_cmd->add_option("--mode", toy_mode, "layer mode for adder nets")->capture_default_str();
    toy_cmd->add_option("--grad-mode", toy_grad, "full | sign")->capture_default_str();
    toy_cmd->add_option("--samples", toy.samples)->capture_default_str();
    toy_cmd->add_option("--iterations", toy.iterations)->capture_default_str();
    toy_cmd->add_option("--batch", toy.batch)->capture_default_str();
    toy_cmd->add_option("--grid", toy.grid, "boundary image resolution")->capture_default_str();
    toy_cmd->add_flag("--standardize", toy.standardize, "divide coordinates by the sampling stddev");
    toy_cmd->add_flag("--bn-recalibrate", toy.recalibrate_bn, "final BN statistics from the whole training set");
    toy_cmd->add_option("--seed", toy.seed)->capture_default_str();
    toy_cmd->add_option("--out", toy_out)->capture_default_str();
    add_optimizer(toy_cmd, toy.schedule, toy_schedule, toy.optimizer);

    // approx
    ApproxConfig approx;
    std::string approx_out = "runs/approx";
    auto* approx_cmd = cli.add_subcommand("approx", "two-layer realizations and tent-kernel approximation");
    add_config(approx_cmd);
    approx_cmd->add_option("--instances", approx.instances, "random lemma instances")->capture_default_str();
    approx_cmd->add_option("--probes", approx.probes, "probe points per instance")->capture_default_str();
    approx_cmd->add_option("--targets", approx.targets, "tent, gaussian, sine-product")->delimiter(',');
    approx_cmd->add_option("--dim", approx.dim)->capture_default_str();
    approx_cmd->add_option("--sweep", approx.sweep, "values of N (empty for none)")->delimiter(',')->expected(0, -1);
    approx_cmd->add_option("--epsilon", approx.epsilon)->capture_default_str();
    approx_cmd->add_option("--seeds", approx.seeds, "seeds averaged per N")->capture_default_str();
    approx_cmd->add_option("--mc-samples", approx.mc_samples)->capture_default_str();
    approx_cmd->add_option("--seed", approx.seed)->capture_default_str();
    approx_cmd->add_option("--out", approx_out)->capture_default_str();

    // props
    PropsConfig props;
    std::string props_out = "runs/props";
    auto* props_cmd = cli.add_subcommand("props", "sign vs full-precision descent on a rational grid");
    add_config(props_cmd);
    props_cmd->add_option("--denominator", props.denominator)->capture_default_str();
    props_cmd->add_option("--x", props.x_nums, "numerators of x")->delimiter(',');
    props_cmd->add_option("--f0", props.f0_nums, "numerators of f0")->delimiter(',');
    props_cmd->add_option("--alpha", props.alpha_nums, "numerators of alpha (sign descent)")->delimiter(',');
    props_cmd->add_option("--full-alpha", props.full_alphas, "alphas for full descent")->delimiter(',');
    props_cmd->add_option("--y", props.y)->capture_default_str();
    props_cmd->add_option("--max-iters", props.max_iters)->capture_default_str();
    props_cmd->add_option("--out", props_out)->capture_default_str();

    // gradcheck
    GradCheckConfig grad;
    std::string grad_out = "runs/gradcheck";
    auto* grad_cmd = cli.add_subcommand("gradcheck", "central-difference checks of every layer");
    add_config(grad_cmd);
    grad_cmd->add_option("--instances", grad.instances)->capture_default_str();
    grad_cmd->add_option("--coords", grad.coords, "coordinates per instance")->capture_default_str();
    grad_cmd->add_option("--step", grad.step, "central-difference step for single layers")->capture_default_str();
    grad_cmd->add_option("--network-step", grad.network_step, "central-difference step for whole networks")
        ->capture_default_str();
    grad_cmd->add_option("--tolerance", grad.tolerance)->capture_default_str();
    grad_cmd->add_option("--seed", grad.seed)->capture_default_str();
    grad_cmd->add_option("--out", grad_out)->capture_default_str();

    // variance
    VarianceConfig var;
    std::string var_out = "runs/variance";
    auto* var_cmd = cli.add_subcommand("variance", "output variance and initial gradient norms");
    add_config(var_cmd);
    var_cmd->add_option("--kernel", var.kernel)->capture_default_str();
    var_cmd->add_option("--in-channels", var.in_channels)->capture_default_str();
    var_cmd->add_option("--out-channels", var.out_channels)->capture_default_str();
    var_cmd->add_option("--rows", var.rows, "independent patches")->capture_default_str();
    var_cmd->add_option("--var-f", var.var_f, "filter variances")->delimiter(',');
    var_cmd->add_option("--var-x", var.var_x)->capture_default_str();
    var_cmd->add_option("--data-dir", var.data_dir, "MNIST batch for gradient norms")->capture_default_str();
    var_cmd->add_option("--batch", var.batch)->capture_default_str();
    var_cmd->add_option("--seeds", var.seeds)->capture_default_str();
    var_cmd->add_option("--seed", var.seed)->capture_default_str();
    var_cmd->add_option("--out", var_out)->capture_default_str();

    // opcount
    OpCountConfig ops;
    std::string ops_out = "runs/opcount";
    auto* ops_cmd = cli.add_subcommand("opcount", "multiplication and addition counts per forward pass");
    add_config(ops_cmd);
    ops_cmd->add_option("--arch", ops.arch, "lenet5bn or a JSON network spec file")->capture_default_str();
    ops_cmd->add_flag("--conv-ends", ops.conv_ends);
    ops_cmd->add_option("--out", ops_out)->capture_default_str();

    try {
        std::vector<std::string> args = expand_config(cli, std::vector<std::string>(argv + 1, argv + argc));
        std::reverse(args.begin(), args.end());
        cli.parse(args);
    } catch (const ConfigError& e) {
        return fail("config", e.what(), 2);
    } catch (const CLI::CallForHelp& e) {
        return cli.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return cli.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("usage", e.what(), 2);
    }

    try {
        if (*train_cmd) {
            const TrainConfig cfg = resolve(train);
            const TrainResult r = run_train(cfg);
            for (const auto& row : r.rows) {
                std::cout << "epoch " << row.epoch << "  p=" << format_double(row.p)
                          << "  loss=" << format_double(row.train_loss) << "  train=" << pct(row.train_acc)
                          << "  test=" << pct(row.test_acc) << '\n';
            }
            std::cout << "final test accuracy " << pct(r.final_test_acc) << "; outputs in " << cfg.out_dir.string()
                      << '\n';
        } else if (*sweep_cmd) {
            SweepConfig sc;
            sc.base = resolve(sweep);
            sc.etas = sweep_etas;
            sc.e_decays = sweep_decays;
            sc.target = sweep_target;
            bool all = true;
            for (const auto& r : run_sweep(sc)) {
                std::cout << r.axis << "=" << format_double(r.value) << "  test=" << pct(r.test_acc)
                          << (r.reached ? "" : "  (below target)") << '\n';
                all = all && r.reached;
            }
            std::cout << (all ? "all sweep points reached " : "some sweep points missed ") << pct(sc.target) << '\n';
        } else if (*toy_cmd) {
            toy.task = toy_task_from_string(toy_task);
            toy.grad_mode = gradient_mode_from_string(toy_grad);
            if (toy_net == "mlp") {
                toy.mode = LayerMode::Conv;
            } else if (toy_net == "adder") {
                toy.mode = layer_mode_from_string(toy_mode);
                if (toy.mode == LayerMode::Conv) {
                    throw std::invalid_argument("--net adder needs an adder layer mode");
                }
            } else {
                throw std::invalid_argument("unknown net '" + toy_net + "' (expected adder or mlp)");
            }
            toy.schedule.kind = schedule_kind_from_string(toy_schedule);
            toy.out_dir = toy_out;
            const ToyResult r = run_toy(toy);
            std::cout << to_string(toy.task) << " " << toy_net << " n=" << toy.hidden << ": train accuracy "
                      << pct(r.train_acc) << "; outputs in " << toy_out << '\n';
        } else if (*approx_cmd) {
            approx.out_dir = approx_out;
            for (const auto& r : run_approx(approx)) {
                std::cout << r.construction << " " << r.target << " size=" << r.size << " value=" << format_double(r.value)
                          << '\n';
            }
        } else if (*props_cmd) {
            props.out_dir = props_out;
            std::size_t agree = 0;
            std::size_t sign = 0;
            std::size_t full_ok = 0;
            std::size_t full = 0;
            for (const auto& r : run_props(props)) {
                if (r.mode == "sign") {
                    ++sign;
                    agree += r.criterion == r.converged ? 1 : 0;
                } else {
                    ++full;
                    full_ok += r.converged == r.criterion ? 1 : 0;
                }
            }
            std::cout << "sign descent: verdict matches the integrality criterion in " << agree << "/" << sign
                      << " cases\nfull descent: " << full_ok << "/" << full << " cases converge as predicted\n";
        } else if (*grad_cmd) {
            grad.out_dir = grad_out;
            bool ok = true;
            for (const auto& r : run_gradcheck(grad)) {
                std::cout << r.check << ": max relative error " << format_double(r.max_rel_error) << " over "
                          << r.checked << " coordinates (" << r.excluded << " kinks skipped) "
                          << (r.passed ? "ok" : "FAILED") << '\n';
                ok = ok && r.passed;
            }
            if (!ok) {
                return fail("check", "gradient check failed", 1);
            }
        } else if (*var_cmd) {
            var.out_dir = var_out;
            const VarianceResult r = run_variance(var);
            for (const auto& v : r.variance) {
                std::cout << "var_f=" << format_double(v.var_f) << "  conv " << format_double(v.conv_empirical)
                          << " (predicted " << format_double(v.conv_predicted) << ")  adder "
                          << format_double(v.adder_empirical) << "  ratio " << format_double(v.ratio()) << '\n';
            }
            std::size_t ordered = 0;
            for (const auto& table : r.grad_norms) {
                ordered += adder_below_conv(table) ? 1 : 0;
            }
            std::cout << "gradient norms (" << r.batch_source << "): adder below conv in every layer for " << ordered
                      << "/" << r.grad_norms.size() << " seeds\n";
        } else if (*ops_cmd) {
            ops.out_dir = ops_out;
            const OpCountResult r = run_opcount(ops);
            std::cout << "conv:  " << r.conv.multiplications << " multiplications, " << r.conv.additions
                      << " additions\nadder: " << r.adder.multiplications << " multiplications, "
                      << r.adder.additions << " additions\n";
        }
    } catch (const DataError& e) {
        return fail("data", e.what(), 3);
    } catch (const std::invalid_argument& e) {
        return fail("config", e.what(), 2);
    } catch (const std::exception& e) {
        return fail("runtime", e.what(), 1);
    }
    return 0;
}
