#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "addernet/app.hpp"
#include "addernet/approx.hpp"

namespace addernet::app {

namespace {

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (const auto& s : items) {
        out += (out.empty() ? "" : ";") + s;
    }
    return out;
}

template <class T>
std::string join_numbers(const std::vector<T>& items) {
    std::vector<std::string> parts;
    for (const auto& v : items) {
        if constexpr (std::is_floating_point_v<T>) {
            parts.push_back(format_double(v));
        } else {
            parts.push_back(std::to_string(v));
        }
    }
    return join(parts);
}

}  // namespace

// -- approx --------------------------------------------------------------------

Metadata ApproxConfig::metadata() const {
    return {
        {"command", "approx"},          {"instances", std::to_string(instances)},
        {"probes", std::to_string(probes)}, {"targets", join(targets)},
        {"dim", std::to_string(dim)},   {"sweep", join_numbers(sweep)},
        {"epsilon", format_double(epsilon)}, {"seeds", std::to_string(seeds)},
        {"mc_samples", std::to_string(mc_samples)}, {"seed", std::to_string(seed)},
    };
}

std::vector<ApproxRow> run_approx(const ApproxConfig& config) {
    for (const auto& name : config.targets) {
        (void)make_target(name, config.dim);
    }
    std::vector<ApproxRow> rows;
    const Box box = Box::cube(config.dim, -1.0, 1.0);
    Rng rng = Rng(config.seed).fork(10);

    if (config.instances > 0) {
        double worst1 = 0.0;
        double worst2 = 0.0;
        for (std::size_t inst = 0; inst < config.instances; ++inst) {
            Rng local = rng.fork(inst);
            const std::size_t terms = 1 + static_cast<std::size_t>(local.below(8));
            const RbfStyleSum g = random_rbf_sum(terms, box, local);
            const TwoLayerAdderNet net1 = realize_lemma1(g, box);

            const std::size_t m = 1 + static_cast<std::size_t>(local.below(5));
            std::vector<std::vector<int>> mask(m, std::vector<int>(config.dim));
            std::vector<double> scales(m);
            for (std::size_t i = 0; i < m; ++i) {
                for (auto& b : mask[i]) {
                    b = static_cast<int>(local.below(2));
                }
                scales[i] = local.normal();
            }
            const TwoLayerAdderNet net2 = emulate_masked_linear(mask, scales, box);

            for (std::size_t k = 0; k < config.probes; ++k) {
                const auto x = box.sample(local);
                worst1 = std::max(worst1, std::abs(net1.eval(x)[0] - eval_rbf_sum(g, x)));
                const auto got = net2.eval(x);
                const auto want = masked_linear(mask, scales, x);
                for (std::size_t i = 0; i < m; ++i) {
                    worst2 = std::max(worst2, std::abs(got[i] - want[i]));
                }
            }
        }
        rows.push_back({"lemma1-max-residual", "random-rbf-sum", config.instances, 0.0, worst1, 0.0});
        rows.push_back({"lemma2-max-residual", "random-masked-linear", config.instances, 0.0, worst2, 0.0});
    }

    const double c0 = tent_c0(config.dim);
    for (const auto& name : config.targets) {
        const TargetFunction f = make_target(name, config.dim);
        const double f_l1 = l1_norm_quadrature(f, config.dim == 1 ? 200000 : config.dim == 2 ? 1000 : 100);
        for (std::size_t n : config.sweep) {
            double sum = 0.0;
            double sq = 0.0;
            for (std::size_t s = 0; s < config.seeds; ++s) {
                Rng local = Rng(config.seed).fork(1000 + s);
                const TentApproximator phi = build_phi_N(f, n, config.epsilon, local, {f_l1, c0});
                const L1Estimate e = measure_l1_error([&](std::span<const double> x) { return phi(x); },
                                                      [&](std::span<const double> x) { return f(x); }, f.box,
                                                      config.mc_samples, local);
                sum += e.value;
                sq += e.value * e.value;
            }
            const double k = static_cast<double>(config.seeds);
            const double mean = config.seeds ? sum / k : 0.0;
            const double sd = config.seeds > 1 ? std::sqrt(std::max(0.0, (sq - k * mean * mean) / (k - 1.0))) : 0.0;
            rows.push_back({"phi-N-l1-error", name, n, config.epsilon, mean, config.seeds ? sd / std::sqrt(k) : 0.0});
        }
    }

    if (!config.out_dir.empty()) {
        std::filesystem::create_directories(config.out_dir);
        CsvWriter csv(config.out_dir / "approx.csv", config.metadata(),
                      {"construction", "target", "size", "epsilon", "value", "std_error"});
        for (const auto& r : rows) {
            csv.cell(r.construction).cell(r.target).cell(r.size).cell(r.epsilon).cell(r.value).cell(r.std_error);
            csv.end_row();
        }
    }
    return rows;
}

// -- props ---------------------------------------------------------------------

Metadata PropsConfig::metadata() const {
    return {
        {"command", "props"},
        {"denominator", std::to_string(denominator)},
        {"x_nums", join_numbers(x_nums)},
        {"f0_nums", join_numbers(f0_nums)},
        {"alpha_nums", join_numbers(alpha_nums)},
        {"full_alphas", join_numbers(full_alphas)},
        {"y", format_double(y)},
        {"max_iters", std::to_string(max_iters)},
    };
}

std::vector<PropsRow> run_props(const PropsConfig& config) {
    if (config.denominator <= 0) {
        throw std::invalid_argument("props: denominator must be positive");
    }
    if (config.x_nums.empty() || config.f0_nums.empty() || (config.alpha_nums.empty() && config.full_alphas.empty())) {
        throw std::invalid_argument("props: grid must be non-empty");
    }
    const double den = static_cast<double>(config.denominator);
    std::vector<PropsRow> rows;
    for (auto xn : config.x_nums) {
        for (auto fn : config.f0_nums) {
            const double x = static_cast<double>(xn) / den;
            const double f0 = static_cast<double>(fn) / den;
            for (auto an : config.alpha_nums) {
                const double alpha = static_cast<double>(an) / den;
                const std::vector<double> xs{x}, fs{f0};
                const ConvergenceTrace t = simulate_sign_descent(xs, fs, config.y, alpha, config.max_iters);
                PropsRow row{"sign", x, f0, alpha, sign_descent_criterion(xn, fn, an), t.converged, t.steps,
                             t.amplitude};
                rows.push_back(row);
            }
            for (double alpha : config.full_alphas) {
                const std::vector<double> xs{x}, fs{f0};
                const ConvergenceTrace t = simulate_full_descent(xs, fs, config.y, alpha, config.max_iters);
                PropsRow row{"full", x, f0, alpha, alpha < 1.0, t.converged, t.steps, t.amplitude};
                for (std::size_t j = 0; j < t.iterates.size(); ++j) {
                    const double closed = x - (x - f0) * std::pow(1.0 - alpha, static_cast<double>(j));
                    row.closed_form_error = std::max(row.closed_form_error, std::abs(t.iterates[j][0] - closed));
                    if (j > 0 && !(t.objective[j] < t.objective[j - 1])) {
                        row.monotone = false;
                    }
                }
                rows.push_back(row);
            }
        }
    }
    if (!config.out_dir.empty()) {
        std::filesystem::create_directories(config.out_dir);
        CsvWriter csv(config.out_dir / "props.csv", config.metadata(),
                      {"mode", "x", "f0", "alpha", "criterion", "converged", "agree", "steps", "amplitude",
                       "monotone", "closed_form_error"});
        for (const auto& r : rows) {
            csv.cell(r.mode).cell(r.x).cell(r.f0).cell(r.alpha).cell(r.criterion).cell(r.converged);
            csv.cell(r.criterion == r.converged).cell(r.steps).cell(r.amplitude).cell(r.monotone);
            csv.cell(r.closed_form_error);
            csv.end_row();
        }
    }
    return rows;
}

// -- variance ------------------------------------------------------------------

Metadata VarianceConfig::metadata() const {
    return {
        {"command", "variance"},
        {"kernel", std::to_string(kernel)},
        {"in_channels", std::to_string(in_channels)},
        {"out_channels", std::to_string(out_channels)},
        {"rows", std::to_string(rows)},
        {"var_f", join_numbers(var_f)},
        {"var_x", format_double(var_x)},
        {"data_dir", data_dir.string()},
        {"batch", std::to_string(batch)},
        {"seeds", std::to_string(seeds)},
        {"seed", std::to_string(seed)},
    };
}

VarianceResult run_variance(const VarianceConfig& config) {
    VarianceResult result;
    Rng rng = Rng(config.seed).fork(20);
    std::vector<double> var_fs = config.var_f;
    var_fs.insert(var_fs.begin(), 1.0 / static_cast<double>(config.kernel * config.kernel * config.in_channels));
    for (double vf : var_fs) {
        result.variance.push_back(variance_report(config.kernel, config.in_channels, config.out_channels,
                                                  config.var_x, vf, config.rows, rng));
    }

    Tensor batch;
    std::vector<int> labels;
    if (config.seeds > 0) {
        if (mnist_dir_available(config.data_dir)) {
            const LabeledDataset train = load_mnist_dir(config.data_dir).train;
            std::vector<std::size_t> idx(std::min(config.batch, train.size()));
            std::iota(idx.begin(), idx.end(), std::size_t{0});
            batch = gather_inputs(train, idx);
            labels = gather_labels(train, idx);
            result.batch_source = "mnist:" + config.data_dir.string();
        } else {
            Rng data = Rng(config.seed).fork(21);
            batch = randn_seeded(data, {config.batch, 32, 32, 1}, 0.0, 1.0);
            for (std::size_t i = 0; i < config.batch; ++i) {
                labels.push_back(static_cast<int>(data.below(10)));
            }
            result.batch_source = "gaussian";
        }
    }
    for (std::size_t s = 0; s < config.seeds; ++s) {
        result.grad_norms.push_back(grad_norm_table(batch, labels, config.seed + s));
    }

    if (!config.out_dir.empty()) {
        std::filesystem::create_directories(config.out_dir);
        Metadata meta = config.metadata();
        meta.emplace_back("batch_source", result.batch_source);
        CsvWriter csv(config.out_dir / "variance.csv", meta,
                      {"kernel", "in_channels", "var_x", "var_f", "samples", "conv_empirical", "conv_predicted",
                       "adder_empirical", "adder_predicted", "adder_exact_gauss", "ratio"});
        for (const auto& r : result.variance) {
            csv.cell(r.kernel).cell(r.in_channels).cell(r.var_x).cell(r.var_f).cell(r.samples);
            csv.cell(r.conv_empirical).cell(r.conv_predicted).cell(r.adder_empirical).cell(r.adder_predicted);
            csv.cell(r.adder_exact_gauss).cell(r.ratio());
            csv.end_row();
        }
        CsvWriter norms(config.out_dir / "gradnorm.csv", meta, {"seed", "layer", "adder_norm", "conv_norm", "ordered"});
        for (std::size_t s = 0; s < result.grad_norms.size(); ++s) {
            for (const auto& r : result.grad_norms[s]) {
                norms.cell(config.seed + s).cell(r.layer).cell(r.adder).cell(r.conv).cell(r.adder < r.conv);
                norms.end_row();
            }
        }
    }
    return result;
}

// -- opcount -------------------------------------------------------------------

Metadata OpCountConfig::metadata() const {
    return {{"command", "opcount"}, {"arch", arch}, {"conv_ends", conv_ends ? "true" : "false"}};
}

OpCountResult run_opcount(const OpCountConfig& config) {
    OpCountResult result{count_ops(resolve_arch(config.arch, LayerKind::Conv, config.conv_ends)),
                         count_ops(resolve_arch(config.arch, LayerKind::Adder, config.conv_ends))};
    if (!config.out_dir.empty()) {
        std::filesystem::create_directories(config.out_dir);
        CsvWriter csv(config.out_dir / "opcount.csv", config.metadata(),
                      {"network", "layer", "kind", "multiplications", "additions", "xnor"});
        for (const auto* report : {&result.conv, &result.adder}) {
            const std::string name = report == &result.conv ? "conv" : "adder";
            for (const auto& l : report->layers) {
                csv.cell(name).cell(l.layer).cell(addernet::to_string(l.kind));
                csv.cell(static_cast<unsigned long long>(l.multiplications));
                csv.cell(static_cast<unsigned long long>(l.additions)).cell(std::size_t{0});
                csv.end_row();
            }
            csv.cell(name).cell(std::string("total")).cell(std::string("-"));
            csv.cell(static_cast<unsigned long long>(report->multiplications));
            csv.cell(static_cast<unsigned long long>(report->additions));
            csv.cell(static_cast<unsigned long long>(report->xnor));
            csv.end_row();
        }
    }
    return result;
}

}  // namespace addernet::app
