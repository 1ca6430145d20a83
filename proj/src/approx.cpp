#include "addernet/approx.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace addernet {

namespace {

double l1_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        s += std::abs(a[j] - b[j]);
    }
    return s;
}

void check_dim(std::size_t expected, std::size_t got, const char* what) {
    if (expected != got) {
        throw std::invalid_argument(std::string(what) + ": expected dimension " + std::to_string(expected) +
                                    ", got " + std::to_string(got));
    }
}

// Visits the midpoints of a per_axis^d grid over [lo, hi]; cell volume is passed along.
template <class Visit>
void for_each_midpoint(std::span<const double> lo, std::span<const double> hi, std::size_t per_axis, Visit visit) {
    const std::size_t d = lo.size();
    std::vector<double> step(d);
    double cell = 1.0;
    for (std::size_t j = 0; j < d; ++j) {
        step[j] = (hi[j] - lo[j]) / static_cast<double>(per_axis);
        cell *= step[j];
    }
    std::vector<std::size_t> idx(d, 0);
    std::vector<double> point(d);
    while (true) {
        for (std::size_t j = 0; j < d; ++j) {
            point[j] = lo[j] + (static_cast<double>(idx[j]) + 0.5) * step[j];
        }
        visit(std::span<const double>(point), cell);
        std::size_t j = 0;
        while (j < d && ++idx[j] == per_axis) {
            idx[j] = 0;
            ++j;
        }
        if (j == d) {
            break;
        }
    }
}

}  // namespace

Box Box::cube(std::size_t dim, double lo, double hi) {
    Box box{std::vector<double>(dim, lo), std::vector<double>(dim, hi)};
    box.validate();
    return box;
}

double Box::volume() const {
    double v = 1.0;
    for (std::size_t j = 0; j < dim(); ++j) {
        v *= hi[j] - lo[j];
    }
    return v;
}

double Box::max_abs() const {
    double m = 0.0;
    for (std::size_t j = 0; j < dim(); ++j) {
        m = std::max({m, std::abs(lo[j]), std::abs(hi[j])});
    }
    return m;
}

void Box::validate() const {
    if (lo.empty() || lo.size() != hi.size()) {
        throw std::invalid_argument("box needs matching, non-empty bounds");
    }
    for (std::size_t j = 0; j < dim(); ++j) {
        if (!(std::isfinite(lo[j]) && std::isfinite(hi[j]) && lo[j] < hi[j])) {
            throw std::invalid_argument("degenerate box along axis " + std::to_string(j));
        }
    }
}

std::vector<double> Box::sample(Rng& rng) const {
    std::vector<double> x(dim());
    for (std::size_t j = 0; j < dim(); ++j) {
        x[j] = rng.uniform(lo[j], hi[j]);
    }
    return x;
}

// ---------------------------------------------------------------------------

double eval_rbf_sum(const RbfStyleSum& g, std::span<const double> x) {
    check_dim(g.dim, x.size(), "eval_rbf_sum");
    double s = 0.0;
    for (const auto& t : g.terms) {
        s += t.a * std::max(0.0, l1_distance(t.w, x) + t.b);
    }
    return s;
}

RbfStyleSum random_rbf_sum(std::size_t terms, const Box& box, Rng& rng) {
    box.validate();
    RbfStyleSum g;
    g.dim = box.dim();
    for (std::size_t i = 0; i < terms; ++i) {
        RbfTerm t;
        t.a = rng.normal();
        t.w = box.sample(rng);
        t.b = rng.uniform(-2.0, 1.0);
        g.terms.push_back(std::move(t));
    }
    return g;
}

std::vector<double> AdderDenseLayer::apply(std::span<const double> x) const {
    check_dim(in, x.size(), "adder layer");
    std::vector<double> y(out());
    for (std::size_t i = 0; i < out(); ++i) {
        y[i] = scale[i] * l1_distance(weights[i], x) + bias[i];
    }
    return y;
}

std::vector<double> TwoLayerAdderNet::hidden(std::span<const double> x) const {
    auto h = first.apply(x);
    for (double& v : h) {
        v = std::max(0.0, v);
    }
    return h;
}

std::vector<double> TwoLayerAdderNet::eval(std::span<const double> x) const {
    return second.apply(hidden(x));
}

TwoLayerAdderNet realize_lemma1(const RbfStyleSum& g, const Box& box) {
    box.validate();
    check_dim(g.dim, box.dim(), "realize_lemma1");
    TwoLayerAdderNet net;
    net.first.in = g.dim;
    const std::size_t t = g.terms.size();

    // Hidden unit i computes |a_i| ReLU(|W_i - x|_1 + b_i).
    double bound = 0.0;
    for (const auto& term : g.terms) {
        check_dim(g.dim, term.w.size(), "realize_lemma1 term");
        double far = 0.0;
        for (std::size_t j = 0; j < g.dim; ++j) {
            far += std::max(std::abs(term.w[j] - box.lo[j]), std::abs(term.w[j] - box.hi[j]));
        }
        const double mag = std::abs(term.a);
        net.first.weights.push_back(term.w);
        net.first.scale.push_back(mag);
        net.first.bias.push_back(mag * term.b);
        bound = std::max(bound, mag * (far + std::abs(term.b)));
    }
    if (t == 0) {
        net.first.weights.emplace_back(g.dim, 0.0);
        net.first.scale.push_back(0.0);
        net.first.bias.push_back(0.0);
    }
    const double m = 2.0 * bound + 1.0;
    net.bound = m;

    // |-M - h| = M + h and |M - h| = M - h for 0 <= h < M.
    std::vector<double> w2;
    for (const auto& term : g.terms) {
        w2.push_back(term.a > 0.0 ? -m : m);
    }
    if (t == 0) {
        w2.push_back(m);
    }
    net.second.in = w2.size();
    net.second.weights.push_back(std::move(w2));
    net.second.scale.push_back(1.0);
    net.second.bias.push_back(-static_cast<double>(net.second.in) * m);
    return net;
}

std::vector<double> masked_linear(const std::vector<std::vector<int>>& mask, std::span<const double> scales,
                                  std::span<const double> x) {
    std::vector<double> y(mask.size(), 0.0);
    for (std::size_t i = 0; i < mask.size(); ++i) {
        check_dim(x.size(), mask[i].size(), "masked_linear");
        double s = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) {
            if (mask[i][j] != 0) {
                s += x[j];
            }
        }
        y[i] = scales[i] * s;
    }
    return y;
}

TwoLayerAdderNet emulate_masked_linear(const std::vector<std::vector<int>>& mask, std::span<const double> scales,
                                       const Box& box) {
    box.validate();
    const std::size_t m = mask.size();
    const std::size_t d = box.dim();
    if (m == 0 || scales.size() != m) {
        throw std::invalid_argument("emulate_masked_linear: need one scale per mask row");
    }
    for (const auto& row : mask) {
        check_dim(d, row.size(), "emulate_masked_linear");
        for (int b : row) {
            if (b != 0 && b != 1) {
                throw std::invalid_argument("emulate_masked_linear: mask entries must be 0 or 1");
            }
        }
    }

    // With c > |x_j| every |W_j - x_j| is linear in x_j with slope sgn(-W_j).
    const double xmax = std::max(box.max_abs(), 1.0);
    const double c = 2.0 * xmax;
    const double bias1 = 2.0 * xmax;
    const double dc = static_cast<double>(d) * c;

    TwoLayerAdderNet net;
    net.first.in = d;
    auto add_unit = [&](const std::vector<double>& sign) {
        std::vector<double> w(d);
        for (std::size_t j = 0; j < d; ++j) {
            w[j] = -sign[j] * c;
        }
        net.first.weights.push_back(std::move(w));
        net.first.scale.push_back(1.0);
        net.first.bias.push_back(bias1);
    };
    std::vector<std::vector<double>> signs(2 * m + 2, std::vector<double>(d));
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            signs[i][j] = mask[i][j] != 0 ? 1.0 : -1.0;
            signs[m + i][j] = -signs[i][j];
        }
    }
    std::fill(signs[2 * m].begin(), signs[2 * m].end(), 1.0);
    std::fill(signs[2 * m + 1].begin(), signs[2 * m + 1].end(), -1.0);
    for (const auto& s : signs) {
        add_unit(s);
    }

    // Hidden values lie in [dc - d*xmax + bias1, dc + d*xmax + bias1].
    const double hmax = dc + static_cast<double>(d) * xmax + bias1;
    const double c2 = 2.0 * hmax;
    net.bound = c2;
    const std::size_t hidden = 2 * m + 2;
    net.second.in = hidden;
    for (std::size_t i = 0; i < m; ++i) {
        // +1 on unit i, -1 on its mirror, +1 on both halves of every other
        // pair (their sum is constant), +1 on the all-plus unit, -1 on the
        // all-minus unit: 4 sum_j B_ij x_j plus a constant.
        std::vector<double> sigma(hidden, 1.0);
        sigma[m + i] = -1.0;
        sigma[2 * m + 1] = -1.0;
        std::vector<double> w(hidden);
        for (std::size_t u = 0; u < hidden; ++u) {
            w[u] = -sigma[u] * c2;
        }
        const double a = scales[i] / 4.0;
        const double constant =
            static_cast<double>(hidden) * c2 + 2.0 * static_cast<double>(m - 1) * (dc + bias1);
        net.second.weights.push_back(std::move(w));
        net.second.scale.push_back(a);
        net.second.bias.push_back(-a * constant);
    }
    return net;
}

// ---------------------------------------------------------------------------

double tent_r(double x) {
    return std::max(0.0, x + 1.0) + std::max(0.0, x - 1.0) - 2.0 * std::max(0.0, x);
}

double trapezoid(const std::function<double(double)>& fn, double lo, double hi, std::size_t intervals) {
    if (intervals == 0) {
        throw std::invalid_argument("trapezoid: need at least one interval");
    }
    const double h = (hi - lo) / static_cast<double>(intervals);
    double s = 0.5 * (fn(lo) + fn(hi));
    for (std::size_t i = 1; i < intervals; ++i) {
        s += fn(lo + h * static_cast<double>(i));
    }
    return s * h;
}

double tent_c0(std::size_t dim) {
    if (dim == 0) {
        throw std::invalid_argument("tent_c0: dimension must be positive");
    }
    // The l1 sphere of radius s has surface measure 2^d s^(d-1) / (d-1)!.
    double shell = std::pow(2.0, static_cast<double>(dim));
    for (std::size_t k = 2; k < dim; ++k) {
        shell /= static_cast<double>(k);
    }
    const auto integrand = [&](double s) { return tent_r(s) * std::pow(s, static_cast<double>(dim - 1)); };
    return shell * trapezoid(integrand, 0.0, 1.0, 20000);
}

double TargetFunction::operator()(std::span<const double> x) const {
    check_dim(dim, x.size(), "target function");
    for (std::size_t j = 0; j < dim; ++j) {
        if (x[j] < box.lo[j] || x[j] > box.hi[j]) {
            return 0.0;
        }
    }
    return fn(x);
}

std::vector<std::string> target_names() {
    return {"tent", "gaussian", "sine-product"};
}

TargetFunction make_target(const std::string& name, std::size_t dim) {
    if (dim == 0 || dim > 3) {
        throw std::invalid_argument("target dimension must be 1, 2 or 3");
    }
    TargetFunction f;
    f.name = name;
    f.dim = dim;
    f.box = Box::cube(dim, -1.0, 1.0);
    f.sup = 1.0;
    if (name == "tent") {
        f.fn = [](std::span<const double> x) {
            double s = 0.0;
            for (double v : x) {
                s += std::abs(v);
            }
            return std::max(0.0, 1.0 - s);
        };
    } else if (name == "gaussian") {
        f.fn = [](std::span<const double> x) {
            double s = 0.0;
            for (double v : x) {
                s += v * v;
            }
            return std::exp(-4.0 * s);
        };
    } else if (name == "sine-product") {
        f.fn = [](std::span<const double> x) {
            double p = 1.0;
            for (double v : x) {
                p *= std::sin(std::numbers::pi * v);
            }
            return p;
        };
    } else {
        throw std::invalid_argument("unknown target '" + name + "' (expected tent, gaussian or sine-product)");
    }
    return f;
}

double l1_norm_quadrature(const TargetFunction& f, std::size_t per_axis) {
    double s = 0.0;
    for_each_midpoint(f.box.lo, f.box.hi, per_axis,
                      [&](std::span<const double> z, double cell) { s += std::abs(f(z)) * cell; });
    return s;
}

namespace {

std::size_t default_grid(std::size_t dim) {
    switch (dim) {
        case 1: return 200000;
        case 2: return 1000;
        default: return 100;
    }
}

}  // namespace

double TentApproximator::operator()(std::span<const double> x) const {
    check_dim(dim, x.size(), "tent approximator");
    const double norm = std::pow(epsilon, static_cast<double>(dim));
    double s = 0.0;
    for (std::size_t i = 0; i < centers.size(); ++i) {
        s += coeffs[i] * tent_r(l1_distance(x, centers[i]) / epsilon) / norm;
    }
    return s / static_cast<double>(centers.size());
}

TentApproximator build_phi_N(const TargetFunction& f, std::size_t n, double epsilon, Rng& rng, NormEstimates norms) {
    if (n == 0) {
        throw std::invalid_argument("build_phi_N: N must be positive");
    }
    if (!(epsilon > 0.0)) {
        throw std::invalid_argument("build_phi_N: epsilon must be positive");
    }
    TentApproximator phi;
    phi.dim = f.dim;
    phi.epsilon = epsilon;
    phi.c0 = norms.c0 > 0.0 ? norms.c0 : tent_c0(f.dim);
    phi.f_l1 = norms.f_l1 > 0.0 ? norms.f_l1 : l1_norm_quadrature(f, default_grid(f.dim));
    if (phi.f_l1 < 1e-12) {
        throw std::invalid_argument("build_phi_N: target '" + f.name + "' is numerically zero on its box");
    }
    const double magnitude = phi.f_l1 / phi.c0;
    while (phi.centers.size() < n) {
        auto z = f.box.sample(rng);
        const double fz = f(z);
        if (rng.uniform() * f.sup < std::abs(fz)) {
            phi.coeffs.push_back(fz > 0.0 ? magnitude : -magnitude);
            phi.centers.push_back(std::move(z));
        }
    }
    return phi;
}

double psi_epsilon(const TargetFunction& f, std::span<const double> x, double epsilon, double c0,
                   std::size_t per_axis) {
    check_dim(f.dim, x.size(), "psi_epsilon");
    std::vector<double> lo(f.dim), hi(f.dim);
    for (std::size_t j = 0; j < f.dim; ++j) {
        lo[j] = std::max(f.box.lo[j], x[j] - epsilon);
        hi[j] = std::min(f.box.hi[j], x[j] + epsilon);
        if (lo[j] >= hi[j]) {
            return 0.0;
        }
    }
    const double norm = std::pow(epsilon, static_cast<double>(f.dim)) * c0;
    double s = 0.0;
    for_each_midpoint(lo, hi, per_axis, [&](std::span<const double> z, double cell) {
        s += f(z) * tent_r(l1_distance(x, z) / epsilon) * cell;
    });
    return s / norm;
}

L1Estimate measure_l1_error(const std::function<double(std::span<const double>)>& approx,
                            const std::function<double(std::span<const double>)>& target, const Box& box,
                            std::size_t samples, Rng& rng) {
    box.validate();
    if (samples == 0) {
        throw std::invalid_argument("measure_l1_error: need at least one sample");
    }
    double sum = 0.0;
    double sq = 0.0;
    for (std::size_t i = 0; i < samples; ++i) {
        const auto x = box.sample(rng);
        const double gap = std::abs(target(x) - approx(x));
        sum += gap;
        sq += gap * gap;
    }
    const double n = static_cast<double>(samples);
    const double mean = sum / n;
    const double var = samples > 1 ? std::max(0.0, (sq - n * mean * mean) / (n - 1.0)) : 0.0;
    const double vol = box.volume();
    return {vol * mean, vol * std::sqrt(var / n)};
}

}  // namespace addernet
