#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "addernet/tensor.hpp"

namespace addernet {

/// Axis-aligned box [lo_j, hi_j] in R^d.
struct Box {
    std::vector<double> lo;
    std::vector<double> hi;

    static Box cube(std::size_t dim, double lo, double hi);
    std::size_t dim() const { return lo.size(); }
    double volume() const;
    /// Largest |coordinate| over the box.
    double max_abs() const;
    void validate() const;
    std::vector<double> sample(Rng& rng) const;
};

// -- two-layer realizations ----------------------------------------------------

struct RbfTerm {
    double a = 0.0;
    std::vector<double> w;
    double b = 0.0;
};

/// g(x) = sum_i a_i ReLU(|W_i - x|_1 + b_i)
struct RbfStyleSum {
    std::size_t dim = 0;
    std::vector<RbfTerm> terms;
};

double eval_rbf_sum(const RbfStyleSum& g, std::span<const double> x);
RbfStyleSum random_rbf_sum(std::size_t terms, const Box& box, Rng& rng);

/// Dense adder layer with per-output scale and bias:
///   L(x)_i = a_i |W_i - x|_1 + b_i
struct AdderDenseLayer {
    std::size_t in = 0;
    std::vector<std::vector<double>> weights;  // one row per output
    std::vector<double> scale;
    std::vector<double> bias;

    std::size_t out() const { return weights.size(); }
    std::vector<double> apply(std::span<const double> x) const;
};

/// A(x) = L2(ReLU(L1(x)))
struct TwoLayerAdderNet {
    AdderDenseLayer first;
    AdderDenseLayer second;
    double bound = 0.0;  // constant used to keep the construction exact

    std::vector<double> hidden(std::span<const double> x) const;
    std::vector<double> eval(std::span<const double> x) const;
};

/// Realizes g with max(t, 1) hidden units and one output; exact on `box`.
TwoLayerAdderNet realize_lemma1(const RbfStyleSum& g, const Box& box);

/// Realizes x -> (A_i sum_j B_ij x_j)_i with 2m + 2 hidden units; exact on `box`.
TwoLayerAdderNet emulate_masked_linear(const std::vector<std::vector<int>>& mask, std::span<const double> scales,
                                       const Box& box);

std::vector<double> masked_linear(const std::vector<std::vector<int>>& mask, std::span<const double> scales,
                                  std::span<const double> x);

// -- tent-kernel approximator --------------------------------------------------

/// max(0, 1 - |x|), written as max(0,x+1) + max(0,x-1) - 2 max(0,x).
double tent_r(double x);

/// Integral of r(|x|_1) over R^d, by quadrature.
double tent_c0(std::size_t dim);

/// Composite trapezoid rule over [lo, hi].
double trapezoid(const std::function<double(double)>& fn, double lo, double hi, std::size_t intervals);

struct TargetFunction {
    std::string name;
    std::size_t dim = 0;
    Box box;          // f vanishes outside
    double sup = 0.0;  // upper bound on |f|
    std::function<double(std::span<const double>)> fn;

    double operator()(std::span<const double> x) const;
};

/// Registry targets on [-1, 1]^dim: "tent", "gaussian", "sine-product".
TargetFunction make_target(const std::string& name, std::size_t dim);
std::vector<std::string> target_names();

/// Midpoint-rule integral of |f| over its box with `per_axis` cells per axis.
double l1_norm_quadrature(const TargetFunction& f, std::size_t per_axis);

struct TentApproximator {
    std::size_t dim = 0;
    std::vector<std::vector<double>> centers;
    std::vector<double> coeffs;  // sgn(f(Z_i)) |f|_1 / c0
    double epsilon = 0.0;
    double c0 = 0.0;
    double f_l1 = 0.0;

    std::size_t count() const { return centers.size(); }
    double operator()(std::span<const double> x) const;
};

struct NormEstimates {
    double f_l1 = 0.0;  // computed by quadrature when 0
    double c0 = 0.0;    // computed by quadrature when 0
};

/// Draws N centers from |f| / |f|_1 by rejection sampling on f's box.
TentApproximator build_phi_N(const TargetFunction& f, std::size_t n, double epsilon, Rng& rng,
                             NormEstimates norms = {});

/// psi_eps(x) = int f(z) r_eps(|x - z|_1) / c0 dz, by midpoint quadrature.
double psi_epsilon(const TargetFunction& f, std::span<const double> x, double epsilon, double c0,
                   std::size_t per_axis = 400);

struct L1Estimate {
    double value = 0.0;
    double std_error = 0.0;
};

/// Monte Carlo estimate of int_box |f - g|.
L1Estimate measure_l1_error(const std::function<double(std::span<const double>)>& approx,
                            const std::function<double(std::span<const double>)>& target, const Box& box,
                            std::size_t samples, Rng& rng);

}  // namespace addernet
