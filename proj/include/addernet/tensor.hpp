#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace addernet {

using Shape = std::vector<std::size_t>;

std::size_t shape_volume(const Shape& shape);
std::string shape_to_string(const Shape& shape);

/// Dense row-major array of doubles. Batched feature maps use NHWC order.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> values);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }
    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }

    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }

    /// Element of a rank-4 tensor.
    double& at(std::size_t n, std::size_t h, std::size_t w, std::size_t c);
    double at(std::size_t n, std::size_t h, std::size_t w, std::size_t c) const;

    /// Same values under a new shape of equal volume.
    Tensor reshaped(Shape shape) const&;
    Tensor reshaped(Shape shape) &&;

    void fill(double value);

    /// Bitwise equality of shape and values.
    bool operator==(const Tensor& other) const = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

/// Counter-based generator (SplitMix64 finalizer over seed and counter).
/// The stream is fully determined by the seed and is identical on every
/// platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) noexcept : seed_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t counter() const noexcept { return counter_; }

    std::uint64_t next_u64() noexcept;
    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept;
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
    /// Standard normal via Box-Muller; consumes two draws per value.
    double normal() noexcept;
    /// Uniform integer in [0, bound); bound must be positive.
    std::uint64_t below(std::uint64_t bound) noexcept;

    /// Independent generator for a numbered sub-stream.
    Rng fork(std::uint64_t stream) const noexcept;

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
};

Tensor randn_seeded(Rng& rng, const Shape& shape, double mean, double stddev);
Tensor rand_uniform(Rng& rng, const Shape& shape, double lo, double hi);

/// Geometry of a sliding-window operator over one HxWxC feature map.
struct WindowGeometry {
    std::size_t in_h = 0;
    std::size_t in_w = 0;
    std::size_t in_c = 0;
    std::size_t kernel = 1;
    std::size_t stride = 1;
    std::size_t padding = 0;

    std::size_t out_h() const;
    std::size_t out_w() const;
    std::size_t positions() const { return out_h() * out_w(); }
    std::size_t patch_size() const { return kernel * kernel * in_c; }
    bool is_pointwise() const { return kernel == 1 && stride == 1 && padding == 0; }
    /// Throws std::invalid_argument when the window does not fit.
    void validate() const;
};

/// Unfolds an HxWxC map into (out_h*out_w) x (d*d*C) rows ordered (i, j, k).
/// Padded entries are zero.
Tensor im2col(const Tensor& input, std::size_t kernel, std::size_t stride, std::size_t padding);

/// Adjoint of im2col: scatters-and-adds rows back into an HxWxC map.
Tensor col2im(const Tensor& cols, const WindowGeometry& geom);

/// Raw-pointer variants used by the batched layer code.
void im2col_into(const double* input, const WindowGeometry& geom, double* cols);
void col2im_add(const double* cols, const WindowGeometry& geom, double* input_grad);

double reduce_l2_norm(const Tensor& t);
double reduce_l2_norm(std::span<const double> values);
double dot(std::span<const double> a, std::span<const double> b);
bool all_finite(const Tensor& t);

}  // namespace addernet
