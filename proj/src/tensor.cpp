#include "addernet/tensor.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace addernet {

std::size_t shape_volume(const Shape& shape) {
    std::size_t volume = 1;
    for (auto extent : shape) {
        volume *= extent;
    }
    return volume;
}

std::string shape_to_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        os << (i ? "x" : "") << shape[i];
    }
    os << ']';
    return os.str();
}

namespace {

void require_positive_extents(const Shape& shape) {
    for (auto extent : shape) {
        if (extent == 0) {
            throw std::invalid_argument("tensor shape has a zero extent: " + shape_to_string(shape));
        }
    }
}

}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
    require_positive_extents(shape_);
    data_.assign(shape_volume(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), data_(std::move(values)) {
    require_positive_extents(shape_);
    if (shape_volume(shape_) != data_.size()) {
        throw std::invalid_argument("tensor value count " + std::to_string(data_.size()) +
                                    " does not match shape " + shape_to_string(shape_));
    }
}

double& Tensor::at(std::size_t n, std::size_t h, std::size_t w, std::size_t c) {
    return data_[((n * shape_[1] + h) * shape_[2] + w) * shape_[3] + c];
}

double Tensor::at(std::size_t n, std::size_t h, std::size_t w, std::size_t c) const {
    return data_[((n * shape_[1] + h) * shape_[2] + w) * shape_[3] + c];
}

Tensor Tensor::reshaped(Shape shape) const& {
    return Tensor(std::move(shape), data_);
}

Tensor Tensor::reshaped(Shape shape) && {
    return Tensor(std::move(shape), std::move(data_));
}

void Tensor::fill(double value) {
    std::fill(data_.begin(), data_.end(), value);
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace

std::uint64_t Rng::next_u64() noexcept {
    ++counter_;
    return mix64(seed_ + counter_ * kGolden);
}

double Rng::uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::normal() noexcept {
    // u1 in (0, 1] keeps the logarithm finite.
    const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::below(std::uint64_t bound) noexcept {
    // Rejection on the top of the range removes modulo bias.
    const std::uint64_t limit = (~std::uint64_t{0}) - (~std::uint64_t{0}) % bound;
    std::uint64_t x = next_u64();
    while (x >= limit) {
        x = next_u64();
    }
    return x % bound;
}

Rng Rng::fork(std::uint64_t stream) const noexcept {
    return Rng(mix64(seed_ ^ mix64(stream + kGolden)));
}

Tensor randn_seeded(Rng& rng, const Shape& shape, double mean, double stddev) {
    if (!(stddev >= 0.0)) {
        throw std::invalid_argument("randn_seeded: stddev must be non-negative");
    }
    Tensor t(shape);
    for (auto& v : t.values()) {
        v = mean + stddev * rng.normal();
    }
    return t;
}

Tensor rand_uniform(Rng& rng, const Shape& shape, double lo, double hi) {
    Tensor t(shape);
    for (auto& v : t.values()) {
        v = rng.uniform(lo, hi);
    }
    return t;
}

// ---------------------------------------------------------------------------

std::size_t WindowGeometry::out_h() const {
    return (in_h + 2 * padding - kernel) / stride + 1;
}

std::size_t WindowGeometry::out_w() const {
    return (in_w + 2 * padding - kernel) / stride + 1;
}

void WindowGeometry::validate() const {
    if (kernel == 0 || stride == 0) {
        throw std::invalid_argument("window kernel and stride must be positive");
    }
    if (in_h == 0 || in_w == 0 || in_c == 0) {
        throw std::invalid_argument("window input extents must be positive");
    }
    if (kernel > in_h + 2 * padding || kernel > in_w + 2 * padding) {
        throw std::invalid_argument("kernel " + std::to_string(kernel) + " larger than padded input " +
                                    std::to_string(in_h + 2 * padding) + "x" +
                                    std::to_string(in_w + 2 * padding));
    }
}

void im2col_into(const double* input, const WindowGeometry& g, double* cols) {
    const std::size_t oh = g.out_h();
    const std::size_t ow = g.out_w();
    const std::size_t row_len = g.patch_size();
    for (std::size_t m = 0; m < oh; ++m) {
        for (std::size_t n = 0; n < ow; ++n) {
            double* row = cols + (m * ow + n) * row_len;
            for (std::size_t i = 0; i < g.kernel; ++i) {
                const auto y = static_cast<std::ptrdiff_t>(m * g.stride + i) - static_cast<std::ptrdiff_t>(g.padding);
                for (std::size_t j = 0; j < g.kernel; ++j) {
                    const auto x =
                        static_cast<std::ptrdiff_t>(n * g.stride + j) - static_cast<std::ptrdiff_t>(g.padding);
                    double* dst = row + (i * g.kernel + j) * g.in_c;
                    if (y < 0 || x < 0 || y >= static_cast<std::ptrdiff_t>(g.in_h) ||
                        x >= static_cast<std::ptrdiff_t>(g.in_w)) {
                        std::fill(dst, dst + g.in_c, 0.0);
                        continue;
                    }
                    const double* src = input + (static_cast<std::size_t>(y) * g.in_w + static_cast<std::size_t>(x)) * g.in_c;
                    std::copy(src, src + g.in_c, dst);
                }
            }
        }
    }
}

void col2im_add(const double* cols, const WindowGeometry& g, double* input_grad) {
    const std::size_t oh = g.out_h();
    const std::size_t ow = g.out_w();
    const std::size_t row_len = g.patch_size();
    for (std::size_t m = 0; m < oh; ++m) {
        for (std::size_t n = 0; n < ow; ++n) {
            const double* row = cols + (m * ow + n) * row_len;
            for (std::size_t i = 0; i < g.kernel; ++i) {
                const auto y = static_cast<std::ptrdiff_t>(m * g.stride + i) - static_cast<std::ptrdiff_t>(g.padding);
                if (y < 0 || y >= static_cast<std::ptrdiff_t>(g.in_h)) {
                    continue;
                }
                for (std::size_t j = 0; j < g.kernel; ++j) {
                    const auto x =
                        static_cast<std::ptrdiff_t>(n * g.stride + j) - static_cast<std::ptrdiff_t>(g.padding);
                    if (x < 0 || x >= static_cast<std::ptrdiff_t>(g.in_w)) {
                        continue;
                    }
                    const double* src = row + (i * g.kernel + j) * g.in_c;
                    double* dst =
                        input_grad + (static_cast<std::size_t>(y) * g.in_w + static_cast<std::size_t>(x)) * g.in_c;
                    for (std::size_t k = 0; k < g.in_c; ++k) {
                        dst[k] += src[k];
                    }
                }
            }
        }
    }
}

Tensor im2col(const Tensor& input, std::size_t kernel, std::size_t stride, std::size_t padding) {
    if (input.rank() != 3) {
        throw std::invalid_argument("im2col expects an HxWxC tensor, got " + shape_to_string(input.shape()));
    }
    const WindowGeometry g{input.dim(0), input.dim(1), input.dim(2), kernel, stride, padding};
    g.validate();
    Tensor cols({g.positions(), g.patch_size()});
    im2col_into(input.data(), g, cols.data());
    return cols;
}

Tensor col2im(const Tensor& cols, const WindowGeometry& g) {
    g.validate();
    if (cols.rank() != 2 || cols.dim(0) != g.positions() || cols.dim(1) != g.patch_size()) {
        throw std::invalid_argument("col2im: column matrix " + shape_to_string(cols.shape()) +
                                    " does not match geometry");
    }
    Tensor out({g.in_h, g.in_w, g.in_c});
    col2im_add(cols.data(), g, out.data());
    return out;
}

double reduce_l2_norm(std::span<const double> values) {
    double sum = 0.0;
    for (double v : values) {
        sum += v * v;
    }
    return std::sqrt(sum);
}

double reduce_l2_norm(const Tensor& t) {
    return reduce_l2_norm(t.values());
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("dot: length mismatch");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sum += a[i] * b[i];
    }
    return sum;
}

bool all_finite(const Tensor& t) {
    for (double v : t.values()) {
        if (!std::isfinite(v)) {
            return false;
        }
    }
    return true;
}

}  // namespace addernet
