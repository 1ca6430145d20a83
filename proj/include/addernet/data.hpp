#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "addernet/tensor.hpp"

namespace addernet {

struct LabeledDataset {
    std::string name;
    Tensor inputs;  // N x H x W x C
    std::vector<int> labels;
    std::size_t num_classes = 0;

    std::size_t size() const { return labels.size(); }
    /// Throws std::invalid_argument when the invariants do not hold.
    void validate() const;
};

// -- 2-D toy tasks -------------------------------------------------------------

/// Label 1 inside radius 10, 0 beyond radius 15, nothing in between.
std::optional<int> unit_ball_label(double x, double y);
/// Label 1 inside either radius-10 ball centered at (10, 10) or (-10, -10).
int multi_ball_label(double x, double y);
/// Label 1 when x * y >= 0.
int linear_label(double x, double y);

/// Points ~ N(0, 10^2 I); points in the 10 < r < 15 margin are rejected.
LabeledDataset gen_unit_ball(std::size_t n, Rng& rng);
/// Points ~ N(0, 15^2 I).
LabeledDataset gen_multi_ball(std::size_t n, Rng& rng);
/// Points ~ N(0, 10^2 I).
LabeledDataset gen_linear(std::size_t n, Rng& rng);

enum class ToyTask { UnitBall, MultiBall, Linear };

std::string to_string(ToyTask task);
ToyTask toy_task_from_string(const std::string& name);
LabeledDataset gen_toy(ToyTask task, std::size_t n, Rng& rng);
/// Sampling standard deviation of the task's generator.
double toy_stddev(ToyTask task);

// -- MNIST IDX -----------------------------------------------------------------

struct IdxImages {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::uint8_t> pixels;  // count * rows * cols

    std::size_t count() const { return rows * cols == 0 ? 0 : pixels.size() / (rows * cols); }
};

/// Big-endian IDX readers; magic 0x00000803 (images) and 0x00000801 (labels).
IdxImages read_idx_images(const std::filesystem::path& path);
std::vector<std::uint8_t> read_idx_labels(const std::filesystem::path& path);
void write_idx_images(const std::filesystem::path& path, const IdxImages& images);
void write_idx_labels(const std::filesystem::path& path, std::span<const std::uint8_t> labels);

struct PixelStats {
    double mean = 0.0;
    double stddev = 1.0;
};

/// Mean and standard deviation of pixels scaled to [0, 1].
PixelStats pixel_stats(const IdxImages& images);

/// Scales pixels to [0, 1], zero-pads 28x28 to 32x32, then normalizes with
/// `stats` (computed from these images when absent).
LabeledDataset load_mnist_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                              std::optional<PixelStats> stats = std::nullopt);

struct MnistSplit {
    LabeledDataset train;
    LabeledDataset test;
    PixelStats stats;
};

/// Loads the four standard files from `dir`; the test split is normalized
/// with the training statistics.
MnistSplit load_mnist_dir(const std::filesystem::path& dir);
bool mnist_dir_available(const std::filesystem::path& dir);

// -- batching ------------------------------------------------------------------

/// Shuffled partition of 0..n-1 into batches; the last may be short.
std::vector<std::vector<std::size_t>> shuffle_batches(std::size_t n, std::size_t batch_size, Rng& rng);

Tensor gather_inputs(const LabeledDataset& ds, std::span<const std::size_t> indices);
std::vector<int> gather_labels(const LabeledDataset& ds, std::span<const std::size_t> indices);
/// First `limit` samples (all when limit is 0 or exceeds the size).
LabeledDataset take_prefix(const LabeledDataset& ds, std::size_t limit);

}  // namespace addernet
