#include "addernet/data.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace addernet {

void LabeledDataset::validate() const {
    if (labels.empty()) {
        throw std::invalid_argument("dataset '" + name + "' is empty");
    }
    if (inputs.rank() != 4 || inputs.dim(0) != labels.size()) {
        throw std::invalid_argument("dataset '" + name + "' inputs " + shape_to_string(inputs.shape()) +
                                    " do not match " + std::to_string(labels.size()) + " labels");
    }
    for (int label : labels) {
        if (label < 0 || static_cast<std::size_t>(label) >= num_classes) {
            throw std::invalid_argument("dataset '" + name + "' has label " + std::to_string(label) +
                                        " outside [0, " + std::to_string(num_classes) + ")");
        }
    }
    if (!all_finite(inputs)) {
        throw std::invalid_argument("dataset '" + name + "' has non-finite inputs");
    }
}

// ---------------------------------------------------------------------------

std::optional<int> unit_ball_label(double x, double y) {
    const double r = std::hypot(x, y);
    if (r < 10.0) {
        return 1;
    }
    if (r > 15.0) {
        return 0;
    }
    return std::nullopt;
}

int multi_ball_label(double x, double y) {
    const bool first = std::hypot(x - 10.0, y - 10.0) < 10.0;
    const bool second = std::hypot(x + 10.0, y + 10.0) < 10.0;
    return first || second ? 1 : 0;
}

int linear_label(double x, double y) {
    return x * y >= 0.0 ? 1 : 0;
}

namespace {

template <class Labeler>
LabeledDataset sample_toy(const std::string& name, std::size_t n, double stddev, Rng& rng, Labeler labeler) {
    if (n == 0) {
        throw std::invalid_argument(name + ": sample count must be positive");
    }
    LabeledDataset ds;
    ds.name = name;
    ds.num_classes = 2;
    ds.inputs = Tensor({n, 1, 1, 2});
    ds.labels.reserve(n);
    std::size_t kept = 0;
    while (kept < n) {
        const double x = stddev * rng.normal();
        const double y = stddev * rng.normal();
        const std::optional<int> label = labeler(x, y);
        if (!label) {
            continue;
        }
        ds.inputs[2 * kept] = x;
        ds.inputs[2 * kept + 1] = y;
        ds.labels.push_back(*label);
        ++kept;
    }
    return ds;
}

}  // namespace

double toy_stddev(ToyTask task) {
    return task == ToyTask::MultiBall ? 15.0 : 10.0;
}

LabeledDataset gen_unit_ball(std::size_t n, Rng& rng) {
    return sample_toy("unit-ball", n, toy_stddev(ToyTask::UnitBall), rng, unit_ball_label);
}

LabeledDataset gen_multi_ball(std::size_t n, Rng& rng) {
    return sample_toy("multi-ball", n, toy_stddev(ToyTask::MultiBall), rng, [](double x, double y) { return std::optional(multi_ball_label(x, y)); });
}

LabeledDataset gen_linear(std::size_t n, Rng& rng) {
    return sample_toy("linear", n, toy_stddev(ToyTask::Linear), rng, [](double x, double y) { return std::optional(linear_label(x, y)); });
}

std::string to_string(ToyTask task) {
    switch (task) {
        case ToyTask::UnitBall: return "ball";
        case ToyTask::MultiBall: return "multiball";
        case ToyTask::Linear: return "linear";
    }
    return "unknown";
}

ToyTask toy_task_from_string(const std::string& name) {
    for (auto task : {ToyTask::UnitBall, ToyTask::MultiBall, ToyTask::Linear}) {
        if (to_string(task) == name) {
            return task;
        }
    }
    throw std::invalid_argument("unknown toy task '" + name + "' (expected ball, multiball or linear)");
}

LabeledDataset gen_toy(ToyTask task, std::size_t n, Rng& rng) {
    switch (task) {
        case ToyTask::UnitBall: return gen_unit_ball(n, rng);
        case ToyTask::MultiBall: return gen_multi_ball(n, rng);
        case ToyTask::Linear: return gen_linear(n, rng);
    }
    throw std::invalid_argument("unknown toy task");
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset, const std::filesystem::path& path) {
    if (offset + 4 > bytes.size()) {
        throw std::runtime_error(path.string() + ": truncated IDX header");
    }
    return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
           (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void append_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

IdxImages read_idx_images(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    const std::uint32_t magic = read_be32(bytes, 0, path);
    if (magic != kImagesMagic) {
        throw std::runtime_error(path.string() + ": bad IDX image magic");
    }
    const std::size_t count = read_be32(bytes, 4, path);
    IdxImages images;
    images.rows = read_be32(bytes, 8, path);
    images.cols = read_be32(bytes, 12, path);
    const std::size_t payload = count * images.rows * images.cols;
    if (bytes.size() < 16 + payload) {
        throw std::runtime_error(path.string() + ": truncated IDX image data");
    }
    images.pixels.assign(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(payload));
    return images;
}

std::vector<std::uint8_t> read_idx_labels(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    if (read_be32(bytes, 0, path) != kLabelsMagic) {
        throw std::runtime_error(path.string() + ": bad IDX label magic");
    }
    const std::size_t count = read_be32(bytes, 4, path);
    if (bytes.size() < 8 + count) {
        throw std::runtime_error(path.string() + ": truncated IDX label data");
    }
    return {bytes.begin() + 8, bytes.begin() + 8 + static_cast<std::ptrdiff_t>(count)};
}

void write_idx_images(const std::filesystem::path& path, const IdxImages& images) {
    std::vector<std::uint8_t> bytes;
    append_be32(bytes, kImagesMagic);
    append_be32(bytes, static_cast<std::uint32_t>(images.count()));
    append_be32(bytes, static_cast<std::uint32_t>(images.rows));
    append_be32(bytes, static_cast<std::uint32_t>(images.cols));
    bytes.insert(bytes.end(), images.pixels.begin(), images.pixels.end());
    write_file(path, bytes);
}

void write_idx_labels(const std::filesystem::path& path, std::span<const std::uint8_t> labels) {
    std::vector<std::uint8_t> bytes;
    append_be32(bytes, kLabelsMagic);
    append_be32(bytes, static_cast<std::uint32_t>(labels.size()));
    bytes.insert(bytes.end(), labels.begin(), labels.end());
    write_file(path, bytes);
}

PixelStats pixel_stats(const IdxImages& images) {
    if (images.pixels.empty()) {
        throw std::invalid_argument("pixel_stats: no pixels");
    }
    double sum = 0.0;
    for (auto px : images.pixels) {
        sum += px / 255.0;
    }
    const double mean = sum / static_cast<double>(images.pixels.size());
    double sq = 0.0;
    for (auto px : images.pixels) {
        const double d = px / 255.0 - mean;
        sq += d * d;
    }
    const double stddev = std::sqrt(sq / static_cast<double>(images.pixels.size()));
    return {mean, stddev > 0.0 ? stddev : 1.0};
}

LabeledDataset load_mnist_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                              std::optional<PixelStats> stats) {
    const IdxImages images = read_idx_images(images_path);
    const auto labels = read_idx_labels(labels_path);
    const std::size_t count = images.count();
    if (count != labels.size()) {
        throw std::runtime_error("MNIST count mismatch: " + std::to_string(count) + " images but " +
                                 std::to_string(labels.size()) + " labels");
    }
    if (count == 0) {
        throw std::runtime_error(images_path.string() + ": no images");
    }
    if (images.rows > 32 || images.cols > 32) {
        throw std::runtime_error(images_path.string() + ": images larger than 32x32");
    }
    const PixelStats s = stats ? *stats : pixel_stats(images);

    constexpr std::size_t kSide = 32;
    const std::size_t top = (kSide - images.rows) / 2;
    const std::size_t left = (kSide - images.cols) / 2;
    LabeledDataset ds;
    ds.name = images_path.filename().string();
    ds.num_classes = 10;
    ds.inputs = Tensor({count, kSide, kSide, 1}, (0.0 - s.mean) / s.stddev);
    ds.labels.reserve(count);
    for (std::size_t n = 0; n < count; ++n) {
        for (std::size_t r = 0; r < images.rows; ++r) {
            for (std::size_t c = 0; c < images.cols; ++c) {
                const double px = images.pixels[(n * images.rows + r) * images.cols + c] / 255.0;
                ds.inputs[(n * kSide + top + r) * kSide + left + c] = (px - s.mean) / s.stddev;
            }
        }
        if (labels[n] > 9) {
            throw std::runtime_error(labels_path.string() + ": label " + std::to_string(labels[n]) + " out of range");
        }
        ds.labels.push_back(labels[n]);
    }
    return ds;
}

namespace {

constexpr std::array<const char*, 4> kMnistFiles = {"train-images-idx3-ubyte", "train-labels-idx1-ubyte",
                                                    "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"};

}  // namespace

bool mnist_dir_available(const std::filesystem::path& dir) {
    for (const char* file : kMnistFiles) {
        if (!std::filesystem::is_regular_file(dir / file)) {
            return false;
        }
    }
    return true;
}

MnistSplit load_mnist_dir(const std::filesystem::path& dir) {
    if (!mnist_dir_available(dir)) {
        throw std::runtime_error("MNIST files not found in " + dir.string() + " (expected " + kMnistFiles[0] +
                                 ", " + kMnistFiles[1] + ", " + kMnistFiles[2] + ", " + kMnistFiles[3] + ")");
    }
    MnistSplit split;
    split.stats = pixel_stats(read_idx_images(dir / kMnistFiles[0]));
    split.train = load_mnist_idx(dir / kMnistFiles[0], dir / kMnistFiles[1], split.stats);
    split.test = load_mnist_idx(dir / kMnistFiles[2], dir / kMnistFiles[3], split.stats);
    return split;
}

// ---------------------------------------------------------------------------

std::vector<std::vector<std::size_t>> shuffle_batches(std::size_t n, std::size_t batch_size, Rng& rng) {
    if (batch_size == 0) {
        throw std::invalid_argument("shuffle_batches: batch size must be positive");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.below(i));
        std::swap(order[i - 1], order[j]);
    }
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t end = std::min(n, start + batch_size);
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return batches;
}

Tensor gather_inputs(const LabeledDataset& ds, std::span<const std::size_t> indices) {
    if (indices.empty()) {
        throw std::invalid_argument("gather_inputs: no indices");
    }
    Shape shape = ds.inputs.shape();
    const std::size_t per_sample = ds.inputs.size() / shape[0];
    shape[0] = indices.size();
    Tensor out(shape);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= ds.size()) {
            throw std::out_of_range("gather_inputs: index out of range");
        }
        std::copy_n(ds.inputs.data() + indices[i] * per_sample, per_sample, out.data() + i * per_sample);
    }
    return out;
}

std::vector<int> gather_labels(const LabeledDataset& ds, std::span<const std::size_t> indices) {
    std::vector<int> out;
    out.reserve(indices.size());
    for (auto i : indices) {
        out.push_back(ds.labels.at(i));
    }
    return out;
}

LabeledDataset take_prefix(const LabeledDataset& ds, std::size_t limit) {
    if (limit == 0 || limit >= ds.size()) {
        return ds;
    }
    std::vector<std::size_t> indices(limit);
    std::iota(indices.begin(), indices.end(), std::size_t{0});
    LabeledDataset out;
    out.name = ds.name;
    out.num_classes = ds.num_classes;
    out.inputs = gather_inputs(ds, indices);
    out.labels = gather_labels(ds, indices);
    return out;
}

}  // namespace addernet
