#include "addernet/report.hpp"

#include <array>
#include <charconv>
#include <stdexcept>

namespace addernet {

std::string format_double(double v) {
    std::array<char, 64> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return {buf.data(), res.ptr};
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const Metadata& meta, const std::vector<std::string>& columns)
    : out_(path, std::ios::binary), columns_(columns.size()) {
    if (!out_) {
        throw std::runtime_error("cannot write " + path.string());
    }
    for (const auto& [key, value] : meta) {
        out_ << "# " << key << '=' << value << '\n';
    }
    for (std::size_t i = 0; i < columns.size(); ++i) {
        out_ << (i ? "," : "") << columns[i];
    }
    out_ << '\n';
}

void CsvWriter::separator() {
    if (filled_ == columns_) {
        throw std::logic_error("CSV row has more cells than columns");
    }
    if (filled_++ > 0) {
        out_ << ',';
    }
}

CsvWriter& CsvWriter::cell(const std::string& v) {
    separator();
    out_ << v;
    return *this;
}

CsvWriter& CsvWriter::cell(double v) {
    return cell(format_double(v));
}

CsvWriter& CsvWriter::cell(long long v) {
    return cell(std::to_string(v));
}

CsvWriter& CsvWriter::cell(unsigned long long v) {
    return cell(std::to_string(v));
}

void CsvWriter::end_row() {
    if (filled_ != columns_) {
        throw std::logic_error("CSV row has " + std::to_string(filled_) + " cells, expected " +
                               std::to_string(columns_));
    }
    out_ << '\n';
    out_.flush();
    filled_ = 0;
    ++rows_;
}

std::string pgm_bytes(const LabelGrid& grid, int classes) {
    if (grid.rows == 0 || grid.cols == 0 || grid.labels.size() != grid.rows * grid.cols) {
        throw std::invalid_argument("pgm: empty or inconsistent grid");
    }
    if (classes < 2) {
        throw std::invalid_argument("pgm: need at least two classes");
    }
    std::string bytes = "P5\n" + std::to_string(grid.cols) + " " + std::to_string(grid.rows) + "\n255\n";
    for (int label : grid.labels) {
        if (label < 0 || label >= classes) {
            throw std::invalid_argument("pgm: label out of range");
        }
        bytes.push_back(static_cast<char>(label * 255 / (classes - 1)));
    }
    return bytes;
}

void write_pgm(const std::filesystem::path& path, const LabelGrid& grid, int classes) {
    const std::string bytes = pgm_bytes(grid, classes);
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw std::runtime_error("failed writing " + path.string());
    }
}

}  // namespace addernet
