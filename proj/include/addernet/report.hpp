#pragma once

#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "addernet/network.hpp"

namespace addernet {

using Metadata = std::vector<std::pair<std::string, std::string>>;

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

/// CSV with a leading "# key=value" comment block and a header row.
class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const Metadata& meta, const std::vector<std::string>& columns);

    CsvWriter& cell(const std::string& v);
    CsvWriter& cell(double v);
    CsvWriter& cell(long long v);
    CsvWriter& cell(unsigned long long v);
    CsvWriter& cell(int v) { return cell(static_cast<long long>(v)); }
    CsvWriter& cell(std::size_t v) { return cell(static_cast<unsigned long long>(v)); }
    CsvWriter& cell(bool v) { return cell(std::string(v ? "true" : "false")); }
    void end_row();

    std::size_t rows() const { return rows_; }

private:
    void separator();

    std::ofstream out_;
    std::size_t columns_ = 0;
    std::size_t filled_ = 0;
    std::size_t rows_ = 0;
};

/// Binary PGM (P5): header "P5\n<cols> <rows>\n255\n", row 0 is the top of
/// the domain, class c drawn as gray level c * 255 / (classes - 1).
void write_pgm(const std::filesystem::path& path, const LabelGrid& grid, int classes = 2);
std::string pgm_bytes(const LabelGrid& grid, int classes = 2);

}  // namespace addernet
