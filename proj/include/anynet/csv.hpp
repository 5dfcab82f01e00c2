#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace anynet {

inline constexpr const char* kVersion = "0.1.0";

// Shortest round-trip decimal form; byte-stable across runs.
inline std::string format_number(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc{}) throw std::runtime_error("format_number failed");
    return std::string(buf, p);
}

inline std::string format_number(std::int64_t v) { return std::to_string(v); }
inline std::string format_number(int v) { return std::to_string(v); }

// CSV writer with a leading comment line that records version, seed and the
// parameters of the run. '.' decimal separator, LF line endings.
class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::string& params, const std::vector<std::string>& columns)
        : out_(path, std::ios::binary) {
        if (!out_) throw std::runtime_error("cannot open output file: " + path);
        out_ << "# anynet " << kVersion << " " << params << "\n";
        write_row(columns);
    }

    void write_row(const std::vector<std::string>& cells) {
        for (size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ",";
            out_ << cells[i];
        }
        out_ << "\n";
    }

private:
    std::ofstream out_;
};

}  // namespace anynet
