#pragma once

// CSV emission with 17-significant-digit numeric formatting so doubles
// round-trip exactly and re-runs diff byte-identically.

#include <cstdio>
#include <fstream>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace bsdelab {

inline std::string format_sig17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

class CsvWriter {
  public:
    CsvWriter(std::ostream& os, std::vector<std::string> header) : os_(os) {
        write_header(header);
    }

    CsvWriter(const std::string& path, std::vector<std::string> header)
        : owned_(std::make_unique<std::ofstream>(path)), os_(*owned_) {
        if (!*owned_)
            throw std::runtime_error("csv: cannot open '" + path + "'");
        write_header(header);
    }

    void row(const std::vector<double>& values) {
        for (size_t i = 0; i < values.size(); ++i)
            os_ << (i ? "," : "") << format_sig17(values[i]);
        os_ << "\n";
    }

    // Mixed row: leading integer-ish labels already formatted by the caller.
    void raw_row(const std::vector<std::string>& cells) {
        for (size_t i = 0; i < cells.size(); ++i)
            os_ << (i ? "," : "") << cells[i];
        os_ << "\n";
    }

    size_t columns() const { return cols_; }

  private:
    void write_header(const std::vector<std::string>& header) {
        for (size_t i = 0; i < header.size(); ++i)
            os_ << (i ? "," : "") << header[i];
        os_ << "\n";
        cols_ = header.size();
    }

    std::unique_ptr<std::ofstream> owned_; // set iff constructed from a path
    std::ostream& os_;
    size_t cols_ = 0;
};

} // namespace bsdelab
