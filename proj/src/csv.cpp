#include "hoekf/csv.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace hoekf {

CsvWriter::CsvWriter(const std::string& path) : out_(path) {
    if (!out_) throw std::runtime_error("CsvWriter: cannot open " + path);
}

std::string CsvWriter::format(double v) {
    if (std::isnan(v)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void CsvWriter::comment(const std::string& text) { out_ << "# " << text << "\n"; }

void CsvWriter::header(std::span<const std::string> columns) {
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (i) out_ << ",";
        out_ << columns[i];
    }
    out_ << "\n";
}

void CsvWriter::row(std::span<const double> values) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out_ << ",";
        out_ << format(values[i]);
    }
    out_ << "\n";
}

void CsvWriter::raw_row(const std::string& line) { out_ << line << "\n"; }

}  // namespace hoekf
