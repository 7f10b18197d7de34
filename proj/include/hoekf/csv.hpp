#pragma once

#include <fstream>
#include <span>
#include <string>
#include <vector>

namespace hoekf {

/// Deterministic CSV emission: comma separator, '.' decimal point, one
/// header row, '#'-prefixed metadata lines. Doubles are printed with %.17g
/// so re-runs are byte-identical.
class CsvWriter {
public:
    explicit CsvWriter(const std::string& path);
    void comment(const std::string& text);
    void header(std::span<const std::string> columns);
    void row(std::span<const double> values);
    void raw_row(const std::string& line);

    static std::string format(double v);

private:
    std::ofstream out_;
};

}  // namespace hoekf
