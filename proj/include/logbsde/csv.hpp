#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "logbsde/common.hpp"

namespace logbsde {

/// %.17g rendering: enough digits for a bit-stable round trip, so reruns of
/// a config produce byte-identical files.
inline std::string fmt_real(Real v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

class CsvWriter {
public:
    explicit CsvWriter(const std::string& path) : out_(path) {
        require(out_.good(), "config-error", "cannot open CSV output: " + path);
    }

    void header(const std::vector<std::string>& cols) { line(cols); }

    void row(const std::vector<std::string>& cells) { line(cells); }

    void row_values(const std::vector<Real>& values) {
        std::vector<std::string> cells;
        cells.reserve(values.size());
        for (Real v : values) cells.push_back(fmt_real(v));
        line(cells);
    }

private:
    void line(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << cells[i];
        }
        out_ << '\n';
    }

    std::ofstream out_;
};

}  // namespace logbsde
