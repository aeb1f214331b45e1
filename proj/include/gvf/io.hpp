#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "gvf/inference.hpp"

namespace gvf::io {

/// Round-trip-exact decimal rendering; keeps reruns checksum-identical.
std::string format_double(double v);

class CsvWriter {
public:
    explicit CsvWriter(const std::string& path);

    void header(const std::vector<std::string>& names);
    void row(const std::vector<double>& values);
    void raw_row(const std::vector<std::string>& fields);

private:
    std::ofstream out_;
    std::string path_;
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(const std::string& path);

/// Parse a numeric CSV field; `row` is the 1-based data row for error messages.
double parse_double(const std::string& field, long row);

}  // namespace gvf::io

namespace gvf {

std::string svgp_state_to_json(const SVGPState& state);
SVGPState svgp_state_from_json(const std::string& text);
void save_svgp_state(const std::string& path, const SVGPState& state);
SVGPState load_svgp_state(const std::string& path);

}  // namespace gvf
