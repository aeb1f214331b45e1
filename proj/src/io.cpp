#include "gvf/io.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace gvf::io {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

CsvWriter::CsvWriter(const std::string& path) : out_(path), path_(path) {
    if (!out_) throw IoError("cannot open for writing: " + path);
}

void CsvWriter::header(const std::vector<std::string>& names) { raw_row(names); }

void CsvWriter::row(const std::vector<double>& values) {
    std::vector<std::string> fields;
    fields.reserve(values.size());
    for (double v : values) fields.push_back(format_double(v));
    raw_row(fields);
}

void CsvWriter::raw_row(const std::vector<std::string>& fields) {
    for (size_t i = 0; i < fields.size(); ++i) {
        if (i) out_ << ',';
        out_ << fields[i];
    }
    out_ << '\n';
    if (!out_) throw IoError("write failed: " + path_);
}

namespace {
std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}
}  // namespace

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open for reading: " + path);
    CsvTable table;
    std::string line;
    if (!std::getline(in, line)) throw FormatError("empty file: " + path, 0);
    table.header = split_line(line);
    long rownum = 0;
    while (std::getline(in, line)) {
        ++rownum;
        if (line.empty()) continue;
        auto fields = split_line(line);
        if (fields.size() != table.header.size()) {
            std::ostringstream os;
            os << path << ": row " << rownum << " has " << fields.size() << " fields, expected "
               << table.header.size();
            throw FormatError(os.str(), rownum);
        }
        table.rows.push_back(std::move(fields));
    }
    return table;
}

double parse_double(const std::string& field, long row) {
    try {
        size_t pos = 0;
        double v = std::stod(field, &pos);
        if (pos != field.size()) throw std::invalid_argument(field);
        return v;
    } catch (const std::exception&) {
        std::ostringstream os;
        os << "non-numeric field '" << field << "' at row " << row;
        throw FormatError(os.str(), row);
    }
}

}  // namespace gvf::io

namespace gvf {

using nlohmann::json;

std::string svgp_state_to_json(const SVGPState& state) {
    json j;
    j["manifold"] = state.manifold_name;
    j["seed"] = state.seed;
    j["noise_variance"] = state.noise_variance;
    j["variance"] = state.variance;
    j["lengthscales"] = state.lengthscales;
    // infinity marks the squared-exponential family; JSON has no inf literal
    json nus = json::array();
    for (double nu : state.nus) {
        if (std::isinf(nu)) {
            nus.push_back("inf");
        } else {
            nus.push_back(nu);
        }
    }
    j["nus"] = nus;
    const int d = state.dim();
    json z = json::array();
    for (const auto& pt : state.inducing) {
        json row = json::array();
        for (int i = 0; i < pt.size(); ++i) row.push_back(pt[i]);
        z.push_back(row);
    }
    j["inducing"] = z;
    json mu = json::array();
    for (int i = 0; i < state.mu.size(); ++i) mu.push_back(state.mu[i]);
    j["mu"] = mu;
    json factors = json::array();
    for (const auto& f : state.sigma_factors) {
        json rows = json::array();
        for (int r = 0; r < d; ++r) {
            json row = json::array();
            for (int c = 0; c <= r; ++c) row.push_back(f(r, c));
            rows.push_back(row);
        }
        factors.push_back(rows);
    }
    j["sigma_factors"] = factors;
    return j.dump(2);
}

SVGPState svgp_state_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const std::exception& e) {
        throw FormatError(std::string("bad SVGP state JSON: ") + e.what());
    }
    SVGPState state;
    state.manifold_name = j.at("manifold").get<std::string>();
    state.seed = j.at("seed").get<std::uint64_t>();
    state.noise_variance = j.at("noise_variance").get<double>();
    state.variance = j.at("variance").get<double>();
    state.lengthscales = j.at("lengthscales").get<std::vector<double>>();
    for (const auto& nu : j.at("nus")) {
        if (nu.is_string()) {
            state.nus.push_back(std::numeric_limits<double>::infinity());
        } else {
            state.nus.push_back(nu.get<double>());
        }
    }
    for (const auto& row : j.at("inducing")) {
        Vec pt(row.size());
        for (size_t i = 0; i < row.size(); ++i) pt[i] = row[i].get<double>();
        state.inducing.push_back(pt);
    }
    auto mu = j.at("mu").get<std::vector<double>>();
    state.mu = Eigen::Map<Vec>(mu.data(), mu.size());
    const int d = state.dim();
    for (const auto& rows : j.at("sigma_factors")) {
        Mat f = Mat::Zero(d, d);
        int r = 0;
        for (const auto& row : rows) {
            int c = 0;
            for (const auto& v : row) f(r, c++) = v.get<double>();
            ++r;
        }
        state.sigma_factors.push_back(f);
    }
    state.validate();
    return state;
}

void save_svgp_state(const std::string& path, const SVGPState& state) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << svgp_state_to_json(state) << '\n';
    if (!out) throw IoError("write failed: " + path);
}

SVGPState load_svgp_state(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open for reading: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return svgp_state_from_json(ss.str());
}

}  // namespace gvf
