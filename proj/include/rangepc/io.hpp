#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rangepc/common.hpp"

namespace rangepc {

using Json = nlohmann::ordered_json;

// Shortest round-trip decimal form; deterministic across runs and platforms
// with IEEE doubles.
inline std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// RFC 4180 quoting.
inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += "\"";
    return out;
}

class CsvWriter {
  public:
    explicit CsvWriter(const std::filesystem::path& path) : out_(path) {
        ensure(out_.good(), "CsvWriter: cannot open " + path.string());
    }

    void row(const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) out_ << ',';
            out_ << csv_field(fields[i]);
        }
        out_ << '\n';
    }

  private:
    std::ofstream out_;
};

// Full run provenance plus emitted statistics.
struct ExperimentRecord {
    Json config;
    std::uint64_t seed = 0;
    double wall_time_s = 0.0;
    Json checks = Json::array();
    std::string version = kVersion;
    bool passed = true;

    Json to_json() const {
        Json j;
        j["version"] = version;
        j["seed"] = seed;
        j["config"] = config;
        j["checks"] = checks;
        j["passed"] = passed;
        j["wall_time_s"] = wall_time_s;
        return j;
    }
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    ensure(out.good(), "write_text: cannot open " + path.string());
    out << text;
}

}  // namespace rangepc
