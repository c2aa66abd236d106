// Sweep result rows and the versioned CSV schema shared by the sweep runner
// and the plotter.

#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "sslab/common.hpp"

namespace sslab {

inline constexpr int kSweepSchemaVersion = 1;
inline constexpr const char* kSweepCsvHeader =
    "schema_version,sweep_param,value,seed,epoch,knn_accuracy,final_loss,collapse_stat,status";

struct SweepRow {
    std::string sweep_param;
    std::string value;  // numeric for ratio sweeps, symbolic for margin_mode
    std::uint64_t seed = 0;
    int epoch = 0;
    double knn_accuracy = 0.0;
    double final_loss = 0.0;
    double collapse_stat = 0.0;
    std::string status = "ok";
};

inline std::string format_double(double v) {
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
}

inline std::string sweep_row_csv(const SweepRow& r) {
    std::ostringstream os;
    os << kSweepSchemaVersion << ',' << r.sweep_param << ',' << r.value << ',' << r.seed << ',' << r.epoch
       << ',' << format_double(r.knn_accuracy) << ',' << format_double(r.final_loss) << ','
       << format_double(r.collapse_stat) << ',' << r.status << '\n';
    return os.str();
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (const char c : line) {
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

// Parses a sweep CSV, validating the header and schema version.
inline std::vector<SweepRow> read_sweep_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IngestionError("cannot open sweep CSV: " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw IngestionError(path.string() + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kSweepCsvHeader) throw IngestionError(path.string() + ": unexpected CSV header");
    std::vector<SweepRow> rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != 9)
            throw IngestionError(path.string() + ": bad field count on line " + std::to_string(lineno));
        if (std::stoi(f[0]) != kSweepSchemaVersion)
            throw IngestionError(path.string() + ": unknown schema version " + f[0]);
        SweepRow r;
        r.sweep_param = f[1];
        r.value = f[2];
        r.seed = std::stoull(f[3]);
        r.epoch = std::stoi(f[4]);
        r.knn_accuracy = std::stod(f[5]);
        r.final_loss = std::stod(f[6]);
        r.collapse_stat = std::stod(f[7]);
        r.status = f[8];
        rows.push_back(std::move(r));
    }
    return rows;
}

// Completed (value, seed) cells, for sweep resume.
inline std::set<std::pair<std::string, std::uint64_t>> completed_cells(const std::vector<SweepRow>& rows) {
    std::set<std::pair<std::string, std::uint64_t>> done;
    for (const auto& r : rows) done.insert({r.value, r.seed});
    return done;
}

}  // namespace sslab
