// Sweep runner: one training+eval run per (sweep value, seed) cell, with
// atomic per-cell CSV appends and resume-by-skipping-completed-cells.

#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "sslab/config.hpp"
#include "sslab/results.hpp"
#include "sslab/train.hpp"

namespace sslab {

struct SweepSpec {
    std::string param;                // overlap_ratio | patch_ratio | excl_ratio | cutout_size | margin_mode
    std::vector<std::string> values;  // numeric strings, or none|fixed|distance for margin_mode
    std::vector<std::uint64_t> seeds;
};

// Applies one sweep value to a base config.
inline RunConfig apply_sweep_value(RunConfig cfg, const std::string& param, const std::string& value) {
    if (param == "overlap_ratio") {
        cfg.aug = OverlapSpec{std::stod(value)};
    } else if (param == "patch_ratio") {
        cfg.aug = PatchSpec{std::stod(value)};
    } else if (param == "excl_ratio") {
        cfg.aug = ExclusiveSpec{std::stod(value)};
    } else if (param == "cutout_size") {
        // Keeps the base aug's blur-vs-plain choice, adjusting only the size.
        if (auto* cb = std::get_if<CutoutBlurSpec>(&cfg.aug))
            cfg.aug = CutoutBlurSpec{std::stod(value), cb->sigma};
        else
            cfg.aug = CutoutSpec{std::stod(value)};
    } else if (param == "margin_mode") {
        const double diag = std::sqrt(2.0) * cfg.arch.in_size;
        if (value == "none")
            cfg.margin = MarginSpec::none();
        else if (value == "fixed")
            cfg.margin = MarginSpec::fixed(cfg.margin.fixed_m > 0 ? cfg.margin.fixed_m : 0.2);
        else if (value == "distance")
            cfg.margin = MarginSpec::distance(cfg.margin.distance_k > 0 ? cfg.margin.distance_k
                                                                        : default_distance_k(diag));
        else
            throw ParameterError("margin_mode sweep value must be none|fixed|distance");
    } else {
        throw ParameterError("unknown sweep param: " + param);
    }
    return cfg;
}

// Runs the sweep, appending to <out_dir>/results.csv. Cells already present
// in the CSV are skipped, so an interrupted sweep resumes where it stopped.
// max_new_cells < 0 means no limit. Per-cell failures are recorded with
// status "failed" and the sweep continues. Returns all rows now in the CSV.
inline std::vector<SweepRow> run_sweep(const RunConfig& base, const SweepSpec& sweep,
                                       const std::filesystem::path& out_dir, int max_new_cells = -1) {
    if (sweep.values.empty() || sweep.seeds.empty())
        throw ParameterError("run_sweep: need at least one value and one seed");
    std::filesystem::create_directories(out_dir);
    const auto csv_path = out_dir / "results.csv";

    std::vector<SweepRow> existing;
    if (std::filesystem::exists(csv_path)) existing = read_sweep_csv(csv_path);
    auto done = completed_cells(existing);
    if (existing.empty()) {
        std::ofstream out(csv_path);
        out << kSweepCsvHeader << '\n';
    }

    int new_cells = 0;
    for (const auto& value : sweep.values) {
        for (const auto seed : sweep.seeds) {
            if (done.count({value, seed})) continue;
            if (max_new_cells >= 0 && new_cells >= max_new_cells) return read_sweep_csv(csv_path);

            RunConfig cfg = apply_sweep_value(base, sweep.param, value);
            cfg.seed = seed;
            cfg.out_dir.clear();  // sweep cells emit rows, not per-run artifacts

            std::string cell_rows;
            try {
                const TrainResult res = run_train(cfg);
                for (const auto& m : res.metrics) {
                    if (m.knn_accuracy < 0.0) continue;  // only evaluated epochs become rows
                    SweepRow row;
                    row.sweep_param = sweep.param;
                    row.value = value;
                    row.seed = seed;
                    row.epoch = m.epoch;
                    row.knn_accuracy = m.knn_accuracy;
                    row.final_loss = m.mean_loss;
                    row.collapse_stat = m.collapse_stat;
                    row.status = m.status;
                    cell_rows += sweep_row_csv(row);
                }
                if (cell_rows.empty()) {
                    SweepRow row;  // epochs == 0 or eval disabled: placeholder row
                    row.sweep_param = sweep.param;
                    row.value = value;
                    row.seed = seed;
                    row.epoch = cfg.epochs > 0 ? cfg.epochs - 1 : 0;
                    row.knn_accuracy = 0.0;
                    row.final_loss = res.final_loss;
                    row.collapse_stat = res.final_collapse;
                    row.status = "no_eval";
                    cell_rows = sweep_row_csv(row);
                }
            } catch (const std::exception&) {
                SweepRow row;
                row.sweep_param = sweep.param;
                row.value = value;
                row.seed = seed;
                row.status = "failed";
                cell_rows = sweep_row_csv(row);
            }
            // One write + flush per cell, so a killed sweep never leaves a
            // torn cell behind.
            std::ofstream out(csv_path, std::ios::app);
            out << cell_rows;
            out.flush();
            ++new_cells;
            done.insert({value, seed});
        }
    }
    return read_sweep_csv(csv_path);
}

}  // namespace sslab
