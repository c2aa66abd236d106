// sslab CLI: train / sweep / plot / augment-preview / eval-knn /
// export-synthetic subcommands over JSON run configs.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sslab/checkpoint.hpp"
#include "sslab/config.hpp"
#include "sslab/preview.hpp"
#include "sslab/results.hpp"
#include "sslab/svg.hpp"
#include "sslab/sweep.hpp"
#include "sslab/train.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string out;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config_path, "JSON run config file");
    cmd->add_option("--seed", f.seed, "seed override")->each([&](const std::string&) { f.seed_set = true; });
    cmd->add_option("--out", f.out, "output directory override");
}

sslab::RunConfig resolve_config(const CommonFlags& f) {
    sslab::RunConfig cfg =
        f.config_path.empty() ? sslab::config_from_json(sslab::json::object()) : sslab::load_config(f.config_path);
    if (f.seed_set) cfg.seed = f.seed;
    if (!f.out.empty()) cfg.out_dir = f.out;
    return cfg;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sslab: spatial-augmentation lab for siamese self-supervised learning"};
    app.require_subcommand(1);

    CommonFlags train_flags, sweep_flags, preview_flags, eval_flags;

    auto* train_cmd = app.add_subcommand("train", "run one SSL training run");
    add_common(train_cmd, train_flags);
    int train_epochs = -1;
    train_cmd->add_option("--epochs", train_epochs, "epoch count override");

    auto* sweep_cmd = app.add_subcommand("sweep", "run a parameter sweep of training runs");
    add_common(sweep_cmd, sweep_flags);
    std::string sweep_param, sweep_values, sweep_seeds;
    sweep_cmd->add_option("--param", sweep_param,
                          "overlap_ratio|patch_ratio|excl_ratio|cutout_size|margin_mode")
        ->required();
    sweep_cmd->add_option("--values", sweep_values, "comma-separated sweep values")->required();
    sweep_cmd->add_option("--seeds", sweep_seeds, "comma-separated seeds")->required();

    auto* plot_cmd = app.add_subcommand("plot", "render a sweep CSV as an SVG chart");
    std::string plot_csv, plot_out, plot_title;
    plot_cmd->add_option("--csv", plot_csv, "sweep results CSV")->required();
    plot_cmd->add_option("--out", plot_out, "output SVG path")->required();
    plot_cmd->add_option("--title", plot_title, "chart title");

    auto* preview_cmd = app.add_subcommand("augment-preview", "write annotated view-pair PNGs");
    add_common(preview_cmd, preview_flags);
    int preview_n = 8;
    preview_cmd->add_option("-n,--count", preview_n, "number of pairs");

    auto* eval_cmd = app.add_subcommand("eval-knn", "kNN-evaluate a trained checkpoint");
    add_common(eval_cmd, eval_flags);
    std::string ckpt_path;
    eval_cmd->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();

    auto* export_cmd = app.add_subcommand("export-synthetic", "export a synthetic dataset as PNG + CSV index");
    std::string export_out = "synthetic_out", export_mode = "object";
    int export_n = 100;
    std::uint64_t export_seed = 0;
    export_cmd->add_option("--out", export_out, "output directory");
    export_cmd->add_option("--mode", export_mode, "object|scene");
    export_cmd->add_option("-n,--count", export_n, "number of images");
    export_cmd->add_option("--seed", export_seed, "generator seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train_cmd->parsed()) {
            sslab::RunConfig cfg = resolve_config(train_flags);
            if (train_epochs >= 0) cfg.epochs = train_epochs;
            const auto res = sslab::run_train(cfg);
            std::cout << "run complete: epochs=" << cfg.epochs << " final_loss="
                      << sslab::format_double(res.final_loss)
                      << " collapse=" << sslab::format_double(res.final_collapse);
            if (res.final_knn_accuracy >= 0)
                std::cout << " knn_accuracy=" << sslab::format_double(res.final_knn_accuracy);
            std::cout << "\noutputs in " << cfg.out_dir << "\n";
        } else if (sweep_cmd->parsed()) {
            sslab::RunConfig cfg = resolve_config(sweep_flags);
            sslab::SweepSpec spec;
            spec.param = sweep_param;
            spec.values = split_list(sweep_values);
            for (const auto& s : split_list(sweep_seeds)) spec.seeds.push_back(std::stoull(s));
            const std::string out_dir = cfg.out_dir.empty() ? "sweep_out" : cfg.out_dir;
            const auto rows = sslab::run_sweep(cfg, spec, out_dir);
            std::cout << "sweep complete: " << rows.size() << " rows in " << out_dir << "/results.csv\n";
        } else if (plot_cmd->parsed()) {
            const auto rows = sslab::read_sweep_csv(plot_csv);
            const std::string svg = sslab::render_sweep_svg(rows, plot_title);
            std::ofstream out(plot_out, std::ios::binary);
            if (!out) throw std::runtime_error("cannot write " + plot_out);
            out << svg;
            std::cout << "wrote " << plot_out << "\n";
        } else if (preview_cmd->parsed()) {
            sslab::RunConfig cfg = resolve_config(preview_flags);
            const std::string out_dir = cfg.out_dir.empty() ? "preview_out" : cfg.out_dir;
            const auto files = sslab::augment_preview(cfg, preview_n, out_dir);
            std::cout << "wrote " << files.size() << " previews to " << out_dir << "\n";
        } else if (eval_cmd->parsed()) {
            sslab::RunConfig cfg = resolve_config(eval_flags);
            auto ck = sslab::load_checkpoint(ckpt_path);
            const double acc = sslab::knn_eval(ck.params, cfg.eval);
            // record: run_id, epoch, accuracy, config hash
            std::cout << std::filesystem::path(ckpt_path).parent_path().filename().string() << ","
                      << ck.epoch << "," << sslab::format_double(acc) << "," << sslab::config_hash(cfg)
                      << "\n";
        } else if (export_cmd->parsed()) {
            sslab::SynthCfg scfg;
            scfg.mode = export_mode == "scene" ? sslab::SynthMode::SceneCentric
                                               : sslab::SynthMode::ObjectCentric;
            scfg.n_samples = export_n;
            scfg.seed = export_seed;
            sslab::export_synthetic(scfg, export_out);
            std::cout << "wrote " << export_n << " images to " << export_out << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
