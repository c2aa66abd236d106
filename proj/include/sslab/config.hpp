// Run configuration: JSON schema, defaults, and resolution.

#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include <json.hpp>

#include "sslab/common.hpp"
#include "sslab/data.hpp"
#include "sslab/image.hpp"
#include "sslab/loss.hpp"
#include "sslab/model.hpp"

namespace sslab {

using json = nlohmann::json;

struct DatasetSpec {
    std::string type = "synthetic";  // "synthetic" | "cifar10"
    // synthetic
    SynthCfg synth;
    // cifar10
    std::string dir;
    std::string split = "train";  // "train" | "test"
};

struct EvalCfg {
    int k = 20;
    DatasetSpec dataset;     // labeled dataset for the kNN protocol
    int ref_count = 1000;    // reference (train) embeddings
    int query_count = 1000;  // query embeddings
    int every_epochs = 0;    // 0: evaluate only at the final epoch
    bool enabled = true;
};

struct RunConfig {
    DatasetSpec dataset;
    AugSpec aug = RandomCropSpec{};
    PhotometricCfg photometric;
    MarginSpec margin = MarginSpec::none();
    ArchCfg arch;
    OptCfg optim;
    bool cosine_lr_decay = true;
    int epochs = 20;
    int batch_size = 128;
    std::uint64_t seed = 1;
    EvalCfg eval;
    std::string out_dir = "run_out";
    bool input_stats_set = false;  // arch.input_mean/std pinned by the config
};

// --- JSON (de)serialization -------------------------------------------------

inline json to_json(const DatasetSpec& d) {
    if (d.type == "cifar10") return json{{"type", "cifar10"}, {"dir", d.dir}, {"split", d.split}};
    return json{{"type", "synthetic"},
                {"mode", d.synth.mode == SynthMode::ObjectCentric ? "object" : "scene"},
                {"n", d.synth.n_samples},
                {"seed", d.synth.seed},
                {"image_size", d.synth.image_size},
                {"area_min", d.synth.area_min},
                {"area_max", d.synth.area_max},
                {"noise", d.synth.noise_amplitude}};
}

inline DatasetSpec dataset_from_json(const json& j) {
    DatasetSpec d;
    d.type = j.value("type", "synthetic");
    if (d.type == "cifar10") {
        d.dir = j.at("dir").get<std::string>();
        d.split = j.value("split", "train");
    } else if (d.type == "synthetic") {
        const std::string mode = j.value("mode", "object");
        d.synth.mode = mode == "scene" ? SynthMode::SceneCentric : SynthMode::ObjectCentric;
        d.synth.n_samples = j.value("n", 4000);
        d.synth.seed = j.value("seed", std::uint64_t{0});
        d.synth.image_size = j.value("image_size", 32);
        d.synth.area_min = j.value("area_min", 0.4);
        d.synth.area_max = j.value("area_max", 0.7);
        d.synth.noise_amplitude = j.value("noise", 0.05);
    } else {
        throw ParameterError("dataset.type must be 'synthetic' or 'cifar10'");
    }
    return d;
}

inline json to_json(const AugSpec& a) {
    if (const auto* s = std::get_if<OverlapSpec>(&a)) return json{{"type", "overlap"}, {"ratio", s->ratio}};
    if (const auto* s = std::get_if<PatchSpec>(&a)) return json{{"type", "patch"}, {"ratio", s->ratio}};
    if (const auto* s = std::get_if<ExclusiveSpec>(&a)) return json{{"type", "exclusive"}, {"ratio", s->ratio}};
    if (const auto* s = std::get_if<RandomCropSpec>(&a))
        return json{{"type", "random_crop"}, {"scale_min", s->scale_min}, {"scale_max", s->scale_max}};
    if (const auto* s = std::get_if<CutoutSpec>(&a)) return json{{"type", "cutout"}, {"size_ratio", s->size_ratio}};
    const auto& s = std::get<CutoutBlurSpec>(a);
    return json{{"type", "cutout_blur"}, {"size_ratio", s.size_ratio}, {"sigma", s.sigma}};
}

inline AugSpec aug_from_json(const json& j) {
    const std::string type = j.at("type").get<std::string>();
    if (type == "overlap") return OverlapSpec{j.value("ratio", 0.5)};
    if (type == "patch") return PatchSpec{j.value("ratio", 0.3)};
    if (type == "exclusive") return ExclusiveSpec{j.value("ratio", 0.4)};
    if (type == "random_crop") return RandomCropSpec{j.value("scale_min", 0.2), j.value("scale_max", 1.0)};
    if (type == "cutout") return CutoutSpec{j.value("size_ratio", 0.3)};
    if (type == "cutout_blur") return CutoutBlurSpec{j.value("size_ratio", 0.3), j.value("sigma", 0.0)};
    throw ParameterError("unknown aug.type: " + type);
}

inline json to_json(const MarginSpec& m) {
    switch (m.mode) {
        case MarginSpec::Mode::NoMargin: return json{{"mode", "none"}};
        case MarginSpec::Mode::Fixed: return json{{"mode", "fixed"}, {"m", m.fixed_m}};
        case MarginSpec::Mode::Distance: return json{{"mode", "distance"}, {"k", m.distance_k}};
    }
    return json{{"mode", "none"}};
}

inline MarginSpec margin_from_json(const json& j, double image_diag) {
    const std::string mode = j.value("mode", "none");
    if (mode == "none") return MarginSpec::none();
    if (mode == "fixed") return MarginSpec::fixed(j.value("m", 0.2));
    if (mode == "distance") return MarginSpec::distance(j.value("k", default_distance_k(image_diag)));
    throw ParameterError("unknown margin.mode: " + mode);
}

inline json to_json(const RunConfig& c) {
    json j;
    j["dataset"] = to_json(c.dataset);
    j["aug"] = to_json(c.aug);
    j["photometric"] = {{"flip_prob", c.photometric.flip_prob},
                        {"brightness", c.photometric.brightness},
                        {"contrast", c.photometric.contrast},
                        {"grayscale_prob", c.photometric.grayscale_prob}};
    j["margin"] = to_json(c.margin);
    j["optim"] = {{"lr", c.optim.lr},
                  {"momentum", c.optim.momentum},
                  {"weight_decay", c.optim.weight_decay},
                  {"cosine_decay", c.cosine_lr_decay}};
    j["epochs"] = c.epochs;
    j["batch_size"] = c.batch_size;
    j["seed"] = c.seed;
    j["out_size"] = c.arch.in_size;
    if (c.input_stats_set) {
        j["input_stats"] = {{"mean", {c.arch.input_mean[0], c.arch.input_mean[1], c.arch.input_mean[2]}},
                            {"std", {c.arch.input_std[0], c.arch.input_std[1], c.arch.input_std[2]}}};
    }
    j["eval"] = {{"enabled", c.eval.enabled},        {"k", c.eval.k},
                 {"dataset", to_json(c.eval.dataset)}, {"ref_count", c.eval.ref_count},
                 {"query_count", c.eval.query_count},  {"every_epochs", c.eval.every_epochs}};
    j["out_dir"] = c.out_dir;
    return j;
}

inline RunConfig config_from_json(const json& j) {
    RunConfig c;
    if (j.contains("dataset")) c.dataset = dataset_from_json(j.at("dataset"));
    if (j.contains("out_size")) c.arch.in_size = j.at("out_size").get<int>();
    if (j.contains("aug")) c.aug = aug_from_json(j.at("aug"));
    if (j.contains("photometric")) {
        const auto& p = j.at("photometric");
        c.photometric.flip_prob = p.value("flip_prob", 0.5);
        c.photometric.brightness = p.value("brightness", 0.4);
        c.photometric.contrast = p.value("contrast", 0.4);
        c.photometric.grayscale_prob = p.value("grayscale_prob", 0.2);
    }
    const double diag = std::sqrt(2.0) * c.arch.in_size;
    if (j.contains("margin")) c.margin = margin_from_json(j.at("margin"), diag);
    c.epochs = j.value("epochs", 20);
    c.batch_size = j.value("batch_size", 128);
    c.seed = j.value("seed", std::uint64_t{1});
    if (j.contains("optim")) {
        const auto& o = j.at("optim");
        c.optim.lr = o.value("lr", 0.03 * c.batch_size / 256.0);
        c.optim.momentum = o.value("momentum", 0.9);
        c.optim.weight_decay = o.value("weight_decay", 5e-4);
        c.cosine_lr_decay = o.value("cosine_decay", true);
    } else {
        c.optim.lr = 0.03 * c.batch_size / 256.0;
    }
    if (j.contains("input_stats")) {
        const auto& s = j.at("input_stats");
        for (int i = 0; i < 3; ++i) {
            c.arch.input_mean[i] = s.at("mean").at(i).get<double>();
            c.arch.input_std[i] = s.at("std").at(i).get<double>();
        }
        c.input_stats_set = true;
    }
    // Default kNN protocol: labeled object-centric synthetic images.
    c.eval.dataset.type = "synthetic";
    c.eval.dataset.synth.mode = SynthMode::ObjectCentric;
    c.eval.dataset.synth.n_samples = 2000;
    c.eval.dataset.synth.seed = 9001;
    if (j.contains("eval")) {
        const auto& e = j.at("eval");
        c.eval.enabled = e.value("enabled", true);
        c.eval.k = e.value("k", 20);
        if (e.contains("dataset")) c.eval.dataset = dataset_from_json(e.at("dataset"));
        c.eval.ref_count = e.value("ref_count", 1000);
        c.eval.query_count = e.value("query_count", 1000);
        c.eval.every_epochs = e.value("every_epochs", 0);
    }
    c.out_dir = j.value("out_dir", std::string("run_out"));
    return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParameterError("cannot open config file: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParameterError("config parse error in " + path.string() + ": " + e.what());
    }
    return config_from_json(j);
}

// FNV-1a over the canonical serialized config, for run records.
inline std::string config_hash(const RunConfig& c) {
    const std::string s = to_json(c).dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (const char ch : s) {
        h ^= static_cast<unsigned char>(ch);
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace sslab
