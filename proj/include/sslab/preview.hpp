// Visual-inspection outputs: augmented view pairs as annotated PNGs, and
// synthetic dataset export (PNG directory + CSV label index).

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "sslab/config.hpp"
#include "sslab/data.hpp"
#include "sslab/image.hpp"
#include "sslab/png.hpp"
#include "sslab/train.hpp"

namespace sslab {
namespace detail {

inline void draw_rect_outline(Image& img, const Rect& r, const float color[3]) {
    auto set = [&](int y, int x) {
        if (y >= 0 && y < img.h && x >= 0 && x < img.w)
            for (int ch = 0; ch < 3; ++ch) img.at(y, x, ch) = color[ch];
    };
    for (int x = r.x; x < r.x + r.w; ++x) {
        set(r.y, x);
        set(r.y + r.h - 1, x);
    }
    for (int y = r.y; y < r.y + r.h; ++y) {
        set(y, r.x);
        set(y, r.x + r.w - 1);
    }
}

// [annotated source | view 1 | view 2] with 2px separators.
inline Image compose_preview(const Image& src, const ViewPair& vp) {
    Image annotated = src;
    const float red[3] = {1.0f, 0.1f, 0.1f};
    const float blue[3] = {0.2f, 0.4f, 1.0f};
    draw_rect_outline(annotated, vp.geom.a, red);
    draw_rect_outline(annotated, vp.geom.b, blue);

    const int gap = 2;
    const int h = std::max({annotated.h, vp.v1.h, vp.v2.h});
    const int w = annotated.w + vp.v1.w + vp.v2.w + 2 * gap;
    Image out(h, w, 3, 1.0f);
    auto blit = [&](const Image& part, int x0) {
        for (int y = 0; y < part.h; ++y)
            for (int x = 0; x < part.w; ++x)
                for (int ch = 0; ch < 3; ++ch) out.at(y, x0 + x, ch) = part.at(y, x, ch);
    };
    blit(annotated, 0);
    blit(vp.v1, annotated.w + gap);
    blit(vp.v2, annotated.w + vp.v1.w + 2 * gap);
    return out;
}

}  // namespace detail

// Writes n annotated view-pair PNGs. Filenames carry the pair index, the
// center distance phi and the measured overlap ratio; deterministic from
// the config seed.
inline std::vector<std::filesystem::path> augment_preview(const RunConfig& cfg, int n,
                                                          const std::filesystem::path& out_dir) {
    if (n < 0) throw ParameterError("augment_preview: n must be >= 0");
    std::filesystem::create_directories(out_dir);
    std::vector<std::filesystem::path> files;
    if (n == 0) return files;
    Dataset ds = load_dataset(cfg.dataset);
    for (int i = 0; i < n; ++i) {
        const size_t idx = i % ds.size();
        Rng rng(derive_seed(cfg.seed, 0xF1E1D, static_cast<std::uint64_t>(i)));
        ViewPair vp = make_view_pair(rng, ds.images[idx], cfg.aug, cfg.photometric, cfg.arch.in_size);
        char name[128];
        std::snprintf(name, sizeof(name), "pair_%04d_phi_%.2f_ov_%.4f.png", i, vp.geom.phi,
                      vp.geom.overlap_ratio);
        const auto path = out_dir / name;
        write_png(path, detail::compose_preview(ds.images[idx], vp));
        files.push_back(path);
    }
    return files;
}

// Exports a synthetic dataset as PNGs plus labels.csv (index,filename,label).
inline void export_synthetic(const SynthCfg& cfg, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    Dataset ds = gen_synthetic(cfg);
    std::ofstream index(out_dir / "labels.csv");
    index << "index,filename,label,class_name\n";
    for (size_t i = 0; i < ds.size(); ++i) {
        char name[64];
        std::snprintf(name, sizeof(name), "img_%06zu.png", i);
        write_png(out_dir / name, ds.images[i]);
        if (ds.labeled())
            index << i << ',' << name << ',' << ds.labels[i] << ',' << ds.class_names[ds.labels[i]] << '\n';
        else
            index << i << ',' << name << ",,\n";
    }
}

}  // namespace sslab
