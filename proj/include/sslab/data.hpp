// Dataset ingestion: CIFAR-10 binary batches and procedural synthetic
// object-centric / scene-centric shape images.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "sslab/common.hpp"
#include "sslab/image.hpp"

namespace sslab {

struct Dataset {
    std::vector<Image> images;
    std::vector<int> labels;  // empty when unlabeled
    std::vector<std::string> class_names;

    size_t size() const { return images.size(); }
    bool labeled() const { return !labels.empty(); }
};

inline constexpr int kCifarRecordBytes = 3073;  // 1 label byte + 3 x 1024 planes
inline constexpr int kCifarRecordsPerBatch = 10000;

// Parses one 3073-byte CIFAR-10 record: label byte, then R, G, B planes of
// 1024 bytes each, row-major 32x32. Intensities scale to [0, 1] by /255.
inline std::pair<int, Image> parse_cifar_record(const unsigned char* rec) {
    const int label = rec[0];
    if (label > 9) throw IngestionError("CIFAR-10 record has label byte > 9");
    Image img(32, 32, 3);
    for (int ch = 0; ch < 3; ++ch)
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 32; ++x)
                img.at(y, x, ch) = static_cast<float>(rec[1 + ch * 1024 + y * 32 + x]) / 255.0f;
    return {label, img};
}

// Inverse of parse_cifar_record; reproduces the original bytes exactly for
// any record that came from the parser.
inline std::array<unsigned char, kCifarRecordBytes> serialize_cifar_record(int label, const Image& img) {
    std::array<unsigned char, kCifarRecordBytes> rec{};
    rec[0] = static_cast<unsigned char>(label);
    for (int ch = 0; ch < 3; ++ch)
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 32; ++x)
                rec[1 + ch * 1024 + y * 32 + x] =
                    static_cast<unsigned char>(std::lround(img.at(y, x, ch) * 255.0f));
    return rec;
}

inline void load_cifar_batch_file(const std::filesystem::path& file, Dataset& out) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw IngestionError("cannot open CIFAR-10 batch file: " + file.string());
    std::vector<unsigned char> buf(kCifarRecordBytes);
    for (int rec = 0; rec < kCifarRecordsPerBatch; ++rec) {
        in.read(reinterpret_cast<char*>(buf.data()), kCifarRecordBytes);
        if (in.gcount() != kCifarRecordBytes)
            throw IngestionError(file.string() + ": truncated record at byte offset " +
                                 std::to_string(static_cast<long long>(rec) * kCifarRecordBytes));
        auto [label, img] = parse_cifar_record(buf.data());
        out.labels.push_back(label);
        out.images.push_back(std::move(img));
    }
    char extra;
    if (in.read(&extra, 1))
        throw IngestionError(file.string() + ": trailing bytes after record " +
                             std::to_string(kCifarRecordsPerBatch));
}

inline const std::vector<std::string>& cifar_class_names() {
    static const std::vector<std::string> names = {"airplane", "automobile", "bird",  "cat",  "deer",
                                                   "dog",      "frog",       "horse", "ship", "truck"};
    return names;
}

// Loads data_batch_1..5.bin and test_batch.bin from dir.
inline std::pair<Dataset, Dataset> load_cifar10(const std::filesystem::path& dir) {
    Dataset train, test;
    train.class_names = test.class_names = cifar_class_names();
    for (int i = 1; i <= 5; ++i) load_cifar_batch_file(dir / ("data_batch_" + std::to_string(i) + ".bin"), train);
    load_cifar_batch_file(dir / "test_batch.bin", test);
    return {std::move(train), std::move(test)};
}

// --- synthetic shapes ------------------------------------------------------

enum class SynthMode { ObjectCentric, SceneCentric };

struct SynthCfg {
    SynthMode mode = SynthMode::ObjectCentric;
    int n_samples = 4000;
    std::uint64_t seed = 0;
    int image_size = 32;
    // Object-centric shape area fraction range.
    double area_min = 0.4;
    double area_max = 0.7;
    double noise_amplitude = 0.05;  // background texture
};

inline constexpr int kSynthClasses = 4;  // circle, square, triangle, cross

inline const std::vector<std::string>& synth_class_names() {
    static const std::vector<std::string> names = {"circle", "square", "triangle", "cross"};
    return names;
}

namespace detail {

// Boolean mask of one shape centered at (cx, cy) with characteristic size s
// (roughly the "radius"); returns pixel count.
inline long long rasterize_shape(std::vector<unsigned char>& mask, int S, int cls, double cx, double cy,
                                 double s) {
    mask.assign(static_cast<size_t>(S) * S, 0);
    long long count = 0;
    for (int y = 0; y < S; ++y)
        for (int x = 0; x < S; ++x) {
            const double px = x + 0.5 - cx;
            const double py = y + 0.5 - cy;
            bool in = false;
            switch (cls) {
                case 0:  // circle
                    in = px * px + py * py <= s * s;
                    break;
                case 1:  // square
                    in = std::abs(px) <= s && std::abs(py) <= s;
                    break;
                case 2:  // triangle (isoceles, apex up)
                    in = py >= -s && py <= s && std::abs(px) <= (py + s) / 2.0;
                    break;
                default:  // cross (plus sign, bar half-width s/3)
                    in = (std::abs(px) <= s / 3.0 && std::abs(py) <= s) ||
                         (std::abs(py) <= s / 3.0 && std::abs(px) <= s);
                    break;
            }
            if (in) {
                mask[static_cast<size_t>(y) * S + x] = 1;
                ++count;
            }
        }
    return count;
}

// Analytic size parameter giving mask area ~ frac * S^2.
inline double shape_size_for_area(int cls, double frac, int S) {
    const double A = frac * S * S;
    switch (cls) {
        case 0: return std::sqrt(A / 3.14159265358979323846);
        case 1: return std::sqrt(A) / 2.0;
        case 2: return std::sqrt(A / 2.0);  // triangle area = 2 s^2 (height 2s, max width 2s)
        default: return std::sqrt(A * 9.0 / 20.0);  // cross area = 20 s^2 / 9
    }
}

inline void paint_shape(Image& img, const std::vector<unsigned char>& mask, const float color[3]) {
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x)
            if (mask[static_cast<size_t>(y) * img.w + x])
                for (int ch = 0; ch < 3; ++ch) img.at(y, x, ch) = color[ch];
}

inline Image noise_background(Rng& rng, int S, double amplitude) {
    Image img(S, S, 3);
    const double base = 0.35;
    for (float& v : img.data)
        v = static_cast<float>(std::clamp(base + rng.uniform(-amplitude, amplitude), 0.0, 1.0));
    return img;
}

}  // namespace detail

// Deterministic procedural dataset. Object-centric: one shape per image
// with mask area fraction inside [area_min, area_max], labeled by shape
// class. Scene-centric: 2-4 shapes of distinct classes in disjoint grid
// cells, unlabeled.
inline Dataset gen_synthetic(const SynthCfg& cfg) {
    if (cfg.n_samples < 0 || cfg.image_size < 8) throw ParameterError("gen_synthetic: invalid config");
    Dataset ds;
    ds.class_names = synth_class_names();
    const int S = cfg.image_size;
    std::vector<unsigned char> mask;

    for (int i = 0; i < cfg.n_samples; ++i) {
        Rng rng(derive_seed(cfg.seed, 0xDA7A, static_cast<std::uint64_t>(i)));
        Image img = detail::noise_background(rng, S, cfg.noise_amplitude);

        if (cfg.mode == SynthMode::ObjectCentric) {
            const int cls = rng.uniform_int(0, kSynthClasses - 1);
            const double frac = rng.uniform(cfg.area_min, cfg.area_max);
            double size = detail::shape_size_for_area(cls, frac, S);
            const double lo = cfg.area_min * S * S, hi = cfg.area_max * S * S;
            // Center jitter limited so the shape stays inside the image.
            const double margin = size + 1.0;
            const double cx = rng.uniform(std::min(margin, S / 2.0), std::max(S - margin, S / 2.0));
            const double cy = rng.uniform(std::min(margin, S / 2.0), std::max(S - margin, S / 2.0));
            long long area = detail::rasterize_shape(mask, S, cls, cx, cy, size);
            // Rasterization rounds the analytic area; nudge the size until the
            // measured pixel count is inside the configured band.
            for (int tries = 0; tries < 32 && (area < lo || area > hi); ++tries) {
                size *= area < lo ? 1.03 : 0.97;
                area = detail::rasterize_shape(mask, S, cls, cx, cy, size);
            }
            float color[3];
            for (float& c : color) c = static_cast<float>(rng.uniform(0.55, 1.0));
            detail::paint_shape(img, mask, color);
            ds.labels.push_back(cls);
        } else {
            // 2x2 grid of cells; each chosen cell holds one small shape.
            const int n_shapes = rng.uniform_int(2, 4);
            int cells[4] = {0, 1, 2, 3};
            for (int j = 3; j > 0; --j) std::swap(cells[j], cells[rng.uniform_int(0, j)]);
            int classes[4] = {0, 1, 2, 3};
            for (int j = 3; j > 0; --j) std::swap(classes[j], classes[rng.uniform_int(0, j)]);
            const int half = S / 2;
            for (int k = 0; k < n_shapes; ++k) {
                const int cell = cells[k];
                const int cls = classes[k];
                const double cell_x = (cell % 2) * half;
                const double cell_y = (cell / 2) * half;
                const double size = rng.uniform(0.22, 0.34) * half;
                const double margin = size + 1.5;
                const double cx = cell_x + rng.uniform(margin, half - margin);
                const double cy = cell_y + rng.uniform(margin, half - margin);
                detail::rasterize_shape(mask, S, cls, cx, cy, size);
                float color[3];
                for (float& c : color) c = static_cast<float>(rng.uniform(0.55, 1.0));
                detail::paint_shape(img, mask, color);
            }
        }
        ds.images.push_back(std::move(img));
    }
    return ds;
}

// Per-epoch shuffled index batches; the last partial batch is dropped.
inline std::vector<std::vector<int>> batch_iter(size_t n, std::uint64_t seed, int epoch, int batch_size) {
    if (batch_size < 2) throw ParameterError("batch_iter: batch_size must be >= 2");
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(seed, 0xBA7C, static_cast<std::uint64_t>(epoch)));
    for (size_t j = n; j > 1; --j) std::swap(order[j - 1], order[rng.uniform_int(0, static_cast<int>(j) - 1)]);
    std::vector<std::vector<int>> batches;
    for (size_t i = 0; i + batch_size <= n; i += batch_size)
        batches.emplace_back(order.begin() + i, order.begin() + i + batch_size);
    return batches;
}

// Per-channel mean and stddev over a dataset, for input standardization.
inline void channel_stats(const Dataset& ds, double mean[3], double stddev[3]) {
    double sum[3] = {0, 0, 0}, sum2[3] = {0, 0, 0};
    long long count = 0;
    for (const Image& img : ds.images) {
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x)
                for (int ch = 0; ch < 3; ++ch) {
                    const double v = img.at(y, x, ch);
                    sum[ch] += v;
                    sum2[ch] += v * v;
                }
        count += static_cast<long long>(img.h) * img.w;
    }
    for (int ch = 0; ch < 3; ++ch) {
        mean[ch] = count > 0 ? sum[ch] / count : 0.5;
        const double var = count > 0 ? std::max(sum2[ch] / count - mean[ch] * mean[ch], 1e-6) : 0.0625;
        stddev[ch] = std::sqrt(var);
    }
}

}  // namespace sslab
