// Pixel operations: crop+resize, separable Gaussian blur, cutout
// compositing, photometric jitter, and assembly of two-view pairs.

#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "sslab/common.hpp"
#include "sslab/geometry.hpp"

namespace sslab {

// Row-major, channel-interleaved (HWC) image with intensities in [0, 1].
struct Image {
    int h = 0;
    int w = 0;
    int c = 3;
    std::vector<float> data;

    Image() = default;
    Image(int h_, int w_, int c_ = 3, float fill = 0.0f)
        : h(h_), w(w_), c(c_), data(static_cast<size_t>(h_) * w_ * c_, fill) {}

    float& at(int y, int x, int ch) { return data[(static_cast<size_t>(y) * w + x) * c + ch]; }
    float at(int y, int x, int ch) const { return data[(static_cast<size_t>(y) * w + x) * c + ch]; }
    ImageDims dims() const { return ImageDims{w, h}; }
};

// Per-view photometric augmentation strengths. All-zero => identity.
struct PhotometricCfg {
    double flip_prob = 0.5;
    double brightness = 0.4;      // multiplicative factor in [1-b, 1+b]
    double contrast = 0.4;        // contrast factor in [1-c, 1+c] about the mean
    double grayscale_prob = 0.2;  // luma replication
};

// Two augmented views plus the geometry that produced them.
struct ViewPair {
    Image v1;
    Image v2;
    RectPair geom;
    AugSpec spec;
};

// Bilinear crop+resize with corner-aligned sampling: output pixel i maps to
// source coordinate r.x + i * (r.w - 1) / (out - 1). The identity rect at
// native size is bit-exact.
inline Image crop_resize(const Image& img, const Rect& r, int out_size) {
    if (!rect_in_bounds(r, img.dims())) throw ContractViolation("crop_resize: rect out of bounds");
    if (out_size < 4) throw ParameterError("crop_resize: out_size must be >= 4");
    Image out(out_size, out_size, img.c);
    const double sx = r.w > 1 ? static_cast<double>(r.w - 1) / (out_size - 1) : 0.0;
    const double sy = r.h > 1 ? static_cast<double>(r.h - 1) / (out_size - 1) : 0.0;
    for (int oy = 0; oy < out_size; ++oy) {
        const double fy = r.y + oy * sy;
        const int y0 = std::min(static_cast<int>(fy), r.y + r.h - 1);
        const int y1 = std::min(y0 + 1, r.y + r.h - 1);
        const double wy = fy - y0;
        for (int ox = 0; ox < out_size; ++ox) {
            const double fx = r.x + ox * sx;
            const int x0 = std::min(static_cast<int>(fx), r.x + r.w - 1);
            const int x1 = std::min(x0 + 1, r.x + r.w - 1);
            const double wx = fx - x0;
            for (int ch = 0; ch < img.c; ++ch) {
                const double top = (1.0 - wx) * img.at(y0, x0, ch) + wx * img.at(y0, x1, ch);
                const double bot = (1.0 - wx) * img.at(y1, x0, ch) + wx * img.at(y1, x1, ch);
                out.at(oy, ox, ch) = static_cast<float>((1.0 - wy) * top + wy * bot);
            }
        }
    }
    return out;
}

inline int blur_kernel_size(double sigma) {
    return 2 * static_cast<int>(std::ceil(3.0 * sigma)) + 1;
}

inline std::vector<double> gaussian_kernel(double sigma) {
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-0.5 * (i / sigma) * (i / sigma));
        sum += k[i + radius];
    }
    for (double& v : k) v /= sum;
    return k;
}

// Separable Gaussian, kernel size 2*ceil(3*sigma)+1, clamp-to-edge borders.
inline Image gaussian_blur(const Image& img, double sigma) {
    if (!(sigma > 0.0)) throw ParameterError("gaussian_blur: sigma must be > 0");
    const std::vector<double> k = gaussian_kernel(sigma);
    const int radius = static_cast<int>(k.size()) / 2;

    // Horizontal pass into a double buffer, then vertical.
    std::vector<double> tmp(static_cast<size_t>(img.h) * img.w * img.c);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x)
            for (int ch = 0; ch < img.c; ++ch) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i) {
                    const int xs = std::clamp(x + i, 0, img.w - 1);
                    acc += k[i + radius] * img.at(y, xs, ch);
                }
                tmp[(static_cast<size_t>(y) * img.w + x) * img.c + ch] = acc;
            }
    Image out(img.h, img.w, img.c);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x)
            for (int ch = 0; ch < img.c; ++ch) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i) {
                    const int ys = std::clamp(y + i, 0, img.h - 1);
                    acc += k[i + radius] * tmp[(static_cast<size_t>(ys) * img.w + x) * img.c + ch];
                }
                out.at(y, x, ch) = static_cast<float>(std::clamp(acc, 0.0, 1.0));
            }
    return out;
}

// Pixels inside r set to 0, all others untouched.
inline Image apply_cutout(const Image& img, const Rect& r) {
    if (!rect_in_bounds(r, img.dims())) throw ContractViolation("apply_cutout: rect out of bounds");
    Image out = img;
    for (int y = r.y; y < r.y + r.h; ++y)
        for (int x = r.x; x < r.x + r.w; ++x)
            for (int ch = 0; ch < img.c; ++ch) out.at(y, x, ch) = 0.0f;
    return out;
}

namespace detail {

inline Rect sample_region_rect(Rng& rng, const ImageDims& dims, double size_ratio) {
    int w = 0, h = 0;
    round_rect_dims(size_ratio * static_cast<double>(dims.area()), sample_log_uniform_aspect(rng), dims, w, h);
    return Rect{rng.uniform_int(0, dims.w - w), rng.uniform_int(0, dims.h - h), w, h};
}

}  // namespace detail

// v1 = image with a black patch at R; v2 = R itself, cropped and resized.
inline ViewPair make_cutout_pair(Rng& rng, const Image& img, double size_ratio, int out_size) {
    if (!(size_ratio > 0.0) || size_ratio > 0.5)
        throw ParameterError("make_cutout_pair: size_ratio must be in (0, 0.5]");
    const ImageDims dims = img.dims();
    const Rect full{0, 0, dims.w, dims.h};
    const Rect region = detail::sample_region_rect(rng, dims, size_ratio);
    ViewPair vp;
    vp.v1 = crop_resize(apply_cutout(img, region), full, out_size);
    vp.v2 = crop_resize(img, region, out_size);
    vp.geom = make_pair_geom(full, region, dims);
    vp.spec = CutoutSpec{size_ratio};
    return vp;
}

// v1 = image with region R replaced by the blurred image inside R (blur is
// computed on the whole image, then composited, so the blur sees context
// beyond R's border); v2 = R itself, un-blurred.
inline ViewPair make_cutout_blur_pair(Rng& rng, const Image& img, double size_ratio, double sigma, int out_size) {
    if (!(size_ratio > 0.0) || size_ratio > 0.5)
        throw ParameterError("make_cutout_blur_pair: size_ratio must be in (0, 0.5]");
    const ImageDims dims = img.dims();
    const Rect full{0, 0, dims.w, dims.h};
    const Rect region = detail::sample_region_rect(rng, dims, size_ratio);
    if (sigma <= 0.0) sigma = 0.1 * std::min(region.w, region.h);
    if (blur_kernel_size(sigma) > std::min(region.w, region.h))
        throw ParameterError("make_cutout_blur_pair: blur kernel larger than the cutout region");

    const Image blurred = gaussian_blur(img, sigma);
    Image v1 = img;
    for (int y = region.y; y < region.y + region.h; ++y)
        for (int x = region.x; x < region.x + region.w; ++x)
            for (int ch = 0; ch < img.c; ++ch) v1.at(y, x, ch) = blurred.at(y, x, ch);

    ViewPair vp;
    vp.v1 = crop_resize(v1, full, out_size);
    vp.v2 = crop_resize(img, region, out_size);
    vp.geom = make_pair_geom(full, region, dims);
    vp.spec = CutoutBlurSpec{size_ratio, sigma};
    return vp;
}

// One concrete draw of the photometric jitter.
struct PhotometricParams {
    bool flip = false;
    double brightness = 1.0;
    double contrast = 1.0;
    bool grayscale = false;
};

// Horizontal flip, brightness/contrast adjustment, optional grayscale.
// Output clamped to [0, 1].
inline Image apply_photometric(const Image& img, const PhotometricParams& p) {
    Image out = img;
    if (p.flip) {
        for (int y = 0; y < out.h; ++y)
            for (int x = 0; x < out.w / 2; ++x)
                for (int ch = 0; ch < out.c; ++ch) std::swap(out.at(y, x, ch), out.at(y, out.w - 1 - x, ch));
    }
    const double bright = p.brightness;
    const double contrast = p.contrast;
    const bool gray = p.grayscale;

    double mean = 0.0;
    for (const float v : out.data) mean += v;
    mean = out.data.empty() ? 0.0 : mean / static_cast<double>(out.data.size());

    for (float& v : out.data) {
        double x = v * bright;
        x = (x - mean * bright) * contrast + mean * bright;
        v = static_cast<float>(std::clamp(x, 0.0, 1.0));
    }
    if (gray && out.c == 3) {
        for (int y = 0; y < out.h; ++y)
            for (int x = 0; x < out.w; ++x) {
                const float luma = static_cast<float>(0.299 * out.at(y, x, 0) + 0.587 * out.at(y, x, 1) +
                                                      0.114 * out.at(y, x, 2));
                out.at(y, x, 0) = out.at(y, x, 1) = out.at(y, x, 2) = luma;
            }
    }
    return out;
}

inline PhotometricParams sample_photometric(Rng& rng, const PhotometricCfg& cfg) {
    PhotometricParams p;
    p.flip = rng.bernoulli(cfg.flip_prob);
    p.brightness = rng.uniform(1.0 - cfg.brightness, 1.0 + cfg.brightness);
    p.contrast = rng.uniform(1.0 - cfg.contrast, 1.0 + cfg.contrast);
    p.grayscale = rng.bernoulli(cfg.grayscale_prob);
    return p;
}

inline Image apply_photometric(Rng& rng, const Image& img, const PhotometricCfg& cfg) {
    return apply_photometric(img, sample_photometric(rng, cfg));
}

// Dispatcher: geometry sampler + pixel ops for the chosen scheme, then
// independent photometric jitter per view.
inline ViewPair make_view_pair(Rng& rng, const Image& img, const AugSpec& spec, const PhotometricCfg& photo,
                               int out_size) {
    const ImageDims dims = img.dims();
    ViewPair vp;
    if (const auto* s = std::get_if<OverlapSpec>(&spec)) {
        vp.geom = sample_overlap_pair(rng, dims, s->ratio);
        vp.v1 = crop_resize(img, vp.geom.a, out_size);
        vp.v2 = crop_resize(img, vp.geom.b, out_size);
        vp.spec = spec;
    } else if (const auto* s = std::get_if<PatchSpec>(&spec)) {
        vp.geom = sample_patch_pair(rng, dims, s->ratio);
        vp.v1 = crop_resize(img, vp.geom.a, out_size);
        vp.v2 = crop_resize(img, vp.geom.b, out_size);
        vp.spec = spec;
    } else if (const auto* s = std::get_if<ExclusiveSpec>(&spec)) {
        vp.geom = sample_exclusive_pair(rng, dims, s->ratio);
        vp.v1 = crop_resize(img, vp.geom.a, out_size);
        vp.v2 = crop_resize(img, vp.geom.b, out_size);
        vp.spec = spec;
    } else if (const auto* s = std::get_if<RandomCropSpec>(&spec)) {
        const Rect a = sample_random_crop(rng, dims, s->scale_min, s->scale_max);
        const Rect b = sample_random_crop(rng, dims, s->scale_min, s->scale_max);
        vp.geom = make_pair_geom(a, b, dims);
        vp.v1 = crop_resize(img, a, out_size);
        vp.v2 = crop_resize(img, b, out_size);
        vp.spec = spec;
    } else if (const auto* s = std::get_if<CutoutSpec>(&spec)) {
        vp = make_cutout_pair(rng, img, s->size_ratio, out_size);
    } else {
        const auto& s2 = std::get<CutoutBlurSpec>(spec);
        vp = make_cutout_blur_pair(rng, img, s2.size_ratio, s2.sigma, out_size);
    }
    vp.v1 = apply_photometric(rng, vp.v1, photo);
    vp.v2 = apply_photometric(rng, vp.v2, photo);
    return vp;
}

}  // namespace sslab
