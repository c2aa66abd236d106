// Crop-rectangle geometry: exact-constraint pair samplers and measurements.

#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <variant>

#include "sslab/common.hpp"

namespace sslab {

// Integer-pixel axis-aligned rectangle, half-open in neither sense:
// covers pixel columns [x, x+w) and rows [y, y+h).
struct Rect {
    int x = 0;
    int y = 0;
    int w = 1;
    int h = 1;

    long long area() const { return static_cast<long long>(w) * h; }
    double cx() const { return x + w / 2.0; }
    double cy() const { return y + h / 2.0; }

    bool operator==(const Rect&) const = default;
};

struct ImageDims {
    int w = 0;
    int h = 0;

    long long area() const { return static_cast<long long>(w) * h; }
    double diagonal() const { return std::sqrt(static_cast<double>(w) * w + static_cast<double>(h) * h); }
};

inline bool rect_in_bounds(const Rect& r, const ImageDims& d) {
    return r.x >= 0 && r.y >= 0 && r.w >= 1 && r.h >= 1 && r.x + r.w <= d.w && r.y + r.h <= d.h;
}

// Two crop rectangles plus the pair geometry the loss consumes.
struct RectPair {
    Rect a;
    Rect b;
    double phi = 0.0;            // Euclidean distance between rect centers, px
    double overlap_ratio = 0.0;  // area(a ∩ b) / image area
};

// Augmentation scheme selector.
struct OverlapSpec {
    double ratio = 0.5;
};
struct PatchSpec {
    double ratio = 0.3;
};
struct ExclusiveSpec {
    double ratio = 0.4;
};
struct RandomCropSpec {
    double scale_min = 0.2;
    double scale_max = 1.0;
};
struct CutoutSpec {
    double size_ratio = 0.3;
};
struct CutoutBlurSpec {
    double size_ratio = 0.3;
    double sigma = 0.0;  // <= 0: default to 10% of the cutout side
};
using AugSpec = std::variant<OverlapSpec, PatchSpec, ExclusiveSpec, RandomCropSpec, CutoutSpec, CutoutBlurSpec>;

inline std::optional<Rect> intersect(const Rect& a, const Rect& b) {
    const int x0 = std::max(a.x, b.x);
    const int y0 = std::max(a.y, b.y);
    const int x1 = std::min(a.x + a.w, b.x + b.w);
    const int y1 = std::min(a.y + a.h, b.y + b.h);
    if (x1 <= x0 || y1 <= y0) return std::nullopt;  // edge-touching counts as disjoint
    return Rect{x0, y0, x1 - x0, y1 - y0};
}

inline double overlap_ratio(const Rect& a, const Rect& b, const ImageDims& dims) {
    if (!rect_in_bounds(a, dims) || !rect_in_bounds(b, dims))
        throw ContractViolation("overlap_ratio: rect out of image bounds");
    const auto o = intersect(a, b);
    return o ? static_cast<double>(o->area()) / static_cast<double>(dims.area()) : 0.0;
}

inline double center_distance(const Rect& a, const Rect& b) {
    const double dx = a.cx() - b.cx();
    const double dy = a.cy() - b.cy();
    return std::sqrt(dx * dx + dy * dy);
}

inline RectPair make_pair_geom(const Rect& a, const Rect& b, const ImageDims& dims) {
    return RectPair{a, b, center_distance(a, b), overlap_ratio(a, b, dims)};
}

namespace detail {

constexpr double kAspectLo = 0.75;  // 3/4
constexpr double kAspectHi = 4.0 / 3.0;

inline double sample_log_uniform_aspect(Rng& rng) {
    return std::exp(rng.uniform(std::log(kAspectLo), std::log(kAspectHi)));
}

// Integer w,h with w*h as close to `area` as rounding allows, aspect ~ w/h.
// When one side clamps at the image border the other side is re-fit.
inline void round_rect_dims(double area, double aspect, const ImageDims& dims, int& w, int& h) {
    w = std::clamp(static_cast<int>(std::lround(std::sqrt(area * aspect))), 1, dims.w);
    h = std::clamp(static_cast<int>(std::lround(area / w)), 1, dims.h);
    w = std::clamp(static_cast<int>(std::lround(area / h)), 1, dims.w);
    h = std::clamp(static_cast<int>(std::lround(area / w)), 1, dims.h);
    const long long target = std::llround(area);
    const auto err = [&](int ww, int hh) { return std::llabs(static_cast<long long>(ww) * hh - target); };
    for (int pass = 0; pass < 2; ++pass)
        for (int dw : {-1, 0, 1})
            for (int dh : {-1, 0, 1}) {
                const int w2 = w + dw, h2 = h + dh;
                if (w2 < 1 || w2 > dims.w || h2 < 1 || h2 > dims.h) continue;
                if (err(w2, h2) < err(w, h)) {
                    w = w2;
                    h = h2;
                }
            }
}

}  // namespace detail

// Samples a pair whose intersection is exactly a constructed overlap rect O
// with area ~= target * image area: O is placed first, then crop a expands
// from O toward one corner of the image and crop b toward the opposite
// corner, so a ∩ b == O by construction.
inline RectPair sample_overlap_pair(Rng& rng, const ImageDims& dims, double target) {
    if (target < 0.05 || target > 0.95)
        throw ParameterError("sample_overlap_pair: target must be in [0.05, 0.95]");
    int ow = 0, oh = 0;
    detail::round_rect_dims(target * static_cast<double>(dims.area()),
                            detail::sample_log_uniform_aspect(rng), dims, ow, oh);
    const int ox = rng.uniform_int(0, dims.w - ow);
    const int oy = rng.uniform_int(0, dims.h - oh);

    // Expansion amounts toward each image corner.
    const int left = rng.uniform_int(0, ox);
    const int top = rng.uniform_int(0, oy);
    const int right = rng.uniform_int(0, dims.w - (ox + ow));
    const int bottom = rng.uniform_int(0, dims.h - (oy + oh));

    // a grows toward one diagonal corner, b toward the opposite one.
    Rect a, b;
    switch (rng.uniform_int(0, 3)) {
        case 0:  // a -> top-left, b -> bottom-right
            a = Rect{ox - left, oy - top, ow + left, oh + top};
            b = Rect{ox, oy, ow + right, oh + bottom};
            break;
        case 1:  // a -> bottom-right, b -> top-left
            a = Rect{ox, oy, ow + right, oh + bottom};
            b = Rect{ox - left, oy - top, ow + left, oh + top};
            break;
        case 2:  // a -> top-right, b -> bottom-left
            a = Rect{ox, oy - top, ow + right, oh + top};
            b = Rect{ox - left, oy, ow + left, oh + bottom};
            break;
        default:  // a -> bottom-left, b -> top-right
            a = Rect{ox - left, oy, ow + left, oh + bottom};
            b = Rect{ox, oy - top, ow + right, oh + top};
            break;
    }
    return make_pair_geom(a, b, dims);
}

// View a is the whole image; view b is a patch of ~patch_ratio of its area,
// placed uniformly at random.
inline RectPair sample_patch_pair(Rng& rng, const ImageDims& dims, double patch_ratio) {
    if (patch_ratio < 0.05 || patch_ratio > 0.95)
        throw ParameterError("sample_patch_pair: patch_ratio must be in [0.05, 0.95]");
    int pw = 0, ph = 0;
    detail::round_rect_dims(patch_ratio * static_cast<double>(dims.area()),
                            detail::sample_log_uniform_aspect(rng), dims, pw, ph);
    const Rect a{0, 0, dims.w, dims.h};
    const Rect b{rng.uniform_int(0, dims.w - pw), rng.uniform_int(0, dims.h - ph), pw, ph};
    return make_pair_geom(a, b, dims);
}

// Two disjoint crops of equal target area excl_ratio/2 each, separated along
// a random axis. The [3/4, 4/3] aspect band is honored when it fits; for
// large ratios the side lengths are clamped so both crops still fit
// side by side, which can push the aspect outside the band.
inline RectPair sample_exclusive_pair(Rng& rng, const ImageDims& dims, double excl_ratio) {
    if (excl_ratio <= 0.0 || excl_ratio > 0.8)
        throw ParameterError("sample_exclusive_pair: excl_ratio must be in (0, 0.8]");
    const double crop_area = excl_ratio / 2.0 * static_cast<double>(dims.area());

    const bool vertical = rng.bernoulli(0.5);  // split by a vertical line
    const int major = vertical ? dims.w : dims.h;
    const int minor = vertical ? dims.h : dims.w;

    // Side length along the split axis: wide enough that the other side fits
    // within the image, narrow enough that two crops fit side by side.
    const int smin = std::max(1, static_cast<int>(std::ceil(crop_area / minor)));
    const int smax_aspect = std::max(1, static_cast<int>(std::floor(std::sqrt(crop_area * detail::kAspectHi))));
    if (2 * smin > major)
        throw ParameterError("sample_exclusive_pair: ratio infeasible for image size");

    auto sample_side = [&](int limit) {
        const int hi = std::min({smax_aspect, limit, major - smin});
        return rng.uniform_int(smin, std::max(smin, hi));
    };
    const int s1 = sample_side(major - smin);
    const int s2 = sample_side(major - s1);
    const int t1 = std::clamp(static_cast<int>(std::lround(crop_area / s1)), 1, minor);
    const int t2 = std::clamp(static_cast<int>(std::lround(crop_area / s2)), 1, minor);

    const int p1 = rng.uniform_int(0, major - s1 - s2);
    const int p2 = rng.uniform_int(p1 + s1, major - s2);
    const int q1 = rng.uniform_int(0, minor - t1);
    const int q2 = rng.uniform_int(0, minor - t2);

    Rect a, b;
    if (vertical) {
        a = Rect{p1, q1, s1, t1};
        b = Rect{p2, q2, s2, t2};
    } else {
        a = Rect{q1, p1, t1, s1};
        b = Rect{q2, p2, t2, s2};
    }
    return make_pair_geom(a, b, dims);
}

// Baseline random-resized-crop geometry: area fraction uniform in
// [scale_min, scale_max], aspect log-uniform in [3/4, 4/3].
inline Rect sample_random_crop(Rng& rng, const ImageDims& dims, double scale_min, double scale_max) {
    if (!(scale_min > 0.0) || scale_min > scale_max || scale_max > 1.0)
        throw ParameterError("sample_random_crop: need 0 < scale_min <= scale_max <= 1");
    for (int attempt = 0; attempt < 10; ++attempt) {
        const double scale = rng.uniform(scale_min, scale_max);
        int w = 0, h = 0;
        detail::round_rect_dims(scale * static_cast<double>(dims.area()),
                                detail::sample_log_uniform_aspect(rng), dims, w, h);
        const double got = static_cast<double>(w) * h / static_cast<double>(dims.area());
        if (got < scale_min || got > scale_max) continue;  // integer rounding pushed it out
        return Rect{rng.uniform_int(0, dims.w - w), rng.uniform_int(0, dims.h - h), w, h};
    }
    return Rect{0, 0, dims.w, dims.h};  // no feasible integer rect found
}

}  // namespace sslab
