// SimSiam negative-cosine invariance loss with stop-gradient and a margin
// gate. Three margin modes: none, fixed(m), distance(k * phi).

#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "sslab/common.hpp"

namespace sslab {

struct MarginSpec {
    enum class Mode { NoMargin, Fixed, Distance };
    Mode mode = Mode::NoMargin;
    double fixed_m = 0.2;   // Fixed: threshold = -1 + m, m in [0, 2)
    double distance_k = 0;  // Distance: threshold = clamp(-1 + k*phi, -1, 1)

    static MarginSpec none() { return MarginSpec{Mode::NoMargin, 0.0, 0.0}; }
    static MarginSpec fixed(double m) {
        if (m < 0.0 || m >= 2.0) throw ParameterError("MarginSpec: fixed margin must be in [0, 2)");
        return MarginSpec{Mode::Fixed, m, 0.0};
    }
    static MarginSpec distance(double k) {
        if (!(k > 0.0)) throw ParameterError("MarginSpec: distance k must be > 0");
        return MarginSpec{Mode::Distance, 0.0, k};
    }
};

// phi = image diagonal relaxes the threshold all the way to +1.
inline double default_distance_k(double image_diagonal) { return 2.0 / image_diagonal; }

template <typename T>
struct LossOutput {
    T value = 0;                    // sum of the two clamped terms, in [-2, 2]
    std::vector<T> grad_p1;         // d value / d p1; zero vector when gated
    std::vector<T> grad_p2;         // d value / d p2
    bool gated_1 = false;           // term (p1, sg(z2)) clamped at its threshold
    bool gated_2 = false;           // term (p2, sg(z1)) clamped
};

template <typename T>
T cosine(std::span<const T> a, std::span<const T> b) {
    if (a.size() != b.size()) throw ContractViolation("cosine: dimension mismatch");
    T dot = 0, na = 0, nb = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (!(na > 0) || !(nb > 0)) throw NumericDomainError("cosine: zero-norm input");
    return std::clamp<T>(dot / (std::sqrt(na) * std::sqrt(nb)), T(-1), T(1));
}

template <typename T>
T cosine(const std::vector<T>& a, const std::vector<T>& b) {
    return cosine(std::span<const T>(a), std::span<const T>(b));
}

// The gate level a term's -cos is clamped at. NoMargin yields -1, which the
// cosine range makes inert, recovering the vanilla loss exactly.
inline double margin_threshold(const MarginSpec& spec, double phi) {
    if (phi < 0.0) throw ParameterError("margin_threshold: phi must be >= 0");
    switch (spec.mode) {
        case MarginSpec::Mode::NoMargin:
            return -1.0;
        case MarginSpec::Mode::Fixed:
            return -1.0 + spec.fixed_m;
        case MarginSpec::Mode::Distance:
            return std::clamp(-1.0 + spec.distance_k * phi, -1.0, 1.0);
    }
    return -1.0;
}

namespace detail {

// One loss term max(-cos(p, sg(z)), thr). Returns the term value; writes the
// analytic gradient w.r.t. p into grad_p (zero when the term is gated, i.e.
// -cos <= thr). No gradient w.r.t. z exists: z is behind stop-gradient.
template <typename T>
T loss_term(std::span<const T> p, std::span<const T> z, T thr, std::vector<T>& grad_p, bool& gated) {
    const size_t d = p.size();
    T dot = 0, np2 = 0, nz2 = 0;
    for (size_t i = 0; i < d; ++i) {
        dot += p[i] * z[i];
        np2 += p[i] * p[i];
        nz2 += z[i] * z[i];
    }
    if (!(np2 > 0) || !(nz2 > 0)) throw NumericDomainError("simsiam_loss: zero-norm embedding");
    const T np = std::sqrt(np2);
    const T nz = std::sqrt(nz2);
    const T cos = dot / (np * nz);
    grad_p.assign(d, T(0));
    gated = -cos <= thr;  // exact equality counts as gated
    if (gated) return thr;
    // d(-cos)/dp = -(z / (|p||z|) - cos * p / |p|^2)
    for (size_t i = 0; i < d; ++i) grad_p[i] = -(z[i] / (np * nz) - cos * p[i] / np2);
    return -cos;
}

}  // namespace detail

// L = max(-cos(p1, sg(z2)), thr) + max(-cos(p2, sg(z1)), thr),
// thr = margin_threshold(spec, phi). Gradients flow into p only.
template <typename T>
LossOutput<T> simsiam_loss(std::span<const T> p1, std::span<const T> z1, std::span<const T> p2,
                           std::span<const T> z2, const MarginSpec& spec, double phi) {
    if (p1.size() != z2.size() || p2.size() != z1.size())
        throw ContractViolation("simsiam_loss: dimension mismatch");
    const T thr = static_cast<T>(margin_threshold(spec, phi));
    LossOutput<T> out;
    out.value = detail::loss_term(p1, z2, thr, out.grad_p1, out.gated_1) +
                detail::loss_term(p2, z1, thr, out.grad_p2, out.gated_2);
    return out;
}

template <typename T>
LossOutput<T> simsiam_loss(const std::vector<T>& p1, const std::vector<T>& z1, const std::vector<T>& p2,
                           const std::vector<T>& z2, const MarginSpec& spec, double phi) {
    return simsiam_loss(std::span<const T>(p1), std::span<const T>(z1), std::span<const T>(p2),
                        std::span<const T>(z2), spec, phi);
}

}  // namespace sslab
