// Miniature differentiable SimSiam network: 3-conv encoder, FC projector,
// FC predictor, batch normalization, exact hand-written backward pass, and
// SGD with momentum. Templated on the scalar type so training runs in float
// while gradient checks run in double.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "sslab/common.hpp"
#include "sslab/image.hpp"

namespace sslab {

template <typename T>
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<T> v;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * c, T(0)) {}
    T& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
    T at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }
    std::vector<T> row(int r) const { return {v.begin() + static_cast<size_t>(r) * cols, v.begin() + static_cast<size_t>(r + 1) * cols}; }
};

struct ArchCfg {
    int in_size = 32;      // must be divisible by 4 (two 2x2 maxpools)
    int conv_ch[3] = {16, 32, 64};
    int embed_dim = 64;    // projector output dim (z and p)
    int pred_hidden = 32;  // predictor bottleneck
    double bn_eps = 1e-5;
    double bn_momentum = 0.9;  // running <- mom * running + (1 - mom) * batch
    // Per-channel input standardization (x - mean) / stddev.
    double input_mean[3] = {0.5, 0.5, 0.5};
    double input_std[3] = {0.25, 0.25, 0.25};
};

template <typename T>
struct ConvLayer {
    int in_c = 0, out_c = 0;
    std::vector<T> w;  // [out_c][in_c][3][3]
    std::vector<T> b;  // [out_c]
};

template <typename T>
struct FcLayer {
    int in_d = 0, out_d = 0;
    std::vector<T> w;  // [out_d][in_d]
    std::vector<T> b;  // [out_d]
};

template <typename T>
struct BnLayer {
    int d = 0;
    std::vector<T> gamma, beta;
    std::vector<T> run_mean, run_var;  // buffers, not learnable
};

template <typename T>
struct ModelParams {
    ArchCfg cfg;
    ConvLayer<T> conv1, conv2, conv3;
    FcLayer<T> proj_fc1, proj_fc2;
    BnLayer<T> proj_bn;
    FcLayer<T> pred_fc1, pred_fc2;
    BnLayer<T> pred_bn;
};

// Applies f to every learnable tensor, in a fixed order shared by the
// gradient container, the optimizer state, and the checkpoint format.
template <typename T, typename F>
void for_each_learnable(ModelParams<T>& p, F&& f) {
    f(p.conv1.w); f(p.conv1.b);
    f(p.conv2.w); f(p.conv2.b);
    f(p.conv3.w); f(p.conv3.b);
    f(p.proj_fc1.w); f(p.proj_fc1.b);
    f(p.proj_bn.gamma); f(p.proj_bn.beta);
    f(p.proj_fc2.w); f(p.proj_fc2.b);
    f(p.pred_fc1.w); f(p.pred_fc1.b);
    f(p.pred_bn.gamma); f(p.pred_bn.beta);
    f(p.pred_fc2.w); f(p.pred_fc2.b);
}

template <typename T, typename F>
void for_each_buffer(ModelParams<T>& p, F&& f) {
    f(p.proj_bn.run_mean); f(p.proj_bn.run_var);
    f(p.pred_bn.run_mean); f(p.pred_bn.run_var);
}

namespace detail {

template <typename T>
ConvLayer<T> init_conv(Rng& rng, int in_c, int out_c) {
    ConvLayer<T> l{in_c, out_c};
    l.w.resize(static_cast<size_t>(out_c) * in_c * 9);
    l.b.assign(out_c, T(0));
    const double std = std::sqrt(2.0 / (in_c * 9));
    for (T& x : l.w) x = static_cast<T>(rng.normal() * std);
    return l;
}

template <typename T>
FcLayer<T> init_fc(Rng& rng, int in_d, int out_d) {
    FcLayer<T> l{in_d, out_d};
    l.w.resize(static_cast<size_t>(out_d) * in_d);
    l.b.assign(out_d, T(0));
    const double std = std::sqrt(2.0 / in_d);
    for (T& x : l.w) x = static_cast<T>(rng.normal() * std);
    return l;
}

template <typename T>
BnLayer<T> init_bn(int d) {
    BnLayer<T> l{d};
    l.gamma.assign(d, T(1));
    l.beta.assign(d, T(0));
    l.run_mean.assign(d, T(0));
    l.run_var.assign(d, T(1));
    return l;
}

}  // namespace detail

// He-style fan-in initialization; biases and BN shifts zero, BN scales one.
template <typename T>
ModelParams<T> init_params(Rng& rng, const ArchCfg& cfg) {
    if (cfg.in_size < 8 || cfg.in_size % 4 != 0)
        throw ParameterError("init_params: in_size must be >= 8 and divisible by 4");
    ModelParams<T> p;
    p.cfg = cfg;
    p.conv1 = detail::init_conv<T>(rng, 3, cfg.conv_ch[0]);
    p.conv2 = detail::init_conv<T>(rng, cfg.conv_ch[0], cfg.conv_ch[1]);
    p.conv3 = detail::init_conv<T>(rng, cfg.conv_ch[1], cfg.conv_ch[2]);
    p.proj_fc1 = detail::init_fc<T>(rng, cfg.conv_ch[2], cfg.embed_dim);
    p.proj_bn = detail::init_bn<T>(cfg.embed_dim);
    p.proj_fc2 = detail::init_fc<T>(rng, cfg.embed_dim, cfg.embed_dim);
    p.pred_fc1 = detail::init_fc<T>(rng, cfg.embed_dim, cfg.pred_hidden);
    p.pred_bn = detail::init_bn<T>(cfg.pred_hidden);
    p.pred_fc2 = detail::init_fc<T>(rng, cfg.pred_hidden, cfg.embed_dim);
    return p;
}

template <typename T>
ModelParams<T> zero_like(const ModelParams<T>& src) {
    ModelParams<T> g = src;
    for_each_learnable(g, [](std::vector<T>& v) { std::fill(v.begin(), v.end(), T(0)); });
    for_each_buffer(g, [](std::vector<T>& v) { std::fill(v.begin(), v.end(), T(0)); });
    return g;
}

// Per-view activation cache retained for the backward pass.
template <typename T>
struct ForwardCache {
    int batch = 0;
    bool training = true;
    std::vector<T> input;                      // B x 3 x S x S, standardized, planar
    std::vector<T> conv1_pre, conv2_pre, conv3_pre;  // pre-ReLU conv outputs
    std::vector<int> pool1_idx, pool2_idx;     // argmax offsets within the input plane
    std::vector<T> pool1_out, pool2_out;       // ReLU'd + pooled
    Mat<T> enc;                                // B x 64 after global average pool
    Mat<T> proj_h_pre;                         // fc1 output (BN input)
    Mat<T> proj_bn_xhat, proj_bn_out;
    std::vector<T> proj_bn_invstd, proj_bn_mean;
    Mat<T> proj_relu;                          // BN + ReLU
    Mat<T> z;
    Mat<T> pred_h_pre;
    Mat<T> pred_bn_xhat, pred_bn_out;
    std::vector<T> pred_bn_invstd, pred_bn_mean;
    Mat<T> pred_relu;
    Mat<T> p;
};

namespace detail {

inline constexpr int kMaxConvSide = 256;

// Adds a 1D 3-tap stencil of `src` (weights w0,w1,w2 for offsets -1,0,+1,
// zero-padded at the row ends) into the accumulator row.
template <typename T>
inline void stencil_row_add(T* acc, const T* src, T w0, T w1, T w2, int S) {
    acc[0] += w1 * src[0] + w2 * src[1];
    for (int x = 1; x < S - 1; ++x) acc[x] += w0 * src[x - 1] + w1 * src[x] + w2 * src[x + 1];
    acc[S - 1] += w0 * src[S - 2] + w1 * src[S - 1];
}

// 3x3 same-padding convolution, NCHW planar. Each output row is accumulated
// in a stack buffer and stored once, instead of read-modify-writing the
// output plane per (channel, tap) pass.
template <typename T>
void conv3x3_forward(const ConvLayer<T>& l, const T* in, T* out, int B, int S) {
    if (S < 2 || S > kMaxConvSide) throw ContractViolation("conv3x3: side length out of supported range");
    const size_t plane = static_cast<size_t>(S) * S;
    T acc[kMaxConvSide];
    for (int b = 0; b < B; ++b) {
        const T* inb = in + static_cast<size_t>(b) * l.in_c * plane;
        T* outb = out + static_cast<size_t>(b) * l.out_c * plane;
        for (int oc = 0; oc < l.out_c; ++oc) {
            T* op = outb + oc * plane;
            const T* wbase = l.w.data() + static_cast<size_t>(oc) * l.in_c * 9;
            for (int y = 0; y < S; ++y) {
                for (int x = 0; x < S; ++x) acc[x] = l.b[oc];
                for (int ic = 0; ic < l.in_c; ++ic) {
                    const T* ip = inb + ic * plane;
                    const T* wk = wbase + ic * 9;
                    for (int ky = 0; ky < 3; ++ky) {
                        const int sy = y + ky - 1;
                        if (sy < 0 || sy >= S) continue;
                        stencil_row_add(acc, ip + static_cast<size_t>(sy) * S, wk[ky * 3], wk[ky * 3 + 1],
                                        wk[ky * 3 + 2], S);
                    }
                }
                std::copy(acc, acc + S, op + static_cast<size_t>(y) * S);
            }
        }
    }
}

// Backward of conv3x3: accumulates weight/bias grads, writes input grads.
// gin(ic) rows are accumulated via the transposed stencil (flipped kernel,
// channels swapped), again one store per row.
template <typename T>
void conv3x3_backward(const ConvLayer<T>& l, const T* in, const T* gout, T* gin, ConvLayer<T>& gl, int B, int S) {
    const size_t plane = static_cast<size_t>(S) * S;
    for (int b = 0; b < B; ++b) {
        const T* inb = in + static_cast<size_t>(b) * l.in_c * plane;
        const T* goutb = gout + static_cast<size_t>(b) * l.out_c * plane;

        for (int oc = 0; oc < l.out_c; ++oc) {
            const T* gp = goutb + oc * plane;
            T gb = 0;
            for (size_t i = 0; i < plane; ++i) gb += gp[i];
            gl.b[oc] += gb;
            // Weight grads: gw(ky,kx) = sum_y <gout row y, in row y+ky-1 shifted by kx-1>.
            // Accumulated per x-position first so the inner loops are
            // element-wise (vectorizable) rather than scalar reductions.
            for (int ic = 0; ic < l.in_c; ++ic) {
                const T* ip = inb + ic * plane;
                T* gwk = gl.w.data() + (static_cast<size_t>(oc) * l.in_c + ic) * 9;
                for (int ky = 0; ky < 3; ++ky) {
                    T a0[kMaxConvSide], a1[kMaxConvSide], a2[kMaxConvSide];
                    std::fill(a0, a0 + S, T(0));
                    std::fill(a1, a1 + S, T(0));
                    std::fill(a2, a2 + S, T(0));
                    const int dy = ky - 1;
                    const int y0 = std::max(0, -dy), y1 = std::min(S, S - dy);
                    for (int y = y0; y < y1; ++y) {
                        const T* grow = gp + static_cast<size_t>(y) * S;
                        const T* irow = ip + static_cast<size_t>(y + dy) * S;
                        for (int x = 1; x < S; ++x) a0[x] += grow[x] * irow[x - 1];
                        for (int x = 0; x < S; ++x) a1[x] += grow[x] * irow[x];
                        for (int x = 0; x < S - 1; ++x) a2[x] += grow[x] * irow[x + 1];
                    }
                    T g0 = 0, g1 = 0, g2 = 0;
                    for (int x = 0; x < S; ++x) {
                        g0 += a0[x];
                        g1 += a1[x];
                        g2 += a2[x];
                    }
                    gwk[ky * 3] += g0;
                    gwk[ky * 3 + 1] += g1;
                    gwk[ky * 3 + 2] += g2;
                }
            }
        }

        if (gin) {
            T* ginb = gin + static_cast<size_t>(b) * l.in_c * plane;
            for (int ic = 0; ic < l.in_c; ++ic) {
                T* gip = ginb + ic * plane;
                std::fill(gip, gip + plane, T(0));
                for (int oc = 0; oc < l.out_c; ++oc) {
                    const T* gp = goutb + oc * plane;
                    const T* wk = l.w.data() + (static_cast<size_t>(oc) * l.in_c + ic) * 9;
                    // gin(y,x) += w(ky,kx) * gout(y-(ky-1), x-(kx-1)).
                    for (int ky = 0; ky < 3; ++ky) {
                        const int dy = ky - 1;
                        const int y0 = std::max(0, dy), y1 = std::min(S, S + dy);
                        for (int y = y0; y < y1; ++y)
                            stencil_row_add(gip + static_cast<size_t>(y) * S,
                                            gp + static_cast<size_t>(y - dy) * S, wk[ky * 3 + 2],
                                            wk[ky * 3 + 1], wk[ky * 3], S);
                    }
                }
            }
        }
    }
}

// ReLU + 2x2 maxpool (stride 2) on pre-activation planes. Records the argmax
// offset within each input plane; ties go to the first element scanned.
template <typename T>
void relu_maxpool2(const T* pre, T* out, int* idx, int B, int C, int S) {
    const int So = S / 2;
    const size_t plane = static_cast<size_t>(S) * S;
    const size_t oplane = static_cast<size_t>(So) * So;
    for (int bc = 0; bc < B * C; ++bc) {
        const T* ip = pre + bc * plane;
        T* op = out + bc * oplane;
        int* xp = idx + bc * oplane;
        for (int y = 0; y < So; ++y)
            for (int x = 0; x < So; ++x) {
                int best = (2 * y) * S + 2 * x;
                T bv = ip[best];
                const int cand[3] = {(2 * y) * S + 2 * x + 1, (2 * y + 1) * S + 2 * x, (2 * y + 1) * S + 2 * x + 1};
                for (int cidx : cand)
                    if (ip[cidx] > bv) { bv = ip[cidx]; best = cidx; }
                op[y * So + x] = bv > T(0) ? bv : T(0);
                xp[y * So + x] = best;
            }
    }
}

template <typename T>
void relu_maxpool2_backward(const T* pre, const T* gout, T* gpre, const int* idx, int B, int C, int S) {
    const int So = S / 2;
    const size_t plane = static_cast<size_t>(S) * S;
    const size_t oplane = static_cast<size_t>(So) * So;
    std::fill(gpre, gpre + static_cast<size_t>(B) * C * plane, T(0));
    for (int bc = 0; bc < B * C; ++bc) {
        const T* ip = pre + bc * plane;
        const T* gp = gout + bc * oplane;
        T* gi = gpre + bc * plane;
        const int* xp = idx + bc * oplane;
        for (size_t i = 0; i < oplane; ++i)
            if (ip[xp[i]] > T(0)) gi[xp[i]] += gp[i];
    }
}

template <typename T>
void fc_forward(const FcLayer<T>& l, const Mat<T>& in, Mat<T>& out) {
    out = Mat<T>(in.rows, l.out_d);
    for (int r = 0; r < in.rows; ++r)
        for (int o = 0; o < l.out_d; ++o) {
            const T* wr = l.w.data() + static_cast<size_t>(o) * l.in_d;
            const T* xr = in.v.data() + static_cast<size_t>(r) * l.in_d;
            T acc = l.b[o];
            for (int i = 0; i < l.in_d; ++i) acc += wr[i] * xr[i];
            out.at(r, o) = acc;
        }
}

template <typename T>
void fc_backward(const FcLayer<T>& l, const Mat<T>& in, const Mat<T>& gout, Mat<T>& gin, FcLayer<T>& gl) {
    gin = Mat<T>(in.rows, l.in_d);
    for (int r = 0; r < in.rows; ++r)
        for (int o = 0; o < l.out_d; ++o) {
            const T g = gout.at(r, o);
            gl.b[o] += g;
            T* gwr = gl.w.data() + static_cast<size_t>(o) * l.in_d;
            const T* xr = in.v.data() + static_cast<size_t>(r) * l.in_d;
            T* gir = gin.v.data() + static_cast<size_t>(r) * l.in_d;
            const T* wr = l.w.data() + static_cast<size_t>(o) * l.in_d;
            for (int i = 0; i < l.in_d; ++i) {
                gwr[i] += g * xr[i];
                gir[i] += g * wr[i];
            }
        }
}

// Batch normalization over the batch dimension. Training mode uses batch
// statistics (biased variance) and updates the running buffers in place.
template <typename T>
void bn_forward(BnLayer<T>& l, const Mat<T>& in, bool training, double eps, double momentum, Mat<T>& xhat,
                Mat<T>& out, std::vector<T>& mean_out, std::vector<T>& invstd_out) {
    const int B = in.rows, D = in.cols;
    xhat = Mat<T>(B, D);
    out = Mat<T>(B, D);
    mean_out.assign(D, T(0));
    invstd_out.assign(D, T(0));
    for (int j = 0; j < D; ++j) {
        T m, istd;
        if (training) {
            T sum = 0;
            for (int r = 0; r < B; ++r) sum += in.at(r, j);
            m = sum / static_cast<T>(B);
            T var = 0;
            for (int r = 0; r < B; ++r) {
                const T d = in.at(r, j) - m;
                var += d * d;
            }
            var /= static_cast<T>(B);
            istd = T(1) / std::sqrt(var + static_cast<T>(eps));
            l.run_mean[j] = static_cast<T>(momentum) * l.run_mean[j] + static_cast<T>(1.0 - momentum) * m;
            l.run_var[j] = static_cast<T>(momentum) * l.run_var[j] + static_cast<T>(1.0 - momentum) * var;
        } else {
            m = l.run_mean[j];
            istd = T(1) / std::sqrt(l.run_var[j] + static_cast<T>(eps));
        }
        mean_out[j] = m;
        invstd_out[j] = istd;
        for (int r = 0; r < B; ++r) {
            const T xh = (in.at(r, j) - m) * istd;
            xhat.at(r, j) = xh;
            out.at(r, j) = l.gamma[j] * xh + l.beta[j];
        }
    }
}

// Backward through training-mode BN (batch statistics are differentiated).
template <typename T>
void bn_backward(const BnLayer<T>& l, const Mat<T>& xhat, const std::vector<T>& invstd, const Mat<T>& gout,
                 Mat<T>& gin, BnLayer<T>& gl) {
    const int B = xhat.rows, D = xhat.cols;
    gin = Mat<T>(B, D);
    for (int j = 0; j < D; ++j) {
        T sum_g = 0, sum_gx = 0;
        for (int r = 0; r < B; ++r) {
            const T g = gout.at(r, j);
            sum_g += g;
            sum_gx += g * xhat.at(r, j);
        }
        gl.beta[j] += sum_g;
        gl.gamma[j] += sum_gx;
        const T scale = l.gamma[j] * invstd[j] / static_cast<T>(B);
        for (int r = 0; r < B; ++r) {
            const T g = gout.at(r, j);
            gin.at(r, j) = scale * (static_cast<T>(B) * g - sum_g - xhat.at(r, j) * sum_gx);
        }
    }
}

// Inference-mode BN backward: statistics are constants.
template <typename T>
void bn_backward_inference(const BnLayer<T>& l, const Mat<T>& xhat, const std::vector<T>& invstd,
                           const Mat<T>& gout, Mat<T>& gin, BnLayer<T>& gl) {
    const int B = xhat.rows, D = xhat.cols;
    gin = Mat<T>(B, D);
    for (int j = 0; j < D; ++j)
        for (int r = 0; r < B; ++r) {
            const T g = gout.at(r, j);
            gl.beta[j] += g;
            gl.gamma[j] += g * xhat.at(r, j);
            gin.at(r, j) = g * l.gamma[j] * invstd[j];
        }
}

template <typename T>
void relu_forward(const Mat<T>& in, Mat<T>& out) {
    out = in;
    for (T& x : out.v) x = x > T(0) ? x : T(0);
}

}  // namespace detail

// Converts HWC [0,1] images to standardized planar NCHW model input.
template <typename T>
std::vector<T> to_model_input(const std::vector<Image>& batch, const ArchCfg& cfg) {
    const int S = cfg.in_size;
    std::vector<T> out(static_cast<size_t>(batch.size()) * 3 * S * S);
    for (size_t b = 0; b < batch.size(); ++b) {
        const Image& img = batch[b];
        if (img.h != S || img.w != S || img.c != 3)
            throw ContractViolation("to_model_input: image size does not match arch in_size");
        for (int ch = 0; ch < 3; ++ch) {
            T* plane = out.data() + (b * 3 + ch) * static_cast<size_t>(S) * S;
            for (int y = 0; y < S; ++y)
                for (int x = 0; x < S; ++x)
                    plane[y * S + x] =
                        static_cast<T>((img.at(y, x, ch) - cfg.input_mean[ch]) / cfg.input_std[ch]);
        }
    }
    return out;
}

template <typename T>
struct ForwardOutput {
    Mat<T> z;  // projector output, B x embed_dim
    Mat<T> p;  // predictor output, B x embed_dim
};

// Full forward pass over one view batch. Training mode uses batch statistics
// in BN layers and updates running buffers; it requires batch size >= 2.
template <typename T>
ForwardOutput<T> forward(ModelParams<T>& params, const std::vector<Image>& batch, bool training,
                         ForwardCache<T>* cache = nullptr) {
    const int B = static_cast<int>(batch.size());
    if (B < 1) throw ParameterError("forward: empty batch");
    if (training && B < 2) throw ParameterError("forward: training mode needs batch size >= 2");
    const ArchCfg& cfg = params.cfg;
    const int S0 = cfg.in_size, S1 = S0 / 2, S2 = S1 / 2;
    const int C1 = cfg.conv_ch[0], C2 = cfg.conv_ch[1], C3 = cfg.conv_ch[2];

    ForwardCache<T> local;
    ForwardCache<T>& c = cache ? *cache : local;
    c = ForwardCache<T>{};
    c.batch = B;
    c.training = training;
    c.input = to_model_input<T>(batch, cfg);

    c.conv1_pre.resize(static_cast<size_t>(B) * C1 * S0 * S0);
    detail::conv3x3_forward(params.conv1, c.input.data(), c.conv1_pre.data(), B, S0);
    c.pool1_out.resize(static_cast<size_t>(B) * C1 * S1 * S1);
    c.pool1_idx.resize(c.pool1_out.size());
    detail::relu_maxpool2(c.conv1_pre.data(), c.pool1_out.data(), c.pool1_idx.data(), B, C1, S0);

    c.conv2_pre.resize(static_cast<size_t>(B) * C2 * S1 * S1);
    detail::conv3x3_forward(params.conv2, c.pool1_out.data(), c.conv2_pre.data(), B, S1);
    c.pool2_out.resize(static_cast<size_t>(B) * C2 * S2 * S2);
    c.pool2_idx.resize(c.pool2_out.size());
    detail::relu_maxpool2(c.conv2_pre.data(), c.pool2_out.data(), c.pool2_idx.data(), B, C2, S1);

    c.conv3_pre.resize(static_cast<size_t>(B) * C3 * S2 * S2);
    detail::conv3x3_forward(params.conv3, c.pool2_out.data(), c.conv3_pre.data(), B, S2);

    // ReLU + global average pool.
    c.enc = Mat<T>(B, C3);
    const size_t plane3 = static_cast<size_t>(S2) * S2;
    for (int b = 0; b < B; ++b)
        for (int ch = 0; ch < C3; ++ch) {
            const T* ip = c.conv3_pre.data() + (static_cast<size_t>(b) * C3 + ch) * plane3;
            T acc = 0;
            for (size_t i = 0; i < plane3; ++i) acc += ip[i] > T(0) ? ip[i] : T(0);
            c.enc.at(b, ch) = acc / static_cast<T>(plane3);
        }

    detail::fc_forward(params.proj_fc1, c.enc, c.proj_h_pre);
    detail::bn_forward(params.proj_bn, c.proj_h_pre, training, cfg.bn_eps, cfg.bn_momentum, c.proj_bn_xhat,
                       c.proj_bn_out, c.proj_bn_mean, c.proj_bn_invstd);
    detail::relu_forward(c.proj_bn_out, c.proj_relu);
    detail::fc_forward(params.proj_fc2, c.proj_relu, c.z);

    detail::fc_forward(params.pred_fc1, c.z, c.pred_h_pre);
    detail::bn_forward(params.pred_bn, c.pred_h_pre, training, cfg.bn_eps, cfg.bn_momentum, c.pred_bn_xhat,
                       c.pred_bn_out, c.pred_bn_mean, c.pred_bn_invstd);
    detail::relu_forward(c.pred_bn_out, c.pred_relu);
    detail::fc_forward(params.pred_fc2, c.pred_relu, c.p);

    return ForwardOutput<T>{c.z, c.p};
}

namespace detail {

// Backprop one view: upstream gradient arrives at p only (the loss sees z
// behind stop-gradient), then flows predictor -> z -> projector -> encoder.
template <typename T>
void backward_view(const ModelParams<T>& params, const ForwardCache<T>& c, const Mat<T>& grad_p,
                   ModelParams<T>& grads) {
    const ArchCfg& cfg = params.cfg;
    const int B = c.batch;
    const int S0 = cfg.in_size, S1 = S0 / 2, S2 = S1 / 2;
    const int C1 = cfg.conv_ch[0], C2 = cfg.conv_ch[1], C3 = cfg.conv_ch[2];
    if (grad_p.rows != B || grad_p.cols != cfg.embed_dim)
        throw ContractViolation("backward: gradient shape does not match cache");

    Mat<T> g;
    fc_backward(params.pred_fc2, c.pred_relu, grad_p, g, grads.pred_fc2);
    for (size_t i = 0; i < g.v.size(); ++i)
        if (c.pred_bn_out.v[i] <= T(0)) g.v[i] = T(0);
    Mat<T> g2;
    if (c.training)
        bn_backward(params.pred_bn, c.pred_bn_xhat, c.pred_bn_invstd, g, g2, grads.pred_bn);
    else
        bn_backward_inference(params.pred_bn, c.pred_bn_xhat, c.pred_bn_invstd, g, g2, grads.pred_bn);
    Mat<T> grad_z;
    fc_backward(params.pred_fc1, c.z, g2, grad_z, grads.pred_fc1);

    fc_backward(params.proj_fc2, c.proj_relu, grad_z, g, grads.proj_fc2);
    for (size_t i = 0; i < g.v.size(); ++i)
        if (c.proj_bn_out.v[i] <= T(0)) g.v[i] = T(0);
    if (c.training)
        bn_backward(params.proj_bn, c.proj_bn_xhat, c.proj_bn_invstd, g, g2, grads.proj_bn);
    else
        bn_backward_inference(params.proj_bn, c.proj_bn_xhat, c.proj_bn_invstd, g, g2, grads.proj_bn);
    Mat<T> grad_enc;
    fc_backward(params.proj_fc1, c.enc, g2, grad_enc, grads.proj_fc1);

    // Undo global average pool + ReLU.
    const size_t plane3 = static_cast<size_t>(S2) * S2;
    std::vector<T> gconv3(static_cast<size_t>(B) * C3 * plane3);
    for (int b = 0; b < B; ++b)
        for (int ch = 0; ch < C3; ++ch) {
            const T gv = grad_enc.at(b, ch) / static_cast<T>(plane3);
            const T* pre = c.conv3_pre.data() + (static_cast<size_t>(b) * C3 + ch) * plane3;
            T* gp = gconv3.data() + (static_cast<size_t>(b) * C3 + ch) * plane3;
            for (size_t i = 0; i < plane3; ++i) gp[i] = pre[i] > T(0) ? gv : T(0);
        }

    std::vector<T> gpool2(c.pool2_out.size());
    conv3x3_backward(params.conv3, c.pool2_out.data(), gconv3.data(), gpool2.data(), grads.conv3, B, S2);
    std::vector<T> gconv2(c.conv2_pre.size());
    relu_maxpool2_backward(c.conv2_pre.data(), gpool2.data(), gconv2.data(), c.pool2_idx.data(), B, C2, S1);

    std::vector<T> gpool1(c.pool1_out.size());
    conv3x3_backward(params.conv2, c.pool1_out.data(), gconv2.data(), gpool1.data(), grads.conv2, B, S1);
    std::vector<T> gconv1(c.conv1_pre.size());
    relu_maxpool2_backward(c.conv1_pre.data(), gpool1.data(), gconv1.data(), c.pool1_idx.data(), B, C1, S0);

    conv3x3_backward(params.conv1, c.input.data(), gconv1.data(), static_cast<T*>(nullptr), grads.conv1, B, S0);
}

}  // namespace detail

// Exact parameter gradients for the two-view batch given the loss gradients
// w.r.t. p1 and p2. z receives no direct loss gradient (stop-gradient); the
// encoder and projector are reached only through the predictor's input.
template <typename T>
ModelParams<T> backward(const ModelParams<T>& params, const ForwardCache<T>& c1, const ForwardCache<T>& c2,
                        const Mat<T>& grad_p1, const Mat<T>& grad_p2) {
    if (c1.batch != c2.batch) throw ContractViolation("backward: view caches have different batch sizes");
    ModelParams<T> grads = zero_like(params);
    detail::backward_view(params, c1, grad_p1, grads);
    detail::backward_view(params, c2, grad_p2, grads);
    return grads;
}

struct OptCfg {
    double lr = 0.03 * 128.0 / 256.0;
    double momentum = 0.9;
    double weight_decay = 5e-4;
};

template <typename T>
struct OptState {
    std::vector<std::vector<T>> momentum;  // one buffer per learnable tensor
    long long step = 0;
};

template <typename T>
OptState<T> init_opt_state(ModelParams<T>& params) {
    OptState<T> s;
    for_each_learnable(params, [&](std::vector<T>& v) { s.momentum.emplace_back(v.size(), T(0)); });
    return s;
}

// v <- mu * v + g + wd * theta; theta <- theta - lr * v
template <typename T>
void sgd_step(ModelParams<T>& params, ModelParams<T>& grads, const OptCfg& cfg, OptState<T>& state) {
    size_t slot = 0;
    std::vector<std::vector<T>*> gptrs;
    for_each_learnable(grads, [&](std::vector<T>& v) { gptrs.push_back(&v); });
    for_each_learnable(params, [&](std::vector<T>& theta) {
        std::vector<T>& g = *gptrs[slot];
        std::vector<T>& v = state.momentum[slot];
        if (g.size() != theta.size() || v.size() != theta.size())
            throw ContractViolation("sgd_step: shape mismatch");
        for (size_t i = 0; i < theta.size(); ++i) {
            v[i] = static_cast<T>(cfg.momentum) * v[i] + g[i] + static_cast<T>(cfg.weight_decay) * theta[i];
            theta[i] -= static_cast<T>(cfg.lr) * v[i];
        }
        ++slot;
    });
    ++state.step;
}

// Mean per-dimension standard deviation of row-normalized embeddings.
// Collapse drives this to 0; healthy training stays above 0.5 / sqrt(d).
template <typename T>
double collapse_monitor(const Mat<T>& z) {
    if (z.rows < 2) return 0.0;
    const int B = z.rows, D = z.cols;
    std::vector<double> norm(static_cast<size_t>(B) * D);
    for (int r = 0; r < B; ++r) {
        double n2 = 0;
        for (int j = 0; j < D; ++j) n2 += static_cast<double>(z.at(r, j)) * z.at(r, j);
        const double inv = n2 > 0 ? 1.0 / std::sqrt(n2) : 0.0;
        for (int j = 0; j < D; ++j) norm[static_cast<size_t>(r) * D + j] = z.at(r, j) * inv;
    }
    double total = 0;
    for (int j = 0; j < D; ++j) {
        double m = 0;
        for (int r = 0; r < B; ++r) m += norm[static_cast<size_t>(r) * D + j];
        m /= B;
        double var = 0;
        for (int r = 0; r < B; ++r) {
            const double d = norm[static_cast<size_t>(r) * D + j] - m;
            var += d * d;
        }
        total += std::sqrt(var / B);
    }
    return total / D;
}

}  // namespace sslab
