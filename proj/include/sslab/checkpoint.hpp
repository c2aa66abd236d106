// Versioned binary checkpoint: model parameters, optimizer state, RNG state
// and epoch counter. Layout (little-endian):
//   magic "SSLABCK1"
//   u32 version (= 1)
//   u64 seed, i64 epoch
//   arch: i32 in_size, i32 conv_ch[3], i32 embed_dim, i32 pred_hidden,
//         f64 bn_eps, f64 bn_momentum, f64 input_mean[3], f64 input_std[3]
//   learnable tensors (for_each_learnable order): u64 count, f32 values
//   BN running buffers (for_each_buffer order): u64 count, f32 values
//   optimizer: i64 step, momentum buffers as u64 count + f32 values
//   u32 rng state length, mt19937_64 state as decimal text

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "sslab/common.hpp"
#include "sslab/model.hpp"

namespace sslab {

struct Checkpoint {
    ModelParams<float> params;
    OptState<float> opt;
    std::uint64_t seed = 0;
    long long epoch = 0;
    std::string rng_state;  // serialized std::mt19937_64
};

namespace detail {

template <typename X>
void wr(std::ostream& os, const X& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename X>
X rd(std::istream& is) {
    X v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!is) throw IngestionError("checkpoint: truncated file");
    return v;
}

inline void wr_vec(std::ostream& os, const std::vector<float>& v) {
    wr<std::uint64_t>(os, v.size());
    os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
}

inline void rd_vec(std::istream& is, std::vector<float>& v) {
    const auto n = rd<std::uint64_t>(is);
    if (n != v.size()) throw IngestionError("checkpoint: tensor size mismatch");
    is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(float)));
    if (!is) throw IngestionError("checkpoint: truncated tensor data");
}

}  // namespace detail

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write checkpoint: " + path.string());
    os.write("SSLABCK1", 8);
    detail::wr<std::uint32_t>(os, 1);
    detail::wr<std::uint64_t>(os, ck.seed);
    detail::wr<std::int64_t>(os, ck.epoch);
    const ArchCfg& a = ck.params.cfg;
    detail::wr<std::int32_t>(os, a.in_size);
    for (int i = 0; i < 3; ++i) detail::wr<std::int32_t>(os, a.conv_ch[i]);
    detail::wr<std::int32_t>(os, a.embed_dim);
    detail::wr<std::int32_t>(os, a.pred_hidden);
    detail::wr<double>(os, a.bn_eps);
    detail::wr<double>(os, a.bn_momentum);
    for (int i = 0; i < 3; ++i) detail::wr<double>(os, a.input_mean[i]);
    for (int i = 0; i < 3; ++i) detail::wr<double>(os, a.input_std[i]);
    auto& params = const_cast<ModelParams<float>&>(ck.params);
    for_each_learnable(params, [&](std::vector<float>& v) { detail::wr_vec(os, v); });
    for_each_buffer(params, [&](std::vector<float>& v) { detail::wr_vec(os, v); });
    detail::wr<std::int64_t>(os, ck.opt.step);
    detail::wr<std::uint64_t>(os, ck.opt.momentum.size());
    for (const auto& m : ck.opt.momentum) detail::wr_vec(os, m);
    detail::wr<std::uint32_t>(os, static_cast<std::uint32_t>(ck.rng_state.size()));
    os.write(ck.rng_state.data(), static_cast<std::streamsize>(ck.rng_state.size()));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IngestionError("cannot open checkpoint: " + path.string());
    char magic[8];
    is.read(magic, 8);
    if (!is || std::string(magic, 8) != "SSLABCK1") throw IngestionError("checkpoint: bad magic");
    if (detail::rd<std::uint32_t>(is) != 1) throw IngestionError("checkpoint: unknown version");
    Checkpoint ck;
    ck.seed = detail::rd<std::uint64_t>(is);
    ck.epoch = detail::rd<std::int64_t>(is);
    ArchCfg a;
    a.in_size = detail::rd<std::int32_t>(is);
    for (int i = 0; i < 3; ++i) a.conv_ch[i] = detail::rd<std::int32_t>(is);
    a.embed_dim = detail::rd<std::int32_t>(is);
    a.pred_hidden = detail::rd<std::int32_t>(is);
    a.bn_eps = detail::rd<double>(is);
    a.bn_momentum = detail::rd<double>(is);
    for (int i = 0; i < 3; ++i) a.input_mean[i] = detail::rd<double>(is);
    for (int i = 0; i < 3; ++i) a.input_std[i] = detail::rd<double>(is);
    Rng dummy(0);
    ck.params = init_params<float>(dummy, a);  // allocate correct shapes
    for_each_learnable(ck.params, [&](std::vector<float>& v) { detail::rd_vec(is, v); });
    for_each_buffer(ck.params, [&](std::vector<float>& v) { detail::rd_vec(is, v); });
    ck.opt.step = detail::rd<std::int64_t>(is);
    const auto nbuf = detail::rd<std::uint64_t>(is);
    ck.opt = [&] {
        OptState<float> s;
        s.step = ck.opt.step;
        return s;
    }();
    ck.opt.momentum.clear();
    size_t slot = 0;
    for_each_learnable(ck.params, [&](std::vector<float>& v) {
        if (slot++ < nbuf) {
            std::vector<float> m(v.size());
            detail::rd_vec(is, m);
            ck.opt.momentum.push_back(std::move(m));
        }
    });
    if (ck.opt.momentum.size() != nbuf) throw IngestionError("checkpoint: optimizer buffer count mismatch");
    const auto rng_len = detail::rd<std::uint32_t>(is);
    ck.rng_state.resize(rng_len);
    is.read(ck.rng_state.data(), rng_len);
    if (!is) throw IngestionError("checkpoint: truncated rng state");
    return ck;
}

}  // namespace sslab
