#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "multiverse/errors.hpp"
#include "multiverse/loss.hpp"
#include "multiverse/network.hpp"

namespace multiverse {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format is little-endian; big-endian hosts need byte swaps");

/// Versioned binary model file: magic "MVL1", then (p, h, d, c, m) as
/// little-endian 64-bit integers, then 64-bit floats in the order
/// W1, b1, W2, b2, then per head F^r, b^r.
inline constexpr char kCheckpointMagic[4] = {'M', 'V', 'L', '1'};

namespace detail {

inline void put_u64(std::string& out, std::uint64_t v) {
    char buf[8];
    std::memcpy(buf, &v, 8);
    out.append(buf, 8);
}

inline void put_doubles(std::string& out, const double* data, std::size_t count) {
    out.append(reinterpret_cast<const char*>(data), count * sizeof(double));
}

}  // namespace detail

inline void save_checkpoint(const ReprNet& net, const MultiverseHeads& heads,
                            const std::filesystem::path& path) {
    validate_heads(heads);
    std::string blob;
    blob.append(kCheckpointMagic, 4);
    detail::put_u64(blob, net.input_dim());
    detail::put_u64(blob, net.hidden_dim());
    detail::put_u64(blob, net.repr_dim());
    detail::put_u64(blob, heads.class_count());
    detail::put_u64(blob, heads.head_count());
    detail::put_doubles(blob, net.w1.data(), net.w1.size());
    detail::put_doubles(blob, net.b1.data(), net.b1.size());
    detail::put_doubles(blob, net.w2.data(), net.w2.size());
    detail::put_doubles(blob, net.b2.data(), net.b2.size());
    for (std::size_t r = 0; r < heads.head_count(); ++r) {
        detail::put_doubles(blob, heads.weights[r].data(), heads.weights[r].size());
        detail::put_doubles(blob, heads.biases[r].data(), heads.biases[r].size());
    }

    namespace fs = std::filesystem;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot open " + tmp.string() + " for writing");
        out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
        if (!out.flush()) throw DataError("write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

struct Checkpoint {
    ReprNet net;
    MultiverseHeads heads;
};

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (blob.size() < 4 + 5 * 8 || std::memcmp(blob.data(), kCheckpointMagic, 4) != 0)
        throw ParseError(path.string() + ": not a MVL1 checkpoint", 1);
    std::size_t offset = 4;
    auto read_u64 = [&]() {
        std::uint64_t v;
        std::memcpy(&v, blob.data() + offset, 8);
        offset += 8;
        return v;
    };
    const std::uint64_t p = read_u64();
    const std::uint64_t h = read_u64();
    const std::uint64_t d = read_u64();
    const std::uint64_t c = read_u64();
    const std::uint64_t m = read_u64();
    const std::uint64_t doubles = h * p + h + d * h + d + m * (d * c + c);
    if (blob.size() != offset + doubles * sizeof(double))
        throw ParseError(path.string() + ": checkpoint size does not match its header", 1);

    auto read_block = [&](double* dst, std::size_t count) {
        std::memcpy(dst, blob.data() + offset, count * sizeof(double));
        offset += count * sizeof(double);
    };
    Checkpoint ckpt;
    ckpt.net.w1 = Matrix(h, p);
    read_block(ckpt.net.w1.data(), h * p);
    ckpt.net.b1.assign(h, 0.0);
    read_block(ckpt.net.b1.data(), h);
    ckpt.net.w2 = Matrix(d, h);
    read_block(ckpt.net.w2.data(), d * h);
    ckpt.net.b2.assign(d, 0.0);
    read_block(ckpt.net.b2.data(), d);
    for (std::uint64_t r = 0; r < m; ++r) {
        Matrix f(d, c);
        read_block(f.data(), d * c);
        Vector b(c, 0.0);
        read_block(b.data(), c);
        ckpt.heads.weights.push_back(std::move(f));
        ckpt.heads.biases.push_back(std::move(b));
    }
    return ckpt;
}

}  // namespace multiverse
