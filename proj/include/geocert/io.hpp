#pragma once

// Flat binary blob files: 16-byte magic, then a tensor count, then for each
// tensor a rank/dims preamble followed by little-endian 64-bit floats.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace geocert::io {

struct Blob {
    std::vector<std::uint64_t> shape;
    std::vector<double> data;
};

inline void write_blobs(const std::string& path, const char magic[16],
                        const std::vector<Blob>& blobs) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("io: cannot write " + path);
    out.write(magic, 16);
    const std::uint64_t n = blobs.size();
    out.write(reinterpret_cast<const char*>(&n), 8);
    for (const auto& b : blobs) {
        const std::uint64_t rank = b.shape.size();
        out.write(reinterpret_cast<const char*>(&rank), 8);
        for (std::uint64_t dim : b.shape) out.write(reinterpret_cast<const char*>(&dim), 8);
        std::uint64_t count = 1;
        for (std::uint64_t dim : b.shape) count *= dim;
        if (count != b.data.size()) throw std::logic_error("io: blob shape/data mismatch");
        out.write(reinterpret_cast<const char*>(b.data.data()),
                  static_cast<std::streamsize>(count * 8));
    }
    if (!out) throw std::runtime_error("io: short write to " + path);
}

inline std::vector<Blob> read_blobs(const std::string& path, const char magic[16]) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("io: cannot read " + path);
    char head[16];
    in.read(head, 16);
    if (!in || std::memcmp(head, magic, 16) != 0)
        throw std::runtime_error("io: bad magic in " + path);
    std::uint64_t n = 0;
    in.read(reinterpret_cast<char*>(&n), 8);
    std::vector<Blob> blobs(n);
    for (auto& b : blobs) {
        std::uint64_t rank = 0;
        in.read(reinterpret_cast<char*>(&rank), 8);
        b.shape.resize(rank);
        std::uint64_t count = 1;
        for (auto& dim : b.shape) {
            in.read(reinterpret_cast<char*>(&dim), 8);
            count *= dim;
        }
        b.data.resize(count);
        in.read(reinterpret_cast<char*>(b.data.data()), static_cast<std::streamsize>(count * 8));
        if (!in) throw std::runtime_error("io: truncated blob file " + path);
    }
    return blobs;
}

inline constexpr char kParamsMagic[17] = "GEOCERT.PARAMS.1";
inline constexpr char kCacheMagic[17] = "GEOCERT.WCACHE.1";

}  // namespace geocert::io
