// Shared helpers for the versioned binary checkpoint formats.
#pragma once

#include <cstring>
#include <fstream>

#include "aesthnet/common.hpp"
#include "aesthnet/tensor.hpp"

namespace aesthnet::ckpt {

inline std::ofstream open_out(const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ValidationError("cannot open '" + path + "' for writing");
    return f;
}

inline std::ifstream open_in(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ValidationError("cannot open '" + path + "' for reading");
    return f;
}

inline void put_u32(std::ofstream& f, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    f.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(std::ifstream& f, const std::string& path) {
    unsigned char b[4];
    if (!f.read(reinterpret_cast<char*>(b), 4))
        throw ValidationError(path + ": truncated checkpoint");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

inline void put_blob(std::ofstream& f, const Tensor& t) {
    for (double d : t.data()) {
        float fv = static_cast<float>(d);
        std::uint32_t bits;
        std::memcpy(&bits, &fv, 4);
        put_u32(f, bits);
    }
}

inline Tensor get_blob(std::ifstream& f, Shape shape, const std::string& path) {
    std::vector<double> data(shape_numel(shape));
    for (auto& d : data) {
        std::uint32_t bits = get_u32(f, path);
        float fv;
        std::memcpy(&fv, &bits, 4);
        d = static_cast<double>(fv);
    }
    return Tensor(std::move(shape), std::move(data), true);
}

}  // namespace aesthnet::ckpt
