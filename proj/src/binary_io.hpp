#pragma once

// Little-endian helpers shared by the checkpoint and snapshot formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>

#include "vmlpic/core.hpp"

namespace vmlpic::detail {

template <class T>
T to_little(T value) {
    if constexpr (std::endian::native == std::endian::little) {
        return value;
    } else {
        unsigned char bytes[sizeof(T)];
        std::memcpy(bytes, &value, sizeof(T));
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
        std::memcpy(&value, bytes, sizeof(T));
        return value;
    }
}

template <class T>
void write_le(std::ostream& out, T value) {
    value = to_little(value);
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

inline void write_doubles(std::ostream& out, std::span<const double> values) {
    if constexpr (std::endian::native == std::endian::little) {
        out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
    } else {
        for (double v : values) write_le(out, v);
    }
}

template <class T>
T read_le(std::istream& in, const std::string& what) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw Error("truncated file while reading " + what);
    return to_little(value);
}

inline void read_doubles(std::istream& in, std::span<double> values, const std::string& what) {
    in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
    if (!in) throw Error("truncated file while reading " + what);
    if constexpr (std::endian::native != std::endian::little) {
        for (double& v : values) v = to_little(v);
    }
}

}  // namespace vmlpic::detail
