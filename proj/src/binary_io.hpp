#pragma once

#include <array>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <type_traits>

#include "trialmatch/error.hpp"

// Segment files are written in host byte order (little-endian on every
// supported target).
namespace trialmatch::binary {

template <typename T>
    requires std::is_trivially_copyable_v<T>
void put(std::ostream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
    requires std::is_trivially_copyable_v<T>
T get(std::istream& in) {
    T value{};
    if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
        throw Error(Errc::IndexFormat, "truncated index segment");
    }
    return value;
}

inline void put_string(std::ostream& out, std::string_view s) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& in) {
    const auto n = get<std::uint32_t>(in);
    std::string s(n, '\0');
    if (n > 0 && !in.read(s.data(), n)) throw Error(Errc::IndexFormat, "truncated index segment");
    return s;
}

inline void put_header(std::ostream& out, std::string_view magic, std::uint32_t version) {
    out.write(magic.data(), 4);
    put(out, version);
}

inline std::uint32_t check_header(std::istream& in, std::string_view magic, std::uint32_t max_version) {
    std::array<char, 4> got{};
    if (!in.read(got.data(), 4) || std::string_view(got.data(), 4) != magic) {
        throw Error(Errc::IndexFormat, "bad segment magic, expected " + std::string(magic));
    }
    const auto version = get<std::uint32_t>(in);
    if (version == 0 || version > max_version) {
        throw Error(Errc::IndexFormat, "unsupported segment version " + std::to_string(version));
    }
    return version;
}

}  // namespace trialmatch::binary
