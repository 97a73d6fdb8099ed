// Copyright 2026 The Voxforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

#include "voxforge/common.hpp"

// Little-endian primitives shared by the binary container formats.
namespace voxforge::binio {

template <typename T>
void put(std::ostream& os, T value) {
    static_assert(std::is_arithmetic_v<T>);
    using U = std::conditional_t<sizeof(T) == 1, std::uint8_t,
              std::conditional_t<sizeof(T) == 2, std::uint16_t,
              std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>>;
    U bits = std::bit_cast<U>(value);
    char bytes[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
    os.write(bytes, sizeof(T));
}

template <typename T>
T get(std::istream& is, const char* what) {
    static_assert(std::is_arithmetic_v<T>);
    using U = std::conditional_t<sizeof(T) == 1, std::uint8_t,
              std::conditional_t<sizeof(T) == 2, std::uint16_t,
              std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>>;
    unsigned char bytes[sizeof(T)];
    if (!is.read(reinterpret_cast<char*>(bytes), sizeof(T)))
        fail_data(std::string("truncated file while reading ") + what);
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<U>(bytes[i]) << (8 * i);
    return std::bit_cast<T>(bits);
}

inline void put_magic(std::ostream& os, const char (&magic)[5]) { os.write(magic, 4); }

inline void expect_magic(std::istream& is, const char (&magic)[5], const std::string& file) {
    char got[4];
    if (!is.read(got, 4) || std::memcmp(got, magic, 4) != 0)
        fail_data("bad magic in " + file + " (expected " + std::string(magic) + ")");
}

}  // namespace voxforge::binio
