// Copyright 2026 The Voxforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "voxforge/morton.hpp"

#include "voxforge/common.hpp"

namespace voxforge {

bool morton_valid(MortonPath p) {
    if (p.level > MortonPath::kMaxLevel) return false;
    if (p.level == 0) return p.code == 0;
    const unsigned bits = 3u * p.level;
    return bits >= 64 || (p.code >> bits) == 0;
}

MortonPath morton_child(MortonPath p, unsigned child) {
    if (child > 7) fail_data("child index out of range");
    if (p.level >= MortonPath::kMaxLevel) fail_data("octree level limit exceeded");
    return MortonPath{static_cast<std::uint8_t>(p.level + 1), (p.code << 3) | child};
}

MortonPath morton_parent(MortonPath p) {
    if (p.level == 0) fail_data("root cell has no parent");
    return MortonPath{static_cast<std::uint8_t>(p.level - 1), p.code >> 3};
}

MortonPath morton_prefix(MortonPath p, unsigned level) {
    if (level > p.level) fail_data("prefix level deeper than path");
    return MortonPath{static_cast<std::uint8_t>(level), p.code >> (3u * (p.level - level))};
}

bool morton_is_ancestor(MortonPath a, MortonPath b) {
    return a.level < b.level && (b.code >> (3u * (b.level - a.level))) == a.code;
}

MortonPath morton_from_cell(unsigned level, CellIndex c) {
    if (level > MortonPath::kMaxLevel) fail_data("octree level limit exceeded");
    std::uint64_t code = 0;
    for (unsigned k = 0; k < level; ++k) {
        const std::uint64_t triple = (std::uint64_t((c.x >> k) & 1u) << 2) |
                                     (std::uint64_t((c.y >> k) & 1u) << 1) |
                                     std::uint64_t((c.z >> k) & 1u);
        code |= triple << (3u * k);
    }
    return MortonPath{static_cast<std::uint8_t>(level), code};
}

CellIndex morton_to_cell(MortonPath p) {
    CellIndex c;
    for (unsigned k = 0; k < p.level; ++k) {
        const std::uint64_t triple = (p.code >> (3u * k)) & 7u;
        c.x |= std::uint32_t((triple >> 2) & 1u) << k;
        c.y |= std::uint32_t((triple >> 1) & 1u) << k;
        c.z |= std::uint32_t(triple & 1u) << k;
    }
    return c;
}

}  // namespace voxforge
