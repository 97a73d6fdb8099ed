// Copyright 2026 The Voxforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>

namespace voxforge {

/// Octree cell address. Each level appends a 3-bit child index
/// (x << 2) | (y << 1) | z below the parent's bits; level 0 is the root.
struct MortonPath {
    static constexpr unsigned kMaxLevel = 20;

    std::uint8_t level = 0;
    std::uint64_t code = 0;

    friend auto operator<=>(const MortonPath&, const MortonPath&) = default;
};

struct CellIndex {
    std::uint32_t x = 0, y = 0, z = 0;
    friend bool operator==(const CellIndex&, const CellIndex&) = default;
};

struct MortonPathHash {
    std::size_t operator()(const MortonPath& p) const noexcept {
        std::uint64_t h = p.code * 0x9e3779b97f4a7c15ull ^ (std::uint64_t(p.level) << 59);
        h ^= h >> 31;
        h *= 0xbf58476d1ce4e5b9ull;
        return static_cast<std::size_t>(h ^ (h >> 29));
    }
};

/// True when the path's level is in range and no bits above 3*level are set.
bool morton_valid(MortonPath p);

/// Appends child index `child` in [0, 8). Throws Error(Data) past kMaxLevel.
MortonPath morton_child(MortonPath p, unsigned child);

/// Throws Error(Data) for the root.
MortonPath morton_parent(MortonPath p);

/// Ancestor at `level` (<= p.level); prefix(p, p.level) == p.
MortonPath morton_prefix(MortonPath p, unsigned level);

/// Child index of p within its parent; p.level must be > 0.
inline unsigned morton_child_index(MortonPath p) { return unsigned(p.code & 7u); }

/// a is a strict ancestor of b.
bool morton_is_ancestor(MortonPath a, MortonPath b);

MortonPath morton_from_cell(unsigned level, CellIndex c);
CellIndex morton_to_cell(MortonPath p);

/// Code shifted to the kMaxLevel resolution so paths of mixed levels compare
/// in depth-first order. Descendants of p occupy
/// [morton_aligned(p), morton_aligned(p) + morton_span(p)).
inline std::uint64_t morton_aligned(MortonPath p) {
    return p.code << (3u * (MortonPath::kMaxLevel - p.level));
}
inline std::uint64_t morton_span(MortonPath p) {
    return std::uint64_t(1) << (3u * (MortonPath::kMaxLevel - p.level));
}

/// Orders by aligned code, ancestors before descendants.
struct MortonDepthFirstLess {
    bool operator()(const MortonPath& a, const MortonPath& b) const {
        const auto ka = morton_aligned(a), kb = morton_aligned(b);
        return ka != kb ? ka < kb : a.level < b.level;
    }
};

}  // namespace voxforge
