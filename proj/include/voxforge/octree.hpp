// Copyright 2026 The Voxforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "voxforge/common.hpp"
#include "voxforge/morton.hpp"

namespace voxforge {

/// Corner m of a voxel sits at offset (m >> 2 & 1, m >> 1 & 1, m & 1).
inline constexpr std::array<std::array<int, 3>, 8> kCornerOffsets{{
    {0, 0, 0}, {0, 0, 1}, {0, 1, 0}, {0, 1, 1}, {1, 0, 0}, {1, 0, 1}, {1, 1, 0}, {1, 1, 1},
}};

struct Voxel {
    MortonPath path;
    std::array<double, 8> density{};  // pre-activation corner values
    Vec3 sh0 = Vec3::Zero();
    std::vector<double> sh_rest;

    // Metadata, not serialised.
    std::uint32_t views = 1;           // contributing views after fusion
    bool split_for_alignment = false;  // inherited from a coarser cell

    Vec3 color() const {
        return Vec3(sh0_to_color(sh0.x()), sh0_to_color(sh0.y()), sh0_to_color(sh0.z()));
    }
    void set_color(const Vec3& c) {
        sh0 = Vec3(color_to_sh0(c.x()), color_to_sh0(c.y()), color_to_sh0(c.z()));
    }
};

/// Root cell placement shared by every octree of a scene.
struct OctreeFrame {
    Vec3 center = Vec3::Zero();
    double size = 1.0;

    double voxel_size(unsigned level) const;
    /// Voxel centre: c_scene + s_l (g + 0.5 - 0.5 * 2^l).
    Vec3 cell_center(MortonPath p) const;
    Vec3 cell_min(MortonPath p) const;
    /// Cell at `level` containing x, nullopt when x is outside the root cell
    /// (half-open on the upper faces).
    std::optional<MortonPath> locate(const Vec3& x, unsigned level) const;

    friend bool operator==(const OctreeFrame&, const OctreeFrame&) = default;
};

/// Flat array of leaf voxels addressed by Morton path.
struct VoxelOctree {
    OctreeFrame frame;
    std::uint32_t sh_rest_len = 0;
    std::vector<Voxel> voxels;

    std::size_t size() const { return voxels.size(); }
    bool empty() const { return voxels.empty(); }
    unsigned max_level() const;

    /// Throws Error(Data) on duplicate cells, ancestor/descendant pairs,
    /// invalid paths, non-finite values or wrong sh_rest lengths.
    void check_invariants() const;

    /// Sorts voxels depth-first by Morton path.
    void sort_canonical();
};

Vec3 voxel_center(const VoxelOctree& tree, MortonPath path);

/// Largest level whose voxel face area still covers `area`, capped at
/// level_max; areas at or above S^2 give 0.
unsigned level_for_footprint(double scene_size, double area, unsigned level_max);

/// Corner densities for the sub-cell `child` obtained by trilinear
/// interpolation of the parent's corners.
std::array<double, 8> child_corner_densities(const std::array<double, 8>& parent, unsigned child);

/// The 8 children of a voxel, inheriting its attributes.
std::array<Voxel, 8> split_voxel(const Voxel& v, bool interpolate_density);

/// `SVO1` binary container. Densities and SH values are stored as float32,
/// so a tree read back from disk writes out bit-identically.
void write_octree(const std::string& path, const VoxelOctree& tree);
VoxelOctree read_octree(const std::string& path);

/// Rounds all stored attributes to float32 precision, as a write/read
/// cycle would.
void quantize_to_storage(VoxelOctree& tree);

}  // namespace voxforge
