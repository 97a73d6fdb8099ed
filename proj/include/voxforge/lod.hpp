// Copyright 2026 The Voxforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>

#include "voxforge/camera.hpp"
#include "voxforge/octree.hpp"
#include "voxforge/prior.hpp"

namespace voxforge {

struct LodOptions {
    OctreeFrame frame;
    double merge_threshold = 0.05;  // colour deviation t, RGB in [0,1]
    unsigned level_max = 16;
};

struct LodStats {
    std::size_t used_pixels = 0;
    std::size_t invalid_depth = 0;
    std::size_t outside_root = 0;
    std::size_t voxels_before_merge = 0;
};

/// Lifts every valid pixel of one view into a voxel sized to its footprint.
/// Cells hit by several pixels average their colours; where pixels produce
/// nested cells the finer cells win and the coarser one is split around them.
/// The result is then passed through merge_by_color.
VoxelOctree lod_unproject(const Camera& cam, const DepthPrior& prior, const FloatRaster& image,
                          const LodOptions& opts, LodStats* stats = nullptr);

/// 2^(max(level_min - parent_level, 0) + 1).
std::size_t required_occupancy(unsigned level_min, unsigned parent_level);

/// Bottom-up colour-deviation merge, one parent level per pass, repeated to a
/// fixpoint. A parent replaces the leaves below it when their maximum
/// distance to the mean colour is < t and there are at least
/// required_occupancy of them.
VoxelOctree merge_by_color(const VoxelOctree& tree, double t);

/// Turns a set of distinct, possibly nested cells into leaves: every cell
/// that contains other cells is split recursively, gaps inheriting the
/// nearest enclosing cell's attributes.
std::vector<Voxel> resolve_nested(std::vector<Voxel> cells);

}  // namespace voxforge
