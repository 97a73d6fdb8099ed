// Copyright 2026 The Voxforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "voxforge/octree.hpp"

namespace voxforge {

/// Refines every tree so that no voxel in one tree is a strict ancestor of a
/// voxel in another. Levels are swept from the coarsest to the finest; a
/// voxel is split into 8 children (inheriting its attributes, flagged
/// split_for_alignment) whenever another tree holds a deeper voxel under it.
/// Throws Error(Data) "incompatible octrees" when frames differ.
std::vector<VoxelOctree> align_topology(std::span<const VoxelOctree> trees);

/// Union of aligned trees; each cell's sh0, sh_rest and densities are the
/// plain mean over the trees holding it. `views` records the contributor
/// count. The summation order is canonical, so the result does not depend on
/// the order of `aligned`.
VoxelOctree aggregate_features(std::span<const VoxelOctree> aligned);

/// align_topology followed by aggregate_features.
VoxelOctree fuse(std::span<const VoxelOctree> trees);

}  // namespace voxforge
