// Copyright 2026 The Voxforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "voxforge/config.hpp"
#include "voxforge/lod.hpp"
#include "voxforge/optimize.hpp"
#include "voxforge/scene.hpp"
#include "voxforge/tsdf.hpp"

namespace voxforge {

/// Everything the reconstruction stages read for one scene.
struct SceneData {
    SceneSpec spec;
    std::vector<Camera> cameras;      // reference poses
    std::vector<FloatRaster> images;  // RGB
    std::vector<FloatRaster> gt_depth;  // may be empty
    std::vector<DepthPrior> priors;   // in the prior frame
};

SceneData scene_data(const SyntheticScene& scene);
/// Reads the directory written by save_scene. Ground-truth depth is loaded
/// when present.
SceneData load_scene(const std::string& dir);

/// Umeyama fit of prior camera centres onto the reference centres; identity
/// for fewer than three views.
SimilarityTransform prior_alignment(const SceneData& scene);
std::vector<DepthPrior> aligned_priors(const SceneData& scene);

/// Reads lod.merge_t and lod.level_max.
LodOptions lod_options(const Config& cfg, const OctreeFrame& frame);

/// One LOD octree per view from the aligned priors.
std::vector<VoxelOctree> init_views(const SceneData& scene, const LodOptions& opts);

/// init_views, fuse and predict_opacity in one call.
VoxelOctree initial_tree(const SceneData& scene, const Config& cfg);

/// Every level-`level` cell of the root, grey, with densities giving
/// opacity `alpha` across one voxel. The "no initialisation" baseline.
VoxelOctree uniform_tree(const OctreeFrame& frame, unsigned level, double alpha);

TrainData train_data(const SceneData& scene);

}  // namespace voxforge
