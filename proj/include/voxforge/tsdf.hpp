// Copyright 2026 The Voxforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <span>
#include <utility>
#include <vector>

#include "voxforge/camera.hpp"
#include "voxforge/config.hpp"
#include "voxforge/octree.hpp"
#include "voxforge/prior.hpp"

namespace voxforge {

/// Adds the level-`level` cells of a uniform grid over the root cell that the
/// tree does not already cover. Uniform cells inside a coarser voxel are
/// dropped; uniform cells partially covered by finer voxels are split around
/// them so the result covers the whole root cell with leaves.
VoxelOctree augment_with_uniform_grid(const VoxelOctree& tree, unsigned level);

/// Unique voxel corners of a tree and, per voxel, the index of each corner.
struct CornerGrid {
    std::vector<Vec3> points;
    std::vector<std::array<std::uint32_t, 8>> voxel_corners;
};

CornerGrid build_corner_grid(const VoxelOctree& tree);

/// Confidence-weighted truncated signed distances in units of d_trunc,
/// negative inside. F is NaN where W == 0.
struct TsdfGrid {
    std::vector<Vec3> points;
    std::vector<double> F;
    std::vector<double> W;
};

/// Projective TSDF: per view, f = clamp((D(pi(x)) - z(x)) / d_trunc, -1, 1)
/// with D and the weight bilinearly sampled from the depth and confidence
/// rasters. Views that do not see a point, lack four valid depth taps around
/// it, or place it more than one band behind the surface (raw f < -1)
/// contribute nothing. Views accumulate in index order.
TsdfGrid fuse_tsdf(std::span<const Vec3> points, std::span<const FloatRaster> depths,
                   std::span<const FloatRaster> confidences, std::span<const Camera> cams,
                   double d_trunc);

TsdfGrid fuse_tsdf(std::span<const Vec3> points, std::span<const DepthPrior> priors,
                   double d_trunc);

double phi_sigmoid(double F, double beta);
double phi_bell(double F, double s);

/// beta with phi_sigmoid(-a, beta) == p. Requires a > 0 and 0.5 < p < 1;
/// p == 0.5 leaves beta undefined.
double calibrate_sigmoid(double a, double p);

/// s with phi_bell(-a, s) == b, taking the u > 1 root. Requires a > 0 and
/// 0 < b < 1.
double calibrate_bell(double a, double b);

struct OpacityMapping {
    enum class Kind { Sigmoid, Bell };

    Kind kind = Kind::Sigmoid;
    double a = 0.1;
    double p = 0.9;  // sigmoid target at F = -a
    double b = 0.5;  // bell target at F = -a
    double slope = 0.0;  // beta (sigmoid) or s (bell)

    static OpacityMapping sigmoid(double a, double p);
    static OpacityMapping bell(double a, double b);

    double operator()(double F) const;
};

struct OpacityOptions {
    OpacityMapping mapping = OpacityMapping::sigmoid(0.1, 0.9);
    double alpha_min = 0.01;
    double alpha_max = 0.99;
    double tau_prune = 0.05;
};

/// Prunes voxels whose largest corner opacity phi(F) is below tau_prune and
/// sets the survivors' corner densities so a ray crossing the voxel over its
/// side length attains alpha_min + (alpha_max - alpha_min) phi. Corners with
/// W == 0 get phi = 0.
VoxelOctree apply_opacity(const TsdfGrid& tsdf, const CornerGrid& grid, const VoxelOctree& tree,
                          const OpacityOptions& opts);

/// Corner density sigma for which 1 - exp(-(ELU(sigma)+1) * step) == alpha.
double density_for_alpha(double alpha, double step);

/// Number of voxels surviving the pruning rule under each mapping.
std::pair<std::size_t, std::size_t> compare_mapping_sparsity(const TsdfGrid& tsdf,
                                                             const CornerGrid& grid,
                                                             const OpacityMapping& sigmoid_map,
                                                             const OpacityMapping& bell_map,
                                                             double tau_prune);

struct OpacityPipelineOptions {
    OpacityOptions opacity;
    double d_trunc = 0.0;   // <= 0: three times the finest voxel size
    int augment_level = -1;  // < 0: median level of the fused tree

    /// Reads tsdf.trunc, opacity.*, augment.level.
    static OpacityPipelineOptions from_config(const Config& cfg);
};

/// Augmentation, TSDF fusion over the corner grid and opacity assignment.
VoxelOctree predict_opacity(const VoxelOctree& fused, std::span<const DepthPrior> priors,
                            const OpacityPipelineOptions& opts);

}  // namespace voxforge
