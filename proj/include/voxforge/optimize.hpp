// Copyright 2026 The Voxforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "voxforge/camera.hpp"
#include "voxforge/config.hpp"
#include "voxforge/octree.hpp"
#include "voxforge/refine.hpp"
#include "voxforge/render.hpp"

namespace voxforge {

struct LossWeights {
    double photo = 0.1;
    double reg = 1.0;
    double refd = 0.05;
};

struct LossReport {
    std::uint32_t iter = 0;
    double l_photo = 0.0;
    double l_refd = 0.0;
    double l_reg = 0.0;
    double total = 0.0;
    std::size_t voxel_count = 0;
    std::size_t photo_pixels = 0;
    std::size_t refd_pixels = 0;
};

struct LossTerm {
    double value = 0.0;
    std::size_t count = 0;  // pixels that contributed
};

/// Mean absolute colour error over masked pixels and all channels.
/// `rendered` holds 3 values per pixel; a null mask selects every pixel.
/// When `grad` is given it receives d loss / d rendered.
LossTerm loss_photo(std::span<const double> rendered, const FloatRaster& target,
                    const MaskRaster* mask = nullptr, std::vector<double>* grad = nullptr);

/// Mean |D - D*| over pixels where the refined map is valid and the rendered
/// depth (camera z, NaN when invalid) is finite.
LossTerm loss_refined_depth(std::span<const double> rendered_depth, const RefinedDepthMap& refined,
                            std::vector<double>* grad = nullptr);

/// Placeholder for an external geometry regulariser; always 0.
inline double loss_reg(const VoxelOctree&) { return 0.0; }

/// lambda_photo l_photo + lambda_reg l_reg + lambda_refd l_refd.
double total_loss(const LossWeights& w, double l_photo, double l_reg, double l_refd);

/// First and second moments for one parameter group.
struct AdamGroup {
    double lr = 1e-3;
    std::vector<double> m, v;

    void resize(std::size_t n) {
        m.assign(n, 0.0);
        v.assign(n, 0.0);
    }
    /// One bias-corrected update at step t (1-based).
    void update(double* param, const double* grad, std::size_t n, std::uint64_t t,
                double beta1, double beta2, double eps);
};

struct AdamOptions {
    double lr_density = 5.0;  // densities reach ~ln(100)/voxel size
    double lr_sh0 = 1e-2;
    double lr_shrest = 2.5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adam over the octree's density, sh0 and sh_rest groups.
class AdamOptimizer {
public:
    AdamOptimizer(const AdamOptions& opts, const VoxelOctree& tree);

    /// Throws Error(Numerical) naming the first non-finite gradient entry.
    void step(VoxelOctree& tree, const VoxelGradients& grads);
    /// Moments follow voxels through prune/subdivide: output voxel i takes
    /// the moments of input voxel source[i].
    void remap(std::span<const std::uint32_t> source, std::uint32_t sh_rest_len);
    std::uint64_t steps() const { return t_; }

private:
    AdamOptions opts_;
    AdamGroup density_, sh0_, shrest_;
    std::uint64_t t_ = 0;
    std::uint32_t sh_rest_len_ = 0;
};

struct TrainOptions {
    std::uint32_t iters = 500;
    std::uint32_t prune_interval = 200;
    std::uint32_t refresh_R = 100;
    double prune_tau = 1e-4;
    double subdivide_fraction = 0.0;  // of the voxel count, per pruning round
    unsigned level_max = 16;
    AdamOptions adam;
    LossWeights weights;
    RefineOptions refine;
    RenderSettings render;
    std::uint64_t seed = 0;

    /// Reads train.*, loss.*, refine.* and render.background.
    static TrainOptions from_config(const Config& cfg);
};

struct TrainData {
    std::vector<Camera> cameras;
    std::vector<FloatRaster> images;  // RGB
};

/// Renders every view's depth as camera z (0 where invalid).
std::vector<FloatRaster> render_depths(const VoxelOctree& tree, std::span<const Camera> cams,
                                       const RenderSettings& settings);

/// Refined targets for every view from the current tree.
std::vector<RefinedDepthMap> refresh_targets(const VoxelOctree& tree, const TrainData& data,
                                             const RefineOptions& refine,
                                             const RenderSettings& settings, std::uint64_t iteration);

/// Per-scene optimisation. One view per iteration, visited in a seeded
/// order per epoch. Appends one LossReport per iteration to `trace`, which
/// stays filled if training diverges (Error(Numerical)).
VoxelOctree train(const VoxelOctree& init, const TrainData& data, const TrainOptions& opts,
                  std::vector<LossReport>& trace);

/// `iter l_photo l_refd l_reg total voxel_count` per line.
void write_trace(const std::string& path, std::span<const LossReport> trace);

}  // namespace voxforge
