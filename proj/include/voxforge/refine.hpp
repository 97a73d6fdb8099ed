// Copyright 2026 The Voxforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "voxforge/camera.hpp"
#include "voxforge/config.hpp"
#include "voxforge/raster.hpp"

namespace voxforge {

/// Sparse per-pixel depth targets picked by multi-view photo-consistency.
/// Depth is camera z; score is the winning candidate's mean NCC.
struct RefinedDepthMap {
    FloatRaster depth;
    MaskRaster valid;
    FloatRaster score;

    std::size_t valid_count() const;
};

struct RefineOptions {
    std::uint32_t K = 4;
    std::uint32_t n_rand = 16;
    double s = 0.04;
    double reproj_thresh = 1.0;  // pixels
    std::uint32_t patch = 7;
    double min_variance = 1e-8;  // per-pixel intensity variance below: patch rejected
    std::uint64_t seed = 0;
    std::uint64_t iteration = 0;  // mixes into the per-pixel random stream

    /// Reads refine.K, refine.n_rand, refine.s, refine.reproj_thresh, refine.patch.
    static RefineOptions from_config(const Config& cfg);
};

/// Uniform draw in [0, 1) that depends only on (seed, iteration, pixel, k).
double counter_uniform(std::uint64_t seed, std::uint64_t iteration, std::uint64_t pixel,
                       std::uint64_t k);

/// {D(p), D(p+e_x), D(p+e_y)} followed by D(p)(1 + eps_k), eps_k ~ U(-s/2, s/2).
/// Neighbour depths that are missing or invalid are replaced by D(p).
/// Empty when D(p) itself is invalid.
std::vector<double> build_candidates(const FloatRaster& rendered, std::uint32_t u, std::uint32_t v,
                                     std::uint32_t n_rand, double s, std::uint64_t seed,
                                     std::uint64_t iteration);

/// Zero-mean NCC of two equally sized patches; NaN when either has
/// per-pixel variance below min_variance.
double ncc(std::span<const double> a, std::span<const double> b, double min_variance = 1e-8);

/// Luminance (channel mean) of a colour raster.
FloatRaster to_gray(const FloatRaster& image);

/// K views with the closest camera centres, ties broken by index.
std::vector<std::uint32_t> nearest_views(std::span<const Camera> cams, std::uint32_t reference,
                                         std::uint32_t K);

/// Mean NCC between the reference patch around p and patches around the
/// reprojections of the depth candidate into `neighbors`. NaN when no
/// neighbour yields a valid score.
double score_candidate(std::span<const Camera> cams, std::span<const FloatRaster> gray,
                       std::uint32_t reference, std::span<const std::uint32_t> neighbors,
                       std::uint32_t u, std::uint32_t v, double depth, std::uint32_t patch,
                       double min_variance);

/// Forward-backward reprojection error in pixels through one neighbour's
/// rendered depth; NaN when the round trip leaves either view or hits an
/// invalid depth.
double reprojection_error(const Camera& ref, const Camera& nbr, const FloatRaster& nbr_depth,
                          double u, double v, double depth);

/// Refined depth for view `reference`. `rendered` holds every view's
/// rendered depth (camera z, 0 where invalid), `gray` every view's image.
/// A pixel survives when at least one neighbour passes the geometric check.
RefinedDepthMap refine_depth(std::span<const Camera> cams, std::span<const FloatRaster> gray,
                             std::span<const FloatRaster> rendered, std::uint32_t reference,
                             const RefineOptions& opts);

/// Writes `<stem>.refd.imgf` (depth), `<stem>.refmask.imgb` and `<stem>.refscore.imgf`.
void save_refined(const std::string& stem, const RefinedDepthMap& map);
RefinedDepthMap load_refined(const std::string& stem);

}  // namespace voxforge
