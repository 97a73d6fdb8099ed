// Copyright 2026 The Voxforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "voxforge/camera.hpp"
#include "voxforge/config.hpp"
#include "voxforge/octree.hpp"
#include "voxforge/prior.hpp"
#include "voxforge/raster.hpp"

namespace voxforge {

/// Analytic test scenes with exact depth and normal oracles.
struct SceneSpec {
    enum class Shape { Sphere, Plane, Boxes };
    enum class Rig { Ring, Hemisphere, Sphere };

    Shape shape = Shape::Sphere;
    Rig rig = Rig::Sphere;
    double radius = 0.8;        // sphere radius; plane half-extent; box scale
    std::uint32_t views = 16;
    std::uint32_t width = 64, height = 64;
    double focal = 64.0;        // pixels
    double distance = 3.0;      // camera distance to the origin
    double elevation_deg = 30.0;  // ring rig
    double texture_freq = 4.0;  // base value-noise frequency per unit length
    std::uint32_t supersample = 4;  // sub-pixel grid per axis for colour
    double noise = 0.0;         // relative prior depth noise
    bool perturb_pose = false;  // express priors in a random similar frame
    double root_size = 2.5;     // octree root cell, centred at the origin
    std::uint64_t seed = 0;

    /// Reads scene.* keys.
    static SceneSpec from_config(const Config& cfg);
    Config to_config() const;
    OctreeFrame frame() const { return OctreeFrame{Vec3::Zero(), root_size}; }
};

std::string shape_name(SceneSpec::Shape s);

struct SurfaceHit {
    double t;  // ray parameter (unit direction)
    Vec3 normal;
};

/// Nearest intersection of the ray with the scene surface.
std::optional<SurfaceHit> intersect_scene(const SceneSpec& spec, const Vec3& origin, const Vec3& dir);

/// Procedural RGB albedo: one multi-octave value-noise field per channel.
Vec3 scene_texture(const SceneSpec& spec, const Vec3& x);

/// Signed distance to the surface (exact for sphere and plane, box SDF
/// union otherwise), negative inside.
double scene_sdf(const SceneSpec& spec, const Vec3& x);

/// Deterministic, roughly uniform samples on the surface.
std::vector<Vec3> sample_surface(const SceneSpec& spec, std::size_t n);

std::vector<Camera> make_rig(const SceneSpec& spec);
Camera look_at(const Vec3& eye, const Vec3& target, double focal, std::uint32_t w, std::uint32_t h);

struct SyntheticScene {
    SceneSpec spec;
    std::vector<Camera> cameras;
    std::vector<FloatRaster> images;    // RGB, background 0
    std::vector<FloatRaster> gt_depth;  // camera z, 0 where the ray misses
    std::vector<DepthPrior> priors;     // in the prior frame
    SimilarityTransform prior_to_world;  // identity unless perturb_pose
};

/// Camera-z depth of the analytic surface at pixel (u, v); nullopt on a miss.
std::optional<double> analytic_depth(const SceneSpec& spec, const Camera& cam, double u, double v);

/// Supersampled colour and pixel-centre GT depth for any camera.
struct SceneView {
    FloatRaster image;     // RGB, background 0
    FloatRaster gt_depth;  // camera z, 0 on a miss
};
SceneView render_scene_view(const SceneSpec& spec, const Camera& cam);

SyntheticScene generate_scene(const SceneSpec& spec);

/// Directory layout used by the CLI: scene.cfg, cameras.txt,
/// prior_cameras.txt and per view `view_NNN.rgb.imgf`, `view_NNN.gt.imgf`,
/// `view_NNN.depth.imgf`, `view_NNN.conf.imgf`.
std::string view_stem(const std::string& dir, std::size_t i);
void save_scene(const std::string& dir, const SyntheticScene& scene);

/// Mean |rendered z - analytic z| over pixels where both are valid,
/// accumulated over all views.
struct DepthErrorStats {
    double mean_abs = 0.0;
    std::size_t pixels = 0;
};
DepthErrorStats depth_error(std::span<const FloatRaster> rendered, std::span<const FloatRaster> gt);

}  // namespace voxforge
