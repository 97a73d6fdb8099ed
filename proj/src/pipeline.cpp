// Copyright 2026 The Voxforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "voxforge/pipeline.hpp"

#include <filesystem>

#include "voxforge/fusion.hpp"
#include "voxforge/parallel.hpp"

namespace voxforge {

SceneData scene_data(const SyntheticScene& scene) {
    SceneData d;
    d.spec = scene.spec;
    d.cameras = scene.cameras;
    d.images = scene.images;
    d.gt_depth = scene.gt_depth;
    d.priors = scene.priors;
    return d;
}

SceneData load_scene(const std::string& dir) {
    if (!std::filesystem::is_directory(dir)) fail_data("scene directory not found: " + dir);
    SceneData d;
    d.spec = SceneSpec::from_config(Config::load(dir + "/scene.cfg"));
    const auto cams = read_camera_file(dir + "/cameras.txt");
    const auto prior_cams = read_camera_file(dir + "/prior_cameras.txt");
    if (cams.size() != prior_cams.size()) fail_data("camera files differ in length");
    for (std::size_t i = 0; i < cams.size(); ++i) {
        const std::string stem = view_stem(dir, i);
        d.cameras.push_back(cams[i].camera);
        d.images.push_back(read_imgf(stem + ".rgb.imgf"));
        if (std::filesystem::exists(stem + ".gt.imgf")) d.gt_depth.push_back(read_imgf(stem + ".gt.imgf"));
        d.priors.push_back(load_prior(stem, prior_cams[i].camera));
        const Camera& c = d.cameras.back();
        if (d.images.back().channels != 3 || !d.images.back().same_shape(c.width, c.height))
            fail_data("image does not match its camera: " + stem);
    }
    if (!d.gt_depth.empty() && d.gt_depth.size() != d.cameras.size()) d.gt_depth.clear();
    return d;
}

SimilarityTransform prior_alignment(const SceneData& scene) {
    if (scene.cameras.size() < 3) return {};
    std::vector<Vec3> src, dst;
    for (std::size_t i = 0; i < scene.cameras.size(); ++i) {
        src.push_back(scene.priors[i].camera.center());
        dst.push_back(scene.cameras[i].center());
    }
    return umeyama_align(src, dst);
}

std::vector<DepthPrior> aligned_priors(const SceneData& scene) {
    const SimilarityTransform T = prior_alignment(scene);
    std::vector<DepthPrior> out;
    for (const auto& p : scene.priors) out.push_back(p.aligned(T));
    return out;
}

LodOptions lod_options(const Config& cfg, const OctreeFrame& frame) {
    LodOptions o;
    o.frame = frame;
    o.merge_threshold = cfg.get_double("lod.merge_t", o.merge_threshold);
    o.level_max = static_cast<unsigned>(cfg.get_int("lod.level_max", o.level_max));
    if (o.level_max > MortonPath::kMaxLevel) fail_usage("lod.level_max too large");
    return o;
}

std::vector<VoxelOctree> init_views(const SceneData& scene, const LodOptions& opts) {
    const auto priors = aligned_priors(scene);
    std::vector<VoxelOctree> trees;
    for (std::size_t i = 0; i < priors.size(); ++i)
        trees.push_back(lod_unproject(priors[i].camera, priors[i], scene.images[i], opts));
    return trees;
}

VoxelOctree initial_tree(const SceneData& scene, const Config& cfg) {
    const auto trees = init_views(scene, lod_options(cfg, scene.spec.frame()));
    const VoxelOctree fused = fuse(trees);
    const auto priors = aligned_priors(scene);
    return predict_opacity(fused, priors, OpacityPipelineOptions::from_config(cfg));
}

VoxelOctree uniform_tree(const OctreeFrame& frame, unsigned level, double alpha) {
    VoxelOctree tree;
    tree.frame = frame;
    const std::uint32_t n = 1u << level;
    const double sigma = density_for_alpha(alpha, frame.voxel_size(level));
    for (std::uint32_t x = 0; x < n; ++x)
        for (std::uint32_t y = 0; y < n; ++y)
            for (std::uint32_t z = 0; z < n; ++z) {
                Voxel v;
                v.path = morton_from_cell(level, CellIndex{x, y, z});
                v.density.fill(sigma);
                tree.voxels.push_back(std::move(v));
            }
    tree.sort_canonical();
    return tree;
}

TrainData train_data(const SceneData& scene) { return TrainData{scene.cameras, scene.images}; }

}  // namespace voxforge
