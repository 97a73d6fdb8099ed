// Copyright 2026 The Voxforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Geometry>

#include <filesystem>
#include <random>
#include <string>

#include "voxforge/camera.hpp"
#include "voxforge/octree.hpp"
#include "voxforge/scene.hpp"

namespace vf_test {

using voxforge::Camera;
using voxforge::Mat3;
using voxforge::Vec3;

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Vec3 random_vec(std::mt19937_64& rng, double lo, double hi) {
    return Vec3(uniform(rng, lo, hi), uniform(rng, lo, hi), uniform(rng, lo, hi));
}

inline Mat3 random_rotation(std::mt19937_64& rng) {
    Eigen::Quaterniond q(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
    return q.normalized().toRotationMatrix();
}

inline Camera random_camera(std::mt19937_64& rng, std::uint32_t w = 64, std::uint32_t h = 48) {
    Camera c;
    c.fx = uniform(rng, 40, 200);
    c.fy = uniform(rng, 40, 200);
    c.cx = uniform(rng, 0, w - 1);
    c.cy = uniform(rng, 0, h - 1);
    c.width = w;
    c.height = h;
    c.R = random_rotation(rng);
    c.t = random_vec(rng, -2, 2);
    return c;
}

/// Per-test scratch directory, removed on destruction.
struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& name) {
        path = std::filesystem::temp_directory_path() /
               ("voxforge_test_" + name + "_" + std::to_string(std::random_device{}()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

/// Random leaf-only octree: starting from the root, cells are split with
/// probability p_split down to max_level; each leaf survives with p_keep.
inline voxforge::VoxelOctree random_tree(std::mt19937_64& rng, unsigned max_level, double p_split,
                                         double p_keep, double size = 2.0) {
    using namespace voxforge;
    VoxelOctree t;
    t.frame = OctreeFrame{random_vec(rng, -0.5, 0.5), size};
    std::vector<MortonPath> stack{MortonPath{}};
    while (!stack.empty()) {
        const MortonPath p = stack.back();
        stack.pop_back();
        if (p.level < max_level && (p.level == 0 || uniform(rng, 0, 1) < p_split)) {
            for (unsigned c = 0; c < 8; ++c) stack.push_back(morton_child(p, c));
            continue;
        }
        if (uniform(rng, 0, 1) >= p_keep) continue;
        Voxel v;
        v.path = p;
        for (double& d : v.density) d = uniform(rng, -2, 3);
        v.sh0 = random_vec(rng, -1.5, 1.5);
        t.voxels.push_back(v);
    }
    t.sort_canonical();
    return t;
}

/// Textured plane z = 0 seen by fronto-parallel cameras at height `height`,
/// translated in x and y only by a whole number of pixels of disparity, so
/// the true depth is exactly photo-consistent. View 0 sits above the origin.
struct PlaneRig {
    voxforge::SceneSpec spec;
    std::vector<Camera> cameras;
    std::vector<voxforge::FloatRaster> images, gt_depth;
};

inline PlaneRig plane_rig(std::uint32_t size = 128, double height = 2.0, std::uint32_t disparity = 24) {
    using namespace voxforge;
    PlaneRig rig;
    const double baseline = disparity * height / double(size);
    rig.spec.shape = SceneSpec::Shape::Plane;
    rig.spec.radius = 4.0;
    rig.spec.texture_freq = 4.0;
    const Vec3 offsets[] = {{0, 0, 0}, {baseline, 0, 0}, {-baseline, 0, 0}, {0, baseline, 0}, {0, -baseline, 0}};
    for (const Vec3& o : offsets) {
        Camera c;
        c.fx = c.fy = double(size);
        c.cx = c.cy = 0.5 * (size - 1);
        c.width = c.height = size;
        c.R = Vec3(1, -1, -1).asDiagonal();  // looks down -z
        c.t = -c.R * (o + Vec3(0, 0, height));
        rig.cameras.push_back(c);
        SceneView view = render_scene_view(rig.spec, c);
        rig.images.push_back(std::move(view.image));
        rig.gt_depth.push_back(std::move(view.gt_depth));
    }
    return rig;
}

}  // namespace vf_test
