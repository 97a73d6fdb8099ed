// Copyright 2026 The Voxforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "voxforge/octree.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "voxforge/binary_io.hpp"

namespace voxforge {

double OctreeFrame::voxel_size(unsigned level) const { return std::ldexp(size, -int(level)); }

Vec3 OctreeFrame::cell_center(MortonPath p) const {
    const CellIndex c = morton_to_cell(p);
    const double s = voxel_size(p.level);
    const double half_extent = 0.5 * std::ldexp(1.0, int(p.level));
    return center + s * Vec3(c.x + 0.5 - half_extent, c.y + 0.5 - half_extent, c.z + 0.5 - half_extent);
}

Vec3 OctreeFrame::cell_min(MortonPath p) const {
    return cell_center(p) - Vec3::Constant(0.5 * voxel_size(p.level));
}

std::optional<MortonPath> OctreeFrame::locate(const Vec3& x, unsigned level) const {
    const double cells = std::ldexp(1.0, int(level));
    CellIndex c;
    std::uint32_t* out[3] = {&c.x, &c.y, &c.z};
    for (int a = 0; a < 3; ++a) {
        const double g = (x[a] - center[a]) / size * cells + 0.5 * cells;
        if (!(g >= 0.0) || !(g < cells)) return std::nullopt;
        *out[a] = static_cast<std::uint32_t>(std::min(std::floor(g), cells - 1.0));
    }
    return morton_from_cell(level, c);
}

unsigned VoxelOctree::max_level() const {
    unsigned m = 0;
    for (const auto& v : voxels) m = std::max<unsigned>(m, v.path.level);
    return m;
}

void VoxelOctree::sort_canonical() {
    std::sort(voxels.begin(), voxels.end(), [](const Voxel& a, const Voxel& b) {
        return MortonDepthFirstLess{}(a.path, b.path);
    });
}

void VoxelOctree::check_invariants() const {
    if (!(frame.size > 0.0) || !frame.center.allFinite()) fail_data("octree frame is invalid");
    std::vector<MortonPath> paths;
    paths.reserve(voxels.size());
    for (const auto& v : voxels) {
        if (!morton_valid(v.path)) fail_data("voxel has an invalid Morton path");
        for (double d : v.density)
            if (!std::isfinite(d)) fail_data("voxel density is not finite");
        if (!v.sh0.allFinite()) fail_data("voxel colour is not finite");
        if (v.sh_rest.size() != sh_rest_len) fail_data("voxel sh_rest length mismatch");
        paths.push_back(v.path);
    }
    std::sort(paths.begin(), paths.end(), MortonDepthFirstLess{});
    for (std::size_t i = 1; i < paths.size(); ++i) {
        if (paths[i] == paths[i - 1]) fail_data("duplicate voxel cell");
        if (morton_is_ancestor(paths[i - 1], paths[i])) fail_data("voxel overlaps a descendant");
    }
}

Vec3 voxel_center(const VoxelOctree& tree, MortonPath path) { return tree.frame.cell_center(path); }

unsigned level_for_footprint(double scene_size, double area, unsigned level_max) {
    unsigned level = 0;
    while (level < level_max) {
        const double s = std::ldexp(scene_size, -int(level + 1));
        if (s * s >= area) ++level;
        else break;
    }
    return level;
}

std::array<double, 8> child_corner_densities(const std::array<double, 8>& parent, unsigned child) {
    const int cx = (child >> 2) & 1, cy = (child >> 1) & 1, cz = child & 1;
    std::array<double, 8> out{};
    for (unsigned m = 0; m < 8; ++m) {
        const double ux = 0.5 * (cx + kCornerOffsets[m][0]);
        const double uy = 0.5 * (cy + kCornerOffsets[m][1]);
        const double uz = 0.5 * (cz + kCornerOffsets[m][2]);
        double s = 0.0;
        for (unsigned k = 0; k < 8; ++k) {
            const double wx = kCornerOffsets[k][0] ? ux : 1.0 - ux;
            const double wy = kCornerOffsets[k][1] ? uy : 1.0 - uy;
            const double wz = kCornerOffsets[k][2] ? uz : 1.0 - uz;
            s += wx * wy * wz * parent[k];
        }
        out[m] = s;
    }
    return out;
}

std::array<Voxel, 8> split_voxel(const Voxel& v, bool interpolate_density) {
    std::array<Voxel, 8> kids;
    for (unsigned c = 0; c < 8; ++c) {
        kids[c] = v;
        kids[c].path = morton_child(v.path, c);
        if (interpolate_density) kids[c].density = child_corner_densities(v.density, c);
    }
    return kids;
}

void write_octree(const std::string& path, const VoxelOctree& tree) {
    std::ofstream os(path, std::ios::binary);
    if (!os) fail_data("cannot open " + path + " for writing");
    binio::put_magic(os, "SVO1");
    for (int a = 0; a < 3; ++a) binio::put<double>(os, tree.frame.center[a]);
    binio::put<double>(os, tree.frame.size);
    binio::put<std::uint64_t>(os, tree.voxels.size());
    binio::put<std::uint32_t>(os, tree.sh_rest_len);
    for (const auto& v : tree.voxels) {
        if (v.sh_rest.size() != tree.sh_rest_len) fail_data("voxel sh_rest length mismatch");
        binio::put<std::uint8_t>(os, v.path.level);
        binio::put<std::uint64_t>(os, v.path.code);
        for (double d : v.density) binio::put<float>(os, static_cast<float>(d));
        for (int c = 0; c < 3; ++c) binio::put<float>(os, static_cast<float>(v.sh0[c]));
        for (double h : v.sh_rest) binio::put<float>(os, static_cast<float>(h));
    }
    if (!os) fail_data("write failed: " + path);
}

VoxelOctree read_octree(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail_data("cannot open " + path);
    binio::expect_magic(is, "SVO1", path);
    VoxelOctree tree;
    for (int a = 0; a < 3; ++a) tree.frame.center[a] = binio::get<double>(is, "scene centre");
    tree.frame.size = binio::get<double>(is, "scene size");
    const auto count = binio::get<std::uint64_t>(is, "voxel count");
    tree.sh_rest_len = binio::get<std::uint32_t>(is, "sh_rest length");
    if (tree.sh_rest_len > 1024 || count > (1ull << 32)) fail_data("malformed octree header in " + path);
    tree.voxels.resize(count);
    for (auto& v : tree.voxels) {
        v.path.level = binio::get<std::uint8_t>(is, "voxel level");
        v.path.code = binio::get<std::uint64_t>(is, "voxel code");
        for (double& d : v.density) d = binio::get<float>(is, "voxel density");
        for (int c = 0; c < 3; ++c) v.sh0[c] = binio::get<float>(is, "voxel sh0");
        v.sh_rest.resize(tree.sh_rest_len);
        for (double& h : v.sh_rest) h = binio::get<float>(is, "voxel sh_rest");
    }
    if (is.peek() != std::char_traits<char>::eof()) fail_data("trailing bytes in " + path);
    tree.check_invariants();
    return tree;
}

void quantize_to_storage(VoxelOctree& tree) {
    for (auto& v : tree.voxels) {
        for (double& d : v.density) d = static_cast<float>(d);
        v.sh0 = v.sh0.cast<float>().cast<double>().eval();
        for (double& h : v.sh_rest) h = static_cast<float>(h);
    }
}

}  // namespace voxforge
