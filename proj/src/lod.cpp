// Copyright 2026 The Voxforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "voxforge/lod.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include "voxforge/parallel.hpp"

namespace voxforge {

std::size_t required_occupancy(unsigned level_min, unsigned parent_level) {
    const unsigned gap = level_min > parent_level ? level_min - parent_level : 0;
    return std::size_t(1) << (gap + 1);
}

std::vector<Voxel> resolve_nested(std::vector<Voxel> cells) {
    std::unordered_map<MortonPath, std::size_t, MortonPathHash> explicit_cells;
    std::unordered_set<MortonPath, MortonPathHash> internal;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        explicit_cells.emplace(cells[i].path, i);
        MortonPath p = cells[i].path;
        while (p.level > 0) {
            p = morton_parent(p);
            if (!internal.insert(p).second) break;
        }
    }
    std::vector<Voxel> out;
    out.reserve(cells.size());

    // Fills the region of `cell` (internal, with attributes from `src`).
    auto fill = [&](auto&& self, MortonPath cell, const Voxel& src) -> void {
        for (unsigned c = 0; c < 8; ++c) {
            const MortonPath child = morton_child(cell, c);
            if (explicit_cells.count(child)) continue;
            if (internal.count(child)) {
                self(self, child, src);
            } else {
                Voxel v = src;
                v.path = child;
                v.split_for_alignment = true;
                out.push_back(std::move(v));
            }
        }
    };

    for (const auto& v : cells) {
        if (internal.count(v.path)) fill(fill, v.path, v);
        else out.push_back(v);
    }
    return out;
}

VoxelOctree lod_unproject(const Camera& cam, const DepthPrior& prior, const FloatRaster& image,
                          const LodOptions& opts, LodStats* stats) {
    if (image.width != prior.depth.width || image.height != prior.depth.height || image.channels < 3)
        fail_data("image does not match the depth prior");
    if (opts.level_max > MortonPath::kMaxLevel) fail_data("level_max exceeds the Morton code range");

    const std::size_t npix = prior.depth.pixel_count();
    struct PixelCell {
        MortonPath path;
        std::uint8_t status;  // 0 used, 1 invalid depth, 2 outside root
    };
    std::vector<PixelCell> cell(npix);
    parallel_for(npix, [&](std::size_t i) {
        const auto u = static_cast<std::uint32_t>(i % prior.depth.width);
        const auto v = static_cast<std::uint32_t>(i / prior.depth.width);
        const auto area = pixel_footprint_area(cam, prior.depth, u, v);
        if (!area) {
            cell[i].status = 1;
            return;
        }
        const unsigned level = level_for_footprint(opts.frame.size, *area, opts.level_max);
        const Vec3 x = unproject_pixel(cam, u, v, prior.depth.at(u, v));
        const auto path = opts.frame.locate(x, level);
        if (!path) {
            cell[i].status = 2;
            return;
        }
        cell[i] = {*path, 0};
    });

    LodStats st;
    std::vector<std::size_t> order;
    order.reserve(npix);
    for (std::size_t i = 0; i < npix; ++i) {
        if (cell[i].status == 0) order.push_back(i);
        else if (cell[i].status == 1) ++st.invalid_depth;
        else ++st.outside_root;
    }
    st.used_pixels = order.size();
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return cell[a].path < cell[b].path;
    });

    VoxelOctree tree;
    tree.frame = opts.frame;
    std::vector<Voxel> cells;
    for (std::size_t k = 0; k < order.size();) {
        const MortonPath p = cell[order[k]].path;
        Vec3 sum = Vec3::Zero();
        std::size_t n = 0;
        for (; k < order.size() && cell[order[k]].path == p; ++k, ++n) {
            const std::size_t i = order[k];
            const auto u = static_cast<std::uint32_t>(i % image.width);
            const auto v = static_cast<std::uint32_t>(i / image.width);
            sum += Vec3(image.at(u, v, 0), image.at(u, v, 1), image.at(u, v, 2));
        }
        Voxel vx;
        vx.path = p;
        vx.set_color(sum / double(n));
        cells.push_back(std::move(vx));
    }
    tree.voxels = resolve_nested(std::move(cells));
    tree.sort_canonical();
    st.voxels_before_merge = tree.voxels.size();
    if (stats) *stats = st;
    return merge_by_color(tree, opts.merge_threshold);
}

VoxelOctree merge_by_color(const VoxelOctree& input, double t) {
    VoxelOctree tree = input;
    bool changed = true;
    while (changed) {
        changed = false;
        const unsigned top = tree.max_level();
        for (int parent_level = int(top) - 1; parent_level >= 0; --parent_level) {
            const auto pl = static_cast<unsigned>(parent_level);
            // Group every deeper leaf under its ancestor at parent_level.
            std::vector<std::pair<MortonPath, std::size_t>> members;
            for (std::size_t i = 0; i < tree.voxels.size(); ++i)
                if (tree.voxels[i].path.level > pl)
                    members.emplace_back(morton_prefix(tree.voxels[i].path, pl), i);
            if (members.empty()) continue;
            std::sort(members.begin(), members.end());

            std::vector<bool> removed(tree.voxels.size(), false);
            std::vector<Voxel> merged;
            for (std::size_t k = 0; k < members.size();) {
                std::size_t e = k;
                while (e < members.size() && members[e].first == members[k].first) ++e;
                const std::size_t n = e - k;
                Vec3 mean = Vec3::Zero();
                unsigned level_min = MortonPath::kMaxLevel;
                for (std::size_t j = k; j < e; ++j) {
                    const Voxel& v = tree.voxels[members[j].second];
                    mean += v.color();
                    level_min = std::min<unsigned>(level_min, v.path.level);
                }
                mean /= double(n);
                double deviation = 0.0;
                for (std::size_t j = k; j < e; ++j)
                    deviation = std::max(deviation, (tree.voxels[members[j].second].color() - mean).norm());

                if (deviation < t && n >= required_occupancy(level_min, pl)) {
                    Voxel parent;
                    parent.path = members[k].first;
                    parent.set_color(mean);
                    parent.sh_rest.assign(tree.sh_rest_len, 0.0);
                    for (std::size_t j = k; j < e; ++j) {
                        const Voxel& v = tree.voxels[members[j].second];
                        for (int m = 0; m < 8; ++m) parent.density[m] += v.density[m] / double(n);
                        for (std::size_t h = 0; h < tree.sh_rest_len; ++h)
                            parent.sh_rest[h] += v.sh_rest[h] / double(n);
                        removed[members[j].second] = true;
                    }
                    merged.push_back(std::move(parent));
                }
                k = e;
            }
            if (merged.empty()) continue;
            changed = true;
            std::vector<Voxel> next;
            next.reserve(tree.voxels.size());
            for (std::size_t i = 0; i < tree.voxels.size(); ++i)
                if (!removed[i]) next.push_back(std::move(tree.voxels[i]));
            for (auto& m : merged) next.push_back(std::move(m));
            tree.voxels = std::move(next);
        }
    }
    tree.sort_canonical();
    return tree;
}

}  // namespace voxforge
