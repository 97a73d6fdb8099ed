// Copyright 2026 The Voxforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "voxforge/fusion.hpp"

#include <algorithm>
#include <map>

namespace voxforge {
namespace {

// Sorted codes of one tree, bucketed by level.
struct LevelIndex {
    std::vector<std::vector<std::uint64_t>> codes;

    LevelIndex() : codes(MortonPath::kMaxLevel + 1) {}

    void add(const VoxelOctree& tree) {
        for (const auto& v : tree.voxels) codes[v.path.level].push_back(v.path.code);
    }
    void finish() {
        for (auto& c : codes) std::sort(c.begin(), c.end());
    }

    // Number of voxels strictly below cell p.
    std::size_t count_descendants(MortonPath p) const {
        std::size_t n = 0;
        for (unsigned l = p.level + 1; l < codes.size(); ++l) {
            const auto& c = codes[l];
            if (c.empty()) continue;
            const unsigned shift = 3u * (l - p.level);
            const std::uint64_t lo = p.code << shift;
            const std::uint64_t hi = (p.code + 1) << shift;
            n += std::size_t(std::lower_bound(c.begin(), c.end(), hi) -
                             std::lower_bound(c.begin(), c.end(), lo));
        }
        return n;
    }
};

}  // namespace

std::vector<VoxelOctree> align_topology(std::span<const VoxelOctree> trees) {
    std::vector<VoxelOctree> out(trees.begin(), trees.end());
    if (out.size() < 2) return out;
    for (const auto& t : out)
        if (!(t.frame == out.front().frame) || t.sh_rest_len != out.front().sh_rest_len)
            fail_data("incompatible octrees");

    unsigned lmin = MortonPath::kMaxLevel, lmax = 0;
    for (const auto& t : out)
        for (const auto& v : t.voxels) {
            lmin = std::min<unsigned>(lmin, v.path.level);
            lmax = std::max<unsigned>(lmax, v.path.level);
        }

    for (unsigned level = lmin; level < lmax; ++level) {
        // A deeper voxel in another tree shows up as a surplus of the union
        // count over the tree's own count.
        std::vector<LevelIndex> own(out.size());
        LevelIndex all;
        for (std::size_t i = 0; i < out.size(); ++i) {
            own[i].add(out[i]);
            own[i].finish();
            all.add(out[i]);
        }
        all.finish();

        for (std::size_t i = 0; i < out.size(); ++i) {
            std::vector<Voxel> next;
            bool split_any = false;
            for (auto& v : out[i].voxels) {
                const bool finer_elsewhere =
                    v.path.level == level &&
                    all.count_descendants(v.path) > own[i].count_descendants(v.path);
                if (finer_elsewhere) {
                    for (auto& kid : split_voxel(v, false)) {
                        kid.split_for_alignment = true;
                        next.push_back(std::move(kid));
                    }
                    split_any = true;
                } else {
                    next.push_back(std::move(v));
                }
            }
            if (split_any) {
                out[i].voxels = std::move(next);
                out[i].sort_canonical();
            } else {
                out[i].voxels = std::move(next);
            }
        }
    }
    return out;
}

VoxelOctree aggregate_features(std::span<const VoxelOctree> aligned) {
    VoxelOctree fused;
    if (aligned.empty()) return fused;
    fused.frame = aligned.front().frame;
    fused.sh_rest_len = aligned.front().sh_rest_len;
    for (const auto& t : aligned)
        if (!(t.frame == fused.frame) || t.sh_rest_len != fused.sh_rest_len)
            fail_data("incompatible octrees");

    std::map<MortonPath, std::vector<const Voxel*>, MortonDepthFirstLess> cells;
    for (const auto& t : aligned)
        for (const auto& v : t.voxels) cells[v.path].push_back(&v);

    auto attributes = [&](const Voxel* v) {
        std::vector<double> a(v->density.begin(), v->density.end());
        a.insert(a.end(), v->sh0.data(), v->sh0.data() + 3);
        a.insert(a.end(), v->sh_rest.begin(), v->sh_rest.end());
        return a;
    };

    fused.voxels.reserve(cells.size());
    for (auto& [path, members] : cells) {
        // Canonical summation order: sort contributors by attribute vector.
        std::vector<std::vector<double>> attrs;
        attrs.reserve(members.size());
        bool all_split = true;
        for (const Voxel* v : members) {
            attrs.push_back(attributes(v));
            all_split = all_split && v->split_for_alignment;
        }
        std::sort(attrs.begin(), attrs.end());

        // Mean taken relative to the first contributor so identical inputs
        // reproduce exactly.
        const std::vector<double>& base = attrs.front();
        std::vector<double> mean(base.size(), 0.0);
        for (const auto& a : attrs)
            for (std::size_t k = 0; k < a.size(); ++k) mean[k] += a[k] - base[k];
        for (std::size_t k = 0; k < mean.size(); ++k) mean[k] = base[k] + mean[k] / double(attrs.size());

        Voxel v;
        v.path = path;
        std::copy_n(mean.begin(), 8, v.density.begin());
        v.sh0 = Vec3(mean[8], mean[9], mean[10]);
        v.sh_rest.assign(mean.begin() + 11, mean.end());
        v.views = static_cast<std::uint32_t>(members.size());
        v.split_for_alignment = all_split;
        fused.voxels.push_back(std::move(v));
    }
    return fused;
}

VoxelOctree fuse(std::span<const VoxelOctree> trees) {
    auto aligned = align_topology(trees);
    return aggregate_features(aligned);
}

}  // namespace voxforge
