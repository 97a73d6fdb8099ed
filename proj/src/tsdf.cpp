// Copyright 2026 The Voxforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "voxforge/tsdf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>
#include <unordered_set>

#include "voxforge/lod.hpp"
#include "voxforge/parallel.hpp"
#include "voxforge/simd/kernels.hpp"

namespace voxforge {

VoxelOctree augment_with_uniform_grid(const VoxelOctree& tree, unsigned level) {
    if (level > MortonPath::kMaxLevel) fail_data("augment level exceeds the Morton code range");
    std::unordered_set<MortonPath, MortonPathHash> occupied;
    occupied.reserve(tree.voxels.size() * 2);
    for (const auto& v : tree.voxels) occupied.insert(v.path);

    std::vector<Voxel> cells = tree.voxels;
    const std::uint64_t count = std::uint64_t(1) << (3u * level);
    for (std::uint64_t code = 0; code < count; ++code) {
        const MortonPath cell{static_cast<std::uint8_t>(level), code};
        bool covered = false;
        for (MortonPath p = cell;; p = morton_parent(p)) {
            if (occupied.count(p)) {
                covered = true;
                break;
            }
            if (p.level == 0) break;
        }
        if (covered) continue;
        Voxel v;
        v.path = cell;
        v.sh_rest.assign(tree.sh_rest_len, 0.0);
        v.views = 0;
        cells.push_back(std::move(v));
    }

    VoxelOctree out;
    out.frame = tree.frame;
    out.sh_rest_len = tree.sh_rest_len;
    out.voxels = resolve_nested(std::move(cells));
    out.sort_canonical();
    return out;
}

CornerGrid build_corner_grid(const VoxelOctree& tree) {
    CornerGrid grid;
    const unsigned top = std::max(tree.max_level(), 1u);
    std::unordered_map<std::uint64_t, std::uint32_t> index;
    index.reserve(tree.voxels.size() * 3);
    grid.voxel_corners.resize(tree.voxels.size());
    const double fine = tree.frame.voxel_size(top);
    const double half = 0.5 * std::ldexp(1.0, int(top));
    for (std::size_t i = 0; i < tree.voxels.size(); ++i) {
        const MortonPath p = tree.voxels[i].path;
        const CellIndex c = morton_to_cell(p);
        const unsigned shift = top - p.level;
        for (unsigned m = 0; m < 8; ++m) {
            const std::uint64_t gx = std::uint64_t(c.x + kCornerOffsets[m][0]) << shift;
            const std::uint64_t gy = std::uint64_t(c.y + kCornerOffsets[m][1]) << shift;
            const std::uint64_t gz = std::uint64_t(c.z + kCornerOffsets[m][2]) << shift;
            const std::uint64_t key = (gx << 42) | (gy << 21) | gz;
            auto [it, fresh] = index.emplace(key, static_cast<std::uint32_t>(grid.points.size()));
            if (fresh)
                grid.points.push_back(tree.frame.center +
                                      fine * Vec3(double(gx) - half, double(gy) - half, double(gz) - half));
            grid.voxel_corners[i][m] = it->second;
        }
    }
    return grid;
}

TsdfGrid fuse_tsdf(std::span<const Vec3> points, std::span<const FloatRaster> depths,
                   std::span<const FloatRaster> confidences, std::span<const Camera> cams,
                   double d_trunc) {
    if (!(d_trunc > 0.0)) fail_data("truncation distance must be positive");
    if (depths.size() != cams.size() || (!confidences.empty() && confidences.size() != cams.size()))
        fail_data("fuse_tsdf: view count mismatch");

    const std::size_t n = points.size();
    TsdfGrid grid;
    grid.points.assign(points.begin(), points.end());
    std::vector<double> sum_wf(n, 0.0), sum_w(n, 0.0), f(n), w(n);
    const auto& k = simd::kernels();

    for (std::size_t view = 0; view < cams.size(); ++view) {
        const Camera& cam = cams[view];
        const FloatRaster& depth = depths[view];
        const FloatRaster* conf = confidences.empty() ? nullptr : &confidences[view];
        parallel_for(n, [&](std::size_t j) {
            f[j] = 0.0;
            w[j] = 0.0;
            const auto proj = try_project(cam, points[j]);
            if (!proj) return;
            double d = 0.0;
            if (!sample_depth_bilinear(depth, proj->u, proj->v, d)) return;
            const double raw = (d - proj->depth) / d_trunc;
            if (raw < -1.0) return;
            double kappa = 1.0;
            if (conf) sample_bilinear(*conf, proj->u, proj->v, 0, kappa);
            f[j] = std::clamp(raw, -1.0, 1.0);
            w[j] = kappa;
        });
        k.weighted_accumulate(sum_wf.data(), sum_w.data(), f.data(), w.data(), n);
    }

    grid.F.resize(n);
    grid.W = std::move(sum_w);
    for (std::size_t j = 0; j < n; ++j)
        grid.F[j] = grid.W[j] > 0.0 ? sum_wf[j] / grid.W[j] : std::numeric_limits<double>::quiet_NaN();
    return grid;
}

TsdfGrid fuse_tsdf(std::span<const Vec3> points, std::span<const DepthPrior> priors, double d_trunc) {
    std::vector<FloatRaster> depths, confs;
    std::vector<Camera> cams;
    for (const auto& p : priors) {
        depths.push_back(p.depth);
        confs.push_back(p.confidence);
        cams.push_back(p.camera);
    }
    return fuse_tsdf(points, depths, confs, cams, d_trunc);
}

double phi_sigmoid(double F, double beta) { return 1.0 / (1.0 + std::exp(F / beta)); }

double phi_bell(double F, double s) {
    const double e = std::exp(-s * std::abs(F));
    return 4.0 * e / ((1.0 + e) * (1.0 + e));
}

double calibrate_sigmoid(double a, double p) {
    if (!(a > 0.0)) fail_numerical("sigmoid calibration needs a > 0");
    if (p == 0.5) fail_numerical("sigmoid calibration undefined at p = 0.5");
    if (!(p > 0.5 && p < 1.0)) fail_numerical("sigmoid calibration needs 0.5 < p < 1");
    return -a / std::log(1.0 / p - 1.0);
}

double calibrate_bell(double a, double b) {
    if (!(a > 0.0)) fail_numerical("bell calibration needs a > 0");
    if (b == 1.0) fail_numerical("bell calibration undefined at b = 1 (peak only at F = 0)");
    if (!(b > 0.0 && b < 1.0)) fail_numerical("bell calibration needs 0 < b < 1");
    const double u = (2.0 - b + 2.0 * std::sqrt(1.0 - b)) / b;
    return std::log(u) / a;
}

OpacityMapping OpacityMapping::sigmoid(double a, double p) {
    OpacityMapping m;
    m.kind = Kind::Sigmoid;
    m.a = a;
    m.p = p;
    m.slope = calibrate_sigmoid(a, p);
    return m;
}

OpacityMapping OpacityMapping::bell(double a, double b) {
    OpacityMapping m;
    m.kind = Kind::Bell;
    m.a = a;
    m.b = b;
    m.slope = calibrate_bell(a, b);
    return m;
}

double OpacityMapping::operator()(double F) const {
    return kind == Kind::Sigmoid ? phi_sigmoid(F, slope) : phi_bell(F, slope);
}

double density_for_alpha(double alpha, double step) {
    const double rho = -std::log1p(-alpha) / step;
    return rho >= 1.0 ? rho - 1.0 : std::log(rho);
}

namespace {

std::vector<double> corner_phi(const TsdfGrid& tsdf, const OpacityMapping& map) {
    std::vector<double> phi(tsdf.F.size(), 0.0);
    for (std::size_t j = 0; j < phi.size(); ++j)
        if (tsdf.W[j] > 0.0) phi[j] = map(tsdf.F[j]);
    return phi;
}

double max_corner(const std::vector<double>& phi, const std::array<std::uint32_t, 8>& corners) {
    double m = 0.0;
    for (auto c : corners) m = std::max(m, phi[c]);
    return m;
}

}  // namespace

VoxelOctree apply_opacity(const TsdfGrid& tsdf, const CornerGrid& grid, const VoxelOctree& tree,
                          const OpacityOptions& opts) {
    if (grid.voxel_corners.size() != tree.voxels.size() || tsdf.F.size() != grid.points.size())
        fail_data("apply_opacity: corner grid does not match the tree");
    if (!(opts.alpha_min > 0.0 && opts.alpha_min < opts.alpha_max && opts.alpha_max < 1.0))
        fail_data("opacity range must satisfy 0 < alpha_min < alpha_max < 1");

    const std::vector<double> phi = corner_phi(tsdf, opts.mapping);
    VoxelOctree out;
    out.frame = tree.frame;
    out.sh_rest_len = tree.sh_rest_len;
    for (std::size_t i = 0; i < tree.voxels.size(); ++i) {
        const auto& corners = grid.voxel_corners[i];
        if (max_corner(phi, corners) < opts.tau_prune) continue;
        Voxel v = tree.voxels[i];
        const double step = tree.frame.voxel_size(v.path.level);
        for (unsigned m = 0; m < 8; ++m) {
            const double alpha = opts.alpha_min + (opts.alpha_max - opts.alpha_min) * phi[corners[m]];
            v.density[m] = density_for_alpha(alpha, step);
        }
        out.voxels.push_back(std::move(v));
    }
    return out;
}

std::pair<std::size_t, std::size_t> compare_mapping_sparsity(const TsdfGrid& tsdf,
                                                             const CornerGrid& grid,
                                                             const OpacityMapping& sigmoid_map,
                                                             const OpacityMapping& bell_map,
                                                             double tau_prune) {
    const auto phi_s = corner_phi(tsdf, sigmoid_map);
    const auto phi_b = corner_phi(tsdf, bell_map);
    std::size_t ns = 0, nb = 0;
    for (const auto& corners : grid.voxel_corners) {
        if (!(max_corner(phi_s, corners) < tau_prune)) ++ns;
        if (!(max_corner(phi_b, corners) < tau_prune)) ++nb;
    }
    return {ns, nb};
}

OpacityPipelineOptions OpacityPipelineOptions::from_config(const Config& cfg) {
    OpacityPipelineOptions o;
    o.d_trunc = cfg.get_double("tsdf.trunc", 0.0);
    const std::string kind = cfg.get_string("opacity.kind", "sigmoid");
    const double a = cfg.get_double("opacity.a", 0.1);
    if (kind == "sigmoid") o.opacity.mapping = OpacityMapping::sigmoid(a, cfg.get_double("opacity.p", 0.9));
    else if (kind == "bell") o.opacity.mapping = OpacityMapping::bell(a, cfg.get_double("opacity.b", 0.5));
    else fail_usage("opacity.kind must be sigmoid or bell");
    o.opacity.alpha_min = cfg.get_double("opacity.alpha_min", 0.01);
    o.opacity.alpha_max = cfg.get_double("opacity.alpha_max", 0.99);
    o.opacity.tau_prune = cfg.get_double("opacity.tau_prune", 0.05);
    o.augment_level = static_cast<int>(cfg.get_int("augment.level", -1));
    return o;
}

VoxelOctree predict_opacity(const VoxelOctree& fused, std::span<const DepthPrior> priors,
                            const OpacityPipelineOptions& opts) {
    unsigned level;
    if (opts.augment_level >= 0) {
        level = static_cast<unsigned>(opts.augment_level);
    } else if (fused.empty()) {
        level = 4;
    } else {
        std::vector<unsigned> levels;
        for (const auto& v : fused.voxels) levels.push_back(v.path.level);
        std::nth_element(levels.begin(), levels.begin() + levels.size() / 2, levels.end());
        level = levels[levels.size() / 2];
    }
    const VoxelOctree grid_tree = augment_with_uniform_grid(fused, level);
    const double d_trunc =
        opts.d_trunc > 0.0 ? opts.d_trunc : 3.0 * grid_tree.frame.voxel_size(grid_tree.max_level());
    const CornerGrid corners = build_corner_grid(grid_tree);
    const TsdfGrid tsdf = fuse_tsdf(corners.points, priors, d_trunc);
    return apply_opacity(tsdf, corners, grid_tree, opts.opacity);
}

}  // namespace voxforge
