// Copyright 2026 The Voxforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "voxforge/camera.hpp"
#include "voxforge/octree.hpp"
#include "voxforge/raster.hpp"

namespace voxforge {

struct Ray {
    Vec3 origin = Vec3::Zero();
    Vec3 direction = Vec3::UnitZ();  // unit length
    double t_near = 0.0;
    double t_far = std::numeric_limits<double>::infinity();
};

struct DensitySample {
    double sigma;  // trilinear blend of the corner values
    double rho;    // ELU(sigma) + 1
};

/// Density at local coordinate u in [0,1]^3.
DensitySample sample_density(const Voxel& v, const Vec3& u);

/// Trilinear weight of corner m at u.
double corner_weight(unsigned m, const Vec3& u);

/// Unit gradient direction of rho at u (world and local frames agree up to
/// the isotropic voxel scale). nullopt when |grad rho| <= 1e-12.
std::optional<Vec3> surface_normal(const Voxel& v, const Vec3& u);

/// Bit mask selecting the axes to mirror: x -> 4, y -> 2, z -> 1 for
/// negative direction components.
unsigned direction_sign_mask(const Vec3& direction);

/// Sort key for the direction-dependent Morton order: each level's child
/// index is XOR-ed with the sign mask, then the code is left-aligned.
std::uint64_t directional_morton_key(MortonPath p, unsigned sign_mask);

/// Voxel indices in direction-dependent Morton order. For leaf-only trees
/// this is a front-to-back order for every ray in the direction's octant.
std::vector<std::uint32_t> order_voxels(const VoxelOctree& tree, const Vec3& direction);

/// Internal-node hierarchy over a leaf-only tree for per-ray traversal.
class RenderIndex {
public:
    RenderIndex() = default;
    explicit RenderIndex(const VoxelOctree& tree);

    /// Calls visit(voxel, t_enter, t_exit) for every voxel the ray crosses
    /// with positive length, front to back; stops when visit returns false.
    template <typename Visit>
    void traverse(const Ray& ray, Visit&& visit) const;

private:
    struct Node {
        std::array<std::int32_t, 8> child;  // -1 empty, >= 0 node, <= -2 voxel -(i+2)
    };
    OctreeFrame frame_;
    std::vector<Node> nodes_;
    std::int32_t root_voxel_ = -1;  // tree is a single level-0 voxel
    bool empty_ = true;
};

struct RenderSample {
    std::uint32_t voxel;
    double t_mid;
    double dt;
    double sigma;
    double rho;
    double alpha;
    double transmittance;  // T_k before this sample
    Vec3 u;
};

struct RenderSettings {
    Vec3 background = Vec3::Zero();
    double early_stop = 1e-4;       // stop once T drops below
    double min_depth_opacity = 1e-6;  // below: depth flagged invalid
};

struct RenderOutput {
    Vec3 color = Vec3::Zero();
    double depth = 0.0;  // expected termination distance along the ray
    bool depth_valid = false;
    double opacity = 0.0;  // sum of T_k alpha_k
    Vec3 normal = Vec3::Zero();
    bool normal_valid = false;
    double t_final = 1.0;
};

/// Front-to-back compositing, one density sample at each segment midpoint.
/// Appends the samples to `trace` when provided.
RenderOutput render_ray(const VoxelOctree& tree, const RenderIndex& index, const Ray& ray,
                        const RenderSettings& settings = {},
                        std::vector<RenderSample>* trace = nullptr);

RenderOutput render_ray(const VoxelOctree& tree, const Ray& ray, const RenderSettings& settings = {});

/// Upstream gradients of a scalar loss with respect to one ray's outputs.
struct RayGradient {
    Vec3 d_color = Vec3::Zero();
    double d_depth = 0.0;  // w.r.t. RenderOutput::depth (ray distance)
    double d_opacity = 0.0;
};

/// Parameter gradients, laid out like tree.voxels.
struct VoxelGradients {
    std::vector<std::array<double, 8>> density;
    std::vector<Vec3> sh0;

    explicit VoxelGradients(std::size_t n = 0) : density(n, std::array<double, 8>{}), sh0(n, Vec3::Zero()) {}
    void add(const VoxelGradients& other);
};

/// Chain rule through compositing, the ELU activation and trilinear
/// interpolation for the samples of one ray.
void backward_ray(const VoxelOctree& tree, const std::vector<RenderSample>& samples,
                  const RenderOutput& out, const RayGradient& grad,
                  const RenderSettings& settings, VoxelGradients& grads);

struct RenderedView {
    std::uint32_t width = 0, height = 0;
    std::vector<double> color;    // 3 per pixel
    std::vector<double> depth;    // camera z; NaN where invalid
    std::vector<double> opacity;
    std::vector<double> normal;   // 3 per pixel; zero where invalid
    std::vector<double> ray_scale;  // z per unit ray distance

    FloatRaster color_raster() const;
    FloatRaster depth_raster() const;  // invalid depth stored as 0
    FloatRaster normal_raster() const;
    FloatRaster opacity_raster() const;
};

Ray pixel_ray(const Camera& cam, double u, double v);

RenderedView render_view(const VoxelOctree& tree, const RenderIndex& index, const Camera& cam,
                         const RenderSettings& settings = {},
                         std::vector<std::vector<RenderSample>>* traces = nullptr);

RenderedView render_view(const VoxelOctree& tree, const Camera& cam, const RenderSettings& settings = {});

/// Per-voxel statistics gathered over a training interval.
struct VoxelStats {
    std::vector<double> max_contribution;  // max T_k alpha_k seen
    std::vector<double> priority;          // sum of T_k alpha_k * pixel error

    explicit VoxelStats(std::size_t n = 0) : max_contribution(n, 0.0), priority(n, 0.0) {}
};

/// Per-pixel upstream gradients for a whole view (d_color 3/pixel, d_depth
/// w.r.t. camera z) plus the pixel error used for subdivision priority.
struct ViewGradientInput {
    std::vector<double> d_color;
    std::vector<double> d_depth;
    std::vector<double> pixel_error;
};

/// Backward pass over a rendered view. Pixels are processed in fixed chunks
/// reduced in chunk order, so results do not depend on the thread count.
VoxelGradients backward_view(const VoxelOctree& tree, const RenderedView& view,
                             const std::vector<std::vector<RenderSample>>& traces,
                             const ViewGradientInput& input, const RenderSettings& settings,
                             VoxelStats* stats = nullptr);

struct PruneSubdivideResult {
    VoxelOctree tree;
    /// For each output voxel, the input voxel it came from.
    std::vector<std::uint32_t> source;
    /// Output voxels created by subdivision.
    std::vector<bool> is_child;
    std::size_t pruned = 0;
    std::size_t subdivided = 0;
};

/// Drops voxels with max contribution < tau_p, then splits the `max_new`
/// highest-priority survivors (priority > 0, ties by index) into children
/// with trilinearly interpolated densities and copied SH coefficients.
PruneSubdivideResult prune_and_subdivide(const VoxelOctree& tree, const VoxelStats& stats,
                                         double tau_p, std::size_t max_new,
                                         unsigned level_max = 16);

// ---------------------------------------------------------------------------

template <typename Visit>
void RenderIndex::traverse(const Ray& ray, Visit&& visit) const {
    if (empty_) return;
    const Vec3& o = ray.origin;
    const Vec3& d = ray.direction;

    auto slab = [&](const Vec3& lo, double size, double& t0, double& t1) {
        t0 = ray.t_near;
        t1 = ray.t_far;
        for (int a = 0; a < 3; ++a) {
            const double hi = lo[a] + size;
            if (d[a] == 0.0) {
                if (o[a] < lo[a] || o[a] > hi) return false;
                continue;
            }
            const double inv = 1.0 / d[a];
            double ta = (lo[a] - o[a]) * inv, tb = (hi - o[a]) * inv;
            if (ta > tb) std::swap(ta, tb);
            t0 = ta > t0 ? ta : t0;
            t1 = tb < t1 ? tb : t1;
        }
        return t1 > t0;
    };

    const Vec3 root_lo = frame_.center - Vec3::Constant(0.5 * frame_.size);
    double t0, t1;
    if (!slab(root_lo, frame_.size, t0, t1)) return;
    if (root_voxel_ >= 0) {
        visit(static_cast<std::uint32_t>(root_voxel_), t0, t1);
        return;
    }

    const unsigned mask = direction_sign_mask(d);
    struct Entry {
        std::int32_t node;
        Vec3 lo;
        double size;
        double t0, t1;
    };
    Entry stack[8 * (MortonPath::kMaxLevel + 1)];
    int top = 0;
    stack[top++] = {0, root_lo, frame_.size, t0, t1};
    while (top > 0) {
        const Entry e = stack[--top];
        if (e.node <= -2) {
            if (!visit(static_cast<std::uint32_t>(-e.node - 2), e.t0, e.t1)) return;
            continue;
        }
        const double half = 0.5 * e.size;
        // Push in reverse so the nearest child is popped first.
        for (int k = 7; k >= 0; --k) {
            const unsigned c = unsigned(k) ^ mask;
            const std::int32_t ch = nodes_[e.node].child[c];
            if (ch == -1) continue;
            const Vec3 lo = e.lo + half * Vec3(double((c >> 2) & 1), double((c >> 1) & 1), double(c & 1));
            double c0, c1;
            if (!slab(lo, half, c0, c1)) continue;
            stack[top++] = {ch, lo, half, c0, c1};
        }
    }
}

}  // namespace voxforge
