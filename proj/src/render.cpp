// Copyright 2026 The Voxforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "voxforge/render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "voxforge/parallel.hpp"
#include "voxforge/simd/kernels.hpp"

namespace voxforge {

double corner_weight(unsigned m, const Vec3& u) {
    const double wx = kCornerOffsets[m][0] ? u.x() : 1.0 - u.x();
    const double wy = kCornerOffsets[m][1] ? u.y() : 1.0 - u.y();
    const double wz = kCornerOffsets[m][2] ? u.z() : 1.0 - u.z();
    return (wx * wy) * wz;
}

namespace {

inline double elu(double x) { return x > 0.0 ? x : std::expm1(x); }
inline double elu_grad(double x) { return x > 0.0 ? 1.0 : std::exp(x); }

}  // namespace

DensitySample sample_density(const Voxel& v, const Vec3& u) {
    double sigma = 0.0;
    for (unsigned m = 0; m < 8; ++m) sigma += corner_weight(m, u) * v.density[m];
    return {sigma, elu(sigma) + 1.0};
}

std::optional<Vec3> surface_normal(const Voxel& v, const Vec3& u) {
    // d sigma / d u for the trilinear blend.
    Vec3 g = Vec3::Zero();
    for (unsigned m = 0; m < 8; ++m) {
        const double wx = kCornerOffsets[m][0] ? u.x() : 1.0 - u.x();
        const double wy = kCornerOffsets[m][1] ? u.y() : 1.0 - u.y();
        const double wz = kCornerOffsets[m][2] ? u.z() : 1.0 - u.z();
        const double sx = kCornerOffsets[m][0] ? 1.0 : -1.0;
        const double sy = kCornerOffsets[m][1] ? 1.0 : -1.0;
        const double sz = kCornerOffsets[m][2] ? 1.0 : -1.0;
        g += v.density[m] * Vec3(sx * wy * wz, wx * sy * wz, wx * wy * sz);
    }
    const double sigma = sample_density(v, u).sigma;
    g *= elu_grad(sigma);
    const double n = g.norm();
    if (!(n > 1e-12)) return std::nullopt;
    return g / n;
}

unsigned direction_sign_mask(const Vec3& d) {
    return (d.x() < 0.0 ? 4u : 0u) | (d.y() < 0.0 ? 2u : 0u) | (d.z() < 0.0 ? 1u : 0u);
}

std::uint64_t directional_morton_key(MortonPath p, unsigned sign_mask) {
    std::uint64_t repeated = 0;
    for (unsigned k = 0; k < p.level; ++k) repeated |= std::uint64_t(sign_mask & 7u) << (3u * k);
    return morton_aligned(MortonPath{p.level, p.code ^ repeated});
}

std::vector<std::uint32_t> order_voxels(const VoxelOctree& tree, const Vec3& direction) {
    const unsigned mask = direction_sign_mask(direction);
    std::vector<std::uint64_t> keys(tree.voxels.size());
    for (std::size_t i = 0; i < keys.size(); ++i) keys[i] = directional_morton_key(tree.voxels[i].path, mask);
    std::vector<std::uint32_t> order(tree.voxels.size());
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) { return keys[a] < keys[b]; });
    return order;
}

RenderIndex::RenderIndex(const VoxelOctree& tree) : frame_(tree.frame) {
    empty_ = tree.voxels.empty();
    if (empty_) return;
    if (tree.voxels.size() == 1 && tree.voxels[0].path.level == 0) {
        root_voxel_ = 0;
        return;
    }
    nodes_.push_back(Node{});
    nodes_[0].child.fill(-1);
    for (std::size_t i = 0; i < tree.voxels.size(); ++i) {
        const MortonPath p = tree.voxels[i].path;
        if (p.level == 0) fail_data("root voxel alongside other voxels");
        std::int32_t node = 0;
        for (unsigned l = 1; l < p.level; ++l) {
            const unsigned c = unsigned((p.code >> (3u * (p.level - l))) & 7u);
            std::int32_t next = nodes_[node].child[c];
            if (next <= -2) fail_data("render index: voxel overlaps a descendant");
            if (next == -1) {
                next = static_cast<std::int32_t>(nodes_.size());
                nodes_[node].child[c] = next;
                nodes_.push_back(Node{});
                nodes_.back().child.fill(-1);
            }
            node = next;
        }
        const unsigned c = unsigned(p.code & 7u);
        if (nodes_[node].child[c] != -1) fail_data("render index: duplicate or overlapping voxel");
        nodes_[node].child[c] = -static_cast<std::int32_t>(i) - 2;
    }
}

RenderOutput render_ray(const VoxelOctree& tree, const RenderIndex& index, const Ray& ray,
                        const RenderSettings& settings, std::vector<RenderSample>* trace) {
    RenderOutput out;
    double T = 1.0;
    double depth_sum = 0.0;
    Vec3 normal_sum = Vec3::Zero();
    index.traverse(ray, [&](std::uint32_t vi, double t0, double t1) {
        const Voxel& v = tree.voxels[vi];
        const double dt = t1 - t0;
        const double tm = 0.5 * (t0 + t1);
        const double s = tree.frame.voxel_size(v.path.level);
        Vec3 u = ((ray.origin + tm * ray.direction) - tree.frame.cell_min(v.path)) / s;
        u = u.cwiseMax(0.0).cwiseMin(1.0);
        const DensitySample ds = sample_density(v, u);
        const double alpha = -std::expm1(-ds.rho * dt);
        const double w = T * alpha;
        out.color += w * v.color();
        depth_sum += w * tm;
        if (w > 0.0) {
            if (auto n = surface_normal(v, u)) normal_sum += w * *n;
        }
        if (trace) trace->push_back(RenderSample{vi, tm, dt, ds.sigma, ds.rho, alpha, T, u});
        out.opacity += w;
        T *= 1.0 - alpha;
        return T >= settings.early_stop;
    });
    out.t_final = T;
    out.color += T * settings.background;
    out.depth_valid = out.opacity >= settings.min_depth_opacity;
    out.depth = out.depth_valid ? depth_sum / out.opacity : std::numeric_limits<double>::quiet_NaN();
    const double nn = normal_sum.norm();
    out.normal_valid = nn > 1e-12;
    if (out.normal_valid) out.normal = normal_sum / nn;
    return out;
}

RenderOutput render_ray(const VoxelOctree& tree, const Ray& ray, const RenderSettings& settings) {
    const RenderIndex index(tree);
    return render_ray(tree, index, ray, settings);
}

void VoxelGradients::add(const VoxelGradients& other) {
    for (std::size_t i = 0; i < density.size(); ++i) {
        for (int m = 0; m < 8; ++m) density[i][m] += other.density[i][m];
        sh0[i] += other.sh0[i];
    }
}

namespace {

// Accumulates the ray's parameter gradients through `emit(voxel, dsigma[8], dsh0)`.
template <typename Emit>
void backward_samples(const VoxelOctree& tree, const std::vector<RenderSample>& samples,
                      const RenderOutput& out, const RayGradient& grad, const RenderSettings& settings,
                      Emit&& emit) {
    const std::size_t n = samples.size();
    if (n == 0) return;
    // Back-to-front "remainder" terms: what lies behind sample k, seen from
    // just after it, for colour, depth numerator and opacity.
    Vec3 rest_c = settings.background;
    double rest_n = 0.0, rest_a = 0.0;
    const bool use_depth = out.depth_valid && grad.d_depth != 0.0;
    for (std::size_t kk = n; kk-- > 0;) {
        const RenderSample& s = samples[kk];
        const Voxel& v = tree.voxels[s.voxel];
        const Vec3 c = v.color();

        const double dC_dalpha_dot = grad.d_color.dot(s.transmittance * (c - rest_c));
        const double dA_dalpha = s.transmittance * (1.0 - rest_a);
        double g_alpha = dC_dalpha_dot + grad.d_opacity * dA_dalpha;
        if (use_depth) {
            const double dN_dalpha = s.transmittance * (s.t_mid - rest_n);
            g_alpha += grad.d_depth * (dN_dalpha - out.depth * dA_dalpha) / out.opacity;
        }
        const double g_rho = g_alpha * s.dt * (1.0 - s.alpha);
        const double g_sigma = g_rho * elu_grad(s.sigma);
        std::array<double, 8> dsig;
        for (unsigned m = 0; m < 8; ++m) dsig[m] = g_sigma * corner_weight(m, s.u);
        const Vec3 dsh0 = (s.transmittance * s.alpha * kShC0) * grad.d_color;
        emit(s.voxel, dsig, dsh0);

        rest_c = s.alpha * c + (1.0 - s.alpha) * rest_c;
        rest_n = s.alpha * s.t_mid + (1.0 - s.alpha) * rest_n;
        rest_a = s.alpha + (1.0 - s.alpha) * rest_a;
    }
}

}  // namespace

void backward_ray(const VoxelOctree& tree, const std::vector<RenderSample>& samples,
                  const RenderOutput& out, const RayGradient& grad, const RenderSettings& settings,
                  VoxelGradients& grads) {
    if (grads.density.size() != tree.voxels.size()) grads = VoxelGradients(tree.voxels.size());
    backward_samples(tree, samples, out, grad, settings,
                     [&](std::uint32_t vi, const std::array<double, 8>& dsig, const Vec3& dsh0) {
                         for (int m = 0; m < 8; ++m) grads.density[vi][m] += dsig[m];
                         grads.sh0[vi] += dsh0;
                     });
}

Ray pixel_ray(const Camera& cam, double u, double v) {
    Ray r;
    r.origin = cam.center();
    r.direction = cam.ray_direction(u, v);
    return r;
}

namespace {

double ray_z_scale(const Camera& cam, double u, double v) {
    const Vec3 d((u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0);
    return 1.0 / d.norm();
}

}  // namespace

RenderedView render_view(const VoxelOctree& tree, const RenderIndex& index, const Camera& cam,
                         const RenderSettings& settings,
                         std::vector<std::vector<RenderSample>>* traces) {
    RenderedView view;
    view.width = cam.width;
    view.height = cam.height;
    const std::size_t n = std::size_t(cam.width) * cam.height;
    view.color.assign(3 * n, 0.0);
    view.depth.assign(n, std::numeric_limits<double>::quiet_NaN());
    view.opacity.assign(n, 0.0);
    view.normal.assign(3 * n, 0.0);
    view.ray_scale.assign(n, 1.0);
    if (traces) {
        traces->resize(n);
        for (auto& t : *traces) t.clear();
    }
    parallel_for(n, [&](std::size_t i) {
        const double u = double(i % cam.width), v = double(i / cam.width);
        const Ray ray = pixel_ray(cam, u, v);
        const RenderOutput out = render_ray(tree, index, ray, settings, traces ? &(*traces)[i] : nullptr);
        const double zs = ray_z_scale(cam, u, v);
        view.ray_scale[i] = zs;
        for (int c = 0; c < 3; ++c) {
            view.color[3 * i + c] = out.color[c];
            view.normal[3 * i + c] = out.normal_valid ? out.normal[c] : 0.0;
        }
        view.opacity[i] = out.opacity;
        if (out.depth_valid) view.depth[i] = out.depth * zs;
    });
    return view;
}

RenderedView render_view(const VoxelOctree& tree, const Camera& cam, const RenderSettings& settings) {
    const RenderIndex index(tree);
    return render_view(tree, index, cam, settings);
}

FloatRaster RenderedView::color_raster() const {
    FloatRaster r(width, height, 3);
    for (std::size_t i = 0; i < color.size(); ++i) r.data[i] = static_cast<float>(color[i]);
    return r;
}

FloatRaster RenderedView::depth_raster() const {
    FloatRaster r(width, height, 1);
    for (std::size_t i = 0; i < depth.size(); ++i)
        r.data[i] = std::isfinite(depth[i]) ? static_cast<float>(depth[i]) : 0.0f;
    return r;
}

FloatRaster RenderedView::normal_raster() const {
    FloatRaster r(width, height, 3);
    for (std::size_t i = 0; i < normal.size(); ++i) r.data[i] = static_cast<float>(normal[i]);
    return r;
}

FloatRaster RenderedView::opacity_raster() const {
    FloatRaster r(width, height, 1);
    for (std::size_t i = 0; i < opacity.size(); ++i) r.data[i] = static_cast<float>(opacity[i]);
    return r;
}

VoxelGradients backward_view(const VoxelOctree& tree, const RenderedView& view,
                             const std::vector<std::vector<RenderSample>>& traces,
                             const ViewGradientInput& input, const RenderSettings& settings,
                             VoxelStats* stats) {
    const std::size_t npix = std::size_t(view.width) * view.height;
    if (traces.size() != npix) fail_data("backward_view: traces do not match the view");
    constexpr std::size_t kChunk = 256;
    const std::size_t chunks = (npix + kChunk - 1) / kChunk;

    struct Record {
        std::uint32_t voxel;
        std::array<double, 8> dsig;
        Vec3 dsh0;
        double contribution;
        double priority;
    };
    std::vector<std::vector<Record>> records(chunks);
    parallel_chunks(npix, kChunk, [&](std::size_t chunk, std::size_t b, std::size_t e) {
        auto& rec = records[chunk];
        for (std::size_t i = b; i < e; ++i) {
            const auto& samples = traces[i];
            if (samples.empty()) continue;
            RenderOutput out;
            out.opacity = view.opacity[i];
            out.depth_valid = std::isfinite(view.depth[i]);
            out.depth = out.depth_valid ? view.depth[i] / view.ray_scale[i] : 0.0;
            RayGradient g;
            g.d_color = Vec3(input.d_color[3 * i], input.d_color[3 * i + 1], input.d_color[3 * i + 2]);
            g.d_depth = input.d_depth.empty() ? 0.0 : input.d_depth[i] * view.ray_scale[i];
            const double err = input.pixel_error.empty() ? 0.0 : input.pixel_error[i];
            std::size_t k = 0;
            backward_samples(tree, samples, out, g, settings,
                             [&](std::uint32_t vi, const std::array<double, 8>& dsig, const Vec3& dsh0) {
                                 // backward_samples walks back to front
                                 const RenderSample& s = samples[samples.size() - 1 - k++];
                                 const double w = s.transmittance * s.alpha;
                                 rec.push_back(Record{vi, dsig, dsh0, w, w * err});
                             });
        }
    });

    VoxelGradients grads(tree.voxels.size());
    for (const auto& rec : records) {
        for (const auto& r : rec) {
            for (int m = 0; m < 8; ++m) grads.density[r.voxel][m] += r.dsig[m];
            grads.sh0[r.voxel] += r.dsh0;
            if (stats) {
                stats->max_contribution[r.voxel] = std::max(stats->max_contribution[r.voxel], r.contribution);
                stats->priority[r.voxel] += r.priority;
            }
        }
    }
    return grads;
}

PruneSubdivideResult prune_and_subdivide(const VoxelOctree& tree, const VoxelStats& stats,
                                         double tau_p, std::size_t max_new, unsigned level_max) {
    const std::size_t n = tree.voxels.size();
    if (stats.max_contribution.size() != n || stats.priority.size() != n)
        fail_data("prune_and_subdivide: stats do not match the tree");

    std::vector<std::uint32_t> keep;
    for (std::size_t i = 0; i < n; ++i)
        if (!(stats.max_contribution[i] < tau_p)) keep.push_back(static_cast<std::uint32_t>(i));

    std::vector<std::uint32_t> ranked;
    for (auto i : keep)
        if (stats.priority[i] > 0.0 && tree.voxels[i].path.level < level_max) ranked.push_back(i);
    std::stable_sort(ranked.begin(), ranked.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return stats.priority[a] > stats.priority[b]; });
    if (ranked.size() > max_new) ranked.resize(max_new);
    std::vector<bool> split(n, false);
    for (auto i : ranked) split[i] = true;

    PruneSubdivideResult res;
    res.tree.frame = tree.frame;
    res.tree.sh_rest_len = tree.sh_rest_len;
    res.pruned = n - keep.size();
    res.subdivided = ranked.size();
    const auto& kern = simd::kernels();
    for (auto i : keep) {
        const Voxel& v = tree.voxels[i];
        if (!split[i]) {
            res.tree.voxels.push_back(v);
            res.source.push_back(i);
            res.is_child.push_back(false);
            continue;
        }
        // Child corner positions in parent coordinates, all 64 at once.
        double ux[64], uy[64], uz[64], dens[64];
        for (unsigned c = 0; c < 8; ++c)
            for (unsigned m = 0; m < 8; ++m) {
                ux[8 * c + m] = 0.5 * double(((c >> 2) & 1) + kCornerOffsets[m][0]);
                uy[8 * c + m] = 0.5 * double(((c >> 1) & 1) + kCornerOffsets[m][1]);
                uz[8 * c + m] = 0.5 * double((c & 1) + kCornerOffsets[m][2]);
            }
        kern.trilinear(v.density.data(), ux, uy, uz, dens, 64);
        for (unsigned c = 0; c < 8; ++c) {
            Voxel kid = v;
            kid.path = morton_child(v.path, c);
            std::copy_n(dens + 8 * c, 8, kid.density.begin());
            res.tree.voxels.push_back(std::move(kid));
            res.source.push_back(i);
            res.is_child.push_back(true);
        }
    }
    return res;
}

}  // namespace voxforge
