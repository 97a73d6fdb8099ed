// Copyright 2026 The Voxforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "voxforge/optimize.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <numeric>

#include "voxforge/simd/kernels.hpp"

namespace voxforge {

LossTerm loss_photo(std::span<const double> rendered, const FloatRaster& target,
                    const MaskRaster* mask, std::vector<double>* grad) {
    const std::size_t n = target.pixel_count();
    if (target.channels != 3 || rendered.size() != 3 * n) fail_data("loss_photo: raster sizes differ");
    if (mask && !mask->same_shape(target.width, target.height)) fail_data("loss_photo: mask size differs");
    if (grad) grad->assign(3 * n, 0.0);
    LossTerm out;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (mask && !mask->data[i]) continue;
        ++out.count;
        for (int c = 0; c < 3; ++c) sum += std::abs(rendered[3 * i + c] - double(target.data[3 * i + c]));
    }
    if (out.count == 0) return out;
    const double denom = 3.0 * double(out.count);
    out.value = sum / denom;
    if (grad) {
        for (std::size_t i = 0; i < n; ++i) {
            if (mask && !mask->data[i]) continue;
            for (int c = 0; c < 3; ++c) {
                const double d = rendered[3 * i + c] - double(target.data[3 * i + c]);
                (*grad)[3 * i + c] = d > 0.0 ? 1.0 / denom : (d < 0.0 ? -1.0 / denom : 0.0);
            }
        }
    }
    return out;
}

LossTerm loss_refined_depth(std::span<const double> rendered_depth, const RefinedDepthMap& refined,
                            std::vector<double>* grad) {
    const std::size_t n = refined.depth.pixel_count();
    if (rendered_depth.size() != n || refined.valid.pixel_count() != n)
        fail_data("loss_refined_depth: raster sizes differ");
    if (grad) grad->assign(n, 0.0);
    LossTerm out;
    double sum = 0.0;
    auto usable = [&](std::size_t i) { return refined.valid.data[i] && std::isfinite(rendered_depth[i]); };
    for (std::size_t i = 0; i < n; ++i) {
        if (!usable(i)) continue;
        ++out.count;
        sum += std::abs(rendered_depth[i] - double(refined.depth.data[i]));
    }
    if (out.count == 0) return out;
    out.value = sum / double(out.count);
    if (grad) {
        const double inv = 1.0 / double(out.count);
        for (std::size_t i = 0; i < n; ++i) {
            if (!usable(i)) continue;
            const double d = rendered_depth[i] - double(refined.depth.data[i]);
            (*grad)[i] = d > 0.0 ? inv : (d < 0.0 ? -inv : 0.0);
        }
    }
    return out;
}

double total_loss(const LossWeights& w, double l_photo, double l_reg, double l_refd) {
    return w.photo * l_photo + w.reg * l_reg + w.refd * l_refd;
}

void AdamGroup::update(double* param, const double* grad, std::size_t n, std::uint64_t t,
                       double beta1, double beta2, double eps) {
    if (n != m.size()) fail_data("adam: parameter count does not match the moments");
    const simd::AdamCoeffs c{lr, beta1, beta2, eps, 1.0 - std::pow(beta1, double(t)),
                             1.0 - std::pow(beta2, double(t))};
    simd::kernels().adam_update(param, grad, m.data(), v.data(), n, c);
}

AdamOptimizer::AdamOptimizer(const AdamOptions& opts, const VoxelOctree& tree)
    : opts_(opts), sh_rest_len_(tree.sh_rest_len) {
    density_.lr = opts.lr_density;
    sh0_.lr = opts.lr_sh0;
    shrest_.lr = opts.lr_shrest;
    density_.resize(8 * tree.size());
    sh0_.resize(3 * tree.size());
    shrest_.resize(std::size_t(sh_rest_len_) * tree.size());
}

void AdamOptimizer::step(VoxelOctree& tree, const VoxelGradients& grads) {
    const std::size_t n = tree.size();
    if (grads.density.size() != n || grads.sh0.size() != n || density_.m.size() != 8 * n)
        fail_data("adam: gradient layout does not match the tree");
    std::vector<double> p(8 * n), g(8 * n);
    for (std::size_t i = 0; i < n; ++i)
        for (int k = 0; k < 8; ++k) {
            const double gi = grads.density[i][k];
            if (!std::isfinite(gi))
                fail_numerical("non-finite gradient at voxel " + std::to_string(i) + " density[" +
                               std::to_string(k) + "]");
            p[8 * i + k] = tree.voxels[i].density[k];
            g[8 * i + k] = gi;
        }
    std::vector<double> p3(3 * n), g3(3 * n);
    for (std::size_t i = 0; i < n; ++i)
        for (int k = 0; k < 3; ++k) {
            const double gi = grads.sh0[i][k];
            if (!std::isfinite(gi))
                fail_numerical("non-finite gradient at voxel " + std::to_string(i) + " sh0[" +
                               std::to_string(k) + "]");
            p3[3 * i + k] = tree.voxels[i].sh0[k];
            g3[3 * i + k] = gi;
        }
    ++t_;
    density_.update(p.data(), g.data(), p.size(), t_, opts_.beta1, opts_.beta2, opts_.eps);
    sh0_.update(p3.data(), g3.data(), p3.size(), t_, opts_.beta1, opts_.beta2, opts_.eps);
    for (std::size_t i = 0; i < n; ++i) {
        for (int k = 0; k < 8; ++k) tree.voxels[i].density[k] = p[8 * i + k];
        for (int k = 0; k < 3; ++k) tree.voxels[i].sh0[k] = p3[3 * i + k];
    }
    if (sh_rest_len_ > 0) {
        // Rendering uses degree 0 only, so these gradients are zero.
        const std::size_t r = sh_rest_len_;
        std::vector<double> pr(r * n), gr(r * n, 0.0);
        for (std::size_t i = 0; i < n; ++i) std::copy_n(tree.voxels[i].sh_rest.begin(), r, pr.begin() + r * i);
        shrest_.update(pr.data(), gr.data(), pr.size(), t_, opts_.beta1, opts_.beta2, opts_.eps);
        for (std::size_t i = 0; i < n; ++i) std::copy_n(pr.begin() + r * i, r, tree.voxels[i].sh_rest.begin());
    }
}

void AdamOptimizer::remap(std::span<const std::uint32_t> source, std::uint32_t sh_rest_len) {
    auto remap_group = [&](AdamGroup& grp, std::size_t width) {
        AdamGroup out;
        out.lr = grp.lr;
        out.resize(width * source.size());
        for (std::size_t i = 0; i < source.size(); ++i)
            for (std::size_t k = 0; k < width; ++k) {
                out.m[width * i + k] = grp.m[width * source[i] + k];
                out.v[width * i + k] = grp.v[width * source[i] + k];
            }
        grp = std::move(out);
    };
    if (sh_rest_len != sh_rest_len_) fail_data("adam: sh_rest length changed");
    remap_group(density_, 8);
    remap_group(sh0_, 3);
    remap_group(shrest_, sh_rest_len_);
}

TrainOptions TrainOptions::from_config(const Config& cfg) {
    TrainOptions o;
    o.iters = static_cast<std::uint32_t>(cfg.get_int("train.iters", o.iters));
    o.prune_interval = static_cast<std::uint32_t>(cfg.get_int("train.prune_interval", o.prune_interval));
    o.refresh_R = static_cast<std::uint32_t>(cfg.get_int("train.refresh_R", o.refresh_R));
    o.prune_tau = cfg.get_double("train.prune_tau", o.prune_tau);
    o.subdivide_fraction = cfg.get_double("train.subdivide_fraction", o.subdivide_fraction);
    o.level_max = static_cast<unsigned>(cfg.get_int("train.level_max", o.level_max));
    o.adam.lr_density = cfg.get_double("train.lr.density", o.adam.lr_density);
    o.adam.lr_sh0 = cfg.get_double("train.lr.sh0", o.adam.lr_sh0);
    o.adam.lr_shrest = cfg.get_double("train.lr.shrest", o.adam.lr_shrest);
    o.weights.photo = cfg.get_double("loss.lambda_photo", o.weights.photo);
    o.weights.reg = cfg.get_double("loss.lambda_reg", o.weights.reg);
    o.weights.refd = cfg.get_double("loss.lambda_refd", o.weights.refd);
    o.refine = RefineOptions::from_config(cfg);
    const double bg = cfg.get_double("render.background", 0.0);
    o.render.background = Vec3::Constant(bg);
    if (o.refresh_R == 0) fail_usage("train.refresh_R must be positive");
    if (o.prune_tau < 0.0 || o.subdivide_fraction < 0.0) fail_usage("negative pruning setting");
    if (o.level_max > MortonPath::kMaxLevel) fail_usage("train.level_max too large");
    return o;
}

std::vector<FloatRaster> render_depths(const VoxelOctree& tree, std::span<const Camera> cams,
                                       const RenderSettings& settings) {
    const RenderIndex index(tree);
    std::vector<FloatRaster> out;
    out.reserve(cams.size());
    for (const Camera& cam : cams) out.push_back(render_view(tree, index, cam, settings).depth_raster());
    return out;
}

std::vector<RefinedDepthMap> refresh_targets(const VoxelOctree& tree, const TrainData& data,
                                             const RefineOptions& refine,
                                             const RenderSettings& settings, std::uint64_t iteration) {
    const auto depths = render_depths(tree, data.cameras, settings);
    std::vector<FloatRaster> gray;
    for (const auto& im : data.images) gray.push_back(to_gray(im));
    RefineOptions o = refine;
    o.iteration = iteration;
    std::vector<RefinedDepthMap> out;
    for (std::uint32_t i = 0; i < data.cameras.size(); ++i)
        out.push_back(refine_depth(data.cameras, gray, depths, i, o));
    return out;
}

namespace {

// Seeded Fisher-Yates over the views, one permutation per epoch.
std::vector<std::uint32_t> epoch_order(std::size_t n, std::uint64_t seed, std::uint64_t epoch) {
    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    for (std::size_t i = n; i > 1; --i) {
        const auto j = std::size_t(counter_uniform(seed ^ 0x5eedull, epoch, i, 0) * double(i));
        std::swap(order[i - 1], order[std::min(j, i - 1)]);
    }
    return order;
}

}  // namespace

VoxelOctree train(const VoxelOctree& init, const TrainData& data, const TrainOptions& opts,
                  std::vector<LossReport>& trace) {
    const std::size_t nviews = data.cameras.size();
    if (nviews == 0 || data.images.size() != nviews) fail_data("train: cameras and images differ in count");
    for (std::size_t i = 0; i < nviews; ++i) {
        if (data.images[i].channels != 3 ||
            !data.images[i].same_shape(data.cameras[i].width, data.cameras[i].height))
            fail_data("train: image " + std::to_string(i) + " does not match its camera");
    }
    VoxelOctree tree = init;
    if (opts.iters == 0) return tree;
    AdamOptimizer adam(opts.adam, tree);
    VoxelStats stats(tree.size());
    std::vector<RefinedDepthMap> targets;
    bool warned_photo = false, warned_refd = false;
    std::vector<std::uint32_t> order;

    for (std::uint32_t it = 0; it < opts.iters; ++it) {
        if (opts.weights.refd != 0.0 && it % opts.refresh_R == 0)
            targets = refresh_targets(tree, data, opts.refine, opts.render, it);
        if (it % nviews == 0) order = epoch_order(nviews, opts.seed, it / nviews);
        const std::uint32_t view = order[it % nviews];
        const Camera& cam = data.cameras[view];

        const RenderIndex index(tree);
        std::vector<std::vector<RenderSample>> traces;
        const RenderedView rv = render_view(tree, index, cam, opts.render, &traces);

        ViewGradientInput gin;
        const LossTerm photo = loss_photo(rv.color, data.images[view], nullptr, &gin.d_color);
        LossTerm refd;
        if (opts.weights.refd != 0.0) refd = loss_refined_depth(rv.depth, targets[view], &gin.d_depth);
        if (photo.count == 0 && !warned_photo) {
            std::cerr << "warning: photometric loss has no valid pixels\n";
            warned_photo = true;
        }
        if (opts.weights.refd != 0.0 && refd.count == 0 && !warned_refd) {
            std::cerr << "warning: refined-depth loss has no valid pixels (view " << view << ")\n";
            warned_refd = true;
        }
        for (double& g : gin.d_color) g *= opts.weights.photo;
        for (double& g : gin.d_depth) g *= opts.weights.refd;
        gin.pixel_error.resize(rv.opacity.size());
        for (std::size_t i = 0; i < gin.pixel_error.size(); ++i) {
            double e = 0.0;
            for (int c = 0; c < 3; ++c) e += std::abs(rv.color[3 * i + c] - data.images[view].data[3 * i + c]);
            gin.pixel_error[i] = e / 3.0;
        }

        LossReport rep;
        rep.iter = it;
        rep.l_photo = photo.value;
        rep.l_refd = refd.value;
        rep.l_reg = loss_reg(tree);
        rep.total = total_loss(opts.weights, rep.l_photo, rep.l_reg, rep.l_refd);
        rep.voxel_count = tree.size();
        rep.photo_pixels = photo.count;
        rep.refd_pixels = refd.count;
        trace.push_back(rep);
        if (!std::isfinite(rep.total)) fail_numerical("training diverged at iteration " + std::to_string(it));

        const VoxelGradients grads = backward_view(tree, rv, traces, gin, opts.render, &stats);
        adam.step(tree, grads);

        const bool last = it + 1 == opts.iters;
        if (opts.prune_interval > 0 && (it + 1) % opts.prune_interval == 0 && !last) {
            const auto max_new = static_cast<std::size_t>(opts.subdivide_fraction * double(tree.size()));
            PruneSubdivideResult res = prune_and_subdivide(tree, stats, opts.prune_tau, max_new, opts.level_max);
            adam.remap(res.source, tree.sh_rest_len);
            tree = std::move(res.tree);
            stats = VoxelStats(tree.size());
        }
    }
    return tree;
}

void write_trace(const std::string& path, std::span<const LossReport> trace) {
    std::ofstream os(path);
    if (!os) fail_data("cannot open " + path + " for writing");
    os << std::setprecision(17);
    for (const auto& r : trace)
        os << r.iter << ' ' << r.l_photo << ' ' << r.l_refd << ' ' << r.l_reg << ' ' << r.total << ' '
           << r.voxel_count << '\n';
    if (!os) fail_data("failed writing " + path);
}

}  // namespace voxforge
