// Copyright 2026 The Voxforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "voxforge/refine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "voxforge/parallel.hpp"
#include "voxforge/simd/kernels.hpp"

namespace voxforge {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::uint64_t splitmix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

bool valid_depth(double d) { return d > 0.0 && std::isfinite(d); }

}  // namespace

std::size_t RefinedDepthMap::valid_count() const {
    return static_cast<std::size_t>(std::count_if(valid.data.begin(), valid.data.end(),
                                                  [](std::uint8_t m) { return m != 0; }));
}

RefineOptions RefineOptions::from_config(const Config& cfg) {
    RefineOptions o;
    o.K = static_cast<std::uint32_t>(cfg.get_int("refine.K", o.K));
    o.n_rand = static_cast<std::uint32_t>(cfg.get_int("refine.n_rand", o.n_rand));
    o.s = cfg.get_double("refine.s", o.s);
    o.reproj_thresh = cfg.get_double("refine.reproj_thresh", o.reproj_thresh);
    o.patch = static_cast<std::uint32_t>(cfg.get_int("refine.patch", o.patch));
    if (o.patch % 2 == 0 || o.patch == 0) fail_usage("refine.patch must be odd");
    if (!(o.s >= 0.0) || o.s >= 2.0) fail_usage("refine.s must lie in [0, 2)");
    return o;
}

double counter_uniform(std::uint64_t seed, std::uint64_t iteration, std::uint64_t pixel,
                       std::uint64_t k) {
    std::uint64_t h = splitmix(seed);
    h = splitmix(h ^ iteration);
    h = splitmix(h ^ pixel);
    h = splitmix(h ^ k);
    return double(h >> 11) * 0x1.0p-53;
}

std::vector<double> build_candidates(const FloatRaster& rendered, std::uint32_t u, std::uint32_t v,
                                     std::uint32_t n_rand, double s, std::uint64_t seed,
                                     std::uint64_t iteration) {
    const double d = rendered.at(u, v);
    if (!valid_depth(d)) return {};
    std::vector<double> out;
    out.reserve(3 + n_rand);
    out.push_back(d);
    const double dx = u + 1 < rendered.width ? rendered.at(u + 1, v) : kNaN;
    const double dy = v + 1 < rendered.height ? rendered.at(u, v + 1) : kNaN;
    out.push_back(valid_depth(dx) ? dx : d);
    out.push_back(valid_depth(dy) ? dy : d);
    const std::uint64_t pixel = std::uint64_t(v) * rendered.width + u;
    for (std::uint32_t k = 0; k < n_rand; ++k) {
        const double eps = s * (counter_uniform(seed, iteration, pixel, k) - 0.5);
        out.push_back(d * (1.0 + eps));
    }
    return out;
}

double ncc(std::span<const double> a, std::span<const double> b, double min_variance) {
    if (a.size() != b.size()) fail_data("ncc: patch sizes differ");
    if (a.empty()) return kNaN;
    return simd::kernels().zncc(a.data(), b.data(), a.size(), min_variance);
}

FloatRaster to_gray(const FloatRaster& image) {
    FloatRaster g(image.width, image.height, 1);
    const std::uint32_t c = image.channels;
    for (std::size_t i = 0; i < g.data.size(); ++i) {
        double s = 0.0;
        for (std::uint32_t k = 0; k < c; ++k) s += image.data[i * c + k];
        g.data[i] = static_cast<float>(s / c);
    }
    return g;
}

std::vector<std::uint32_t> nearest_views(std::span<const Camera> cams, std::uint32_t reference,
                                         std::uint32_t K) {
    if (reference >= cams.size()) fail_data("nearest_views: reference out of range");
    const Vec3 c0 = cams[reference].center();
    std::vector<std::pair<double, std::uint32_t>> d;
    for (std::uint32_t i = 0; i < cams.size(); ++i)
        if (i != reference) d.emplace_back((cams[i].center() - c0).norm(), i);
    std::sort(d.begin(), d.end());
    std::vector<std::uint32_t> out;
    for (std::size_t i = 0; i < d.size() && i < K; ++i) out.push_back(d[i].second);
    return out;
}

double score_candidate(std::span<const Camera> cams, std::span<const FloatRaster> gray,
                       std::uint32_t reference, std::span<const std::uint32_t> neighbors,
                       std::uint32_t u, std::uint32_t v, double depth, std::uint32_t patch,
                       double min_variance) {
    if (!valid_depth(depth)) return kNaN;
    const int r = int(patch / 2);
    const FloatRaster& g0 = gray[reference];
    if (!g0.contains(long(u) - r, long(v) - r) || !g0.contains(long(u) + r, long(v) + r)) return kNaN;
    std::vector<double> a, b(std::size_t(patch) * patch);
    a.reserve(b.size());
    for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) a.push_back(g0.at(u + dx, v + dy));

    const Vec3 X = unproject_pixel(cams[reference], u, v, depth);
    const auto& kern = simd::kernels();
    double sum = 0.0;
    int n = 0;
    for (std::uint32_t j : neighbors) {
        const auto q = try_project(cams[j], X);
        if (!q) continue;
        bool ok = true;
        std::size_t k = 0;
        for (int dy = -r; dy <= r && ok; ++dy)
            for (int dx = -r; dx <= r && ok; ++dx)
                ok = sample_bilinear(gray[j], q->u + dx, q->v + dy, 0, b[k++]);
        if (!ok) continue;
        const double score = kern.zncc(a.data(), b.data(), a.size(), min_variance);
        if (std::isnan(score)) continue;
        sum += score;
        ++n;
    }
    return n > 0 ? sum / n : kNaN;
}

double reprojection_error(const Camera& ref, const Camera& nbr, const FloatRaster& nbr_depth,
                          double u, double v, double depth) {
    if (!valid_depth(depth)) return kNaN;
    const auto q = try_project(nbr, unproject_pixel(ref, u, v, depth));
    if (!q) return kNaN;
    double dn;
    if (!sample_depth_bilinear(nbr_depth, q->u, q->v, dn)) return kNaN;
    const auto back = try_project(ref, unproject_pixel(nbr, q->u, q->v, dn));
    if (!back) return kNaN;
    return std::hypot(back->u - u, back->v - v);
}

RefinedDepthMap refine_depth(std::span<const Camera> cams, std::span<const FloatRaster> gray,
                             std::span<const FloatRaster> rendered, std::uint32_t reference,
                             const RefineOptions& opts) {
    if (cams.size() != gray.size() || cams.size() != rendered.size())
        fail_data("refine_depth: cameras, images and depths differ in count");
    const FloatRaster& d0 = rendered[reference];
    RefinedDepthMap out;
    out.depth = FloatRaster(d0.width, d0.height, 1);
    out.valid = MaskRaster(d0.width, d0.height, 1);
    out.score = FloatRaster(d0.width, d0.height, 1);
    const std::uint32_t K = std::min<std::uint32_t>(opts.K, std::uint32_t(cams.size() - 1));
    const auto nbrs = nearest_views(cams, reference, K);
    if (nbrs.empty()) return out;

    parallel_for(d0.pixel_count(), [&](std::size_t i) {
        const auto u = std::uint32_t(i % d0.width), v = std::uint32_t(i / d0.width);
        const auto cands = build_candidates(d0, u, v, opts.n_rand, opts.s, opts.seed, opts.iteration);
        double best = kNaN, best_score = -std::numeric_limits<double>::infinity();
        for (double c : cands) {
            const double sc = score_candidate(cams, gray, reference, nbrs, u, v, c, opts.patch,
                                              opts.min_variance);
            if (sc > best_score) {
                best_score = sc;
                best = c;
            }
        }
        if (std::isnan(best)) return;
        bool consistent = false;
        for (std::uint32_t j : nbrs) {
            const double e = reprojection_error(cams[reference], cams[j], rendered[j], u, v, best);
            if (e <= opts.reproj_thresh) {
                consistent = true;
                break;
            }
        }
        if (!consistent) return;
        out.depth.data[i] = static_cast<float>(best);
        out.score.data[i] = static_cast<float>(std::clamp(best_score, -1.0, 1.0));
        out.valid.data[i] = 1;
    });
    return out;
}

void save_refined(const std::string& stem, const RefinedDepthMap& map) {
    write_imgf(stem + ".refd.imgf", map.depth);
    write_imgb(stem + ".refmask.imgb", map.valid);
    write_imgf(stem + ".refscore.imgf", map.score);
}

RefinedDepthMap load_refined(const std::string& stem) {
    RefinedDepthMap m;
    m.depth = read_imgf(stem + ".refd.imgf");
    m.valid = read_imgb(stem + ".refmask.imgb");
    m.score = read_imgf(stem + ".refscore.imgf");
    if (!m.valid.same_shape(m.depth.width, m.depth.height) ||
        !m.score.same_shape(m.depth.width, m.depth.height))
        fail_data("refined depth rasters differ in size: " + stem);
    return m;
}

}  // namespace voxforge
