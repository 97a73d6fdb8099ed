// Copyright 2026 The Voxforge Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "voxforge/optimize.hpp"
#include "voxforge/pipeline.hpp"
#include "test_util.hpp"

using namespace voxforge;
using vf_test::uniform;

namespace {

FloatRaster random_image(std::mt19937_64& rng, std::uint32_t w, std::uint32_t h, std::uint32_t c) {
    FloatRaster r(w, h, c);
    for (float& x : r.data) x = float(uniform(rng, 0, 1));
    return r;
}

bool same_tree(const VoxelOctree& a, const VoxelOctree& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const Voxel &x = a.voxels[i], &y = b.voxels[i];
        if (!(x.path == y.path) || x.density != y.density || x.sh0 != y.sh0) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("optimize: photometric loss matches brute force") {
    std::mt19937_64 rng(2);
    const auto target = random_image(rng, 9, 7, 3);
    std::vector<double> rendered(3 * 63);
    for (double& x : rendered) x = uniform(rng, 0, 1);
    MaskRaster mask(9, 7, 1);
    for (auto& m : mask.data) m = uniform(rng, 0, 1) < 0.6;

    const MaskRaster* masks[] = {nullptr, &mask};
    for (const MaskRaster* mp : masks) {
        double sum = 0.0;
        std::size_t n = 0;
        for (std::size_t i = 0; i < 63; ++i) {
            if (mp && !mp->data[i]) continue;
            ++n;
            for (int c = 0; c < 3; ++c) sum += std::abs(rendered[3 * i + c] - target.data[3 * i + c]);
        }
        std::vector<double> grad;
        const auto l = loss_photo(rendered, target, mp, &grad);
        CHECK(l.count == n);
        CHECK(l.value == doctest::Approx(sum / (3.0 * n)).epsilon(1e-14));
        // Away from the kinks the L1 loss is linear, so differences are exact up to rounding.
        for (std::size_t k = 0; k < rendered.size(); k += 5) {
            auto r2 = rendered;
            r2[k] += 1e-7;
            const double fd = (loss_photo(r2, target, mp).value - l.value) / 1e-7;
            CHECK(fd == doctest::Approx(grad[k]).epsilon(1e-5).scale(1.0 / (3.0 * n)));
        }
    }
    MaskRaster none(9, 7, 1);
    CHECK(loss_photo(rendered, target, &none).count == 0);
    CHECK_THROWS_AS(loss_photo(std::vector<double>(5), target), Error);
}

TEST_CASE("optimize: refined-depth loss matches brute force") {
    std::mt19937_64 rng(4);
    RefinedDepthMap m;
    m.depth = random_image(rng, 8, 8, 1);
    m.valid = MaskRaster(8, 8, 1);
    m.score = FloatRaster(8, 8, 1);
    std::vector<double> rendered(64);
    for (std::size_t i = 0; i < 64; ++i) {
        m.valid.data[i] = uniform(rng, 0, 1) < 0.5;
        rendered[i] = uniform(rng, 0, 1);
        if (i % 9 == 0) rendered[i] = std::numeric_limits<double>::quiet_NaN();
    }
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < 64; ++i) {
        if (!m.valid.data[i] || std::isnan(rendered[i])) continue;
        ++n;
        sum += std::abs(rendered[i] - m.depth.data[i]);
    }
    std::vector<double> grad;
    const auto l = loss_refined_depth(rendered, m, &grad);
    CHECK(l.count == n);
    CHECK(l.value == doctest::Approx(sum / n).epsilon(1e-14));
    for (std::size_t i = 0; i < 64; ++i) {
        if (!m.valid.data[i] || std::isnan(rendered[i])) {
            CHECK(grad[i] == 0.0);
            continue;
        }
        CHECK(std::abs(grad[i]) == doctest::Approx(1.0 / n));
        CHECK((grad[i] > 0) == (rendered[i] > m.depth.data[i]));
    }
}

TEST_CASE("optimize: total loss") {
    LossWeights w{0.5, 2.0, 0.25};
    CHECK(total_loss(w, 1.0, 3.0, 4.0) == doctest::Approx(0.5 + 6.0 + 1.0));
    w.refd = 0.0;
    CHECK(total_loss(w, 1.0, 0.0, 1e9) == doctest::Approx(0.5));
}

TEST_CASE("optimize: adam update oracle") {
    std::mt19937_64 rng(6);
    AdamGroup g;
    g.lr = 0.01;
    g.resize(5);
    std::vector<double> p(5), m(5, 0.0), v(5, 0.0);
    for (double& x : p) x = uniform(rng, -1, 1);
    auto q = p;
    for (std::uint64_t t = 1; t <= 20; ++t) {
        std::vector<double> grad(5);
        for (double& x : grad) x = uniform(rng, -2, 2);
        g.update(q.data(), grad.data(), 5, t, 0.9, 0.999, 1e-8);
        for (int i = 0; i < 5; ++i) {
            m[i] = 0.9 * m[i] + 0.1 * grad[i];
            v[i] = 0.999 * v[i] + 0.001 * grad[i] * grad[i];
            const double mh = m[i] / (1 - std::pow(0.9, double(t))), vh = v[i] / (1 - std::pow(0.999, double(t)));
            p[i] -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
        }
        for (int i = 0; i < 5; ++i) CHECK(q[i] == doctest::Approx(p[i]).epsilon(1e-12));
    }
}

TEST_CASE("optimize: adam step sizes and convergence") {
    std::mt19937_64 rng(9);
    SUBCASE("constant-magnitude gradients move at most lr per step") {
        AdamGroup g;
        g.lr = 0.05;
        g.resize(16);
        std::vector<double> p(16, 0.0);
        for (std::uint64_t t = 1; t <= 200; ++t) {
            std::vector<double> grad(16);
            for (double& x : grad) x = uniform(rng, 0, 1) < 0.5 ? -3.0 : 3.0;
            const auto before = p;
            g.update(p.data(), grad.data(), 16, t, 0.9, 0.999, 1e-8);
            for (int i = 0; i < 16; ++i) CHECK(std::abs(p[i] - before[i]) <= 0.05 * (1 + 1e-12));
        }
    }
    SUBCASE("zero gradient leaves parameters unchanged") {
        AdamGroup g;
        g.lr = 0.1;
        g.resize(4);
        std::vector<double> p{1, 2, 3, 4}, grad(4, 0.0);
        g.update(p.data(), grad.data(), 4, 1, 0.9, 0.999, 1e-8);
        CHECK(p == std::vector<double>{1, 2, 3, 4});
    }
    SUBCASE("minimises a separable quadratic") {
        AdamGroup g;
        g.lr = 0.05;
        g.resize(6);
        std::vector<double> p(6), c(6), a(6);
        for (int i = 0; i < 6; ++i) {
            p[i] = uniform(rng, -3, 3);
            c[i] = uniform(rng, -3, 3);
            a[i] = uniform(rng, 0.1, 10);
        }
        for (std::uint64_t t = 1; t <= 3000; ++t) {
            std::vector<double> grad(6);
            for (int i = 0; i < 6; ++i) grad[i] = 2 * a[i] * (p[i] - c[i]);
            g.update(p.data(), grad.data(), 6, t, 0.9, 0.999, 1e-8);
        }
        for (int i = 0; i < 6; ++i) CHECK(p[i] == doctest::Approx(c[i]).epsilon(1e-3).scale(1.0));
    }
}

TEST_CASE("optimize: optimizer over a tree") {
    std::mt19937_64 rng(12);
    const VoxelOctree tree = vf_test::random_tree(rng, 2, 0.5, 0.8);
    REQUIRE(tree.size() > 0);
    SUBCASE("zero gradients change nothing") {
        VoxelOctree t = tree;
        AdamOptimizer adam(AdamOptions{}, t);
        for (int i = 0; i < 3; ++i) adam.step(t, VoxelGradients(t.size()));
        CHECK(same_tree(t, tree));
        CHECK(adam.steps() == 3);
    }
    SUBCASE("non-finite gradient is reported") {
        VoxelOctree t = tree;
        AdamOptimizer adam(AdamOptions{}, t);
        VoxelGradients g(t.size());
        g.density[0][3] = std::numeric_limits<double>::infinity();
        bool numerical = false;
        try {
            adam.step(t, g);
        } catch (const Error& e) {
            numerical = e.kind() == ErrorKind::Numerical;
        }
        CHECK(numerical);
        VoxelGradients wrong(t.size() + 1);
        CHECK_THROWS_AS(adam.step(t, wrong), Error);
    }
    SUBCASE("remap carries moments with their voxels") {
        // Two optimisers over the same voxels in opposite orders agree once remapped.
        VoxelOctree a = tree, b = tree;
        std::reverse(b.voxels.begin(), b.voxels.end());
        AdamOptimizer oa(AdamOptions{}, a), ob(AdamOptions{}, b);
        const std::size_t n = a.size();
        std::vector<std::uint32_t> rev(n);
        for (std::size_t i = 0; i < n; ++i) rev[i] = std::uint32_t(n - 1 - i);
        VoxelGradients ga(n);
        for (auto& d : ga.density)
            for (double& x : d) x = uniform(rng, -1, 1);
        for (auto& s : ga.sh0) s = vf_test::random_vec(rng, -1, 1);
        VoxelGradients gb(n);
        for (std::size_t i = 0; i < n; ++i) {
            gb.density[i] = ga.density[n - 1 - i];
            gb.sh0[i] = ga.sh0[n - 1 - i];
        }
        oa.step(a, ga);
        ob.step(b, gb);
        // Reorder b back and its moments with it, then take one more step on both.
        VoxelOctree b2 = b;
        for (std::size_t i = 0; i < n; ++i) b2.voxels[i] = b.voxels[n - 1 - i];
        ob.remap(rev, b2.sh_rest_len);
        oa.step(a, ga);
        ob.step(b2, ga);
        CHECK(same_tree(a, b2));
    }
}

TEST_CASE("optimize: training") {
    SceneSpec spec;
    spec.width = spec.height = 24;
    spec.focal = 24;
    spec.views = 6;
    spec.supersample = 1;
    const auto data = scene_data(generate_scene(spec));
    const TrainData td = train_data(data);
    const VoxelOctree init = uniform_tree(spec.frame(), 3, 0.3);
    TrainOptions o;
    o.refine.K = 2;
    o.refresh_R = 5;

    SUBCASE("zero iterations is the identity") {
        o.iters = 0;
        std::vector<LossReport> trace;
        CHECK(same_tree(train(init, td, o, trace), init));
        CHECK(trace.empty());
    }
    SUBCASE("photometric loss falls and the trace is complete") {
        o.iters = 60;
        o.adam.lr_density = 1.0;
        std::vector<LossReport> trace;
        const VoxelOctree out = train(init, td, o, trace);
        REQUIRE(trace.size() == 60);
        for (std::uint32_t i = 0; i < 60; ++i) CHECK(trace[i].iter == i);
        double first = 0, last = 0;
        for (int i = 0; i < 6; ++i) {
            first += trace[i].l_photo;
            last += trace[54 + i].l_photo;
        }
        CHECK(last < first);
        for (const auto& r : trace)
            CHECK(r.total == doctest::Approx(total_loss(o.weights, r.l_photo, r.l_reg, r.l_refd)));
    }
    SUBCASE("training is reproducible") {
        o.iters = 12;
        std::vector<LossReport> t1, t2;
        CHECK(same_tree(train(init, td, o, t1), train(init, td, o, t2)));
    }
    SUBCASE("mismatched inputs are rejected") {
        TrainData bad = td;
        bad.images.pop_back();
        std::vector<LossReport> trace;
        o.iters = 1;
        CHECK_THROWS_AS(train(init, bad, o, trace), Error);
    }
}

TEST_CASE("optimize: options") {
    Config c;
    c.set("train.iters", "7");
    c.set("loss.lambda_refd", "0.25");
    c.set("train.lr.density", "3");
    const auto o = TrainOptions::from_config(c);
    CHECK(o.iters == 7);
    CHECK(o.weights.refd == 0.25);
    CHECK(o.adam.lr_density == 3.0);
    c.set("train.refresh_R", "0");
    CHECK_THROWS_AS(TrainOptions::from_config(c), Error);
}
