// Copyright 2026 The Voxforge Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "voxforge/mesh.hpp"
#include "voxforge/pipeline.hpp"
#include "voxforge/tsdf.hpp"
#include "test_util.hpp"

using namespace voxforge;
using vf_test::uniform;

namespace {

ScalarGrid sphere_grid(double r, double spacing, std::uint32_t n) {
    ScalarGrid g;
    g.spacing = spacing;
    g.nx = g.ny = g.nz = n;
    g.origin = Vec3::Constant(-0.5 * spacing * (n - 1));
    g.values.resize(std::size_t(n) * n * n);
    for (std::uint32_t k = 0; k < n; ++k)
        for (std::uint32_t j = 0; j < n; ++j)
            for (std::uint32_t i = 0; i < n; ++i) g.values[g.index(i, j, k)] = g.point(i, j, k).norm() - r;
    return g;
}

double signed_volume(const TriangleMesh& m) {
    double v = 0.0;
    for (const auto& t : m.triangles)
        v += m.vertices[t[0]].dot(m.vertices[t[1]].cross(m.vertices[t[2]])) / 6.0;
    return v;
}

// Triangles as sorted coordinate triples, for order-free comparison.
std::multiset<std::vector<double>> triangle_set(const TriangleMesh& m) {
    std::multiset<std::vector<double>> s;
    for (const auto& t : m.triangles) {
        std::vector<std::array<double, 3>> c;
        for (auto i : t) c.push_back({m.vertices[i].x(), m.vertices[i].y(), m.vertices[i].z()});
        std::sort(c.begin(), c.end());
        std::vector<double> flat;
        for (auto& p : c) flat.insert(flat.end(), p.begin(), p.end());
        s.insert(flat);
    }
    return s;
}

}  // namespace

TEST_CASE("scene: noiseless priors equal the ground truth") {
    SceneSpec s;
    s.width = s.height = 32;
    s.focal = 32;
    s.views = 4;
    const auto sc = generate_scene(s);
    REQUIRE(sc.images.size() == 4);
    for (std::size_t v = 0; v < 4; ++v) {
        const auto& gt = sc.gt_depth[v];
        CHECK(sc.priors[v].depth.data == gt.data);
        for (std::uint32_t y = 0; y < 32; ++y)
            for (std::uint32_t x = 0; x < 32; ++x) {
                const auto a = analytic_depth(s, sc.cameras[v], x, y);
                CHECK(a.has_value() == (gt.at(x, y) > 0));
                if (!a) {
                    CHECK(sc.priors[v].confidence.at(x, y) == 0.0f);
                    continue;
                }
                CHECK(gt.at(x, y) == doctest::Approx(*a).epsilon(1e-6));
                // Unprojected GT depth lies on the sphere.
                CHECK(unproject_pixel(sc.cameras[v], x, y, gt.at(x, y)).norm() ==
                      doctest::Approx(s.radius).epsilon(1e-5));
                // Confidence is the cosine of incidence.
                const Vec3 X = unproject_pixel(sc.cameras[v], x, y, *a);
                const double cosi = std::abs(X.normalized().dot(sc.cameras[v].ray_direction(x, y)));
                CHECK(sc.priors[v].confidence.at(x, y) == doctest::Approx(cosi).epsilon(1e-5));
            }
    }
}

TEST_CASE("scene: noisy priors lose confidence where they err") {
    SceneSpec s;
    s.width = s.height = 64;
    s.noise = 0.05;
    s.views = 3;
    const auto sc = generate_scene(s);
    std::vector<std::pair<double, double>> rel;  // (uncertainty proxy, |error|)
    for (std::size_t v = 0; v < 3; ++v)
        for (std::size_t i = 0; i < sc.gt_depth[v].data.size(); ++i) {
            const double g = sc.gt_depth[v].data[i];
            if (!(g > 0)) continue;
            const Vec3 X = unproject_pixel(sc.cameras[v], i % 64, i / 64, g);
            const double cosi = std::abs(X.normalized().dot(sc.cameras[v].ray_direction(i % 64, i / 64)));
            rel.emplace_back(sc.priors[v].confidence.data[i] / cosi, std::abs(sc.priors[v].depth.data[i] - g) / g);
        }
    std::sort(rel.begin(), rel.end());
    double lo = 0, hi = 0;
    const std::size_t h = rel.size() / 2;
    for (std::size_t i = 0; i < h; ++i) lo += rel[i].second;
    for (std::size_t i = h; i < 2 * h; ++i) hi += rel[i].second;
    CHECK(hi < lo);  // confident half has the smaller errors
}

TEST_CASE("scene: sdf, samples and depth error") {
    SceneSpec s;
    std::mt19937_64 rng(1);
    for (int i = 0; i < 100; ++i) {
        const Vec3 x = vf_test::random_vec(rng, -2, 2);
        CHECK(scene_sdf(s, x) == doctest::Approx(x.norm() - s.radius));
    }
    for (const Vec3& p : sample_surface(s, 500)) CHECK(std::abs(scene_sdf(s, p)) < 1e-12);
    SceneSpec plane = s;
    plane.shape = SceneSpec::Shape::Plane;
    for (const Vec3& p : sample_surface(plane, 200)) {
        CHECK(std::abs(p.z()) < 1e-12);
        CHECK(std::abs(p.x()) <= plane.radius);
    }
    SceneSpec boxes = s;
    boxes.shape = SceneSpec::Shape::Boxes;
    for (const Vec3& p : sample_surface(boxes, 200)) CHECK(std::abs(scene_sdf(boxes, p)) < 1e-9);

    FloatRaster a(2, 2, 1), b(2, 2, 1);
    a.data = {1.0f, 2.0f, 0.0f, 4.0f};
    b.data = {1.5f, 2.0f, 3.0f, 0.0f};
    const std::vector<FloatRaster> ra{a}, rb{b};
    const auto e = depth_error(ra, rb);
    CHECK(e.pixels == 2);
    CHECK(e.mean_abs == doctest::Approx(0.25));
}

TEST_CASE("scene: config and disk round trips") {
    SceneSpec s;
    s.shape = SceneSpec::Shape::Boxes;
    s.rig = SceneSpec::Rig::Hemisphere;
    s.views = 5;
    s.width = 20;
    s.height = 16;
    s.focal = 18.5;
    s.noise = 0.02;
    s.supersample = 2;
    s.seed = 77;
    const SceneSpec r = SceneSpec::from_config(s.to_config());
    CHECK(r.shape == s.shape);
    CHECK(r.rig == s.rig);
    CHECK(r.views == 5);
    CHECK(r.height == 16);
    CHECK(r.focal == 18.5);
    CHECK(r.noise == 0.02);
    CHECK(r.supersample == 2);
    CHECK(r.seed == 77);

    Config bad;
    bad.set("scene.shape", "torus");
    CHECK_THROWS_AS(SceneSpec::from_config(bad), Error);
    Config near;
    near.set("scene.distance", "0.5");
    CHECK_THROWS_AS(SceneSpec::from_config(near), Error);

    vf_test::TempDir tmp("scene");
    const auto sc = generate_scene(s);
    save_scene(tmp.path.string(), sc);
    const SceneData d = load_scene(tmp.path.string());
    REQUIRE(d.cameras.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(d.images[i].data == sc.images[i].data);
        CHECK(d.gt_depth[i].data == sc.gt_depth[i].data);
        CHECK(d.priors[i].depth.data == sc.priors[i].depth.data);
        CHECK((d.cameras[i].R - sc.cameras[i].R).norm() < 1e-15);
    }
}

TEST_CASE("scene: perturbed prior frame is recovered") {
    SceneSpec s;
    s.width = s.height = 16;
    s.perturb_pose = true;
    s.seed = 3;
    const SceneData d = scene_data(generate_scene(s));
    const auto priors = aligned_priors(d);
    for (std::size_t i = 0; i < d.cameras.size(); ++i) {
        CHECK((priors[i].camera.center() - d.cameras[i].center()).norm() < 1e-9);
        CHECK((priors[i].camera.R - d.cameras[i].R).norm() < 1e-9);
    }
}

TEST_CASE("mesh: marching tetrahedra on an analytic sphere") {
    const double r = 0.7, h = 0.05;
    const ScalarGrid g = sphere_grid(r, h, 36);
    const TriangleMesh m = marching_tetrahedra(g, 0.0);
    REQUIRE(!m.empty());
    // Vertices interpolate a signed distance linearly along edges.
    for (const Vec3& v : m.vertices) CHECK(std::abs(v.norm() - r) < 0.25 * h);
    // Closed and consistently oriented outwards.
    std::map<std::pair<std::uint32_t, std::uint32_t>, int> directed;
    for (const auto& t : m.triangles)
        for (int e = 0; e < 3; ++e) directed[{t[e], t[(e + 1) % 3]}]++;
    bool manifold = true;
    for (const auto& [e, c] : directed) manifold = manifold && c == 1 && directed.count({e.second, e.first}) == 1;
    CHECK(manifold);
    CHECK(signed_volume(m) == doctest::Approx(4.0 / 3.0 * M_PI * r * r * r).epsilon(0.02));
    // Chamfer to analytic samples within a fraction of a cell.
    SceneSpec s;
    s.radius = r;
    CHECK(chamfer_distance(sample_mesh(m, 20000, 1), sample_surface(s, 20000)) < 0.5 * h);
}

TEST_CASE("mesh: unknown samples are skipped and shared edges share vertices") {
    ScalarGrid g = sphere_grid(0.5, 0.1, 14);
    const auto full = marching_tetrahedra(g, 0.0);
    std::set<std::array<double, 3>> unique;
    for (const Vec3& v : full.vertices) unique.insert({v.x(), v.y(), v.z()});
    CHECK(unique.size() == full.vertices.size());
    for (std::uint32_t k = 0; k < 14; ++k)
        for (std::uint32_t j = 0; j < 14; ++j) g.values[g.index(7, j, k)] = std::nan("");
    const auto holed = marching_tetrahedra(g, 0.0);
    CHECK(holed.triangles.size() < full.triangles.size());
    for (const Vec3& v : holed.vertices) CHECK(std::abs(v.x() - g.point(7, 0, 0).x()) >= 0.1 - 1e-12);
    ScalarGrid empty;
    CHECK(marching_tetrahedra(empty, 0.0).empty());
}

TEST_CASE("mesh: sparse lattice reproduces the dense one") {
    const double r = 0.45, h = 0.06;
    const std::uint32_t n = 20;
    const ScalarGrid dense = sphere_grid(r, h, n);
    SparseScalarGrid sp;
    sp.origin = dense.origin;
    sp.spacing = h;
    sp.n = n;
    sp.activate_box(dense.origin, dense.origin + Vec3::Constant(h * (n - 1)), 0);
    sp.finalize_cells();
    CHECK(sp.cells.size() == std::size_t(n - 1) * (n - 1) * (n - 1));
    const auto pts = sp.points();
    REQUIRE(pts.size() == sp.point_ids.size());
    for (std::size_t i = 0; i < pts.size(); ++i) sp.values[i] = pts[i].norm() - r;
    CHECK(triangle_set(marching_tetrahedra(sp, 0.0)) == triangle_set(marching_tetrahedra(dense, 0.0)));

    // A thin shell of cells around the surface still gives the same surface.
    SparseScalarGrid shell;
    shell.origin = dense.origin;
    shell.spacing = h;
    shell.n = n;
    SceneSpec s;
    s.radius = r;
    for (const Vec3& p : sample_surface(s, 4000)) shell.activate_box(p, p, 1);
    shell.finalize_cells();
    CHECK(shell.cells.size() < sp.cells.size());
    const auto sp2 = shell.points();
    for (std::size_t i = 0; i < sp2.size(); ++i) shell.values[i] = sp2[i].norm() - r;
    CHECK(triangle_set(marching_tetrahedra(shell, 0.0)) == triangle_set(marching_tetrahedra(dense, 0.0)));
}

TEST_CASE("mesh: TSDF of ground-truth depth meshes the sphere") {
    SceneSpec s;
    s.width = s.height = 96;
    s.focal = 96;
    const auto sc = generate_scene(s);
    const double h = 0.04;
    ScalarGrid g = sphere_grid(0.0, h, 51);
    const auto pts = g.points();
    const TsdfGrid t = fuse_tsdf(pts, sc.priors, 3 * h);
    g.values = t.F;
    const auto m = marching_tetrahedra(g, 0.0);
    REQUIRE(!m.empty());
    CHECK(chamfer_distance(sample_mesh(m, 20000, 2), sample_surface(s, 20000)) <= 2 * h);
}

TEST_CASE("mesh: chamfer and nearest neighbours match brute force") {
    std::mt19937_64 rng(21);
    for (int rep = 0; rep < 5; ++rep) {
        std::vector<Vec3> a, b;
        const int na = 50 + rep * 97, nb = 300 - rep * 40;
        for (int i = 0; i < na; ++i) a.push_back(vf_test::random_vec(rng, -1, 1));
        for (int i = 0; i < nb; ++i) b.push_back(vf_test::random_vec(rng, -0.3, 2));
        CHECK(chamfer_distance(a, b) == doctest::Approx(chamfer_distance_brute_force(a, b)).epsilon(1e-12));
        const auto d = nearest_distances(a, b);
        for (int i = 0; i < na; i += 7) {
            double best = 1e300;
            for (const Vec3& q : b) best = std::min(best, (a[i] - q).norm());
            CHECK(d[i] == doctest::Approx(best).epsilon(1e-12));
        }
    }
    const std::vector<Vec3> one{Vec3::Zero()}, none;
    CHECK(chamfer_distance(one, one) == 0.0);
    CHECK_THROWS_AS(chamfer_distance(one, none), Error);
}

TEST_CASE("mesh: OBJ round trip and surface sampling") {
    const auto m = marching_tetrahedra(sphere_grid(0.5, 0.1, 14), 0.0);
    vf_test::TempDir tmp("mesh");
    write_obj(tmp.file("m.obj"), m);
    const auto back = read_obj(tmp.file("m.obj"));
    REQUIRE(back.vertices.size() == m.vertices.size());
    CHECK(back.triangles == m.triangles);
    for (std::size_t i = 0; i < m.vertices.size(); ++i) CHECK((back.vertices[i] - m.vertices[i]).norm() < 1e-12);

    const auto s1 = sample_mesh(m, 300, 4), s2 = sample_mesh(m, 300, 4);
    CHECK(s1 == s2);
    // Every sample lies on some triangle.
    for (const Vec3& p : s1) {
        double best = 1e300;
        for (const auto& t : m.triangles) {
            const Vec3 &A = m.vertices[t[0]], &B = m.vertices[t[1]], &C = m.vertices[t[2]];
            const Vec3 n = (B - A).cross(C - A).normalized();
            const double dist = std::abs((p - A).dot(n));
            const Vec3 q = p - dist * n;
            const double area = (B - A).cross(C - A).norm();
            const double sum = (B - q).cross(C - q).norm() + (C - q).cross(A - q).norm() + (A - q).cross(B - q).norm();
            if (std::abs(sum - area) < 1e-9) best = std::min(best, dist);
        }
        CHECK(best < 1e-9);
    }
    CHECK(sample_mesh(TriangleMesh{}, 10, 1).empty());
}

TEST_CASE("mesh: density lookup and extraction edge cases") {
    VoxelOctree t;
    t.frame = OctreeFrame{Vec3::Zero(), 2.0};
    Voxel v;
    v.path = morton_child(MortonPath{}, 7);
    for (unsigned m = 0; m < 8; ++m) v.density[m] = double(m);
    t.voxels.push_back(v);
    t.sort_canonical();
    // Child 7 spans [0, 1]^3; corner m sits at offset (m>>2&1, m>>1&1, m&1).
    // rho = ELU(sigma) + 1 of the trilinear sigma.
    CHECK(density_at(t, Vec3(0.5, 0.5, 0.5)) == doctest::Approx(3.5 + 1));
    CHECK(density_at(t, Vec3(0.25, 0.0, 0.5)) == doctest::Approx(0.375 * 1 + 0.125 * 4 + 0.125 * 5 + 1));
    CHECK(density_at(t, Vec3(-0.5, 0.5, 0.5)) == 0.0);

    VoxelOctree empty;
    empty.frame = t.frame;
    std::mt19937_64 rng(1);
    const std::vector<Camera> cams{vf_test::random_camera(rng)};
    CHECK(extract_mesh(empty, cams, RenderSettings{}, MeshOptions{}).empty());
}
