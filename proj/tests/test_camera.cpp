// Copyright 2026 The Voxforge Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <Eigen/Geometry>

#include <cmath>
#include <fstream>

#include "test_util.hpp"
#include "voxforge/camera.hpp"

using namespace voxforge;
using namespace vf_test;

namespace {

Camera identity_camera(double f = 1.0) {
    Camera c;
    c.fx = c.fy = f;
    c.cx = c.cy = 0.0;
    return c;
}

}  // namespace

TEST_CASE("unproject and project on the identity camera") {
    const Camera c = identity_camera();
    CHECK((unproject_pixel(c, 0, 0, 1) - Vec3(0, 0, 1)).norm() == 0.0);
    CHECK((unproject_pixel(c, 2, 0, 1) - Vec3(2, 0, 1)).norm() == 0.0);
    const Projection p = project_point(c, Vec3(0, 0, 2));
    CHECK(p.u == 0.0);
    CHECK(p.v == 0.0);
    CHECK(p.depth == 2.0);
    const Projection q = project_point(c, Vec3(1, 1, 1));
    CHECK(q.u == 1.0);
    CHECK(q.v == 1.0);
    CHECK(q.depth == 1.0);
}

TEST_CASE("invalid depth and points behind the camera are rejected") {
    const Camera c = identity_camera();
    CHECK_THROWS_WITH(unproject_pixel(c, 0, 0, 0.0), "invalid depth");
    CHECK_THROWS_WITH(unproject_pixel(c, 0, 0, -1.0), "invalid depth");
    CHECK_THROWS_WITH(unproject_pixel(c, 0, 0, NAN), "invalid depth");
    CHECK_THROWS_WITH(project_point(c, Vec3(0, 0, -1)), "behind camera");
    CHECK_THROWS_WITH(project_point(c, Vec3(1, 0, 0)), "behind camera");
    CHECK_FALSE(try_project(c, Vec3(0, 0, -1)).has_value());
}

TEST_CASE("project inverts unproject on random cameras") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 1000; ++i) {
        const Camera c = random_camera(rng);
        const double u = uniform(rng, 0, 63), v = uniform(rng, 0, 47), d = uniform(rng, 0.1, 20);
        const Projection p = project_point(c, unproject_pixel(c, u, v, d));
        CHECK(std::abs(p.u - u) <= 1e-9 * std::max(1.0, std::abs(u)));
        CHECK(std::abs(p.v - v) <= 1e-9 * std::max(1.0, std::abs(v)));
        CHECK(std::abs(p.depth - d) <= 1e-9 * d);
    }
}

TEST_CASE("ray direction passes through the unprojected point") {
    std::mt19937_64 rng(12);
    for (int i = 0; i < 100; ++i) {
        const Camera c = random_camera(rng);
        const double u = uniform(rng, 0, 63), v = uniform(rng, 0, 47);
        const Vec3 x = unproject_pixel(c, u, v, 3.0);
        const Vec3 d = (x - c.center()).normalized();
        CHECK((d - c.ray_direction(u, v)).norm() < 1e-12);
    }
}

TEST_CASE("pixel footprint on a fronto-parallel camera") {
    Camera c = identity_camera(100.0);
    c.width = c.height = 4;
    FloatRaster depth(4, 4, 1, 1.0f);
    CHECK(std::abs(*pixel_footprint_area(c, depth, 1, 1) - 1e-4) < 1e-15);
    depth.at(2, 2) = 2.0f;
    CHECK(std::abs(*pixel_footprint_area(c, depth, 2, 2) - 4e-4) < 1e-15);
    depth.at(0, 0) = 0.0f;
    CHECK_FALSE(pixel_footprint_area(c, depth, 0, 0).has_value());
    depth.at(0, 1) = NAN;
    CHECK_FALSE(pixel_footprint_area(c, depth, 0, 1).has_value());
}

TEST_CASE("pixel footprint on an oblique plane follows the incidence angle") {
    // Camera looking down -z onto the plane z = 0 from height h, tilted by
    // theta about x. The footprint of the principal pixel, seen at the
    // depth of the plane hit, matches the exact plane geometry: the
    // unprojected half-offsets reuse the centre depth, so the area is the
    // fronto-parallel one at that depth.
    for (double theta : {0.0, 0.3, 0.6, 0.9}) {
        Camera c;
        c.fx = c.fy = 200.0;
        c.cx = c.cy = 10.0;
        c.width = c.height = 21;
        const Mat3 tilt = Eigen::AngleAxisd(theta, Vec3::UnitX()).toRotationMatrix();
        const Mat3 down = Eigen::AngleAxisd(M_PI, Vec3::UnitX()).toRotationMatrix();
        c.R = (down * tilt).transpose();
        const Vec3 eye(0, 0, 2.0);
        c.t = -c.R * eye;
        const Vec3 dir = c.ray_direction(10, 10);
        const double t_hit = -eye.z() / dir.z();
        const double z = c.to_camera(eye + t_hit * dir).z();
        FloatRaster depth(21, 21, 1, static_cast<float>(z));
        const double zf = depth.at(10, 10);
        const double area = *pixel_footprint_area(c, depth, 10, 10);
        CHECK(std::abs(area - (zf / 200.0) * (zf / 200.0)) < 1e-15);
        // Exact footprint on the plane: the fronto area divided by cos(incidence).
        const double exact_on_plane = area / std::cos(theta);
        auto hit = [&](double u, double v) {
            const Vec3 d = c.ray_direction(u, v);
            return Vec3(eye + (-eye.z() / d.z()) * d);
        };
        const Vec3 fd = (hit(10.5, 10) - hit(9.5, 10)).cross(hit(10, 10.5) - hit(10, 9.5));
        CHECK(std::abs(fd.norm() - exact_on_plane) / exact_on_plane < 1e-4);
        CHECK(exact_on_plane >= area);
    }
}

TEST_CASE("pixel footprint is invariant under rigid motion of the camera") {
    std::mt19937_64 rng(13);
    for (int i = 0; i < 50; ++i) {
        Camera a = random_camera(rng);
        Camera b = a;
        const Mat3 Q = random_rotation(rng);
        const Vec3 s = random_vec(rng, -3, 3);
        // World moved by x -> Qx + s: the camera keeps its view of the scene.
        b.R = a.R * Q.transpose();
        b.t = a.t - b.R * s;
        FloatRaster depth(64, 48, 1, static_cast<float>(uniform(rng, 0.5, 5)));
        const auto u = static_cast<std::uint32_t>(uniform(rng, 0, 63));
        const auto v = static_cast<std::uint32_t>(uniform(rng, 0, 47));
        const double fa = *pixel_footprint_area(a, depth, u, v);
        const double fb = *pixel_footprint_area(b, depth, u, v);
        CHECK(std::abs(fa - fb) <= 1e-9 * fa);
    }
}

TEST_CASE("umeyama identity and pure scale") {
    const std::vector<Vec3> src{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 1, 1}};
    const SimilarityTransform id = umeyama_align(src, src);
    CHECK(std::abs(id.s - 1.0) < 1e-12);
    CHECK((id.R - Mat3::Identity()).norm() < 1e-12);
    CHECK(id.t.norm() < 1e-12);
    std::vector<Vec3> dst;
    for (const Vec3& p : src) dst.push_back(2.0 * p);
    const SimilarityTransform sc = umeyama_align(src, dst);
    CHECK(std::abs(sc.s - 2.0) < 1e-12);
    CHECK((sc.R - Mat3::Identity()).norm() < 1e-12);
    CHECK(sc.t.norm() < 1e-12);
}

TEST_CASE("umeyama recovers random similarities and agrees with Eigen") {
    std::mt19937_64 rng(14);
    for (int trial = 0; trial < 100; ++trial) {
        SimilarityTransform T;
        T.s = std::exp(uniform(rng, -1, 1));
        T.R = random_rotation(rng);
        T.t = random_vec(rng, -5, 5);
        const int n = 3 + trial % 20;
        std::vector<Vec3> src, dst;
        for (int i = 0; i < n; ++i) {
            src.push_back(random_vec(rng, -2, 2));
            dst.push_back(T.apply(src.back()));
        }
        const SimilarityTransform E = umeyama_align(src, dst);
        CHECK(std::abs(E.s - T.s) < 1e-9);
        CHECK((E.R - T.R).norm() < 1e-9);
        CHECK((E.t - T.t).norm() < 1e-9);
        CHECK(alignment_residual(E, src, dst) >= 0.0);

        // Independent implementation as the oracle.
        Eigen::Matrix<double, 3, Eigen::Dynamic> S(3, n), D(3, n);
        for (int i = 0; i < n; ++i) {
            S.col(i) = src[i];
            D.col(i) = dst[i] + 0.01 * random_vec(rng, -1, 1);
        }
        std::vector<Vec3> noisy(n);
        for (int i = 0; i < n; ++i) noisy[i] = D.col(i);
        const Eigen::Matrix4d M = Eigen::umeyama(S, D, true);
        const SimilarityTransform N = umeyama_align(src, noisy);
        const double s_eigen = M.block<3, 3>(0, 0).col(0).norm();
        CHECK(std::abs(N.s - s_eigen) < 1e-9);
        CHECK((N.s * N.R - M.block<3, 3>(0, 0)).norm() < 1e-9);
        CHECK((N.t - M.block<3, 1>(0, 3)).norm() < 1e-9);
    }
}

TEST_CASE("umeyama residual is a local minimum") {
    std::mt19937_64 rng(15);
    std::vector<Vec3> src, dst;
    for (int i = 0; i < 12; ++i) {
        src.push_back(random_vec(rng, -1, 1));
        dst.push_back(1.7 * src.back() + Vec3(0.3, -0.2, 1.0) + 0.05 * random_vec(rng, -1, 1));
    }
    const SimilarityTransform T = umeyama_align(src, dst);
    const double r0 = alignment_residual(T, src, dst);
    for (int k = 0; k < 200; ++k) {
        SimilarityTransform P = T;
        P.s *= 1.0 + uniform(rng, -1e-3, 1e-3);
        P.R = Eigen::AngleAxisd(uniform(rng, -1e-3, 1e-3), random_vec(rng, -1, 1).normalized()) * P.R;
        P.t += 1e-3 * random_vec(rng, -1, 1);
        CHECK(alignment_residual(P, src, dst) >= r0 - 1e-12);
    }
}

TEST_CASE("umeyama rejects degenerate input") {
    const std::vector<Vec3> two{{0, 0, 0}, {1, 0, 0}};
    CHECK_THROWS_WITH(umeyama_align(two, two), "degenerate configuration");
    const std::vector<Vec3> line{{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 0, 0}};
    CHECK_THROWS_WITH(umeyama_align(line, line), "degenerate configuration");
    const std::vector<Vec3> same{{1, 1, 1}, {1, 1, 1}, {1, 1, 1}};
    CHECK_THROWS_WITH(umeyama_align(same, same), "degenerate configuration");
}

TEST_CASE("similarity re-expresses cameras so that views are unchanged") {
    std::mt19937_64 rng(16);
    for (int i = 0; i < 50; ++i) {
        const Camera c = random_camera(rng);
        SimilarityTransform T;
        T.s = std::exp(uniform(rng, -1, 1));
        T.R = random_rotation(rng);
        T.t = random_vec(rng, -2, 2);
        const Camera d = T.apply(c);
        const Vec3 x = unproject_pixel(c, 20.5, 10.25, 2.0);
        const Projection p = project_point(d, T.apply(x));
        CHECK(std::abs(p.u - 20.5) < 1e-9);
        CHECK(std::abs(p.v - 10.25) < 1e-9);
        CHECK(std::abs(p.depth - 2.0 * T.s) < 1e-9);
    }
}

TEST_CASE("camera validation") {
    Camera c;
    c.width = c.height = 10;
    c.fx = c.fy = 5;
    c.cx = c.cy = 4.5;
    CHECK_NOTHROW(c.validate());
    Camera bad = c;
    bad.fx = 0;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = c;
    bad.R(0, 0) = 2;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = c;
    bad.cx = 20;
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("camera file round trip") {
    TempDir dir("camera");
    std::mt19937_64 rng(17);
    std::vector<CameraRecord> recs;
    for (int i = 0; i < 5; ++i) recs.push_back({i * 3, random_camera(rng)});
    write_camera_file(dir.file("cams.txt"), recs);
    const auto back = read_camera_file(dir.file("cams.txt"));
    REQUIRE(back.size() == recs.size());
    for (std::size_t i = 0; i < recs.size(); ++i) {
        CHECK(back[i].id == recs[i].id);
        CHECK(back[i].camera.fx == recs[i].camera.fx);
        CHECK(back[i].camera.cy == recs[i].camera.cy);
        CHECK(back[i].camera.R == recs[i].camera.R);
        CHECK(back[i].camera.t == recs[i].camera.t);
        CHECK(back[i].camera.width == recs[i].camera.width);
    }
    {
        std::ofstream os(dir.file("bad.txt"));
        os << "# comment\n1 2 3\n";
    }
    CHECK_THROWS_AS(read_camera_file(dir.file("bad.txt")), Error);
    CHECK_THROWS_AS(read_camera_file(dir.file("missing.txt")), Error);
}
