// Copyright 2026 The Voxforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "voxforge/camera.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace voxforge {

void Camera::validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) fail_data("camera focal lengths must be positive");
    if (width == 0 || height == 0) fail_data("camera raster must be non-empty");
    if (!(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height))
        fail_data("principal point outside the raster");
    if (!R.allFinite() || !t.allFinite()) fail_data("camera pose is not finite");
    if ((R * R.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9 ||
        std::abs(R.determinant() - 1.0) > 1e-9)
        fail_data("camera rotation is not orthonormal with det +1");
}

Vec3 Camera::ray_direction(double u, double v) const {
    Vec3 dir_cam((u - cx) / fx, (v - cy) / fy, 1.0);
    return (R.transpose() * dir_cam).normalized();
}

Camera SimilarityTransform::apply(const Camera& cam) const {
    // x_src = R^T (x_dst - t) / s, and camera coordinates scale with s.
    Camera out = cam;
    out.R = cam.R * R.transpose();
    out.t = s * cam.t - out.R * t;
    return out;
}

Vec3 unproject_pixel(const Camera& cam, double u, double v, double depth) {
    if (!(depth > 0.0) || !std::isfinite(depth)) fail_numerical("invalid depth");
    Vec3 x_cam(depth * (u - cam.cx) / cam.fx, depth * (v - cam.cy) / cam.fy, depth);
    return cam.R.transpose() * (x_cam - cam.t);
}

std::optional<Projection> try_project(const Camera& cam, const Vec3& world) {
    const Vec3 x = cam.to_camera(world);
    if (!(x.z() > 0.0)) return std::nullopt;
    return Projection{cam.fx * x.x() / x.z() + cam.cx, cam.fy * x.y() / x.z() + cam.cy, x.z()};
}

Projection project_point(const Camera& cam, const Vec3& world) {
    auto p = try_project(cam, world);
    if (!p) fail_numerical("behind camera");
    return *p;
}

std::optional<double> pixel_footprint_area(const Camera& cam, const FloatRaster& depth,
                                           std::uint32_t u, std::uint32_t v) {
    if (u >= depth.width || v >= depth.height) return std::nullopt;
    const double d = depth.at(u, v);
    if (!(d > 0.0) || !std::isfinite(d)) return std::nullopt;
    const Vec3 xu_p = unproject_pixel(cam, u + 0.5, v, d);
    const Vec3 xu_m = unproject_pixel(cam, u - 0.5, v, d);
    const Vec3 xv_p = unproject_pixel(cam, u, v + 0.5, d);
    const Vec3 xv_m = unproject_pixel(cam, u, v - 0.5, d);
    return (xu_p - xu_m).cross(xv_p - xv_m).norm();
}

SimilarityTransform umeyama_align(std::span<const Vec3> src, std::span<const Vec3> dst) {
    if (src.size() != dst.size()) fail_data("umeyama_align: point lists differ in length");
    const std::size_t n = src.size();
    if (n < 3) fail_numerical("degenerate configuration");

    Vec3 mu_s = Vec3::Zero(), mu_d = Vec3::Zero();
    for (std::size_t i = 0; i < n; ++i) {
        mu_s += src[i];
        mu_d += dst[i];
    }
    mu_s /= double(n);
    mu_d /= double(n);

    Mat3 cov = Mat3::Zero();
    Mat3 spread = Mat3::Zero();
    double var_s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 a = src[i] - mu_s, b = dst[i] - mu_d;
        cov += b * a.transpose();
        spread += a * a.transpose();
        var_s += a.squaredNorm();
    }
    cov /= double(n);
    var_s /= double(n);

    // Source points must span at least a plane.
    Eigen::SelfAdjointEigenSolver<Mat3> eig(spread / double(n));
    const Vec3 ev = eig.eigenvalues();  // ascending
    if (!(ev(2) > 1e-18) || ev(1) <= 1e-12 * ev(2)) fail_numerical("degenerate configuration");

    Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 S = Mat3::Identity();
    if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) S(2, 2) = -1.0;

    SimilarityTransform T;
    T.R = svd.matrixU() * S * svd.matrixV().transpose();
    T.s = (svd.singularValues().asDiagonal() * S).trace() / var_s;
    if (!(T.s > 0.0)) fail_numerical("degenerate configuration");
    T.t = mu_d - T.s * (T.R * mu_s);
    return T;
}

double alignment_residual(const SimilarityTransform& T, std::span<const Vec3> src,
                          std::span<const Vec3> dst) {
    double r = 0.0;
    for (std::size_t i = 0; i < src.size(); ++i) r += (dst[i] - T.apply(src[i])).squaredNorm();
    return r;
}

std::vector<CameraRecord> read_camera_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) fail_data("cannot open camera file " + path);
    std::vector<CameraRecord> out;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        CameraRecord rec;
        if (!(ls >> rec.id)) continue;  // blank line
        Camera& c = rec.camera;
        double w = 0, h = 0;
        bool ok = static_cast<bool>(ls >> c.fx >> c.fy >> c.cx >> c.cy >> w >> h);
        for (int r = 0; r < 3 && ok; ++r)
            for (int k = 0; k < 3 && ok; ++k) ok = static_cast<bool>(ls >> c.R(r, k));
        for (int k = 0; k < 3 && ok; ++k) ok = static_cast<bool>(ls >> c.t(k));
        std::string extra;
        if (!ok || (ls >> extra))
            fail_data(path + ":" + std::to_string(lineno) + ": malformed camera record");
        if (w < 1 || h < 1 || w != std::floor(w) || h != std::floor(h))
            fail_data(path + ":" + std::to_string(lineno) + ": bad raster size");
        c.width = static_cast<std::uint32_t>(w);
        c.height = static_cast<std::uint32_t>(h);
        c.validate();
        out.push_back(rec);
    }
    return out;
}

void write_camera_file(const std::string& path, std::span<const CameraRecord> cameras) {
    std::ofstream os(path);
    if (!os) fail_data("cannot open " + path + " for writing");
    os << "# id fx fy cx cy w h R00 R01 R02 R10 R11 R12 R20 R21 R22 t0 t1 t2\n";
    os << std::setprecision(17);
    for (const auto& rec : cameras) {
        const Camera& c = rec.camera;
        os << rec.id << ' ' << c.fx << ' ' << c.fy << ' ' << c.cx << ' ' << c.cy << ' '
           << c.width << ' ' << c.height;
        for (int r = 0; r < 3; ++r)
            for (int k = 0; k < 3; ++k) os << ' ' << c.R(r, k);
        for (int k = 0; k < 3; ++k) os << ' ' << c.t(k);
        os << '\n';
    }
    if (!os) fail_data("write failed: " + path);
}

}  // namespace voxforge
