// Copyright 2026 The Voxforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "voxforge/common.hpp"
#include "voxforge/raster.hpp"

namespace voxforge {

/// Pinhole camera. Pixel (u, v) has its centre at integer coordinates and
/// maps to the ray K^-1 [u, v, 1]^T; camera = R * world + t.
struct Camera {
    double fx = 1.0, fy = 1.0, cx = 0.0, cy = 0.0;
    Mat3 R = Mat3::Identity();
    Vec3 t = Vec3::Zero();
    std::uint32_t width = 1, height = 1;

    /// Throws Error(Data) unless R is a rotation (1e-9), focal lengths are
    /// positive and the principal point lies in the raster.
    void validate() const;

    Vec3 center() const { return -R.transpose() * t; }
    Vec3 to_camera(const Vec3& world) const { return R * world + t; }

    /// Unit world-space direction of the ray through (u, v).
    Vec3 ray_direction(double u, double v) const;
};

struct Projection {
    double u;
    double v;
    double depth;
};

struct SimilarityTransform {
    double s = 1.0;
    Mat3 R = Mat3::Identity();
    Vec3 t = Vec3::Zero();

    Vec3 apply(const Vec3& x) const { return s * (R * x) + t; }

    /// Re-expresses a camera estimated in the source frame in the target
    /// frame. Depths observed by the source camera scale by `s`.
    Camera apply(const Camera& cam) const;
};

Vec3 unproject_pixel(const Camera& cam, double u, double v, double depth);

Projection project_point(const Camera& cam, const Vec3& world);

/// Non-throwing projection; nullopt when the point is not in front of the camera.
std::optional<Projection> try_project(const Camera& cam, const Vec3& world);

/// World-space area covered by pixel (u, v): the cross product of the
/// half-pixel offsets unprojected at the centre depth. nullopt marks a pixel
/// with non-positive or non-finite depth.
std::optional<double> pixel_footprint_area(const Camera& cam, const FloatRaster& depth,
                                           std::uint32_t u, std::uint32_t v);

/// Least-squares similarity mapping src onto dst (Umeyama). Throws
/// Error(Numerical) "degenerate configuration" for fewer than three
/// non-collinear pairs.
SimilarityTransform umeyama_align(std::span<const Vec3> src, std::span<const Vec3> dst);

/// Sum of squared residuals |dst - T(src)|^2.
double alignment_residual(const SimilarityTransform& T, std::span<const Vec3> src,
                          std::span<const Vec3> dst);

struct CameraRecord {
    std::int64_t id = 0;
    Camera camera;
};

/// Text format, one record per line:
/// `id fx fy cx cy w h R00 R01 .. R22 t0 t1 t2`; `#` starts a comment.
std::vector<CameraRecord> read_camera_file(const std::string& path);
void write_camera_file(const std::string& path, std::span<const CameraRecord> cameras);

}  // namespace voxforge
