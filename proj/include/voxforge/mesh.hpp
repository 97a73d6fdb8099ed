// Copyright 2026 The Voxforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "voxforge/camera.hpp"
#include "voxforge/config.hpp"
#include "voxforge/octree.hpp"
#include "voxforge/render.hpp"

namespace voxforge {

struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<std::uint32_t, 3>> triangles;

    bool empty() const { return triangles.empty(); }
};

/// Scalar samples on a regular lattice; NaN marks unknown values.
struct ScalarGrid {
    Vec3 origin = Vec3::Zero();
    double spacing = 1.0;
    std::uint32_t nx = 0, ny = 0, nz = 0;
    std::vector<double> values;  // x fastest

    std::size_t index(std::uint32_t i, std::uint32_t j, std::uint32_t k) const {
        return (std::size_t(k) * ny + j) * nx + i;
    }
    Vec3 point(std::uint32_t i, std::uint32_t j, std::uint32_t k) const {
        return origin + spacing * Vec3(i, j, k);
    }
    std::vector<Vec3> points() const;
};

/// Iso-surface of the grid, splitting every cell into six tetrahedra along
/// its main diagonal. Cells touching an unknown sample are skipped. Values
/// below `iso` count as inside; triangles face outwards. Vertices on shared
/// lattice edges are shared.
TriangleMesh marching_tetrahedra(const ScalarGrid& grid, double iso);

/// A cubic lattice of `n` points per axis of which only listed cells are
/// evaluated. Ids are linear with x fastest.
struct SparseScalarGrid {
    Vec3 origin = Vec3::Zero();
    double spacing = 1.0;
    std::uint32_t n = 0;
    std::vector<std::uint64_t> cells;      // sorted, unique after finalize_cells
    std::vector<std::uint64_t> point_ids;  // corners of `cells`, sorted
    std::vector<double> values;            // per point id; NaN unknown
    /// Adds the cells overlapping [lo, hi], grown by `dilate` cells.
    void activate_box(const Vec3& lo, const Vec3& hi, int dilate);
    /// Deduplicates cells and lists their corners; values reset to NaN.
    void finalize_cells();
    std::vector<Vec3> points() const;
};

TriangleMesh marching_tetrahedra(const SparseScalarGrid& grid, double iso);

struct MeshOptions {
    double voxel = 0.0;         // lattice spacing; <= 0: finest voxel size
    double trunc_factor = 3.0;  // TSDF band in lattice cells
    double min_opacity = 0.5;   // rendered depth kept above this opacity
    bool from_density = false;
    double density_iso = 1.0;   // rho level for from_density

    /// Reads mesh.voxel, mesh.trunc_factor, mesh.min_opacity, mesh.density_iso.
    static MeshOptions from_config(const Config& cfg);
};

/// Renders depth for every camera, fuses a TSDF on the lattice cells around
/// the rendered surface points and triangulates its zero crossing. With
/// from_density the lattice holds the density rho instead, evaluated in the
/// voxels dense enough to reach the iso level. Empty tree gives an empty mesh.
TriangleMesh extract_mesh(const VoxelOctree& tree, std::span<const Camera> cams,
                          const RenderSettings& settings, const MeshOptions& opts);

/// rho at x, 0 outside every voxel.
double density_at(const VoxelOctree& tree, const Vec3& x);

/// Area-weighted surface samples, seeded.
std::vector<Vec3> sample_mesh(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed);

void write_obj(const std::string& path, const TriangleMesh& mesh);
TriangleMesh read_obj(const std::string& path);

/// Distance from each query point to its nearest neighbour in `points`,
/// through a uniform grid.
std::vector<double> nearest_distances(std::span<const Vec3> queries, std::span<const Vec3> points);

/// Symmetric Chamfer distance: the average of the two mean nearest-neighbour
/// distances. Throws Error(Data) on empty input.
double chamfer_distance(std::span<const Vec3> a, std::span<const Vec3> b);

/// O(|a||b|) reference.
double chamfer_distance_brute_force(std::span<const Vec3> a, std::span<const Vec3> b);

}  // namespace voxforge
