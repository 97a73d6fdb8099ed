// Copyright 2026 The Voxforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "voxforge/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <iostream>
#include <unordered_map>

#include "voxforge/parallel.hpp"
#include "voxforge/refine.hpp"
#include "voxforge/tsdf.hpp"

namespace voxforge {

std::vector<Vec3> ScalarGrid::points() const {
    std::vector<Vec3> out;
    out.reserve(std::size_t(nx) * ny * nz);
    for (std::uint32_t k = 0; k < nz; ++k)
        for (std::uint32_t j = 0; j < ny; ++j)
            for (std::uint32_t i = 0; i < nx; ++i) out.push_back(point(i, j, k));
    return out;
}

namespace {

// Six tetrahedra sharing the diagonal from corner 0 to corner 7.
constexpr int kTets[6][4] = {
    {0, 4, 6, 7}, {0, 4, 5, 7}, {0, 2, 6, 7}, {0, 2, 3, 7}, {0, 1, 5, 7}, {0, 1, 3, 7},
};

}  // namespace

namespace {

// Triangulates the lattice cells produced by `for_each_cell`, reading corner
// values through `value(point_id)`; non-finite values mark unknown samples.
template <typename CellLoop, typename Value>
TriangleMesh triangulate(const Vec3& origin, double spacing, std::uint64_t nx, std::uint64_t ny,
                         CellLoop&& for_each_cell, Value&& value, double iso) {
    TriangleMesh mesh;
    std::unordered_map<std::uint64_t, std::uint32_t> edge_vertex;
    auto point = [&](std::uint64_t i, std::uint64_t j, std::uint64_t k) {
        return Vec3(origin + spacing * Vec3(double(i), double(j), double(k)));
    };

    // Every tetrahedron edge joins corners ordered on all axes, so the lower
    // point id and the mask of differing axes name the edge uniquely.
    auto edge = [&](std::uint64_t a, std::uint64_t b, unsigned axes, double fa, double fb, Vec3 pa, Vec3 pb) {
        if (a > b) {
            std::swap(a, b);
            std::swap(fa, fb);
            std::swap(pa, pb);
        }
        const std::uint64_t key = a * 8 + axes;
        auto it = edge_vertex.find(key);
        if (it != edge_vertex.end()) return it->second;
        const double t = (iso - fa) / (fb - fa);
        const auto id = static_cast<std::uint32_t>(mesh.vertices.size());
        mesh.vertices.push_back(pa + t * (pb - pa));
        edge_vertex.emplace(key, id);
        return id;
    };

    auto emit = [&](std::uint32_t a, std::uint32_t b, std::uint32_t c, const Vec3& outward) {
        if (a == b || b == c || a == c) return;
        const Vec3& pa = mesh.vertices[a];
        const Vec3 n = (mesh.vertices[b] - pa).cross(mesh.vertices[c] - pa);
        if (!(n.squaredNorm() > 1e-24 * spacing * spacing * spacing * spacing)) return;
        if (n.dot(outward) < 0.0) std::swap(b, c);
        mesh.triangles.push_back({a, b, c});
    };

    for_each_cell([&](std::uint64_t i, std::uint64_t j, std::uint64_t k) {
        std::uint64_t idx[8];
        double f[8];
        Vec3 p[8];
        for (unsigned m = 0; m < 8; ++m) {
            const auto& o = kCornerOffsets[m];
            idx[m] = ((k + o[2]) * ny + (j + o[1])) * nx + (i + o[0]);
            f[m] = value(idx[m]);
            if (!std::isfinite(f[m])) return;
            p[m] = point(i + o[0], j + o[1], k + o[2]);
        }
        for (const auto& tet : kTets) {
            int in[4], out[4], nin = 0, nout = 0;
            for (int q = 0; q < 4; ++q) (f[tet[q]] < iso ? in[nin++] : out[nout++]) = tet[q];
            if (nin == 0 || nout == 0) continue;
            Vec3 cin = Vec3::Zero(), cout = Vec3::Zero();
            for (int q = 0; q < nin; ++q) cin += p[in[q]] / nin;
            for (int q = 0; q < nout; ++q) cout += p[out[q]] / nout;
            const Vec3 outward = cout - cin;
            auto E = [&](int a, int b) { return edge(idx[a], idx[b], unsigned(a ^ b), f[a], f[b], p[a], p[b]); };
            if (nin == 1) {
                emit(E(in[0], out[0]), E(in[0], out[1]), E(in[0], out[2]), outward);
            } else if (nout == 1) {
                emit(E(out[0], in[0]), E(out[0], in[1]), E(out[0], in[2]), outward);
            } else {
                const auto ac = E(in[0], out[0]), ad = E(in[0], out[1]);
                const auto bd = E(in[1], out[1]), bc = E(in[1], out[0]);
                emit(ac, ad, bd, outward);
                emit(ac, bd, bc, outward);
            }
        }
    });
    return mesh;
}

}  // namespace

TriangleMesh marching_tetrahedra(const ScalarGrid& g, double iso) {
    if (g.nx < 2 || g.ny < 2 || g.nz < 2) return {};
    if (g.values.size() != std::size_t(g.nx) * g.ny * g.nz) fail_data("scalar grid has the wrong size");
    auto cells = [&](auto&& fn) {
        for (std::uint64_t k = 0; k + 1 < g.nz; ++k)
            for (std::uint64_t j = 0; j + 1 < g.ny; ++j)
                for (std::uint64_t i = 0; i + 1 < g.nx; ++i) fn(i, j, k);
    };
    return triangulate(g.origin, g.spacing, g.nx, g.ny, cells, [&](std::uint64_t id) { return g.values[id]; },
                       iso);
}

TriangleMesh marching_tetrahedra(const SparseScalarGrid& g, double iso) {
    if (g.n < 2) return {};
    if (g.values.size() != g.point_ids.size()) fail_data("sparse grid has mismatched values");
    const std::uint64_t n = g.n, c = g.n - 1;
    auto cells = [&](auto&& fn) {
        for (std::uint64_t id : g.cells) fn(id % c, (id / c) % c, id / (c * c));
    };
    auto value = [&](std::uint64_t id) {
        auto it = std::lower_bound(g.point_ids.begin(), g.point_ids.end(), id);
        if (it == g.point_ids.end() || *it != id) return std::numeric_limits<double>::quiet_NaN();
        return g.values[std::size_t(it - g.point_ids.begin())];
    };
    return triangulate(g.origin, g.spacing, n, n, cells, value, iso);
}

void SparseScalarGrid::activate_box(const Vec3& lo, const Vec3& hi, int dilate) {
    const auto c = static_cast<long long>(n) - 1;
    auto clampi = [&](double x) { return std::clamp<long long>(static_cast<long long>(std::floor(x)), 0, c - 1); };
    long long a[3], b[3];
    for (int ax = 0; ax < 3; ++ax) {
        a[ax] = std::max<long long>(clampi((lo[ax] - origin[ax]) / spacing) - dilate, 0);
        b[ax] = std::min<long long>(clampi((hi[ax] - origin[ax]) / spacing) + dilate, c - 1);
    }
    for (long long k = a[2]; k <= b[2]; ++k)
        for (long long j = a[1]; j <= b[1]; ++j)
            for (long long i = a[0]; i <= b[0]; ++i)
                cells.push_back(std::uint64_t((k * c + j) * c + i));
}

void SparseScalarGrid::finalize_cells() {
    std::sort(cells.begin(), cells.end());
    cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
    const std::uint64_t c = n - 1;
    point_ids.clear();
    for (std::uint64_t id : cells) {
        const std::uint64_t i = id % c, j = (id / c) % c, k = id / (c * c);
        for (const auto& o : kCornerOffsets) point_ids.push_back(((k + o[2]) * n + (j + o[1])) * n + (i + o[0]));
    }
    std::sort(point_ids.begin(), point_ids.end());
    point_ids.erase(std::unique(point_ids.begin(), point_ids.end()), point_ids.end());
    values.assign(point_ids.size(), std::numeric_limits<double>::quiet_NaN());
}

std::vector<Vec3> SparseScalarGrid::points() const {
    std::vector<Vec3> out;
    out.reserve(point_ids.size());
    for (std::uint64_t id : point_ids)
        out.push_back(origin + spacing * Vec3(double(id % n), double((id / n) % n), double(id / (std::uint64_t(n) * n))));
    return out;
}

MeshOptions MeshOptions::from_config(const Config& cfg) {
    MeshOptions o;
    o.voxel = cfg.get_double("mesh.voxel", o.voxel);
    o.trunc_factor = cfg.get_double("mesh.trunc_factor", o.trunc_factor);
    o.min_opacity = cfg.get_double("mesh.min_opacity", o.min_opacity);
    o.density_iso = cfg.get_double("mesh.density_iso", o.density_iso);
    if (!(o.trunc_factor > 0.0)) fail_usage("mesh.trunc_factor must be positive");
    return o;
}

namespace {

// Leaf lookup by (level, code).
class VoxelLookup {
public:
    explicit VoxelLookup(const VoxelOctree& tree) : tree_(tree) {
        for (std::size_t i = 0; i < tree.size(); ++i) {
            const MortonPath p = tree.voxels[i].path;
            map_.emplace(p, static_cast<std::uint32_t>(i));
            if (std::find(levels_.begin(), levels_.end(), p.level) == levels_.end()) levels_.push_back(p.level);
        }
        std::sort(levels_.begin(), levels_.end());
    }

    double rho(const Vec3& x) const {
        for (unsigned l : levels_) {
            const auto p = tree_.frame.locate(x, l);
            if (!p) return 0.0;
            auto it = map_.find(*p);
            if (it == map_.end()) continue;
            const Voxel& v = tree_.voxels[it->second];
            const double s = tree_.frame.voxel_size(l);
            const Vec3 u = ((x - tree_.frame.cell_min(v.path)) / s).cwiseMax(0.0).cwiseMin(1.0);
            return sample_density(v, u).rho;
        }
        return 0.0;
    }

private:
    const VoxelOctree& tree_;
    std::unordered_map<MortonPath, std::uint32_t, MortonPathHash> map_;
    std::vector<unsigned> levels_;
};

}  // namespace

double density_at(const VoxelOctree& tree, const Vec3& x) { return VoxelLookup(tree).rho(x); }

TriangleMesh extract_mesh(const VoxelOctree& tree, std::span<const Camera> cams,
                          const RenderSettings& settings, const MeshOptions& opts) {
    if (tree.empty()) {
        std::cerr << "warning: empty octree, empty mesh\n";
        return {};
    }
    const double h = opts.voxel > 0.0 ? opts.voxel : tree.frame.voxel_size(tree.max_level());
    SparseScalarGrid grid;
    grid.n = static_cast<std::uint32_t>(std::llround(tree.frame.size / h)) + 1;
    grid.spacing = tree.frame.size / double(grid.n - 1);
    grid.origin = tree.frame.center - Vec3::Constant(0.5 * tree.frame.size);

    if (opts.from_density) {
        // rho crosses the iso level only inside voxels whose largest corner
        // density reaches it (rho is monotone in the trilinear sigma).
        for (const Voxel& v : tree.voxels) {
            const double smax = *std::max_element(v.density.begin(), v.density.end());
            if ((smax > 0 ? smax : std::expm1(smax)) + 1.0 < opts.density_iso) continue;
            const Vec3 lo = tree.frame.cell_min(v.path);
            grid.activate_box(lo, lo + Vec3::Constant(tree.frame.voxel_size(v.path.level)), 1);
        }
        grid.finalize_cells();
        const VoxelLookup lookup(tree);
        const auto points = grid.points();
        parallel_for(points.size(), [&](std::size_t i) { grid.values[i] = opts.density_iso - lookup.rho(points[i]); });
        return marching_tetrahedra(grid, 0.0);
    }

    const RenderIndex index(tree);
    std::vector<FloatRaster> depths, confs;
    for (const Camera& cam : cams) {
        const RenderedView rv = render_view(tree, index, cam, settings);
        FloatRaster d(cam.width, cam.height, 1), c(cam.width, cam.height, 1, 1.0f);
        for (std::size_t i = 0; i < d.data.size(); ++i) {
            if (!(rv.opacity[i] >= opts.min_opacity && std::isfinite(rv.depth[i]))) continue;
            d.data[i] = static_cast<float>(rv.depth[i]);
            // The zero crossing lies near the observed surface; only cells
            // around it are evaluated.
            const Vec3 x = unproject_pixel(cam, double(i % cam.width), double(i / cam.width), rv.depth[i]);
            grid.activate_box(x, x, 1);
        }
        depths.push_back(std::move(d));
        confs.push_back(std::move(c));
    }
    grid.finalize_cells();
    const auto points = grid.points();
    const TsdfGrid tsdf = fuse_tsdf(points, depths, confs, cams, opts.trunc_factor * grid.spacing);
    grid.values = tsdf.F;
    const TriangleMesh mesh = marching_tetrahedra(grid, 0.0);
    if (mesh.empty()) std::cerr << "warning: no zero crossing in the TSDF band, empty mesh\n";
    return mesh;
}

std::vector<Vec3> sample_mesh(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed) {
    std::vector<Vec3> out;
    if (mesh.empty() || n == 0) return out;
    std::vector<double> cum;
    double total = 0.0;
    for (const auto& t : mesh.triangles) {
        const Vec3& a = mesh.vertices[t[0]];
        total += 0.5 * (mesh.vertices[t[1]] - a).cross(mesh.vertices[t[2]] - a).norm();
        cum.push_back(total);
    }
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double pick = counter_uniform(seed, 0x3e5, i, 0) * total;
        const std::size_t ti = std::min<std::size_t>(
            std::size_t(std::upper_bound(cum.begin(), cum.end(), pick) - cum.begin()), cum.size() - 1);
        double r1 = counter_uniform(seed, 0x3e5, i, 1), r2 = counter_uniform(seed, 0x3e5, i, 2);
        if (r1 + r2 > 1.0) {
            r1 = 1.0 - r1;
            r2 = 1.0 - r2;
        }
        const auto& t = mesh.triangles[ti];
        const Vec3& a = mesh.vertices[t[0]];
        out.push_back(a + r1 * (mesh.vertices[t[1]] - a) + r2 * (mesh.vertices[t[2]] - a));
    }
    return out;
}

void write_obj(const std::string& path, const TriangleMesh& mesh) {
    std::ofstream os(path);
    if (!os) fail_data("cannot open " + path + " for writing");
    os << std::setprecision(17);
    for (const Vec3& v : mesh.vertices) os << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
    for (const auto& t : mesh.triangles) os << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
    if (!os) fail_data("failed writing " + path);
}

TriangleMesh read_obj(const std::string& path) {
    std::ifstream is(path);
    if (!is) fail_data("cannot open " + path);
    TriangleMesh mesh;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag) || tag[0] == '#') continue;
        if (tag == "v") {
            Vec3 v;
            if (!(ls >> v.x() >> v.y() >> v.z())) fail_data(path + ":" + std::to_string(lineno) + ": bad vertex");
            mesh.vertices.push_back(v);
        } else if (tag == "f") {
            std::array<std::uint32_t, 3> t{};
            for (auto& idx : t) {
                std::string tok;
                if (!(ls >> tok)) fail_data(path + ":" + std::to_string(lineno) + ": bad face");
                const long v = std::stol(tok.substr(0, tok.find('/')));
                if (v < 1) fail_data(path + ":" + std::to_string(lineno) + ": bad face index");
                idx = static_cast<std::uint32_t>(v - 1);
            }
            mesh.triangles.push_back(t);
        }
    }
    for (const auto& t : mesh.triangles)
        for (auto idx : t)
            if (idx >= mesh.vertices.size()) fail_data(path + ": face index out of range");
    return mesh;
}

std::vector<double> nearest_distances(std::span<const Vec3> queries, std::span<const Vec3> points) {
    if (points.empty()) fail_data("nearest_distances: empty point set");
    Vec3 lo = points[0], hi = points[0];
    for (const Vec3& p : points) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    const Vec3 ext = (hi - lo).cwiseMax(1e-12);
    // Around two points per occupied cell for surface-like sets.
    double h = std::sqrt((ext.x() * ext.y() + ext.y() * ext.z() + ext.x() * ext.z()) / (0.5 * double(points.size())));
    h = std::max(h, ext.maxCoeff() / 256.0);
    std::array<long, 3> dims;
    for (int a = 0; a < 3; ++a) dims[a] = long(ext[a] / h) + 1;
    std::vector<std::uint32_t> start(std::size_t(dims[0] * dims[1] * dims[2]) + 1, 0), items(points.size());
    auto cell_of = [&](const Vec3& p, int a) {
        return std::clamp(long(std::floor((p[a] - lo[a]) / h)), 0L, dims[a] - 1);
    };
    auto flat = [&](long x, long y, long z) { return std::size_t((z * dims[1] + y) * dims[0] + x); };
    for (const Vec3& p : points) ++start[flat(cell_of(p, 0), cell_of(p, 1), cell_of(p, 2)) + 1];
    for (std::size_t i = 1; i < start.size(); ++i) start[i] += start[i - 1];
    {
        std::vector<std::uint32_t> fill(start.begin(), start.end() - 1);
        for (std::size_t i = 0; i < points.size(); ++i) {
            const Vec3& p = points[i];
            items[fill[flat(cell_of(p, 0), cell_of(p, 1), cell_of(p, 2))]++] = static_cast<std::uint32_t>(i);
        }
    }
    const long max_r = std::max({dims[0], dims[1], dims[2]});
    std::vector<double> out(queries.size());
    parallel_for(queries.size(), [&](std::size_t qi) {
        const Vec3& q = queries[qi];
        const long cx = cell_of(q, 0), cy = cell_of(q, 1), cz = cell_of(q, 2);
        double best2 = std::numeric_limits<double>::infinity();
        for (long r = 0; r <= max_r; ++r) {
            for (long z = cz - r; z <= cz + r; ++z) {
                if (z < 0 || z >= dims[2]) continue;
                for (long y = cy - r; y <= cy + r; ++y) {
                    if (y < 0 || y >= dims[1]) continue;
                    const bool edge_yz = std::abs(z - cz) == r || std::abs(y - cy) == r;
                    for (long x = cx - r; x <= cx + r; x += (edge_yz || r == 0) ? 1 : 2 * r) {
                        if (x < 0 || x >= dims[0]) continue;
                        const std::size_t c = flat(x, y, z);
                        for (std::uint32_t k = start[c]; k < start[c + 1]; ++k)
                            best2 = std::min(best2, (points[items[k]] - q).squaredNorm());
                    }
                }
            }
            // Cells beyond shell r are at least r*h away.
            const double bound = double(r) * h;
            if (best2 <= bound * bound) break;
        }
        out[qi] = std::sqrt(best2);
    });
    return out;
}

double chamfer_distance(std::span<const Vec3> a, std::span<const Vec3> b) {
    if (a.empty() || b.empty()) fail_data("chamfer_distance: empty input");
    auto mean = [](const std::vector<double>& d) {
        double s = 0.0;
        for (double x : d) s += x;
        return s / double(d.size());
    };
    return 0.5 * (mean(nearest_distances(a, b)) + mean(nearest_distances(b, a)));
}

double chamfer_distance_brute_force(std::span<const Vec3> a, std::span<const Vec3> b) {
    if (a.empty() || b.empty()) fail_data("chamfer_distance: empty input");
    auto one_way = [](std::span<const Vec3> x, std::span<const Vec3> y) {
        double s = 0.0;
        for (const Vec3& p : x) {
            double best = std::numeric_limits<double>::infinity();
            for (const Vec3& q : y) best = std::min(best, (p - q).squaredNorm());
            s += std::sqrt(best);
        }
        return s / double(x.size());
    };
    return 0.5 * (one_way(a, b) + one_way(b, a));
}

}  // namespace voxforge
