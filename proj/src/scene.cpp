// Copyright 2026 The Voxforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "voxforge/scene.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "voxforge/parallel.hpp"
#include "voxforge/refine.hpp"

namespace voxforge {

namespace {

struct Box {
    Vec3 center, half;
};

std::vector<Box> scene_boxes(const SceneSpec& spec) {
    const double r = spec.radius;
    return {
        {r * Vec3(-0.35, -0.30, -0.25), r * Vec3(0.30, 0.30, 0.30)},
        {r * Vec3(0.40, 0.25, -0.30), r * Vec3(0.25, 0.35, 0.20)},
        {r * Vec3(0.00, 0.05, 0.35), r * Vec3(0.20, 0.20, 0.25)},
    };
}

std::optional<SurfaceHit> hit_box(const Box& b, const Vec3& o, const Vec3& d) {
    double t0 = -std::numeric_limits<double>::infinity(), t1 = std::numeric_limits<double>::infinity();
    int axis0 = -1;
    double sign0 = 0.0;
    for (int a = 0; a < 3; ++a) {
        const double lo = b.center[a] - b.half[a], hi = b.center[a] + b.half[a];
        if (d[a] == 0.0) {
            if (o[a] < lo || o[a] > hi) return std::nullopt;
            continue;
        }
        double ta = (lo - o[a]) / d[a], tb = (hi - o[a]) / d[a];
        double s = -1.0;  // entering through the low face
        if (ta > tb) {
            std::swap(ta, tb);
            s = 1.0;
        }
        if (ta > t0) {
            t0 = ta;
            axis0 = a;
            sign0 = s;
        }
        t1 = std::min(t1, tb);
    }
    if (!(t1 >= t0) || t0 <= 0.0 || axis0 < 0) return std::nullopt;
    Vec3 n = Vec3::Zero();
    n[axis0] = sign0;
    return SurfaceHit{t0, n};
}

double lattice_value(std::uint64_t seed, std::int64_t x, std::int64_t y, std::int64_t z) {
    return counter_uniform(seed, std::uint64_t(x), std::uint64_t(y), std::uint64_t(z));
}

double value_noise(std::uint64_t seed, const Vec3& p) {
    const Vec3 f = p.array().floor();
    const Vec3 r = p - f;
    const Vec3 w = r.array() * r.array() * (3.0 - 2.0 * r.array());
    const auto ix = std::int64_t(f.x()), iy = std::int64_t(f.y()), iz = std::int64_t(f.z());
    double acc = 0.0;
    for (int c = 0; c < 8; ++c) {
        const int dx = (c >> 2) & 1, dy = (c >> 1) & 1, dz = c & 1;
        const double val = lattice_value(seed, ix + dx, iy + dy, iz + dz);
        acc += (dx ? w.x() : 1.0 - w.x()) * (dy ? w.y() : 1.0 - w.y()) * (dz ? w.z() : 1.0 - w.z()) * val;
    }
    return acc;
}

// Three octaves, result in [0, 1].
double fractal_noise(std::uint64_t seed, const Vec3& p) {
    return (4.0 * value_noise(seed, p) + 2.0 * value_noise(seed + 1, 2.0 * p) +
            value_noise(seed + 2, 4.0 * p)) / 7.0;
}

}  // namespace

std::string shape_name(SceneSpec::Shape s) {
    switch (s) {
        case SceneSpec::Shape::Sphere: return "sphere";
        case SceneSpec::Shape::Plane: return "plane";
        case SceneSpec::Shape::Boxes: return "boxes";
    }
    return "sphere";
}

namespace {

std::string rig_name(SceneSpec::Rig r) {
    switch (r) {
        case SceneSpec::Rig::Ring: return "ring";
        case SceneSpec::Rig::Hemisphere: return "hemisphere";
        case SceneSpec::Rig::Sphere: return "sphere";
    }
    return "sphere";
}

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

}  // namespace

SceneSpec SceneSpec::from_config(const Config& cfg) {
    SceneSpec s;
    const std::string shape = cfg.get_string("scene.shape", "sphere");
    if (shape == "sphere") s.shape = Shape::Sphere;
    else if (shape == "plane") s.shape = Shape::Plane;
    else if (shape == "boxes") s.shape = Shape::Boxes;
    else fail_usage("unknown scene.shape: " + shape);
    const std::string rig = cfg.get_string("scene.rig", "sphere");
    if (rig == "ring") s.rig = Rig::Ring;
    else if (rig == "hemisphere") s.rig = Rig::Hemisphere;
    else if (rig == "sphere") s.rig = Rig::Sphere;
    else fail_usage("unknown scene.rig: " + rig);
    s.radius = cfg.get_double("scene.radius", s.radius);
    s.views = static_cast<std::uint32_t>(cfg.get_int("scene.views", s.views));
    s.width = static_cast<std::uint32_t>(cfg.get_int("scene.width", s.width));
    s.height = static_cast<std::uint32_t>(cfg.get_int("scene.height", s.height));
    s.focal = cfg.get_double("scene.focal", s.focal);
    s.distance = cfg.get_double("scene.distance", s.distance);
    s.elevation_deg = cfg.get_double("scene.elevation", s.elevation_deg);
    s.texture_freq = cfg.get_double("scene.texture_freq", s.texture_freq);
    s.supersample = static_cast<std::uint32_t>(cfg.get_int("scene.supersample", s.supersample));
    s.noise = cfg.get_double("scene.noise", s.noise);
    s.perturb_pose = cfg.get_int("scene.perturb_pose", 0) != 0;
    s.root_size = cfg.get_double("scene.root_size", s.root_size);
    s.seed = static_cast<std::uint64_t>(cfg.get_int("scene.seed", 0));
    if (s.supersample == 0) fail_usage("scene.supersample must be at least 1");
    if (s.views == 0 || s.width == 0 || s.height == 0) fail_usage("scene needs at least one non-empty view");
    if (!(s.radius > 0.0) || !(s.focal > 0.0) || !(s.root_size > 0.0)) fail_usage("scene sizes must be positive");
    if (!(s.distance > s.radius)) fail_usage("scene.distance must exceed scene.radius");
    if (s.noise < 0.0) fail_usage("scene.noise must be non-negative");
    return s;
}

Config SceneSpec::to_config() const {
    Config c;
    c.set("scene.shape", shape_name(shape));
    c.set("scene.rig", rig_name(rig));
    c.set("scene.radius", fmt(radius));
    c.set("scene.views", std::to_string(views));
    c.set("scene.width", std::to_string(width));
    c.set("scene.height", std::to_string(height));
    c.set("scene.focal", fmt(focal));
    c.set("scene.distance", fmt(distance));
    c.set("scene.elevation", fmt(elevation_deg));
    c.set("scene.texture_freq", fmt(texture_freq));
    c.set("scene.supersample", std::to_string(supersample));
    c.set("scene.noise", fmt(noise));
    c.set("scene.perturb_pose", perturb_pose ? "1" : "0");
    c.set("scene.root_size", fmt(root_size));
    c.set("scene.seed", std::to_string(seed));
    return c;
}

std::optional<SurfaceHit> intersect_scene(const SceneSpec& spec, const Vec3& o, const Vec3& d) {
    switch (spec.shape) {
        case SceneSpec::Shape::Sphere: {
            const double b = o.dot(d), c = o.squaredNorm() - spec.radius * spec.radius;
            const double disc = b * b - c;
            if (disc < 0.0) return std::nullopt;
            const double sq = std::sqrt(disc);
            double t = -b - sq;
            if (t <= 0.0) t = -b + sq;
            if (t <= 0.0) return std::nullopt;
            return SurfaceHit{t, (o + t * d).normalized()};
        }
        case SceneSpec::Shape::Plane: {
            if (d.z() == 0.0) return std::nullopt;
            const double t = -o.z() / d.z();
            if (t <= 0.0) return std::nullopt;
            const Vec3 x = o + t * d;
            if (std::abs(x.x()) > spec.radius || std::abs(x.y()) > spec.radius) return std::nullopt;
            return SurfaceHit{t, Vec3(0.0, 0.0, d.z() < 0.0 ? 1.0 : -1.0)};
        }
        case SceneSpec::Shape::Boxes: {
            std::optional<SurfaceHit> best;
            for (const Box& b : scene_boxes(spec)) {
                auto h = hit_box(b, o, d);
                if (h && (!best || h->t < best->t)) best = h;
            }
            return best;
        }
    }
    return std::nullopt;
}

Vec3 scene_texture(const SceneSpec& spec, const Vec3& x) {
    const Vec3 p = spec.texture_freq * x;
    const std::uint64_t s = spec.seed * 16 + 1000;
    return Vec3(0.15 + 0.7 * fractal_noise(s, p), 0.15 + 0.7 * fractal_noise(s + 3, p),
                0.15 + 0.7 * fractal_noise(s + 6, p));
}

double scene_sdf(const SceneSpec& spec, const Vec3& x) {
    switch (spec.shape) {
        case SceneSpec::Shape::Sphere: return x.norm() - spec.radius;
        case SceneSpec::Shape::Plane: return x.z();
        case SceneSpec::Shape::Boxes: {
            double best = std::numeric_limits<double>::infinity();
            for (const Box& b : scene_boxes(spec)) {
                const Vec3 q = (x - b.center).cwiseAbs() - b.half;
                const double outside = q.cwiseMax(0.0).norm();
                const double inside = std::min(q.maxCoeff(), 0.0);
                best = std::min(best, outside + inside);
            }
            return best;
        }
    }
    return 0.0;
}

std::vector<Vec3> sample_surface(const SceneSpec& spec, std::size_t n) {
    std::vector<Vec3> out;
    if (n == 0) return out;
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    switch (spec.shape) {
        case SceneSpec::Shape::Sphere:
            for (std::size_t i = 0; i < n; ++i) {
                const double z = 1.0 - 2.0 * (double(i) + 0.5) / double(n);
                const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
                const double phi = golden * double(i);
                out.push_back(spec.radius * Vec3(r * std::cos(phi), r * std::sin(phi), z));
            }
            break;
        case SceneSpec::Shape::Plane: {
            const auto m = std::size_t(std::ceil(std::sqrt(double(n))));
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < m; ++j)
                    out.push_back(Vec3(spec.radius * (2.0 * (double(i) + 0.5) / double(m) - 1.0),
                                       spec.radius * (2.0 * (double(j) + 0.5) / double(m) - 1.0), 0.0));
            break;
        }
        case SceneSpec::Shape::Boxes: {
            const auto boxes = scene_boxes(spec);
            // Faces weighted by area; points inside another box are dropped.
            std::vector<std::pair<double, std::pair<int, int>>> faces;  // area, (box, face)
            double total = 0.0;
            for (int b = 0; b < int(boxes.size()); ++b)
                for (int f = 0; f < 6; ++f) {
                    const int a = f / 2;
                    const Vec3& h = boxes[b].half;
                    const double area = 4.0 * h[(a + 1) % 3] * h[(a + 2) % 3];
                    total += area;
                    faces.push_back({total, {b, f}});
                }
            for (std::size_t i = 0; out.size() < n && i < 20 * n; ++i) {
                const double pick = counter_uniform(spec.seed, 77, i, 0) * total;
                const auto it = std::lower_bound(faces.begin(), faces.end(), pick,
                                                 [](const auto& e, double v) { return e.first < v; });
                const auto [b, f] = (it == faces.end() ? faces.back() : *it).second;
                const int a = f / 2;
                const Box& box = boxes[b];
                Vec3 x = box.center;
                x[a] += (f % 2 ? 1.0 : -1.0) * box.half[a];
                x[(a + 1) % 3] += (2.0 * counter_uniform(spec.seed, 77, i, 1) - 1.0) * box.half[(a + 1) % 3];
                x[(a + 2) % 3] += (2.0 * counter_uniform(spec.seed, 77, i, 2) - 1.0) * box.half[(a + 2) % 3];
                if (scene_sdf(spec, x) < -1e-12) continue;
                out.push_back(x);
            }
            break;
        }
    }
    return out;
}

Camera look_at(const Vec3& eye, const Vec3& target, double focal, std::uint32_t w, std::uint32_t h) {
    const Vec3 f = (target - eye).normalized();
    Vec3 up = Vec3::UnitZ();
    if (std::abs(f.dot(up)) > 0.99) up = Vec3::UnitY();
    const Vec3 right = f.cross(up).normalized();
    const Vec3 down = f.cross(right);
    Camera cam;
    cam.R.row(0) = right.transpose();
    cam.R.row(1) = down.transpose();
    cam.R.row(2) = f.transpose();
    cam.t = -cam.R * eye;
    cam.fx = cam.fy = focal;
    cam.cx = 0.5 * (double(w) - 1.0);
    cam.cy = 0.5 * (double(h) - 1.0);
    cam.width = w;
    cam.height = h;
    return cam;
}

std::vector<Camera> make_rig(const SceneSpec& spec) {
    std::vector<Camera> cams;
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (std::uint32_t i = 0; i < spec.views; ++i) {
        Vec3 dir;
        switch (spec.rig) {
            case SceneSpec::Rig::Ring: {
                const double az = 2.0 * std::numbers::pi * i / spec.views;
                const double el = spec.elevation_deg * std::numbers::pi / 180.0;
                dir = Vec3(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
                break;
            }
            case SceneSpec::Rig::Hemisphere:
            case SceneSpec::Rig::Sphere: {
                const double lo = spec.rig == SceneSpec::Rig::Sphere ? -0.9 : 0.15;
                const double z = 0.9 - (0.9 - lo) * (double(i) + 0.5) / double(spec.views);
                const double r = std::sqrt(1.0 - z * z);
                const double phi = golden * double(i);
                dir = Vec3(r * std::cos(phi), r * std::sin(phi), z);
                break;
            }
        }
        cams.push_back(look_at(spec.distance * dir, Vec3::Zero(), spec.focal, spec.width, spec.height));
    }
    return cams;
}

std::optional<double> analytic_depth(const SceneSpec& spec, const Camera& cam, double u, double v) {
    const Vec3 d = cam.ray_direction(u, v);
    const auto hit = intersect_scene(spec, cam.center(), d);
    if (!hit) return std::nullopt;
    return cam.to_camera(cam.center() + hit->t * d).z();
}

namespace {

double gaussian(std::uint64_t seed, std::uint64_t view, std::uint64_t pixel) {
    // Box-Muller on the counter stream keeps draws independent of scheduling.
    const double u1 = 1.0 - counter_uniform(seed, view, pixel, 0);
    const double u2 = counter_uniform(seed, view, pixel, 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

SimilarityTransform random_similarity(std::uint64_t seed) {
    auto U = [&](std::uint64_t k) { return counter_uniform(seed, 4242, 0, k); };
    SimilarityTransform T;
    T.s = std::exp(U(0) - 0.5);
    const Vec3 axis = Vec3(U(1) - 0.5, U(2) - 0.5, U(3) - 0.5).normalized();
    T.R = Eigen::AngleAxisd(std::numbers::pi * (U(4) - 0.5), axis).toRotationMatrix();
    T.t = Vec3(U(5) - 0.5, U(6) - 0.5, U(7) - 0.5);
    return T;
}

}  // namespace

SceneView render_scene_view(const SceneSpec& spec, const Camera& cam) {
    SceneView out{FloatRaster(cam.width, cam.height, 3), FloatRaster(cam.width, cam.height, 1)};
    parallel_for(out.gt_depth.pixel_count(), [&](std::size_t i) {
        const double u = double(i % cam.width), v = double(i / cam.width);
        // Box-filtered colour over a regular sub-pixel grid, so texture
        // finer than a pixel does not alias differently in each view.
        const std::uint32_t ss = spec.supersample;
        Vec3 c = Vec3::Zero();
        for (std::uint32_t sy = 0; sy < ss; ++sy)
            for (std::uint32_t sx = 0; sx < ss; ++sx) {
                const double su = u + (sx + 0.5) / ss - 0.5, sv = v + (sy + 0.5) / ss - 0.5;
                const Vec3 sd = cam.ray_direction(su, sv);
                if (const auto sh = intersect_scene(spec, cam.center(), sd))
                    c += scene_texture(spec, cam.center() + sh->t * sd);
            }
        c /= double(ss * ss);
        for (int k = 0; k < 3; ++k) out.image.data[3 * i + k] = static_cast<float>(c[k]);
        const Vec3 d = cam.ray_direction(u, v);
        if (const auto hit = intersect_scene(spec, cam.center(), d))
            out.gt_depth.data[i] = static_cast<float>(cam.to_camera(cam.center() + hit->t * d).z());
    });
    return out;
}

SyntheticScene generate_scene(const SceneSpec& spec) {
    SyntheticScene sc;
    sc.spec = spec;
    sc.cameras = make_rig(spec);
    if (spec.perturb_pose) sc.prior_to_world = random_similarity(spec.seed);
    const SimilarityTransform& T = sc.prior_to_world;
    SimilarityTransform inv;
    inv.s = 1.0 / T.s;
    inv.R = T.R.transpose();
    inv.t = -(T.R.transpose() * T.t) / T.s;

    for (std::uint32_t vi = 0; vi < spec.views; ++vi) {
        const Camera& cam = sc.cameras[vi];
        SceneView view = render_scene_view(spec, cam);
        const FloatRaster& gt = view.gt_depth;
        FloatRaster pd(cam.width, cam.height, 1), conf(cam.width, cam.height, 1);
        parallel_for(gt.pixel_count(), [&](std::size_t i) {
            const double u = double(i % cam.width), v = double(i / cam.width);
            const double z = gt.data[i];
            if (!(z > 0.0)) return;
            const Vec3 d = cam.ray_direction(u, v);
            const auto hit = intersect_scene(spec, cam.center(), d);
            if (!hit) return;
            double depth = z, w = 1.0;
            if (spec.noise > 0.0) {
                // Per-pixel uncertainty in [0.5, 1.5]; confidence falls as it grows.
                const double m = 0.5 + fractal_noise(spec.seed + 99, Vec3(u / 8.0, v / 8.0, 3.1 * vi));
                depth = z * std::max(0.05, 1.0 + spec.noise * m * gaussian(spec.seed + 5, vi, i));
                w = 0.5 / m;
            }
            // Priors are least trustworthy at grazing incidence.
            w *= std::abs(hit->normal.dot(d));
            pd.data[i] = static_cast<float>(depth * inv.s);
            conf.data[i] = static_cast<float>(w);
        });
        sc.images.push_back(std::move(view.image));
        sc.gt_depth.push_back(std::move(view.gt_depth));
        DepthPrior prior;
        prior.depth = std::move(pd);
        prior.confidence = std::move(conf);
        prior.camera = spec.perturb_pose ? inv.apply(cam) : cam;
        sc.priors.push_back(std::move(prior));
    }
    return sc;
}

std::string view_stem(const std::string& dir, std::size_t i) {
    std::ostringstream os;
    os << dir << "/view_" << std::setw(3) << std::setfill('0') << i;
    return os.str();
}

void save_scene(const std::string& dir, const SyntheticScene& scene) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream os(dir + "/scene.cfg");
        if (!os) fail_data("cannot write " + dir + "/scene.cfg");
        const Config cfg = scene.spec.to_config();
        for (const auto& [k, v] : cfg.entries()) os << k << '=' << v << '\n';
    }
    std::vector<CameraRecord> cams, prior_cams;
    for (std::size_t i = 0; i < scene.cameras.size(); ++i) {
        cams.push_back({std::int64_t(i), scene.cameras[i]});
        prior_cams.push_back({std::int64_t(i), scene.priors[i].camera});
    }
    write_camera_file(dir + "/cameras.txt", cams);
    write_camera_file(dir + "/prior_cameras.txt", prior_cams);
    for (std::size_t i = 0; i < scene.cameras.size(); ++i) {
        const std::string stem = view_stem(dir, i);
        write_imgf(stem + ".rgb.imgf", scene.images[i]);
        write_imgf(stem + ".gt.imgf", scene.gt_depth[i]);
        save_prior(stem, scene.priors[i]);
    }
}

DepthErrorStats depth_error(std::span<const FloatRaster> rendered, std::span<const FloatRaster> gt) {
    if (rendered.size() != gt.size()) fail_data("depth_error: view counts differ");
    double sum = 0.0;
    DepthErrorStats s;
    for (std::size_t v = 0; v < gt.size(); ++v) {
        if (rendered[v].pixel_count() != gt[v].pixel_count()) fail_data("depth_error: raster sizes differ");
        for (std::size_t i = 0; i < gt[v].data.size(); ++i) {
            const double a = rendered[v].data[i], b = gt[v].data[i];
            if (!(a > 0.0) || !(b > 0.0)) continue;
            sum += std::abs(a - b);
            ++s.pixels;
        }
    }
    s.mean_abs = s.pixels ? sum / double(s.pixels) : 0.0;
    return s;
}

}  // namespace voxforge
