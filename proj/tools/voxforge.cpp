// Copyright 2026 The Voxforge Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line driver for the reconstruction pipeline:
// synth -> init -> fuse -> opacity -> train -> mesh -> eval.

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>

#include "voxforge/fusion.hpp"
#include "voxforge/mesh.hpp"
#include "voxforge/parallel.hpp"
#include "voxforge/pipeline.hpp"
#include "voxforge/refine.hpp"

namespace fs = std::filesystem;
using namespace voxforge;

namespace {

struct Globals {
    std::string config_path;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> threads;
};

Config build_config(const Globals& g) {
    Config cfg = g.config_path.empty() ? Config{} : Config::load(g.config_path);
    for (const auto& kv : g.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0) fail_usage("--set expects key=value, got " + kv);
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (g.seed) {
        cfg.set("seed", std::to_string(*g.seed));
        cfg.set("scene.seed", std::to_string(*g.seed));
    }
    return cfg;
}

std::uint64_t seed_of(const Config& cfg) { return static_cast<std::uint64_t>(cfg.get_int("seed", 0)); }

void write_kv(const std::string& path, const std::vector<std::pair<std::string, std::string>>& kv) {
    std::ofstream os(path);
    if (!os) fail_data("cannot open " + path + " for writing");
    for (const auto& [k, v] : kv) os << k << '=' << v << '\n';
}

std::string num(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

std::vector<std::string> list_svo(const std::string& dir) {
    if (!fs::is_directory(dir)) fail_data("not a directory: " + dir);
    std::vector<std::string> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".svo") out.push_back(e.path().string());
    std::sort(out.begin(), out.end());
    if (out.empty()) fail_data("no .svo files in " + dir);
    return out;
}

RenderSettings render_settings(const Config& cfg) {
    RenderSettings s;
    s.background = Vec3::Constant(cfg.get_double("render.background", 0.0));
    return s;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"voxforge: sparse-voxel surface reconstruction from depth priors"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config_path, "key=value settings file")->check(CLI::ExistingFile);
    app.add_option("--set", g.overrides, "override one setting, key=value");
    app.add_option("--seed", g.seed, "seed for every random stream");
    app.add_option("--threads", g.threads, "worker threads (default: VOXFORGE_THREADS or 1)");

    std::string scene_dir, in_path, out_path, mesh_path, trace_path;
    std::string shape;
    std::optional<std::uint32_t> views, iters;
    std::optional<double> noise;
    bool perturb = false, from_density = false;
    std::optional<std::uint32_t> view_index;

    auto* synth = app.add_subcommand("synth", "generate a synthetic scene with priors");
    synth->add_option("--out", out_path, "output directory")->required();
    synth->add_option("--shape", shape, "sphere, plane or boxes");
    synth->add_option("--views", views, "number of cameras");
    synth->add_option("--noise", noise, "relative prior depth noise");
    synth->add_flag("--perturb-pose", perturb, "express priors in a random similar frame");

    auto* init = app.add_subcommand("init", "LOD unprojection, one octree per view");
    init->add_option("--scene", scene_dir, "scene directory")->required();
    init->add_option("--out", out_path, "output directory")->required();

    auto* fuse_cmd = app.add_subcommand("fuse", "topology-aligned fusion of per-view octrees");
    fuse_cmd->add_option("--in", in_path, "directory of .svo files")->required();
    fuse_cmd->add_option("--out", out_path, "fused octree")->required();

    auto* opacity = app.add_subcommand("opacity", "TSDF-based opacity initialisation");
    opacity->add_option("--scene", scene_dir, "scene directory")->required();
    opacity->add_option("--in", in_path, "fused octree")->required();
    opacity->add_option("--out", out_path, "initialised octree")->required();

    auto* render = app.add_subcommand("render", "render colour, depth, normal and opacity maps");
    render->add_option("--scene", scene_dir, "scene directory")->required();
    render->add_option("--in", in_path, "octree")->required();
    render->add_option("--out", out_path, "output directory")->required();
    render->add_option("--view", view_index, "single view index");

    auto* refine = app.add_subcommand("refine", "multi-view refined depth targets");
    refine->add_option("--scene", scene_dir, "scene directory")->required();
    refine->add_option("--in", in_path, "octree")->required();
    refine->add_option("--out", out_path, "output directory")->required();

    auto* train_cmd = app.add_subcommand("train", "per-scene optimisation");
    train_cmd->add_option("--scene", scene_dir, "scene directory")->required();
    train_cmd->add_option("--in", in_path, "initial octree")->required();
    train_cmd->add_option("--out", out_path, "trained octree")->required();
    train_cmd->add_option("--iters", iters, "iterations");
    train_cmd->add_option("--trace", trace_path, "loss trace file");

    auto* mesh_cmd = app.add_subcommand("mesh", "extract a triangle mesh");
    mesh_cmd->add_option("--scene", scene_dir, "scene directory")->required();
    mesh_cmd->add_option("--in", in_path, "octree")->required();
    mesh_cmd->add_option("--out", out_path, "OBJ file")->required();
    mesh_cmd->add_flag("--from-density", from_density, "triangulate the density field directly");

    auto* eval = app.add_subcommand("eval", "depth error and Chamfer distance against the analytic scene");
    eval->add_option("--scene", scene_dir, "scene directory")->required();
    eval->add_option("--in", in_path, "octree")->required();
    eval->add_option("--mesh", mesh_path, "OBJ mesh to score");
    eval->add_option("--out", out_path, "metrics file (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (g.threads) {
            if (*g.threads == 0) fail_usage("--threads must be positive");
            set_thread_count(*g.threads);
        }
        const Config cfg = build_config(g);

        if (*synth) {
            Config c = cfg;
            if (!shape.empty()) c.set("scene.shape", shape);
            if (views) c.set("scene.views", std::to_string(*views));
            if (noise) c.set("scene.noise", num(*noise));
            if (perturb) c.set("scene.perturb_pose", "1");
            save_scene(out_path, generate_scene(SceneSpec::from_config(c)));
        } else if (*init) {
            const SceneData scene = load_scene(scene_dir);
            const auto trees = init_views(scene, lod_options(cfg, scene.spec.frame()));
            fs::create_directories(out_path);
            for (std::size_t i = 0; i < trees.size(); ++i) write_octree(view_stem(out_path, i) + ".svo", trees[i]);
            const SimilarityTransform T = prior_alignment(scene);
            write_kv(out_path + "/alignment.txt", {{"scale", num(T.s)}});
        } else if (*fuse_cmd) {
            std::vector<VoxelOctree> trees;
            for (const auto& p : list_svo(in_path)) trees.push_back(read_octree(p));
            write_octree(out_path, fuse(trees));
        } else if (*opacity) {
            const SceneData scene = load_scene(scene_dir);
            const VoxelOctree fused = read_octree(in_path);
            const auto priors = aligned_priors(scene);
            write_octree(out_path, predict_opacity(fused, priors, OpacityPipelineOptions::from_config(cfg)));
        } else if (*render) {
            const SceneData scene = load_scene(scene_dir);
            const VoxelOctree tree = read_octree(in_path);
            const RenderIndex index(tree);
            fs::create_directories(out_path);
            for (std::size_t i = 0; i < scene.cameras.size(); ++i) {
                if (view_index && *view_index != i) continue;
                const RenderedView rv = render_view(tree, index, scene.cameras[i], render_settings(cfg));
                const std::string stem = view_stem(out_path, i);
                write_imgf(stem + ".color.imgf", rv.color_raster());
                write_imgf(stem + ".depth.imgf", rv.depth_raster());
                write_imgf(stem + ".normal.imgf", rv.normal_raster());
                write_imgf(stem + ".opacity.imgf", rv.opacity_raster());
                write_ppm(stem + ".color.ppm", rv.color_raster());
            }
            if (view_index && *view_index >= scene.cameras.size()) fail_usage("--view out of range");
        } else if (*refine) {
            const SceneData scene = load_scene(scene_dir);
            const VoxelOctree tree = read_octree(in_path);
            RefineOptions ro = RefineOptions::from_config(cfg);
            ro.seed = seed_of(cfg);
            const auto maps = refresh_targets(tree, train_data(scene), ro, render_settings(cfg), 0);
            fs::create_directories(out_path);
            for (std::size_t i = 0; i < maps.size(); ++i) save_refined(view_stem(out_path, i), maps[i]);
        } else if (*train_cmd) {
            const SceneData scene = load_scene(scene_dir);
            const VoxelOctree tree = read_octree(in_path);
            TrainOptions to = TrainOptions::from_config(cfg);
            to.seed = seed_of(cfg);
            to.refine.seed = to.seed;
            if (iters) to.iters = *iters;
            std::vector<LossReport> trace;
            try {
                VoxelOctree out = train(tree, train_data(scene), to, trace);
                write_octree(out_path, out);
            } catch (...) {
                if (!trace_path.empty()) write_trace(trace_path, trace);
                throw;
            }
            if (!trace_path.empty()) write_trace(trace_path, trace);
        } else if (*mesh_cmd) {
            const SceneData scene = load_scene(scene_dir);
            const VoxelOctree tree = read_octree(in_path);
            MeshOptions mo = MeshOptions::from_config(cfg);
            mo.from_density = from_density;
            write_obj(out_path, extract_mesh(tree, scene.cameras, render_settings(cfg), mo));
        } else if (*eval) {
            const SceneData scene = load_scene(scene_dir);
            const VoxelOctree tree = read_octree(in_path);
            std::vector<std::pair<std::string, std::string>> kv;
            kv.emplace_back("voxels", std::to_string(tree.size()));
            if (!tree.empty()) kv.emplace_back("finest_voxel", num(tree.frame.voxel_size(tree.max_level())));
            if (!scene.gt_depth.empty()) {
                const auto err = depth_error(render_depths(tree, scene.cameras, render_settings(cfg)), scene.gt_depth);
                kv.emplace_back("depth_mae", num(err.mean_abs));
                kv.emplace_back("depth_pixels", std::to_string(err.pixels));
            }
            if (!mesh_path.empty()) {
                const TriangleMesh mesh = read_obj(mesh_path);
                const auto n = static_cast<std::size_t>(cfg.get_int("eval.samples", 20000));
                const auto a = sample_mesh(mesh, n, seed_of(cfg));
                const auto b = sample_surface(scene.spec, n);
                kv.emplace_back("chamfer", a.empty() ? "nan" : num(chamfer_distance(a, b)));
            }
            if (out_path.empty()) {
                for (const auto& [k, v] : kv) std::cout << k << '=' << v << '\n';
            } else {
                write_kv(out_path, kv);
            }
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        switch (e.kind()) {
            case ErrorKind::Usage: return 1;
            case ErrorKind::Data: return 2;
            case ErrorKind::Numerical: return 3;
        }
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
