// texmesh command-line front end. Exit codes: 0 success, 1 runtime error,
// 2 configuration or usage error.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "texmesh/config.hpp"
#include "texmesh/io.hpp"
#include "texmesh/isosurface.hpp"
#include "texmesh/metrics.hpp"
#include "texmesh/pipeline.hpp"
#include "texmesh/shading.hpp"
#include "texmesh/tetgrid.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace texmesh;

namespace {

template <class T>
void override_if(const CLI::Option* opt, const T& value, T& target)
{
    if (opt->count() > 0) target = value;
}

void write_json(const fs::path& path, const json& j)
{
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

json read_json_file(const fs::path& path)
{
    try {
        return json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what(), e.byte);
    }
}

void ensure_dir(const fs::path& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

json camera_json(const Camera& c)
{
    return {{"fov", c.fov_y_deg}, {"radius", c.radius}, {"azimuth", c.azimuth},
            {"elevation", c.elevation}, {"width", c.width}, {"height", c.height}};
}

Camera camera_from_json(const json& j)
{
    Camera c;
    c.fov_y_deg = j.at("fov").get<double>();
    c.radius = j.at("radius").get<double>();
    c.azimuth = j.at("azimuth").get<double>();
    c.elevation = j.at("elevation").get<double>();
    c.width = j.at("width").get<int>();
    c.height = j.at("height").get<int>();
    c.validate();
    return c;
}

json topology_json(const SurfaceMesh& mesh)
{
    const auto t = mesh_topology_stats(mesh);
    return {{"vertices", mesh.vertices.size()},
            {"faces", mesh.faces.size()},
            {"euler", t.euler},
            {"boundary_edges", t.boundary_edges},
            {"components", t.components}};
}

/// Analytic shapes selectable by name.
struct ShapeArgs {
    std::string name = "sphere";
    double radius = 0.5;
    double major = 0.45;
    double minor = 0.2;

    void add(CLI::App* app, const char* flag)
    {
        app->add_option(flag, name, "analytic shape: sphere or torus");
        app->add_option("--radius", radius, "sphere radius");
        app->add_option("--major", major, "torus ring radius");
        app->add_option("--minor", minor, "torus tube radius");
    }

    AnalyticShape make() const
    {
        if (name == "sphere") {
            if (!(radius > 0.0 && radius < 1.0)) throw ConfigError("--radius must be in (0,1)");
            return sphere_shape(radius);
        }
        if (name == "torus") {
            if (!(minor > 0.0 && major > minor && major + minor < 1.0))
                throw ConfigError("--major/--minor must satisfy 0 < minor < major and major + minor < 1");
            return torus_shape(major, minor);
        }
        throw ConfigError("shape must be 'sphere' or 'torus', got '" + name + "'");
    }
};

/// Per-vertex colour lookup through barycentrics of the covered triangle.
Image shade_vertex_colors(const GBuffer& gbuf, const SurfaceMesh& mesh, const std::vector<Rgb>& colors)
{
    Image img(gbuf.width, gbuf.height, 3);
    for (int y = 0; y < gbuf.height; ++y)
        for (int x = 0; x < gbuf.width; ++x) {
            const std::size_t i = gbuf.index(x, y);
            if (!gbuf.mask[i]) continue;
            const Face& f = mesh.faces[static_cast<std::size_t>(gbuf.tri[i])];
            const Vec3& b = gbuf.bary[i];
            const Rgb c = colors[f[0]] * b.x + colors[f[1]] * b.y + colors[f[2]] * b.z;
            for (int k = 0; k < 3; ++k) img.at(x, y, k) = c[k];
        }
    return img;
}

std::vector<fs::path> list_meshes(const fs::path& p)
{
    std::vector<fs::path> out;
    if (fs::is_directory(p)) {
        for (const auto& e : fs::directory_iterator(p))
            if (e.is_regular_file() && e.path().extension() == ".obj") out.push_back(e.path());
        std::sort(out.begin(), out.end());
    } else {
        out.push_back(p);
    }
    if (out.empty()) throw IoError("no .obj files in " + p.string());
    return out;
}

Eigen::MatrixXd embeddings_matrix(const Embeddings& e)
{
    Eigen::MatrixXd m(static_cast<Eigen::Index>(e.rows), static_cast<Eigen::Index>(e.cols));
    for (std::size_t r = 0; r < e.rows; ++r)
        for (std::size_t c = 0; c < e.cols; ++c)
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = e.values[r * e.cols + c];
    return m;
}

void save_targets(const fs::path& dir, const std::vector<FitTarget>& targets)
{
    ensure_dir(dir);
    json views = json::array();
    for (std::size_t i = 0; i < targets.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "%03zu", i);
        const std::string rgb = std::string("rgb_") + name + ".pfm", mask = std::string("mask_") + name + ".pfm";
        write_pfm(dir / rgb, targets[i].rgb);
        write_pfm(dir / mask, targets[i].mask);
        views.push_back({{"camera", camera_json(targets[i].camera)}, {"rgb", rgb}, {"mask", mask}});
    }
    write_json(dir / "targets.json", {{"views", views}});
}

std::vector<FitTarget> load_targets(const fs::path& dir)
{
    const json j = read_json_file(dir / "targets.json");
    std::vector<FitTarget> out;
    for (const auto& v : j.at("views")) {
        FitTarget t;
        t.camera = camera_from_json(v.at("camera"));
        t.rgb = read_pfm(dir / v.at("rgb").get<std::string>());
        t.mask = read_pfm(dir / v.at("mask").get<std::string>());
        out.push_back(std::move(t));
    }
    return out;
}

LatentCode gaussian(int n, std::mt19937_64& rng)
{
    std::normal_distribution<double> normal(0.0, 1.0);
    LatentCode z(static_cast<std::size_t>(n));
    for (double& v : z) v = normal(rng);
    return z;
}

/// Mesh and vertex colours of a generator at mapped latents.
std::pair<SurfaceMesh, std::vector<Rgb>> generator_mesh(const ToyGenerator& gen, const LatentCode& w_geo,
                                                        const LatentCode& w_tex)
{
    SurfaceMesh mesh = marching_tetrahedra(gen.grid, generator_field(gen, w_geo));
    ModFCStackEval eval(gen.decoder, concat(w_geo, w_tex));
    std::vector<Rgb> colors;
    colors.reserve(mesh.vertices.size());
    for (const Vec3& p : mesh.vertices) colors.push_back(texture_color(p, gen.triplane, eval));
    return {std::move(mesh), std::move(colors)};
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool is_fit_checkpoint(const TensorBundle& b) { return b.meta.value("model", "") == "fit"; }

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"texmesh: tetrahedral-grid mesh extraction, differentiable rendering, fitting and metrics"};
    app.require_subcommand(1, 1);
    std::string config_path;
    unsigned long long seed = 0;
    app.add_option("--config", config_path, "JSON run config with sections grid, fit, gan, metrics, shading");
    const CLI::Option* seed_opt = app.add_option("--seed", seed, "seed applied to every section");

    // grid-info
    CLI::App* grid_cmd = app.add_subcommand("grid-info", "print tetrahedral grid statistics");
    int grid_res = 0;
    const CLI::Option* grid_res_opt = grid_cmd->add_option("--res", grid_res, "cells per axis");
    ShapeArgs grid_shape;
    bool grid_subdivide = false;
    grid_cmd->add_flag("--subdivide", grid_subdivide, "also subdivide the surface tets of --sdf");
    grid_cmd->add_option("--sdf", grid_shape.name, "analytic SDF used for surface tets: sphere or torus");
    grid_cmd->add_option("--radius", grid_shape.radius);
    grid_cmd->add_option("--major", grid_shape.major);
    grid_cmd->add_option("--minor", grid_shape.minor);

    // extract
    CLI::App* ext_cmd = app.add_subcommand("extract", "marching tetrahedra of an analytic SDF or checkpoint to OBJ");
    ShapeArgs ext_shape;
    ext_shape.add(ext_cmd, "--sdf");
    int ext_res = 0;
    const CLI::Option* ext_res_opt = ext_cmd->add_option("--res", ext_res, "grid resolution for analytic SDFs");
    std::string ext_ckpt, ext_out = "mesh.obj", ext_colors = "vertex";
    int ext_chart = 8;
    ext_cmd->add_option("--checkpoint", ext_ckpt, "fit or generator checkpoint instead of --sdf");
    ext_cmd->add_option("--out", ext_out, "output OBJ path");
    ext_cmd->add_option("--colors", ext_colors, "none, vertex or atlas");
    ext_cmd->add_option("--chart-size", ext_chart, "atlas chart size in pixels");

    // render
    CLI::App* ren_cmd = app.add_subcommand("render", "rasterize and shade a mesh, checkpoint or analytic SDF");
    std::string ren_mesh, ren_ckpt, ren_mode = "color", ren_out = "render.png", ren_pfm, ren_lobes;
    ShapeArgs ren_shape;
    ren_shape.name.clear();
    ren_cmd->add_option("--sdf", ren_shape.name, "analytic shape: sphere or torus");
    ren_cmd->add_option("--sphere-radius", ren_shape.radius, "sphere radius for --sdf sphere");
    ren_cmd->add_option("--major", ren_shape.major, "torus ring radius");
    ren_cmd->add_option("--minor", ren_shape.minor, "torus tube radius");
    int ren_res = 0;
    const CLI::Option* ren_res_opt = ren_cmd->add_option("--res", ren_res, "grid resolution for --sdf");
    Camera ren_cam;
    ren_cam.radius = 1.6;
    ren_cmd->add_option("--mesh", ren_mesh, "OBJ file (vertex colours used when present)");
    ren_cmd->add_option("--checkpoint", ren_ckpt, "fit checkpoint");
    ren_cmd->add_option("--mode", ren_mode, "color, mask, soft-mask, position, normal or sg");
    ren_cmd->add_option("--lobes", ren_lobes, "SG lobes JSON for --mode sg");
    ren_cmd->add_option("--azimuth", ren_cam.azimuth, "radians");
    ren_cmd->add_option("--elevation", ren_cam.elevation, "radians");
    ren_cmd->add_option("--radius", ren_cam.radius, "camera distance");
    ren_cmd->add_option("--fov", ren_cam.fov_y_deg, "vertical field of view, degrees");
    int ren_size = 256;
    ren_cmd->add_option("--size", ren_size, "image width and height");
    double ren_rough = 0.0, ren_metal = 0.0;
    const CLI::Option* ren_rough_opt = ren_cmd->add_option("--roughness", ren_rough);
    const CLI::Option* ren_metal_opt = ren_cmd->add_option("--metallic", ren_metal);
    ren_cmd->add_option("--out", ren_out, "PNG output (8-bit sRGB)");
    ren_cmd->add_option("--pfm", ren_pfm, "optional linear PFM output");

    // fit
    CLI::App* fit_cmd = app.add_subcommand("fit", "multi-view inverse rendering of an analytic shape or saved targets");
    ShapeArgs fit_shape_args;
    fit_shape_args.add(fit_cmd, "--shape");
    std::string fit_targets, fit_save_targets, fit_out = "fit_out";
    double fit_cam_radius = 0.0;
    int fit_target_res = 64;
    fit_cmd->add_option("--targets", fit_targets, "directory written by --save-targets; add --shape to score the result");
    fit_cmd->add_option("--save-targets", fit_save_targets, "write the rendered targets here");
    fit_cmd->add_option("--camera-radius", fit_cam_radius, "default 1.6 for sphere, 2.0 for torus");
    fit_cmd->add_option("--target-res", fit_target_res, "grid resolution of the ground-truth mesh");
    fit_cmd->add_option("--out-dir", fit_out, "output directory");
    int fit_steps = 0, fit_views = 0, fit_size = 0, fit_tet = 0;
    double fit_lr = 0.0;
    std::string fit_init;
    const CLI::Option* fit_steps_opt = fit_cmd->add_option("--steps", fit_steps);
    const CLI::Option* fit_views_opt = fit_cmd->add_option("--views", fit_views);
    const CLI::Option* fit_size_opt = fit_cmd->add_option("--size", fit_size);
    const CLI::Option* fit_tet_opt = fit_cmd->add_option("--tet-res", fit_tet);
    const CLI::Option* fit_lr_opt = fit_cmd->add_option("--lr", fit_lr);
    const CLI::Option* fit_init_opt = fit_cmd->add_option("--init", fit_init, "sphere or visual_hull");

    // gan-toy
    CLI::App* gan_cmd = app.add_subcommand("gan-toy", "train the toy generator on a sphere family");
    std::string gan_out = "gan_out";
    gan_cmd->add_option("--out-dir", gan_out, "output directory");
    int gan_steps = 0, gan_samples = 4;
    double gan_reg = 0.0, gan_r1 = 0.0;
    const CLI::Option* gan_steps_opt = gan_cmd->add_option("--steps", gan_steps);
    const CLI::Option* gan_reg_opt = gan_cmd->add_option("--reg-weight", gan_reg);
    const CLI::Option* gan_r1_opt = gan_cmd->add_option("--r1-weight", gan_r1);
    gan_cmd->add_option("--samples", gan_samples, "number of sample meshes to export");

    // metrics
    CLI::App* met_cmd = app.add_subcommand("metrics", "Chamfer/COV/MMD between mesh sets and Frechet distance of embeddings");
    std::string met_gen, met_ref, met_gen_emb, met_ref_emb, met_out, met_red;
    int met_points = 0;
    met_cmd->add_option("--gen", met_gen, "generated OBJ file or directory");
    met_cmd->add_option("--ref", met_ref, "reference OBJ file or directory");
    met_cmd->add_option("--gen-emb", met_gen_emb, "generated embeddings file");
    met_cmd->add_option("--ref-emb", met_ref_emb, "reference embeddings file");
    const CLI::Option* met_points_opt = met_cmd->add_option("--points", met_points, "surface samples per shape");
    const CLI::Option* met_red_opt = met_cmd->add_option("--reduction", met_red, "mean or sum");
    met_cmd->add_option("--out", met_out, "JSON report path (stdout when omitted)");

    // fit-env
    CLI::App* env_cmd = app.add_subcommand("fit-env", "fit SG lobes to an equirectangular PFM environment");
    std::string env_in, env_out = "lobes.json";
    int env_lobes = 0, env_steps = 0;
    double env_step = 0.0;
    env_cmd->add_option("--env", env_in, "equirectangular PFM")->required();
    const CLI::Option* env_lobes_opt = env_cmd->add_option("--lobes", env_lobes);
    const CLI::Option* env_steps_opt = env_cmd->add_option("--steps", env_steps);
    const CLI::Option* env_step_opt = env_cmd->add_option("--step-size", env_step);
    env_cmd->add_option("--out", env_out, "lobes JSON output");

    // interpolate
    CLI::App* int_cmd = app.add_subcommand("interpolate", "mesh sequence between two latents of a toy generator");
    std::string int_ckpt, int_out = "interp_out";
    int int_frames = 11;
    double int_perturb = 0.0;
    int_cmd->add_option("--checkpoint", int_ckpt, "generator checkpoint from gan-toy")->required();
    int_cmd->add_option("--frames", int_frames, "number of meshes, t evenly spaced in [0,1]");
    int_cmd->add_option("--perturb", int_perturb, "instead of a second latent, perturb the first by this distance");
    int_cmd->add_option("--out-dir", int_out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
        if (seed_opt->count()) {
            cfg.fit.seed = cfg.gan.seed = cfg.metrics.seed = cfg.shading.seed = seed;
        }

        if (grid_cmd->parsed()) {
            override_if(grid_res_opt, grid_res, cfg.grid.res);
            cfg.validate();
            const bool with_sdf = grid_cmd->get_option("--sdf")->count() > 0;
            const AnalyticShape shape = with_sdf ? grid_shape.make() : AnalyticShape{};
            if (grid_subdivide && !with_sdf) throw ConfigError("--subdivide needs --sdf");

            const TetGrid grid = build_regular_grid(cfg.grid.res);
            std::map<std::array<std::uint32_t, 3>, int> faces;
            for (const Tet& t : grid.tets)
                for (int k = 0; k < 4; ++k) {
                    std::array<std::uint32_t, 3> f{t[(k + 1) % 4], t[(k + 2) % 4], t[(k + 3) % 4]};
                    std::sort(f.begin(), f.end());
                    ++faces[f];
                }
            long shared = 0, single = 0, over = 0;
            for (const auto& [f, n] : faces) (n == 2 ? shared : n == 1 ? single : over) += 1;
            json report = {{"resolution", grid.resolution},
                           {"cell_size", 2.0 / grid.resolution},
                           {"vertices", grid.vertex_count()},
                           {"tets", grid.tet_count()},
                           {"edges", grid.edges.size()},
                           {"interior_faces", shared},
                           {"boundary_faces", single},
                           {"conforming", over == 0}};
            if (with_sdf) {
                const GeometryField field = sample_field(grid, shape.sdf);
                const auto st = surface_tets(grid, field);
                report["surface_tets"] = st.size();
                report["sign_flip_edges"] = sign_flip_count(field.sdf, grid.edges);
                if (grid_subdivide) {
                    const auto sub = subdivide(grid, field, st);
                    report["subdivided"] = {{"vertices", sub.grid.vertex_count()},
                                            {"tets", sub.grid.tet_count()},
                                            {"edges", sub.grid.edges.size()}};
                }
            }
            std::cout << report.dump(2) << "\n";
            return 0;
        }

        if (ext_cmd->parsed()) {
            override_if(ext_res_opt, ext_res, cfg.grid.res);
            cfg.validate();
            if (ext_colors != "none" && ext_colors != "vertex" && ext_colors != "atlas")
                throw ConfigError("--colors must be none, vertex or atlas");
            if (ext_chart < 2) throw ConfigError("--chart-size must be >= 2");
            SurfaceMesh mesh;
            TextureQuery texture;
            std::vector<Rgb> colors;
            if (!ext_ckpt.empty()) {
                const TensorBundle b = read_checkpoint(ext_ckpt);
                if (is_fit_checkpoint(b)) {
                    auto state = std::make_shared<FitState>(fit_state_from_checkpoint(b));
                    mesh = fit_mesh(*state);
                    colors = fit_vertex_colors(*state, mesh);
                    auto eval = std::make_shared<ModFCStackEval>(state->decoder, state->latent);
                    texture = [state, eval](const Vec3& p) { return texture_color(p, state->triplane, *eval); };
                } else {
                    ToyGANConfig gcfg;
                    auto gen = std::make_shared<ToyGenerator>(generator_from_checkpoint(b, &gcfg));
                    std::mt19937_64 rng(cfg.gan.seed);
                    const auto w_geo = mapping_network(gaussian(gcfg.latent_dim, rng), gen->map_geo);
                    const auto w_tex = mapping_network(gaussian(gcfg.latent_dim, rng), gen->map_tex);
                    std::tie(mesh, colors) = generator_mesh(*gen, w_geo, w_tex);
                    auto eval = std::make_shared<ModFCStackEval>(gen->decoder, concat(w_geo, w_tex));
                    texture = [gen, eval](const Vec3& p) { return texture_color(p, gen->triplane, *eval); };
                }
            } else {
                const AnalyticShape shape = ext_shape.make();
                mesh = extract_analytic(shape.sdf, cfg.grid.res);
                for (const Vec3& p : mesh.vertices) colors.push_back(shape.color(p));
                texture = shape.color;
            }
            if (ext_colors == "atlas")
                write_obj_atlas(ext_out, mesh, texture, ext_chart);
            else
                write_obj(ext_out, mesh, ext_colors == "vertex" ? &colors : nullptr);
            json report = topology_json(mesh);
            report["path"] = ext_out;
            std::cout << report.dump(2) << "\n";
            return 0;
        }

        if (ren_cmd->parsed()) {
            override_if(ren_rough_opt, ren_rough, cfg.shading.roughness);
            override_if(ren_metal_opt, ren_metal, cfg.shading.metallic);
            override_if(ren_res_opt, ren_res, cfg.grid.res);
            cfg.validate();
            const int sources = !ren_mesh.empty() + !ren_ckpt.empty() + !ren_shape.name.empty();
            if (sources != 1) throw ConfigError("render needs exactly one of --mesh, --checkpoint, --sdf");
            if (ren_size < 1) throw ConfigError("--size must be >= 1");
            const std::vector<std::string> modes{"color", "mask", "soft-mask", "position", "normal", "sg"};
            if (std::find(modes.begin(), modes.end(), ren_mode) == modes.end())
                throw ConfigError("--mode must be one of color, mask, soft-mask, position, normal, sg");
            if (ren_mode == "sg" && ren_lobes.empty()) throw ConfigError("--mode sg needs --lobes");
            ren_cam.width = ren_cam.height = ren_size;
            try {
                ren_cam.validate();
            } catch (const std::invalid_argument& e) {
                throw ConfigError(e.what());
            }
            std::vector<SGLobe> lobes;
            if (!ren_lobes.empty()) lobes = lobes_from_json(read_json_file(ren_lobes));

            SurfaceMesh mesh;
            std::vector<Rgb> colors;
            if (!ren_mesh.empty()) {
                const ObjData obj = read_obj(ren_mesh);
                mesh = to_mesh(obj);
                colors = obj.colors.empty() ? std::vector<Rgb>(mesh.vertices.size(), Rgb{1, 1, 1}) : obj.colors;
            } else if (!ren_ckpt.empty()) {
                const FitState state = fit_state_from_checkpoint(read_checkpoint(ren_ckpt));
                mesh = fit_mesh(state);
                colors = fit_vertex_colors(state, mesh);
            } else {
                const AnalyticShape shape = ren_shape.make();
                mesh = extract_analytic(shape.sdf, cfg.grid.res);
                for (const Vec3& p : mesh.vertices) colors.push_back(shape.color(p));
            }

            const GBuffer gbuf = rasterize(mesh, ren_cam);
            Image img;
            if (ren_mode == "mask") {
                img = Image(gbuf.width, gbuf.height, 1);
                for (std::size_t i = 0; i < gbuf.mask.size(); ++i) img.data[i] = gbuf.mask[i];
            } else if (ren_mode == "soft-mask") {
                img = antialias_silhouette(gbuf, mesh, ren_cam).mask;
            } else if (ren_mode == "position") {
                img = shade_with_texture(gbuf, [](const Vec3& p) { return (p + Vec3(1, 1, 1)) * 0.5; });
            } else if (ren_mode == "normal") {
                const auto n = gbuffer_normals(gbuf, mesh, mesh_normals(mesh));
                img = Image(gbuf.width, gbuf.height, 3);
                for (std::size_t i = 0; i < n.size(); ++i)
                    if (gbuf.mask[i])
                        for (int k = 0; k < 3; ++k) img.data[3 * i + k] = 0.5 * (n[i][k] + 1.0);
            } else if (ren_mode == "sg") {
                const Image base = shade_vertex_colors(gbuf, mesh, colors);
                ShadingInputs in;
                in.gbuf = &gbuf;
                in.normal = gbuffer_normals(gbuf, mesh, mesh_normals(mesh));
                in.reflectance.resize(gbuf.mask.size());
                for (std::size_t i = 0; i < in.reflectance.size(); ++i) {
                    in.reflectance[i].base_color = {base.data[3 * i], base.data[3 * i + 1], base.data[3 * i + 2]};
                    in.reflectance[i].roughness = cfg.shading.roughness;
                    in.reflectance[i].metallic = cfg.shading.metallic;
                }
                img = shade_sg(in, lobes, ren_cam);
            } else {
                img = shade_vertex_colors(gbuf, mesh, colors);
            }
            write_png(ren_out, to_srgb8(img));
            if (!ren_pfm.empty()) {
                if (img.channels == 1 || img.channels == 3)
                    write_pfm(ren_pfm, img);
            }
            std::cout << json{{"path", ren_out}, {"coverage", gbuf.coverage()}, {"faces", mesh.faces.size()}}.dump(2)
                      << "\n";
            return 0;
        }

        if (fit_cmd->parsed()) {
            override_if(fit_steps_opt, fit_steps, cfg.fit.steps);
            override_if(fit_views_opt, fit_views, cfg.fit.views);
            override_if(fit_size_opt, fit_size, cfg.fit.image_size);
            override_if(fit_tet_opt, fit_tet, cfg.fit.tet_res);
            override_if(fit_lr_opt, fit_lr, cfg.fit.adam.lr);
            override_if(fit_init_opt, fit_init, cfg.fit.init);
            cfg.validate();
            if (fit_target_res < 2) throw ConfigError("--target-res must be >= 2");
            const bool analytic = fit_targets.empty();
            // With saved targets, an explicit --shape is the ground truth for the IoU report.
            const bool scored = analytic || fit_cmd->count("--shape") > 0;
            const AnalyticShape shape = scored ? fit_shape_args.make() : AnalyticShape{};
            if (fit_cam_radius == 0.0) fit_cam_radius = fit_shape_args.name == "torus" ? 2.0 : 1.6;
            if (!(fit_cam_radius > 0.0)) throw ConfigError("--camera-radius must be positive");

            const auto t0 = std::chrono::steady_clock::now();
            std::vector<FitTarget> targets;
            if (analytic)
                targets = render_targets(shape, fibonacci_cameras(cfg.fit.views, fit_cam_radius, cfg.fit.image_size),
                                         fit_target_res);
            else
                targets = load_targets(fit_targets);
            if (!fit_save_targets.empty()) save_targets(fit_save_targets, targets);

            const FitResult res = fit_shape(targets, cfg.fit);
            ensure_dir(fit_out);
            const fs::path out(fit_out);
            write_checkpoint(out / "checkpoint.bin", fit_checkpoint(res.state));
            write_trace_csv(out / "trace.csv", fit_trace(res));
            const SurfaceMesh mesh = fit_mesh(res.state);
            const auto colors = fit_vertex_colors(res.state, mesh);
            write_obj(out / "mesh.obj", mesh, &colors);

            const FitTerms last = fit_objective(res.state, targets, cfg.fit, nullptr);
            json report = {{"steps", cfg.fit.steps},
                           {"views", targets.size()},
                           {"initial_loss", res.history.empty() ? last.total : res.history.front().total},
                           {"final",
                            {{"total", last.total}, {"mask", last.mask}, {"rgb", last.rgb}, {"reg", last.reg}}},
                           {"mesh", topology_json(mesh)},
                           {"config", to_json(cfg.fit)}};
            if (scored) {
                const auto truth = voxelize_sdf(shape.sdf, 64);
                report["voxel_iou"] = voxel_iou(voxelize_mesh(mesh, 64), truth);
            }
            report["seconds"] = seconds_since(t0);
            write_json(out / "report.json", report);
            std::cout << report.dump(2) << "\n";
            return 0;
        }

        if (gan_cmd->parsed()) {
            override_if(gan_steps_opt, gan_steps, cfg.gan.steps);
            override_if(gan_reg_opt, gan_reg, cfg.gan.reg_weight);
            override_if(gan_r1_opt, gan_r1, cfg.gan.r1_weight);
            cfg.validate();
            if (gan_samples < 0) throw ConfigError("--samples must be >= 0");

            const auto t0 = std::chrono::steady_clock::now();
            const ToyGANResult res = toy_gan_train(cfg.gan);
            ensure_dir(gan_out);
            const fs::path out(gan_out);
            write_trace_csv(out / "trace.csv", gan_trace(res));
            write_checkpoint(out / "generator.bin", gan_checkpoint(res.generator, cfg.gan));
            std::mt19937_64 rng(cfg.gan.seed + 1);
            for (int i = 0; i < gan_samples; ++i) {
                const auto w_geo = mapping_network(gaussian(cfg.gan.latent_dim, rng), res.generator.map_geo);
                const auto w_tex = mapping_network(gaussian(cfg.gan.latent_dim, rng), res.generator.map_tex);
                const auto [mesh, colors] = generator_mesh(res.generator, w_geo, w_tex);
                char name[32];
                std::snprintf(name, sizeof name, "sample_%02d.obj", i);
                write_obj(out / name, mesh, &colors);
            }
            bool finite = true;
            for (const auto& h : res.history)
                for (double v : {h.d_rgb, h.d_mask, h.g_rgb, h.g_mask, h.reg, h.r1_rgb, h.r1_mask})
                    finite = finite && std::isfinite(v);
            json report = {{"steps", res.history.size()}, {"finite", finite}, {"config", to_json(cfg.gan)}};
            if (!res.history.empty()) {
                const auto& a = res.history.front();
                const auto& b = res.history.back();
                report["reg_initial"] = a.reg;
                report["reg_final"] = b.reg;
                report["final"] = {{"d_rgb", b.d_rgb}, {"d_mask", b.d_mask}, {"g_rgb", b.g_rgb}, {"g_mask", b.g_mask}};
            }
            report["seconds"] = seconds_since(t0);
            write_json(out / "report.json", report);
            std::cout << report.dump(2) << "\n";
            return 0;
        }

        if (met_cmd->parsed()) {
            override_if(met_points_opt, met_points, cfg.metrics.points);
            if (met_red_opt->count()) {
                if (met_red == "mean")
                    cfg.metrics.reduction = ChamferReduction::Mean;
                else if (met_red == "sum")
                    cfg.metrics.reduction = ChamferReduction::Sum;
                else
                    throw ConfigError("--reduction must be mean or sum");
            }
            cfg.validate();
            const bool meshes = !met_gen.empty() || !met_ref.empty();
            const bool emb = !met_gen_emb.empty() || !met_ref_emb.empty();
            if (meshes && (met_gen.empty() || met_ref.empty())) throw ConfigError("--gen and --ref go together");
            if (emb && (met_gen_emb.empty() || met_ref_emb.empty()))
                throw ConfigError("--gen-emb and --ref-emb go together");
            if (!meshes && !emb) throw ConfigError("metrics needs --gen/--ref or --gen-emb/--ref-emb");

            json report = json::object();
            if (meshes) {
                // Shape i of either set is sampled with seed + i, so identical
                // sets give identical clouds.
                auto sample_set = [&](const std::string& p, json& names) {
                    std::vector<PointCloud> clouds;
                    const auto files = list_meshes(p);
                    for (std::size_t i = 0; i < files.size(); ++i) {
                        std::mt19937_64 rng(cfg.metrics.seed + i);
                        clouds.push_back(sample_surface_points(to_mesh(read_obj(files[i])),
                                                               static_cast<std::size_t>(cfg.metrics.points), rng));
                        names.push_back(files[i].filename().string());
                    }
                    return clouds;
                };
                json gen_names = json::array(), ref_names = json::array();
                const auto gen = sample_set(met_gen, gen_names);
                const auto ref = sample_set(met_ref, ref_names);
                const DistanceMatrix d = pairwise_chamfer(gen, ref, cfg.metrics.reduction);
                report["gen"] = gen_names;
                report["ref"] = ref_names;
                report["points"] = cfg.metrics.points;
                report["reduction"] = cfg.metrics.reduction == ChamferReduction::Mean ? "mean" : "sum";
                report["chamfer"] = d;
                report["cov"] = coverage(d);
                report["mmd"] = mmd(d);
            }
            if (emb) {
                const auto g = embedding_stats(embeddings_matrix(read_embeddings(met_gen_emb)));
                const auto r = embedding_stats(embeddings_matrix(read_embeddings(met_ref_emb)));
                report["frechet"] = frechet_distance(g, r);
            }
            if (met_out.empty())
                std::cout << report.dump(2) << "\n";
            else
                write_json(met_out, report);
            return 0;
        }

        if (env_cmd->parsed()) {
            override_if(env_lobes_opt, env_lobes, cfg.shading.lobes);
            override_if(env_steps_opt, env_steps, cfg.shading.steps);
            override_if(env_step_opt, env_step, cfg.shading.step_size);
            cfg.validate();
            EnvironmentMap env{read_pfm(env_in)};
            if (env.radiance.channels != 3) throw std::runtime_error("environment map must have 3 channels");
            SGFitOptions opts;
            opts.lobes = cfg.shading.lobes;
            opts.steps = cfg.shading.steps;
            opts.step_size = cfg.shading.step_size;
            opts.seed = cfg.shading.seed;
            const SGFitResult res = fit_sg_environment(env, opts);
            write_json(env_out, lobes_to_json(res.lobes));
            std::cout << json{{"lobes", res.lobes.size()}, {"loss", res.loss}, {"path", env_out}}.dump(2) << "\n";
            return 0;
        }

        if (int_cmd->parsed()) {
            cfg.validate();
            if (int_frames < 2) throw ConfigError("--frames must be >= 2");
            if (!(int_perturb >= 0.0)) throw ConfigError("--perturb must be >= 0");
            ToyGANConfig gcfg;
            const ToyGenerator gen = generator_from_checkpoint(read_checkpoint(int_ckpt), &gcfg);
            std::mt19937_64 rng(cfg.gan.seed);
            const auto wg_a = mapping_network(gaussian(gcfg.latent_dim, rng), gen.map_geo);
            const auto wt_a = mapping_network(gaussian(gcfg.latent_dim, rng), gen.map_tex);
            LatentCode wg_b, wt_b;
            if (int_perturb > 0.0) {
                wg_b = perturb_latent(wg_a, int_perturb, rng);
                wt_b = wt_a;
            } else {
                wg_b = mapping_network(gaussian(gcfg.latent_dim, rng), gen.map_geo);
                wt_b = mapping_network(gaussian(gcfg.latent_dim, rng), gen.map_tex);
            }
            ensure_dir(int_out);
            const fs::path out(int_out);
            json frames = json::array();
            PointCloud prev;
            for (int f = 0; f < int_frames; ++f) {
                const double t = static_cast<double>(f) / (int_frames - 1);
                const auto [mesh, colors] =
                    generator_mesh(gen, interpolate_latents(wg_a, wg_b, t), interpolate_latents(wt_a, wt_b, t));
                char name[32];
                std::snprintf(name, sizeof name, "frame_%03d.obj", f);
                write_obj(out / name, mesh, &colors);
                json entry = {{"t", t}, {"path", name}, {"faces", mesh.faces.size()}};
                if (!mesh.empty()) {
                    std::mt19937_64 srng(cfg.metrics.seed);
                    PointCloud cloud = sample_surface_points(mesh, 2048, srng);
                    if (!prev.empty()) entry["chamfer_to_previous"] = chamfer(prev, cloud);
                    prev = std::move(cloud);
                }
                frames.push_back(entry);
            }
            write_json(out / "report.json", {{"frames", frames}});
            std::cout << json{{"frames", frames}}.dump(2) << "\n";
            return 0;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
