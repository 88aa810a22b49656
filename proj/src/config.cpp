#include "texmesh/config.hpp"

#include <climits>
#include <fstream>
#include <set>

namespace texmesh {

using nlohmann::json;

namespace {

/// Reads typed keys out of one JSON object and remembers which were used.
class Section {
public:
    Section(const json& j, std::string name) : j_(j), name_(std::move(name))
    {
        if (!j_.is_object()) throw ConfigError(name_ + " must be a JSON object");
    }

    void get(const char* key, int& out)
    {
        if (const json* v = find(key)) {
            if (!v->is_number_integer()) bad(key, "an integer");
            const auto x = v->get<long long>();
            if (x < INT_MIN || x > INT_MAX) bad(key, "a 32-bit integer");
            out = static_cast<int>(x);
        }
    }
    void get(const char* key, unsigned long long& out)
    {
        if (const json* v = find(key)) {
            if (!v->is_number_unsigned()) bad(key, "a nonnegative integer");
            out = v->get<unsigned long long>();
        }
    }
    void get(const char* key, double& out)
    {
        if (const json* v = find(key)) {
            if (!v->is_number()) bad(key, "a number");
            out = v->get<double>();
        }
    }
    void get(const char* key, bool& out)
    {
        if (const json* v = find(key)) {
            if (!v->is_boolean()) bad(key, "a boolean");
            out = v->get<bool>();
        }
    }
    void get(const char* key, std::string& out)
    {
        if (const json* v = find(key)) {
            if (!v->is_string()) bad(key, "a string");
            out = v->get<std::string>();
        }
    }
    const json* child(const char* key) { return find(key); }

    void finish() const
    {
        for (const auto& item : j_.items())
            if (!seen_.count(item.key())) throw ConfigError("unknown key " + name_ + "." + item.key());
    }

private:
    const json& j_;
    std::string name_;
    std::set<std::string> seen_;

    const json* find(const char* key)
    {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }
    [[noreturn]] void bad(const char* key, const char* what) const
    {
        throw ConfigError(name_ + "." + key + " must be " + what);
    }
};

template <class F>
void rethrow_as_config(F&& f)
{
    try {
        f();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

void read_adam(Section& s, AdamConfig& a)
{
    s.get("lr", a.lr);
    s.get("beta1", a.beta1);
    s.get("beta2", a.beta2);
    s.get("eps", a.eps);
}

void read_fit(const json& j, FitConfig& c)
{
    Section s(j, "fit");
    s.get("views", c.views);
    s.get("image_size", c.image_size);
    s.get("steps", c.steps);
    read_adam(s, c.adam);
    s.get("mask_weight", c.mask_weight);
    s.get("rgb_weight", c.rgb_weight);
    s.get("reg_weight", c.reg_weight);
    s.get("tet_res", c.tet_res);
    s.get("triplane_res", c.triplane_res);
    s.get("triplane_channels", c.triplane_channels);
    s.get("decoder_hidden", c.decoder_hidden);
    s.get("latent_dim", c.latent_dim);
    s.get("init", c.init);
    s.get("init_radius", c.init_radius);
    s.get("freeze_geometry", c.freeze_geometry);
    s.get("freeze_texture", c.freeze_texture);
    s.get("seed", c.seed);
    s.finish();
}

void read_gan(const json& j, ToyGANConfig& c)
{
    Section s(j, "gan");
    s.get("latent_dim", c.latent_dim);
    s.get("w_dim", c.w_dim);
    s.get("batch", c.batch);
    s.get("steps", c.steps);
    s.get("image_size", c.image_size);
    s.get("tet_res", c.tet_res);
    s.get("geo_hidden", c.geo_hidden);
    s.get("triplane_res", c.triplane_res);
    s.get("triplane_channels", c.triplane_channels);
    s.get("decoder_hidden", c.decoder_hidden);
    s.get("disc_pool", c.disc_pool);
    s.get("disc_hidden", c.disc_hidden);
    s.get("r1_weight", c.r1_weight);
    s.get("r1_interval", c.r1_interval);
    s.get("reg_weight", c.reg_weight);
    read_adam(s, c.adam);
    s.get("prior_sharpness", c.prior_sharpness);
    s.get("field_scale", c.field_scale);
    s.get("radius_min", c.radius_min);
    s.get("radius_max", c.radius_max);
    s.get("seed", c.seed);
    if (const json* cam = s.child("cameras")) {
        Section cs(*cam, "gan.cameras");
        cs.get("azimuth_min", c.cameras.azimuth_min);
        cs.get("azimuth_max", c.cameras.azimuth_max);
        cs.get("elevation_min", c.cameras.elevation_min);
        cs.get("elevation_max", c.cameras.elevation_max);
        cs.get("fov", c.cameras.fov_y_deg);
        cs.get("radius", c.cameras.radius);
        cs.finish();
    }
    c.cameras.width = c.cameras.height = c.image_size;
    s.finish();
}

json adam_json(const AdamConfig& a) { return {{"lr", a.lr}, {"beta1", a.beta1}, {"beta2", a.beta2}, {"eps", a.eps}}; }

Vec3 vec3_from(const json& j, const std::string& what)
{
    if (!j.is_array() || j.size() != 3) throw ConfigError(what + " must be an array of 3 numbers");
    Vec3 v;
    for (int k = 0; k < 3; ++k) {
        if (!j[k].is_number()) throw ConfigError(what + " must be an array of 3 numbers");
        v[k] = j[k].get<double>();
    }
    return v;
}

} // namespace

void GridConfig::validate() const
{
    if (res < 1) throw ConfigError("grid.res must be >= 1");
}

void MetricsConfig::validate() const
{
    if (points < 1) throw ConfigError("metrics.points must be >= 1");
}

void ShadingConfig::validate() const
{
    if (lobes < 1) throw ConfigError("shading.lobes must be >= 1");
    if (steps < 0) throw ConfigError("shading.steps must be >= 0");
    if (!(step_size > 0.0)) throw ConfigError("shading.step_size must be positive");
    if (!(roughness >= 0.0 && roughness <= 1.0)) throw ConfigError("shading.roughness must be in [0,1]");
    if (!(metallic >= 0.0 && metallic <= 1.0)) throw ConfigError("shading.metallic must be in [0,1]");
}

void RunConfig::validate() const
{
    grid.validate();
    metrics.validate();
    shading.validate();
    rethrow_as_config([&] { fit.validate(); });
    rethrow_as_config([&] { gan.validate(); });
}

RunConfig parse_run_config(const json& j)
{
    RunConfig c;
    Section root(j, "config");
    if (const json* g = root.child("grid")) {
        Section s(*g, "grid");
        s.get("res", c.grid.res);
        s.finish();
    }
    if (const json* f = root.child("fit")) read_fit(*f, c.fit);
    if (const json* g = root.child("gan")) read_gan(*g, c.gan);
    if (const json* m = root.child("metrics")) {
        Section s(*m, "metrics");
        s.get("points", c.metrics.points);
        std::string red = c.metrics.reduction == ChamferReduction::Mean ? "mean" : "sum";
        s.get("reduction", red);
        if (red == "mean")
            c.metrics.reduction = ChamferReduction::Mean;
        else if (red == "sum")
            c.metrics.reduction = ChamferReduction::Sum;
        else
            throw ConfigError("metrics.reduction must be 'mean' or 'sum'");
        s.get("seed", c.metrics.seed);
        s.finish();
    }
    if (const json* sh = root.child("shading")) {
        Section s(*sh, "shading");
        s.get("lobes", c.shading.lobes);
        s.get("steps", c.shading.steps);
        s.get("step_size", c.shading.step_size);
        s.get("roughness", c.shading.roughness);
        s.get("metallic", c.shading.metallic);
        s.get("seed", c.shading.seed);
        s.finish();
    }
    root.finish();
    c.validate();
    return c;
}

RunConfig load_run_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
    }
    return parse_run_config(j);
}

json to_json(const FitConfig& c)
{
    json j = {{"views", c.views},
              {"image_size", c.image_size},
              {"steps", c.steps},
              {"mask_weight", c.mask_weight},
              {"rgb_weight", c.rgb_weight},
              {"reg_weight", c.reg_weight},
              {"tet_res", c.tet_res},
              {"triplane_res", c.triplane_res},
              {"triplane_channels", c.triplane_channels},
              {"decoder_hidden", c.decoder_hidden},
              {"latent_dim", c.latent_dim},
              {"init", c.init},
              {"init_radius", c.init_radius},
              {"freeze_geometry", c.freeze_geometry},
              {"freeze_texture", c.freeze_texture},
              {"seed", c.seed}};
    j.update(adam_json(c.adam));
    return j;
}

json to_json(const ToyGANConfig& c)
{
    json j = {{"latent_dim", c.latent_dim},
              {"w_dim", c.w_dim},
              {"batch", c.batch},
              {"steps", c.steps},
              {"image_size", c.image_size},
              {"tet_res", c.tet_res},
              {"geo_hidden", c.geo_hidden},
              {"triplane_res", c.triplane_res},
              {"triplane_channels", c.triplane_channels},
              {"decoder_hidden", c.decoder_hidden},
              {"disc_pool", c.disc_pool},
              {"disc_hidden", c.disc_hidden},
              {"r1_weight", c.r1_weight},
              {"r1_interval", c.r1_interval},
              {"reg_weight", c.reg_weight},
              {"prior_sharpness", c.prior_sharpness},
              {"field_scale", c.field_scale},
              {"radius_min", c.radius_min},
              {"radius_max", c.radius_max},
              {"seed", c.seed},
              {"cameras",
               {{"azimuth_min", c.cameras.azimuth_min},
                {"azimuth_max", c.cameras.azimuth_max},
                {"elevation_min", c.cameras.elevation_min},
                {"elevation_max", c.cameras.elevation_max},
                {"fov", c.cameras.fov_y_deg},
                {"radius", c.cameras.radius}}}};
    j.update(adam_json(c.adam));
    return j;
}

json to_json(const RunConfig& c)
{
    return {{"grid", {{"res", c.grid.res}}},
            {"fit", to_json(c.fit)},
            {"gan", to_json(c.gan)},
            {"metrics",
             {{"points", c.metrics.points},
              {"reduction", c.metrics.reduction == ChamferReduction::Mean ? "mean" : "sum"},
              {"seed", c.metrics.seed}}},
            {"shading",
             {{"lobes", c.shading.lobes},
              {"steps", c.shading.steps},
              {"step_size", c.shading.step_size},
              {"roughness", c.shading.roughness},
              {"metallic", c.shading.metallic},
              {"seed", c.shading.seed}}}};
}

FitConfig fit_config_from_json(const json& j)
{
    FitConfig c;
    read_fit(j, c);
    rethrow_as_config([&] { c.validate(); });
    return c;
}

ToyGANConfig gan_config_from_json(const json& j)
{
    ToyGANConfig c;
    read_gan(j, c);
    rethrow_as_config([&] { c.validate(); });
    return c;
}

json lobes_to_json(const std::vector<SGLobe>& lobes)
{
    json arr = json::array();
    for (const auto& l : lobes)
        arr.push_back({{"axis", {l.axis.x, l.axis.y, l.axis.z}},
                       {"sharpness", l.sharpness},
                       {"amplitude", {l.amplitude.x, l.amplitude.y, l.amplitude.z}}});
    return arr;
}

std::vector<SGLobe> lobes_from_json(const json& j)
{
    if (!j.is_array()) throw ConfigError("lobes must be a JSON array");
    std::vector<SGLobe> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string name = "lobes[" + std::to_string(i) + "]";
        Section s(j[i], name);
        SGLobe l;
        const json* axis = s.child("axis");
        const json* amp = s.child("amplitude");
        if (!axis || !amp || !j[i].contains("sharpness")) throw ConfigError(name + " needs axis, sharpness, amplitude");
        l.axis = vec3_from(*axis, name + ".axis");
        s.get("sharpness", l.sharpness);
        l.amplitude = vec3_from(*amp, name + ".amplitude");
        s.finish();
        if (!(norm(l.axis) > 0.0)) throw ConfigError(name + ".axis must be nonzero");
        l.axis = normalized(l.axis);
        if (!(l.sharpness > 0.0)) throw ConfigError(name + ".sharpness must be positive");
        if (!(l.amplitude.x >= 0.0 && l.amplitude.y >= 0.0 && l.amplitude.z >= 0.0))
            throw ConfigError(name + ".amplitude must be nonnegative");
        out.push_back(l);
    }
    return out;
}

TensorBundle gan_checkpoint(const ToyGenerator& gen, const ToyGANConfig& cfg)
{
    TensorBundle b;
    b.meta["model"] = "toy_generator";
    b.meta["config"] = to_json(cfg);
    ToyGenerator copy = gen;
    auto tensors = copy.tensors();
    for (std::size_t i = 0; i < tensors.size(); ++i)
        b.put("t." + std::to_string(i), {tensors[i]->size()}, *tensors[i]);
    return b;
}

ToyGenerator generator_from_checkpoint(const TensorBundle& b, ToyGANConfig* cfg_out)
{
    if (b.meta.value("model", "") != "toy_generator") throw std::invalid_argument("checkpoint is not a toy generator");
    if (!b.meta.contains("config")) throw std::invalid_argument("generator checkpoint has no config");
    const ToyGANConfig cfg = gan_config_from_json(b.meta.at("config"));
    std::mt19937_64 rng(cfg.seed);
    ToyGenerator gen = make_toy_generator(cfg, rng);
    auto tensors = gen.tensors();
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        const auto& t = b.get("t." + std::to_string(i)).values;
        if (t.size() != tensors[i]->size()) throw std::invalid_argument("generator checkpoint tensor size mismatch");
        *tensors[i] = t;
    }
    if (cfg_out) *cfg_out = cfg;
    return gen;
}

} // namespace texmesh
