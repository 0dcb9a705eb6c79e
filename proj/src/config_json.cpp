#include "hdyn/config_json.hpp"

#include <algorithm>

namespace hdyn {

using nlohmann::json;

void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed,
                         const std::string& context) {
    if (!obj.is_object()) throw ConfigError(context + " must be a JSON object");
    for (const auto& [key, _] : obj.items()) {
        if (std::find_if(allowed.begin(), allowed.end(),
                         [&](const char* a) { return key == a; }) == allowed.end()) {
            throw ConfigError("unknown key '" + key + "' in " + context);
        }
    }
}

json config_to_json(const SystemConfig& cfg) {
    json j;
    j["version"] = 1;
    j["kind"] = kind_name(cfg.kind);
    j["n"] = cfg.n;
    j["steps"] = cfg.steps;
    j["series"] = cfg.series;
    j["dt"] = cfg.dt;
    j["seed"] = cfg.seed;
    if (is_moving(cfg.kind)) {
        j["neighborhood"] = {{"d_min", cfg.d_min},
                             {"d_max", cfg.d_max},
                             {"periodic", cfg.periodic},
                             {"box", cfg.box}};
    }
    if (cfg.kind == SystemKind::AttractionRepulsion) j["sigma"] = cfg.sigma;
    if (cfg.kind == SystemKind::Rps) j["beta"] = cfg.beta;
    if (is_mesh(cfg.kind)) j["mesh_side"] = cfg.mesh_side;
    if (cfg.kind == SystemKind::Signaling) j["edge_prob"] = cfg.edge_prob;

    json lat;
    if (cfg.latents.is_discrete()) {
        lat["types"] = json::array();
        for (const auto& t : cfg.latents.types) lat["types"].push_back(t);
    } else if (cfg.latents.is_pattern()) {
        json p;
        for (const auto& [k, v] : cfg.latents.patterns) p[k] = v;
        lat["patterns"] = p;
    } else {
        json r;
        for (const auto& [k, v] : cfg.latents.ranges) r[k] = {v.first, v.second};
        lat["ranges"] = r;
    }
    j["latents"] = lat;

    json init;
    init["layout"] = cfg.init.layout;
    init["speed"] = cfg.init.speed;
    init["disk_radius"] = cfg.init.disk_radius;
    init["orbital"] = cfg.init.orbital;
    init["pulses"] = cfg.init.pulses;
    init["pulse_amp"] = cfg.init.pulse_amp;
    init["pulse_width"] = cfg.init.pulse_width;
    init["field_lo"] = cfg.init.field_lo;
    init["field_hi"] = cfg.init.field_hi;
    j["init"] = init;

    if (cfg.field) {
        json f;
        f["n_stationary"] = cfg.field->n_stationary;
        f["image_side"] = cfg.field->image_side;
        f["image"] = cfg.field->image;
        if (cfg.field->movie_frames > 0) {
            f["movie_frames"] = cfg.field->movie_frames;
            f["movie"] = cfg.field->movie;
        }
        j["field"] = f;
    }
    return j;
}

namespace {

double num(const json& j, const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number()) throw ConfigError(std::string("'") + key + "' must be a number");
    return j[key].get<double>();
}

int integer(const json& j, const char* key, int fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number_integer()) throw ConfigError(std::string("'") + key + "' must be an integer");
    return j[key].get<int>();
}

}  // namespace

SystemConfig config_from_json(const json& j) {
    reject_unknown_keys(j,
                        {"version", "kind", "n", "steps", "series", "dt", "seed", "neighborhood",
                         "sigma", "beta", "mesh_side", "edge_prob", "latents", "init", "field"},
                        "config");
    if (!j.contains("version") || !j["version"].is_number_integer()) {
        throw ConfigError("config needs an integer 'version'");
    }
    if (j["version"].get<int>() != 1) {
        throw ConfigError("unsupported config version " + j["version"].dump() + " (expected 1)");
    }
    if (!j.contains("kind")) throw ConfigError("config needs 'kind'");

    SystemConfig cfg;
    cfg.kind = kind_from_name(j["kind"].get<std::string>());
    cfg.n = integer(j, "n", 0);
    cfg.steps = integer(j, "steps", 0);
    cfg.series = integer(j, "series", 1);
    cfg.dt = num(j, "dt", 1.0);
    if (j.contains("seed")) cfg.seed = j["seed"].get<uint64_t>();
    cfg.sigma = num(j, "sigma", cfg.sigma);
    cfg.beta = num(j, "beta", cfg.beta);
    cfg.mesh_side = integer(j, "mesh_side", 0);
    cfg.edge_prob = num(j, "edge_prob", 0.0);

    if (j.contains("neighborhood")) {
        const json& nb = j["neighborhood"];
        reject_unknown_keys(nb, {"d_min", "d_max", "periodic", "box"}, "neighborhood");
        cfg.d_min = num(nb, "d_min", 0.0);
        cfg.d_max = num(nb, "d_max", 0.0);
        if (nb.contains("periodic")) cfg.periodic = nb["periodic"].get<bool>();
        cfg.box = num(nb, "box", 1.0);
    }

    if (!j.contains("latents")) throw ConfigError("config needs 'latents'");
    const json& lat = j["latents"];
    reject_unknown_keys(lat, {"types", "ranges", "patterns"}, "latents");
    if (lat.contains("types")) {
        for (const json& t : lat["types"]) {
            std::map<std::string, double> m;
            for (const auto& [k, v] : t.items()) m[k] = v.get<double>();
            cfg.latents.types.push_back(std::move(m));
        }
    }
    if (lat.contains("ranges")) {
        for (const auto& [k, v] : lat["ranges"].items()) {
            if (!v.is_array() || v.size() != 2) {
                throw ConfigError("latent range '" + k + "' must be [lo, hi]");
            }
            cfg.latents.ranges[k] = {v[0].get<double>(), v[1].get<double>()};
        }
    }
    if (lat.contains("patterns")) {
        for (const auto& [k, v] : lat["patterns"].items()) {
            cfg.latents.patterns[k] = v.get<std::vector<double>>();
        }
    }

    if (j.contains("init")) {
        const json& in = j["init"];
        reject_unknown_keys(in,
                            {"layout", "speed", "disk_radius", "orbital", "pulses", "pulse_amp",
                             "pulse_width", "field_lo", "field_hi"},
                            "init");
        if (in.contains("layout")) cfg.init.layout = in["layout"].get<std::string>();
        cfg.init.speed = num(in, "speed", cfg.init.speed);
        cfg.init.disk_radius = num(in, "disk_radius", cfg.init.disk_radius);
        if (in.contains("orbital")) cfg.init.orbital = in["orbital"].get<bool>();
        cfg.init.pulses = integer(in, "pulses", cfg.init.pulses);
        cfg.init.pulse_amp = num(in, "pulse_amp", cfg.init.pulse_amp);
        cfg.init.pulse_width = num(in, "pulse_width", cfg.init.pulse_width);
        cfg.init.field_lo = num(in, "field_lo", cfg.init.field_lo);
        cfg.init.field_hi = num(in, "field_hi", cfg.init.field_hi);
    }

    if (j.contains("field")) {
        const json& f = j["field"];
        reject_unknown_keys(f, {"n_stationary", "image_side", "image", "movie_frames", "movie"},
                            "field");
        FieldSpec fs;
        fs.n_stationary = integer(f, "n_stationary", 0);
        fs.image_side = integer(f, "image_side", 0);
        if (f.contains("image")) fs.image = f["image"].get<std::vector<double>>();
        fs.movie_frames = integer(f, "movie_frames", 0);
        if (f.contains("movie")) fs.movie = f["movie"].get<std::vector<double>>();
        cfg.field = std::move(fs);
    }
    return cfg;
}

}  // namespace hdyn
