#include "hdyn/system.hpp"

#include <algorithm>

namespace hdyn {

const char* kind_name(SystemKind k) {
    switch (k) {
        case SystemKind::AttractionRepulsion: return "attraction_repulsion";
        case SystemKind::Gravity: return "gravity";
        case SystemKind::Coulomb: return "coulomb";
        case SystemKind::Boids: return "boids";
        case SystemKind::Wave: return "wave";
        case SystemKind::Rps: return "rps";
        case SystemKind::Signaling: return "signaling";
    }
    return "?";
}

SystemKind kind_from_name(const std::string& name) {
    for (SystemKind k : {SystemKind::AttractionRepulsion, SystemKind::Gravity,
                         SystemKind::Coulomb, SystemKind::Boids, SystemKind::Wave,
                         SystemKind::Rps, SystemKind::Signaling}) {
        if (name == kind_name(k)) return k;
    }
    throw ConfigError("unknown system kind: '" + name + "'");
}

bool is_moving(SystemKind k) {
    return k == SystemKind::AttractionRepulsion || k == SystemKind::Gravity ||
           k == SystemKind::Coulomb || k == SystemKind::Boids;
}

bool is_mesh(SystemKind k) { return k == SystemKind::Wave || k == SystemKind::Rps; }

bool is_second_order(SystemKind k) {
    return k == SystemKind::Gravity || k == SystemKind::Coulomb ||
           k == SystemKind::Boids || k == SystemKind::Wave;
}

int field_arity(SystemKind k) {
    switch (k) {
        case SystemKind::Wave: return 2;   // u, du/dt
        case SystemKind::Rps: return 3;    // u, v, w
        case SystemKind::Signaling: return 1;
        default: return 0;
    }
}

bool rotation_invariant(SystemKind k) { return is_moving(k); }

bool Latents::has(const std::string& name) const {
    return std::find(names.begin(), names.end(), name) != names.end();
}

std::span<const double> Latents::col(const std::string& name) const {
    for (size_t k = 0; k < names.size(); ++k) {
        if (names[k] == name) return values[k];
    }
    throw std::out_of_range("latent column '" + name + "' not present");
}

std::vector<double>& Latents::add(const std::string& name, int n) {
    names.push_back(name);
    values.emplace_back(static_cast<size_t>(n), 0.0);
    return values.back();
}

void SystemConfig::validate() const {
    if (steps <= 0) throw ConfigError("steps must be positive");
    if (series <= 0) throw ConfigError("series must be positive");
    if (dt <= 0.0) throw ConfigError("dt must be positive");
    if (is_mesh(kind)) {
        if (mesh_side < 3) throw ConfigError("mesh kinds need mesh_side >= 3");
    } else {
        if (n <= 1) throw ConfigError("n must be at least 2");
    }
    if (is_moving(kind)) {
        if (!(d_min >= 0.0 && d_min < d_max)) {
            throw ConfigError("interaction band needs 0 <= d_min < d_max");
        }
        if (periodic) {
            if (box <= 0.0) throw ConfigError("periodic runs need box > 0");
            if (d_max >= box / 2.0) {
                throw ConfigError("d_max must be below box/2 for the minimum-image convention");
            }
        }
    }
    if (kind == SystemKind::Signaling) {
        if (!(edge_prob > 0.0 && edge_prob < 1.0)) {
            throw ConfigError("signaling needs edge_prob in (0, 1)");
        }
    }
    int sources = (latents.types.empty() ? 0 : 1) + (latents.ranges.empty() ? 0 : 1) +
                  (latents.patterns.empty() ? 0 : 1);
    if (sources != 1) {
        throw ConfigError("latents need exactly one source: types, ranges, or patterns");
    }
    for (const auto& [name, r] : latents.ranges) {
        if (!(r.first <= r.second)) {
            throw ConfigError("latent range for '" + name + "' is inverted");
        }
    }
    for (const auto& [name, vals] : latents.patterns) {
        if (static_cast<int>(vals.size()) != n_nodes()) {
            throw ConfigError("latent pattern '" + name + "' must list one value per node");
        }
    }
    if (field) {
        if (kind != SystemKind::AttractionRepulsion) {
            throw ConfigError("hidden fields are only supported for attraction_repulsion");
        }
        if (field->n_stationary <= 0) throw ConfigError("hidden field needs n_stationary > 0");
        if (field->image_side < 2) throw ConfigError("hidden field needs image_side >= 2");
        size_t px = static_cast<size_t>(field->image_side) * field->image_side;
        if (field->movie_frames > 0) {
            if (field->movie.size() != px * field->movie_frames) {
                throw ConfigError("hidden field movie has wrong pixel count");
            }
        } else if (field->image.size() != px) {
            throw ConfigError("hidden field image has wrong pixel count");
        }
    }
}

}  // namespace hdyn
