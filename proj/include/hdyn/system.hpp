#pragma once
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hdyn/graph.hpp"
#include "hdyn/vec2.hpp"

namespace hdyn {

enum class SystemKind {
    AttractionRepulsion,
    Gravity,
    Coulomb,
    Boids,
    Wave,
    Rps,
    Signaling,
};

const char* kind_name(SystemKind k);
SystemKind kind_from_name(const std::string& name);

// Moving-particle kinds vs. lattice fields vs. a fixed network.
bool is_moving(SystemKind k);
bool is_mesh(SystemKind k);
// Second-order kinds integrate accelerations semi-implicitly.
bool is_second_order(SystemKind k);
// Number of scalar field channels stored per node per frame (0 for moving kinds).
int field_arity(SystemKind k);
// Kinds whose dynamics are invariant under global rotation (eligible for
// rotation augmentation during training).
bool rotation_invariant(SystemKind k);

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct SimulationDiverged : std::runtime_error {
    SimulationDiverged(const std::string& msg, int step_) : std::runtime_error(msg), step(step_) {}
    int step;
};

// Ground-truth per-node parameters. Columns are role-named ("a", "m", "q", ...);
// `type` carries the generating type id for discrete mixtures (-1 otherwise).
struct Latents {
    std::vector<int32_t> type;
    std::vector<std::string> names;
    std::vector<std::vector<double>> values;  // values[k][i], aligned with names[k]

    int n() const { return type.empty() ? (values.empty() ? 0 : static_cast<int>(values[0].size())) : static_cast<int>(type.size()); }
    bool has(const std::string& name) const;
    std::span<const double> col(const std::string& name) const;
    std::vector<double>& add(const std::string& name, int n);
};

// How to draw per-node parameters. Exactly one source must be filled in:
// a discrete mixture of named parameter sets, independent uniforms over named
// ranges, or explicit per-node values ("patterns", used by the lattice kinds
// where the parameter varies over space).
struct LatentSpec {
    std::vector<std::map<std::string, double>> types;
    std::map<std::string, std::pair<double, double>> ranges;
    std::map<std::string, std::vector<double>> patterns;

    bool is_discrete() const { return !types.empty(); }
    bool is_pattern() const { return types.empty() && !patterns.empty(); }
    bool is_continuous() const { return types.empty() && patterns.empty(); }
};

// Hidden multiplicative field for stationary-emitter experiments: stationary
// nodes scattered uniformly emit messages scaled by b(x) sampled from a static
// image or a short movie (frame chosen by simulation time, bilinear in space).
struct FieldSpec {
    int n_stationary = 0;
    int image_side = 0;
    std::vector<double> image;   // image_side^2 row-major values in [0, 1]
    int movie_frames = 0;        // 0 = static image
    std::vector<double> movie;   // movie_frames * image_side^2 when > 0
};

struct InitSpec {
    std::string layout = "uniform";  // "uniform" | "disk"
    double speed = 0.0;              // initial speed scale for second-order kinds
    double disk_radius = 0.35;
    bool orbital = false;            // tangential initial velocities (gravity disks)
    int pulses = 3;                  // wave: Gaussian bumps in the initial field
    double pulse_amp = 1.0;
    double pulse_width = 2.0;        // in lattice units
    double field_lo = 0.0;           // uniform field init range (rps, signaling)
    double field_hi = 1.0;
};

struct SystemConfig {
    SystemKind kind = SystemKind::AttractionRepulsion;
    int n = 0;          // particles / network nodes; mesh kinds use mesh_side^2
    int steps = 0;      // integration steps; a run records steps + 1 frames
    int series = 1;     // independent runs sharing latents
    double dt = 1.0;
    uint64_t seed = 0;

    double d_min = 0.0;  // interaction band (moving kinds)
    double d_max = 0.0;
    bool periodic = false;
    double box = 1.0;

    double sigma = 0.005;  // attraction-repulsion kernel width
    double beta = 1.0;     // rps cyclic dominance coefficient
    int mesh_side = 0;
    double edge_prob = 0.0;  // signaling Erdos-Renyi edge probability

    LatentSpec latents;
    InitSpec init;
    std::optional<FieldSpec> field;

    int n_nodes() const { return is_mesh(kind) ? mesh_side * mesh_side : n; }
    RadiusSpec radius() const { return {d_min, d_max, periodic, box}; }
    void validate() const;  // throws ConfigError
};

// One recorded time point. Moving kinds fill pos/vel; field kinds fill
// `field` with field_arity(kind) interleaved channels per node.
struct Frame {
    std::vector<Vec2> pos;
    std::vector<Vec2> vel;
    std::vector<double> field;
};

struct Trajectory {
    SystemConfig config;
    Latents latents;
    std::vector<std::vector<Frame>> series;  // [series][frame]
    std::vector<double> conn;                // n*n symmetric coupling (signaling)
    std::vector<Vec2> stationary_pos;        // hidden-field emitters
    std::vector<double> stationary_b;        // their field values (static runs)
    GridMesh mesh;                           // populated for mesh kinds

    int n_frames() const { return series.empty() ? 0 : static_cast<int>(series[0].size()); }
};

}  // namespace hdyn
