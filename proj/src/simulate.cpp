#include "hdyn/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "hdyn/integrate.hpp"
#include "hdyn/rng.hpp"

namespace hdyn {

double ar_kernel(double d, double w, double sigma) {
    return std::exp(-std::pow(d, 2.0 * w) / (2.0 * sigma * sigma));
}

Vec2 ar_pair_vel(double a, double b, double c, double dd, double sigma,
                 const Vec2& dx, double d) {
    double coeff = a * ar_kernel(d, b, sigma) - c * ar_kernel(d, dd, sigma);
    return dx * (coeff / d);
}

Vec2 gravity_pair_accel(double m_send, const Vec2& dx, double d) {
    return dx * (m_send / (d * d * d));
}

Vec2 coulomb_pair_accel(double q_recv, double q_send, const Vec2& dx, double d) {
    return dx * (-q_recv * q_send / (d * d * d));
}

Vec2 boids_pair_accel(double a, double c, double s, const Vec2& dx,
                      const Vec2& dvel, double d) {
    return dx * c + dvel * a - dx * (s / (d * d));
}

void rps_reaction(double u, double v, double w, double beta, double out[3]) {
    double p = u + v + w;
    out[0] = u * (1.0 - p - beta * v);
    out[1] = v * (1.0 - p - beta * w);
    out[2] = w * (1.0 - p - beta * u);
}

double signaling_deriv(double b, double c, double u, double coupled) {
    return -b * u + c * std::tanh(u) + coupled;
}

double field_sample(const FieldSpec& f, const Vec2& p, double t_frac) {
    int side = f.image_side;
    const double* img = f.image.data();
    if (f.movie_frames > 0) {
        int fr = std::clamp(static_cast<int>(t_frac * f.movie_frames), 0, f.movie_frames - 1);
        img = f.movie.data() + static_cast<size_t>(fr) * side * side;
    }
    // bilinear over pixel centers; coordinates in [0,1) map onto the image
    auto axis = [side](double x) {
        double g = x * side - 0.5;
        int i0 = static_cast<int>(std::floor(g));
        double t = g - i0;
        int a = std::clamp(i0, 0, side - 1);
        int b = std::clamp(i0 + 1, 0, side - 1);
        return std::tuple<int, int, double>(a, b, t);
    };
    auto [x0, x1, tx] = axis(p.x);
    auto [y0, y1, ty] = axis(p.y);
    double v00 = img[y0 * side + x0], v10 = img[y0 * side + x1];
    double v01 = img[y1 * side + x0], v11 = img[y1 * side + x1];
    return (1 - ty) * ((1 - tx) * v00 + tx * v10) + ty * ((1 - tx) * v01 + tx * v11);
}

NetGraph net_from_conn(std::span<const double> conn, int n) {
    NetGraph g;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            double w = conn[static_cast<size_t>(i) * n + j];
            if (w != 0.0) {
                g.edges.push(i, j);
                g.w.push_back(w);
            }
        }
    }
    return g;
}

namespace {

Latents draw_latents(const SystemConfig& cfg, Rng& rng) {
    int n = cfg.n_nodes();
    Latents lat;
    lat.type.assign(n, -1);
    const LatentSpec& spec = cfg.latents;
    if (spec.is_discrete()) {
        std::set<std::string> keys;
        for (const auto& t : spec.types)
            for (const auto& [k, v] : t) keys.insert(k);
        for (const auto& t : spec.types) {
            if (t.size() != keys.size()) {
                throw ConfigError("all latent types must define the same parameter names");
            }
        }
        for (const auto& k : keys) lat.add(k, n);
        int nt = static_cast<int>(spec.types.size());
        for (int i = 0; i < n; ++i) lat.type[i] = static_cast<int32_t>(rng.below(nt));
        size_t kk = 0;
        for (const auto& k : keys) {
            auto& col = lat.values[kk++];
            for (int i = 0; i < n; ++i) col[i] = spec.types[lat.type[i]].at(k);
        }
    } else if (spec.is_pattern()) {
        for (const auto& [name, vals] : spec.patterns) {
            if (static_cast<int>(vals.size()) != n) {
                throw ConfigError("latent pattern '" + name + "' has wrong length");
            }
            lat.add(name, n) = vals;
        }
        // piecewise-constant patterns induce type ids by first appearance
        std::map<std::vector<double>, int32_t> seen;
        std::vector<double> tuple(lat.names.size());
        for (int i = 0; i < n; ++i) {
            for (size_t k = 0; k < lat.values.size(); ++k) tuple[k] = lat.values[k][i];
            auto it = seen.find(tuple);
            if (it == seen.end()) {
                if (seen.size() >= 64) { seen.clear(); break; }  // continuous pattern, no ids
                it = seen.emplace(tuple, static_cast<int32_t>(seen.size())).first;
            }
            lat.type[i] = it->second;
        }
        if (seen.empty()) std::fill(lat.type.begin(), lat.type.end(), -1);
    } else {
        for (const auto& [name, r] : spec.ranges) {
            auto& col = lat.add(name, n);
            for (int i = 0; i < n; ++i) col[i] = rng.uniform(r.first, r.second);
        }
    }
    return lat;
}

// Mutable integration state; only the slices relevant to the kind are used.
struct SimState {
    std::vector<Vec2> pos, vel;
    std::vector<double> u, udot, v, w;
};

struct Aux {
    const SystemConfig* cfg = nullptr;
    const Latents* lat = nullptr;
    const GridMesh* mesh = nullptr;
    NetGraph net;
    std::span<const Vec2> stat_pos;
    std::span<const double> stat_b;
};

Frame to_frame(SystemKind kind, const SimState& st, std::span<const Vec2> deriv) {
    Frame f;
    switch (kind) {
        case SystemKind::AttractionRepulsion:
            f.pos = st.pos;
            f.vel.assign(deriv.begin(), deriv.end());  // first order: velocity is the derivative
            break;
        case SystemKind::Gravity:
        case SystemKind::Coulomb:
        case SystemKind::Boids:
            f.pos = st.pos;
            f.vel = st.vel;
            break;
        case SystemKind::Wave: {
            size_t n = st.u.size();
            f.field.resize(2 * n);
            for (size_t i = 0; i < n; ++i) {
                f.field[2 * i] = st.u[i];
                f.field[2 * i + 1] = st.udot[i];
            }
            break;
        }
        case SystemKind::Rps: {
            size_t n = st.u.size();
            f.field.resize(3 * n);
            for (size_t i = 0; i < n; ++i) {
                f.field[3 * i] = st.u[i];
                f.field[3 * i + 1] = st.v[i];
                f.field[3 * i + 2] = st.w[i];
            }
            break;
        }
        case SystemKind::Signaling:
            f.field = st.u;
            break;
    }
    return f;
}

SimState from_frame(SystemKind kind, const Frame& f) {
    SimState st;
    switch (kind) {
        case SystemKind::AttractionRepulsion:
            st.pos = f.pos;
            break;
        case SystemKind::Gravity:
        case SystemKind::Coulomb:
        case SystemKind::Boids:
            st.pos = f.pos;
            st.vel = f.vel;
            break;
        case SystemKind::Wave: {
            size_t n = f.field.size() / 2;
            st.u.resize(n);
            st.udot.resize(n);
            for (size_t i = 0; i < n; ++i) {
                st.u[i] = f.field[2 * i];
                st.udot[i] = f.field[2 * i + 1];
            }
            break;
        }
        case SystemKind::Rps: {
            size_t n = f.field.size() / 3;
            st.u.resize(n);
            st.v.resize(n);
            st.w.resize(n);
            for (size_t i = 0; i < n; ++i) {
                st.u[i] = f.field[3 * i];
                st.v[i] = f.field[3 * i + 1];
                st.w[i] = f.field[3 * i + 2];
            }
            break;
        }
        case SystemKind::Signaling:
            st.u = f.field;
            break;
    }
    return st;
}

void deriv_moving(const Aux& aux, const SimState& st, double t_frac, std::vector<Vec2>& out) {
    const SystemConfig& cfg = *aux.cfg;
    const Latents& lat = *aux.lat;
    int n = static_cast<int>(st.pos.size());
    out.assign(n, Vec2{});
    EdgeList mm = radius_edges(st.pos, cfg.radius());

    std::vector<int32_t> counts;
    bool mean_agg = cfg.kind == SystemKind::AttractionRepulsion || cfg.kind == SystemKind::Boids;
    if (mean_agg) counts.assign(n, 0);

    switch (cfg.kind) {
        case SystemKind::AttractionRepulsion: {
            auto a = lat.col("a"), b = lat.col("b"), c = lat.col("c"), dd = lat.col("d");
            for (size_t e = 0; e < mm.size(); ++e) {
                int i = mm.recv[e], j = mm.send[e];
                Vec2 dx = displacement(st.pos[i], st.pos[j], cfg.periodic, cfg.box);
                double d = dx.norm();
                out[i] += ar_pair_vel(a[i], b[i], c[i], dd[i], cfg.sigma, dx, d);
                counts[i]++;
            }
            if (!aux.stat_pos.empty()) {
                EdgeList ms = radius_edges_cross(st.pos, aux.stat_pos, cfg.radius());
                for (size_t e = 0; e < ms.size(); ++e) {
                    int i = ms.recv[e], k = ms.send[e];
                    Vec2 dx = displacement(st.pos[i], aux.stat_pos[k], cfg.periodic, cfg.box);
                    double d = dx.norm();
                    double bb = aux.stat_b.empty()
                                    ? field_sample(*cfg.field, aux.stat_pos[k], t_frac)
                                    : aux.stat_b[k];
                    out[i] += bb * ar_pair_vel(a[i], b[i], c[i], dd[i], cfg.sigma, dx, d);
                    counts[i]++;
                }
            }
            break;
        }
        case SystemKind::Gravity: {
            auto m = lat.col("m");
            for (size_t e = 0; e < mm.size(); ++e) {
                int i = mm.recv[e], j = mm.send[e];
                Vec2 dx = displacement(st.pos[i], st.pos[j], cfg.periodic, cfg.box);
                out[i] += gravity_pair_accel(m[j], dx, dx.norm());
            }
            break;
        }
        case SystemKind::Coulomb: {
            auto q = lat.col("q");
            for (size_t e = 0; e < mm.size(); ++e) {
                int i = mm.recv[e], j = mm.send[e];
                Vec2 dx = displacement(st.pos[i], st.pos[j], cfg.periodic, cfg.box);
                out[i] += coulomb_pair_accel(q[i], q[j], dx, dx.norm());
            }
            break;
        }
        case SystemKind::Boids: {
            auto a = lat.col("a"), c = lat.col("c"), s = lat.col("s");
            for (size_t e = 0; e < mm.size(); ++e) {
                int i = mm.recv[e], j = mm.send[e];
                Vec2 dx = displacement(st.pos[i], st.pos[j], cfg.periodic, cfg.box);
                Vec2 dv = st.vel[j] - st.vel[i];
                out[i] += boids_pair_accel(a[i], c[i], s[i], dx, dv, dx.norm());
                counts[i]++;
            }
            break;
        }
        default:
            break;
    }
    if (mean_agg) {
        for (int i = 0; i < n; ++i) {
            if (counts[i] > 0) out[i] = out[i] / counts[i];
        }
    }
}

// One integration step; fills `deriv` with the derivative actually used.
void step_once(const Aux& aux, SimState& st, double t_frac, std::vector<Vec2>& deriv_mv,
               std::vector<double>& deriv_f) {
    const SystemConfig& cfg = *aux.cfg;
    const Latents& lat = *aux.lat;
    switch (cfg.kind) {
        case SystemKind::AttractionRepulsion:
            deriv_moving(aux, st, t_frac, deriv_mv);
            euler_first_order(st.pos, deriv_mv, cfg.dt, cfg.periodic, cfg.box);
            break;
        case SystemKind::Gravity:
        case SystemKind::Coulomb:
        case SystemKind::Boids:
            deriv_moving(aux, st, t_frac, deriv_mv);
            euler_semi_implicit(st.pos, st.vel, deriv_mv, cfg.dt, cfg.periodic, cfg.box);
            break;
        case SystemKind::Wave: {
            auto a = lat.col("a");
            std::vector<double> lap = laplacian(*aux.mesh, st.u);
            deriv_f.resize(st.u.size());
            for (size_t i = 0; i < st.u.size(); ++i) {
                deriv_f[i] = aux.mesh->boundary[i] ? 0.0 : a[i] * lap[i];
            }
            euler_semi_implicit(st.u, st.udot, deriv_f, cfg.dt);
            break;
        }
        case SystemKind::Rps: {
            auto a = lat.col("a");
            size_t n = st.u.size();
            std::vector<double> lu = laplacian(*aux.mesh, st.u);
            std::vector<double> lv = laplacian(*aux.mesh, st.v);
            std::vector<double> lw = laplacian(*aux.mesh, st.w);
            deriv_f.resize(3 * n);
            for (size_t i = 0; i < n; ++i) {
                if (aux.mesh->boundary[i]) {
                    deriv_f[3 * i] = deriv_f[3 * i + 1] = deriv_f[3 * i + 2] = 0.0;
                    continue;
                }
                double r[3];
                rps_reaction(st.u[i], st.v[i], st.w[i], cfg.beta, r);
                deriv_f[3 * i] = a[i] * lu[i] + r[0];
                deriv_f[3 * i + 1] = a[i] * lv[i] + r[1];
                deriv_f[3 * i + 2] = a[i] * lw[i] + r[2];
            }
            for (size_t i = 0; i < n; ++i) {
                st.u[i] += cfg.dt * deriv_f[3 * i];
                st.v[i] += cfg.dt * deriv_f[3 * i + 1];
                st.w[i] += cfg.dt * deriv_f[3 * i + 2];
            }
            break;
        }
        case SystemKind::Signaling: {
            auto b = lat.col("b"), c = lat.col("c");
            size_t n = st.u.size();
            std::vector<double> coupled(n, 0.0);
            for (size_t e = 0; e < aux.net.edges.size(); ++e) {
                coupled[aux.net.edges.recv[e]] += aux.net.w[e] * std::tanh(st.u[aux.net.edges.send[e]]);
            }
            deriv_f.resize(n);
            for (size_t i = 0; i < n; ++i) {
                deriv_f[i] = signaling_deriv(b[i], c[i], st.u[i], coupled[i]);
            }
            euler_first_order(st.u, deriv_f, cfg.dt);
            break;
        }
    }
}

void check_sane(const SystemKind kind, const SimState& st, int step) {
    auto bad = [](double x) { return !std::isfinite(x) || std::fabs(x) > 1e6; };
    bool diverged = false;
    for (const Vec2& p : st.pos) diverged |= bad(p.x) || bad(p.y);
    for (const Vec2& v : st.vel) diverged |= bad(v.x) || bad(v.y);
    for (double x : st.u) diverged |= bad(x);
    for (double x : st.udot) diverged |= bad(x);
    for (double x : st.v) diverged |= bad(x);
    for (double x : st.w) diverged |= bad(x);
    if (diverged) {
        throw SimulationDiverged(std::string(kind_name(kind)) + " diverged at step " +
                                     std::to_string(step),
                                 step);
    }
}

SimState init_state(const SystemConfig& cfg, Rng& rng) {
    SimState st;
    int n = cfg.n_nodes();
    switch (cfg.kind) {
        case SystemKind::AttractionRepulsion:
        case SystemKind::Gravity:
        case SystemKind::Coulomb:
        case SystemKind::Boids: {
            st.pos.resize(n);
            if (cfg.init.layout == "disk") {
                for (int i = 0; i < n; ++i) {
                    double r = cfg.init.disk_radius * std::sqrt(rng.uniform());
                    double th = rng.uniform(0.0, 2.0 * M_PI);
                    st.pos[i] = {0.5 + r * std::cos(th), 0.5 + r * std::sin(th)};
                }
            } else {
                for (int i = 0; i < n; ++i) {
                    st.pos[i] = {rng.uniform(0.0, cfg.box), rng.uniform(0.0, cfg.box)};
                }
            }
            if (is_second_order(cfg.kind)) {
                st.vel.resize(n);
                for (int i = 0; i < n; ++i) {
                    if (cfg.init.orbital) {
                        Vec2 r = st.pos[i] - Vec2{0.5, 0.5};
                        double rr = r.norm();
                        double sp = cfg.init.speed *
                                    std::sqrt(std::max(rr, 1e-6) / std::max(cfg.init.disk_radius, 1e-6));
                        st.vel[i] = rr > 1e-12 ? Vec2{-r.y, r.x} * (sp / rr) : Vec2{};
                    } else {
                        double th = rng.uniform(0.0, 2.0 * M_PI);
                        st.vel[i] = Vec2{std::cos(th), std::sin(th)} * cfg.init.speed;
                    }
                }
            }
            break;
        }
        case SystemKind::Wave: {
            int side = cfg.mesh_side;
            st.u.assign(n, 0.0);
            st.udot.assign(n, 0.0);
            for (int p = 0; p < cfg.init.pulses; ++p) {
                double cx = rng.uniform(0.2, 0.8) * side;
                double cy = rng.uniform(0.2, 0.8) * side;
                double w2 = cfg.init.pulse_width * cfg.init.pulse_width;
                for (int r = 0; r < side; ++r) {
                    for (int c = 0; c < side; ++c) {
                        double d2 = (c - cx) * (c - cx) + (r - cy) * (r - cy);
                        st.u[r * side + c] += cfg.init.pulse_amp * std::exp(-d2 / (2.0 * w2));
                    }
                }
            }
            break;
        }
        case SystemKind::Rps: {
            st.u.resize(n);
            st.v.resize(n);
            st.w.resize(n);
            for (auto* ch : {&st.u, &st.v, &st.w}) {
                for (int i = 0; i < n; ++i) {
                    (*ch)[i] = rng.uniform(cfg.init.field_lo, cfg.init.field_hi);
                }
            }
            break;
        }
        case SystemKind::Signaling: {
            st.u.resize(n);
            for (int i = 0; i < n; ++i) st.u[i] = rng.uniform(cfg.init.field_lo, cfg.init.field_hi);
            break;
        }
    }
    return st;
}

std::vector<Frame> run_series(const Aux& aux, SimState st) {
    const SystemConfig& cfg = *aux.cfg;
    std::vector<Frame> frames;
    frames.reserve(cfg.steps + 1);
    std::vector<Vec2> dmv;
    std::vector<double> df;
    for (int t = 0; t < cfg.steps; ++t) {
        double t_frac = cfg.steps > 0 ? static_cast<double>(t) / cfg.steps : 0.0;
        if (cfg.kind == SystemKind::AttractionRepulsion) {
            // record with the derivative of this very step so the velocity
            // channel matches x_{t+1} = x_t + dt*v_t exactly
            deriv_moving(aux, st, t_frac, dmv);
            frames.push_back(to_frame(cfg.kind, st, dmv));
            euler_first_order(st.pos, dmv, cfg.dt, cfg.periodic, cfg.box);
        } else {
            frames.push_back(to_frame(cfg.kind, st, {}));
            step_once(aux, st, t_frac, dmv, df);
        }
        check_sane(cfg.kind, st, t);
    }
    if (cfg.kind == SystemKind::AttractionRepulsion) {
        deriv_moving(aux, st, 1.0, dmv);
        frames.push_back(to_frame(cfg.kind, st, dmv));
    } else {
        frames.push_back(to_frame(cfg.kind, st, {}));
    }
    return frames;
}

Aux make_aux(const Trajectory& traj) {
    Aux aux;
    aux.cfg = &traj.config;
    aux.lat = &traj.latents;
    aux.mesh = &traj.mesh;
    if (traj.config.kind == SystemKind::Signaling) {
        aux.net = net_from_conn(traj.conn, traj.config.n);
    }
    aux.stat_pos = traj.stationary_pos;
    aux.stat_b = traj.stationary_b;
    return aux;
}

}  // namespace

Trajectory simulate(const SystemConfig& cfg) {
    cfg.validate();
    Trajectory traj;
    traj.config = cfg;
    Rng rng(cfg.seed);
    traj.latents = draw_latents(cfg, rng);
    if (is_mesh(cfg.kind)) traj.mesh = GridMesh::make(cfg.mesh_side);
    if (cfg.kind == SystemKind::Signaling) {
        int n = cfg.n;
        traj.conn.assign(static_cast<size_t>(n) * n, 0.0);
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                if (rng.uniform() < cfg.edge_prob) {
                    double w = rng.uniform(-1.0, 1.0);
                    traj.conn[static_cast<size_t>(i) * n + j] = w;
                    traj.conn[static_cast<size_t>(j) * n + i] = w;
                }
            }
        }
    }
    if (cfg.field) {
        traj.stationary_pos.resize(cfg.field->n_stationary);
        for (Vec2& p : traj.stationary_pos) p = {rng.uniform(), rng.uniform()};
        if (cfg.field->movie_frames == 0) {
            traj.stationary_b.resize(traj.stationary_pos.size());
            for (size_t k = 0; k < traj.stationary_pos.size(); ++k) {
                traj.stationary_b[k] = field_sample(*cfg.field, traj.stationary_pos[k], 0.0);
            }
        }
    }
    Aux aux = make_aux(traj);
    traj.series.reserve(cfg.series);
    for (int s = 0; s < cfg.series; ++s) {
        traj.series.push_back(run_series(aux, init_state(cfg, rng)));
    }
    return traj;
}

std::vector<Frame> truth_rollout(const Trajectory& context, const Frame& start, int steps) {
    Aux aux = make_aux(context);
    SystemConfig cfg = context.config;
    cfg.steps = steps;
    Aux aux2 = aux;
    aux2.cfg = &cfg;
    return run_series(aux2, from_frame(cfg.kind, start));
}

}  // namespace hdyn
