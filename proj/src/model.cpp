#include "hdyn/model.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "hdyn/integrate.hpp"

namespace hdyn::gnn {

using nlohmann::json;
using nn::MlpSpec;

namespace {

bool uses_mean_agg(SystemKind k) {
    return k == SystemKind::AttractionRepulsion || k == SystemKind::Boids;
}

MlpSpec f_spec(const ModelSpec& ms) {
    MlpSpec s;
    s.layers = 5;
    s.out = 2;
    switch (ms.kind) {
        case SystemKind::AttractionRepulsion: s.in = 5; s.hidden = 128; break;
        case SystemKind::Gravity: s.in = 5; s.hidden = 128; break;
        case SystemKind::Coulomb: s.in = 7; s.hidden = 256; break;
        case SystemKind::Boids: s.in = 9; s.hidden = 256; break;
        case SystemKind::Signaling: s.in = 1; s.hidden = 64; s.out = 1; s.layers = 3; break;
        default: s.in = 0; break;
    }
    if (ms.hidden_f > 0) s.hidden = ms.hidden_f;
    return s;
}

MlpSpec phi_spec(const ModelSpec& ms) {
    MlpSpec s;
    s.layers = 5;
    switch (ms.kind) {
        case SystemKind::Wave: s.in = 3; s.hidden = 16; s.out = 1; break;
        case SystemKind::Rps: s.in = 8; s.hidden = 32; s.out = 3; break;
        case SystemKind::Signaling: s.in = 3; s.hidden = 64; s.out = 1; s.layers = 3; break;
        default: s.in = 0; break;
    }
    if (ms.hidden_phi > 0) s.hidden = ms.hidden_phi;
    return s;
}

}  // namespace

GnnModel GnnModel::make(const ModelSpec& spec) {
    GnnModel m;
    m.spec = spec;
    Rng rng(spec.seed);
    MlpSpec fs = f_spec(spec), ps = phi_spec(spec);
    if (fs.in > 0) m.f.init(fs, rng);
    if (ps.in > 0) m.phi.init(ps, rng);
    if (spec.has_field) {
        MlpSpec sn;
        sn.in = 3;  // x, y, t
        sn.hidden = 128;
        sn.out = 1;
        sn.layers = 7;
        sn.act = MlpSpec::Act::Sine;
        m.field_net.init(sn, rng);
    }
    m.embed = nn::Parameter(Mat::Ones(spec.n_nodes + spec.n_ghosts, 2));
    m.embed.row_table = true;
    return m;
}

void GnnModel::set_support(std::span<const double> conn, int n) {
    pair_i.clear();
    pair_j.clear();
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            if (conn[static_cast<size_t>(i) * n + j] != 0.0) {
                pair_i.push_back(i);
                pair_j.push_back(j);
            }
        }
    }
    a_vals = nn::Parameter(Mat::Zero(static_cast<Eigen::Index>(pair_i.size()), 1));
    a_vals.row_table = true;
}

Mat GnnModel::a_matrix() const {
    int n = spec.n_nodes;
    Mat a = Mat::Zero(n, n);
    for (size_t p = 0; p < pair_i.size(); ++p) {
        a(pair_i[p], pair_j[p]) = a_vals.value(static_cast<Eigen::Index>(p), 0);
        a(pair_j[p], pair_i[p]) = a_vals.value(static_cast<Eigen::Index>(p), 0);
    }
    return a;
}

std::vector<nn::Parameter*> GnnModel::params() {
    std::vector<nn::Parameter*> out;
    for (nn::Mlp* net : {&f, &phi, &field_net}) {
        if (!net->W.empty()) {
            for (auto* p : net->params()) out.push_back(p);
        }
    }
    out.push_back(&embed);
    if (a_vals.value.size() > 0) out.push_back(&a_vals);
    return out;
}

namespace {

struct RotHelper {
    double c = 1.0, s = 0.0;
    void set(double angle) { c = std::cos(angle); s = std::sin(angle); }
    Vec2 apply(const Vec2& v) const { return {c * v.x - s * v.y, s * v.x + c * v.y}; }
};

// frame-pair derivative targets in physical units
std::vector<Vec2> moving_target(const SystemConfig& cfg, const Frame& fr, const Frame& next) {
    int n = cfg.n;
    std::vector<Vec2> tg(n);
    if (cfg.kind == SystemKind::AttractionRepulsion) {
        for (int i = 0; i < n; ++i) tg[i] = fr.vel[i];  // stored first derivative
    } else {
        for (int i = 0; i < n; ++i) tg[i] = (next.vel[i] - fr.vel[i]) / cfg.dt;
    }
    return tg;
}

void append_moving_frame(BatchGraph& g, const GnnModel& model, const Trajectory& ctx,
                         const Frame& fr, const Frame* next, double t_frac,
                         const AssembleOpts& opts,
                         std::vector<int32_t>& stat_recv_buf, std::vector<double>& stat_geom_buf,
                         std::vector<int32_t>& stat_src_buf, std::vector<double>& stat_xy_buf,
                         std::vector<double>& geom_buf, std::vector<double>& vel_buf,
                         std::vector<double>& tgt_buf) {
    const SystemConfig& cfg = ctx.config;
    const FeatureScales& sc = model.scales;
    int n = cfg.n;
    int ghosts = opts.rng ? model.spec.n_ghosts : 0;
    int per = n + ghosts;
    int base = g.n_rows;

    RotHelper rot;
    if (opts.n_rotations > 0 && opts.rng) {
        rot.set(2.0 * M_PI * static_cast<double>(opts.rng->below(opts.n_rotations)) /
                opts.n_rotations);
    }

    std::vector<Vec2> pos(fr.pos.begin(), fr.pos.end());
    std::vector<Vec2> vel(fr.vel.begin(), fr.vel.end());
    pos.resize(per);
    vel.resize(per);
    if (ghosts > 0) {
        Vec2 lo{0.0, 0.0}, hi{cfg.box, cfg.box};
        if (!cfg.periodic) {
            lo = hi = fr.pos[0];
            for (const Vec2& p : fr.pos) {
                lo.x = std::min(lo.x, p.x); lo.y = std::min(lo.y, p.y);
                hi.x = std::max(hi.x, p.x); hi.y = std::max(hi.y, p.y);
            }
        }
        for (int k = 0; k < ghosts; ++k) {
            pos[n + k] = {opts.rng->uniform(lo.x, hi.x), opts.rng->uniform(lo.y, hi.y)};
            vel[n + k] = {};
        }
    }

    for (int i = 0; i < per; ++i) {
        g.embed_row.push_back(i < n ? i : model.spec.n_nodes + (i - n));
    }
    if (model.spec.kind == SystemKind::Boids) {
        for (int i = 0; i < per; ++i) {
            Vec2 v = rot.apply(vel[i]);
            vel_buf.push_back(v.x / sc.vel);
            vel_buf.push_back(v.y / sc.vel);
        }
    }

    EdgeList edges = radius_edges(pos, model.band);
    for (size_t e = 0; e < edges.size(); ++e) {
        int i = edges.recv[e], j = edges.send[e];
        Vec2 dx = displacement(pos[i], pos[j], cfg.periodic, cfg.box);
        double d = dx.norm();
        dx = rot.apply(dx);
        g.recv.push_back(base + i);
        g.send.push_back(base + j);
        g.erow_recv.push_back(g.embed_row[base + i]);
        g.erow_send.push_back(g.embed_row[base + j]);
        geom_buf.push_back(d / sc.d);
        geom_buf.push_back(dx.x / sc.dx);
        geom_buf.push_back(dx.y / sc.dx);
    }

    if (model.spec.has_field && !ctx.stationary_pos.empty()) {
        // emitter -> receiver edges; the emitters only contribute geometry and
        // a learned weight, they are not graph rows themselves
        EdgeList se = radius_edges_cross(pos, ctx.stationary_pos, model.band);
        bool animated = ctx.config.field && ctx.config.field->movie_frames > 0;
        int stat_base = 0;
        if (animated || stat_xy_buf.empty()) {
            stat_base = static_cast<int>(stat_xy_buf.size() / 3);
            for (const Vec2& p : ctx.stationary_pos) {
                stat_xy_buf.push_back(p.x);
                stat_xy_buf.push_back(p.y);
                stat_xy_buf.push_back(animated ? t_frac : 0.0);
            }
        }
        for (size_t e = 0; e < se.size(); ++e) {
            int i = se.recv[e];
            int k = se.send[e];
            Vec2 dx = displacement(pos[i], ctx.stationary_pos[k], cfg.periodic, cfg.box);
            double d = dx.norm();
            dx = rot.apply(dx);
            stat_recv_buf.push_back(base + i);
            stat_geom_buf.push_back(d / sc.d);
            stat_geom_buf.push_back(dx.x / sc.dx);
            stat_geom_buf.push_back(dx.y / sc.dx);
            stat_src_buf.push_back(stat_base + k);
        }
    }

    if (opts.with_targets && next != nullptr) {
        std::vector<Vec2> tg = moving_target(cfg, fr, *next);
        for (int i = 0; i < n; ++i) {
            g.loss_rows.push_back(base + i);
            Vec2 v = rot.apply(tg[i]);
            if (opts.noise_sigma > 0.0 && opts.rng) {
                v.x *= 1.0 + opts.rng->normal(0.0, opts.noise_sigma);
                v.y *= 1.0 + opts.rng->normal(0.0, opts.noise_sigma);
            }
            tgt_buf.push_back(v.x / sc.target);
            tgt_buf.push_back(v.y / sc.target);
        }
    }
    g.n_rows += per;
}

void append_mesh_frame(BatchGraph& g, const GnnModel& model, const Trajectory& ctx,
                       const Frame& fr, const Frame* next, const AssembleOpts& opts,
                       std::vector<double>& feat_buf, std::vector<double>& tgt_buf) {
    const SystemConfig& cfg = ctx.config;
    const FeatureScales& sc = model.scales;
    int n = cfg.n_nodes();
    int base = g.n_rows;
    bool wave = cfg.kind == SystemKind::Wave;
    int ch = field_arity(cfg.kind);

    std::vector<double> u(n), v, w;
    for (int i = 0; i < n; ++i) u[i] = fr.field[static_cast<size_t>(i) * ch];
    if (!wave) {
        v.resize(n);
        w.resize(n);
        for (int i = 0; i < n; ++i) {
            v[i] = fr.field[static_cast<size_t>(i) * ch + 1];
            w[i] = fr.field[static_cast<size_t>(i) * ch + 2];
        }
    }
    std::vector<double> lu = laplacian(ctx.mesh, u), lv, lw;
    if (!wave) {
        lv = laplacian(ctx.mesh, v);
        lw = laplacian(ctx.mesh, w);
    }

    for (int i = 0; i < n; ++i) {
        g.embed_row.push_back(i);
        if (wave) {
            feat_buf.push_back(lu[i] / sc.lap);
        } else {
            feat_buf.push_back(u[i] / sc.u);
            feat_buf.push_back(v[i] / sc.u);
            feat_buf.push_back(w[i] / sc.u);
            feat_buf.push_back(lu[i] / sc.lap);
            feat_buf.push_back(lv[i] / sc.lap);
            feat_buf.push_back(lw[i] / sc.lap);
        }
    }

    if (opts.with_targets && next != nullptr) {
        for (int i = 0; i < n; ++i) {
            if (ctx.mesh.boundary[i]) continue;
            g.loss_rows.push_back(base + i);
            if (wave) {
                // second derivative of u from the stored first derivative
                double t = (next->field[2 * i + 1] - fr.field[2 * i + 1]) / cfg.dt;
                if (opts.noise_sigma > 0.0 && opts.rng) {
                    t *= 1.0 + opts.rng->normal(0.0, opts.noise_sigma);
                }
                tgt_buf.push_back(t / sc.target);
            } else {
                for (int c = 0; c < 3; ++c) {
                    double t = (next->field[3 * i + c] - fr.field[3 * i + c]) / cfg.dt;
                    if (opts.noise_sigma > 0.0 && opts.rng) {
                        t *= 1.0 + opts.rng->normal(0.0, opts.noise_sigma);
                    }
                    tgt_buf.push_back(t / sc.target);
                }
            }
        }
    }
    g.n_rows += n;
}

void append_signal_frame(BatchGraph& g, const GnnModel& model, const Trajectory& ctx,
                         const Frame& fr, std::vector<double>& u_buf) {
    int n = ctx.config.n;
    int base = g.n_rows;
    for (int i = 0; i < n; ++i) {
        g.embed_row.push_back(i);
        u_buf.push_back(fr.field[i] / model.scales.u);
        g.loss_rows.push_back(base + i);
    }
    // both directions of every support pair
    for (size_t p = 0; p < model.pair_i.size(); ++p) {
        g.recv.push_back(base + model.pair_i[p]);
        g.send.push_back(base + model.pair_j[p]);
        g.edge_pair.push_back(static_cast<int32_t>(p));
        g.recv.push_back(base + model.pair_j[p]);
        g.send.push_back(base + model.pair_i[p]);
        g.edge_pair.push_back(static_cast<int32_t>(p));
    }
    g.n_rows += n;
}

Mat from_buf(const std::vector<double>& buf, int cols) {
    if (cols == 0 || buf.empty()) return Mat();
    Eigen::Index rows = static_cast<Eigen::Index>(buf.size()) / cols;
    Mat m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) m(r, c) = buf[static_cast<size_t>(r) * cols + c];
    }
    return m;
}

}  // namespace

BatchGraph assemble_batch(const GnnModel& model, const Trajectory& data,
                          const std::vector<std::pair<int, int>>& samples,
                          const AssembleOpts& opts) {
    BatchGraph g;
    const SystemConfig& cfg = data.config;
    std::vector<double> geom_buf, vel_buf, tgt_buf, feat_buf, u_buf, stat_geom_buf, stat_xy_buf;
    std::vector<int32_t> stat_recv_buf, stat_src_buf;
    int steps = std::max(1, model.spec.multi_step);
    std::vector<std::vector<double>> step_tgt(steps);

    for (const auto& [s, t] : samples) {
        const auto& frames = data.series.at(s);
        double t_frac = cfg.steps > 0 ? static_cast<double>(t) / cfg.steps : 0.0;
        if (is_moving(cfg.kind)) {
            append_moving_frame(g, model, data, frames.at(t), &frames.at(t + 1), t_frac, opts,
                                stat_recv_buf, stat_geom_buf, stat_src_buf, stat_xy_buf,
                                geom_buf, vel_buf, tgt_buf);
        } else if (is_mesh(cfg.kind)) {
            append_mesh_frame(g, model, data, frames.at(t), &frames.at(t + 1), opts, feat_buf,
                              tgt_buf);
        } else {
            append_signal_frame(g, model, data, frames.at(t), u_buf);
            // per sub-step targets from consecutive frame pairs
            for (int k = 0; k < steps; ++k) {
                const Frame& a = frames.at(t + k);
                const Frame& b = frames.at(t + k + 1);
                for (int i = 0; i < cfg.n; ++i) {
                    double tv = (b.field[i] - a.field[i]) / cfg.dt;
                    if (opts.noise_sigma > 0.0 && opts.rng) {
                        tv *= 1.0 + opts.rng->normal(0.0, opts.noise_sigma);
                    }
                    step_tgt[k].push_back(tv / model.scales.target);
                }
            }
        }
    }

    g.edge_geom = from_buf(geom_buf, 3);
    g.node_vel = from_buf(vel_buf, 2);
    g.node_u = from_buf(u_buf, 1);
    if (is_mesh(cfg.kind)) {
        g.node_feat = from_buf(feat_buf, cfg.kind == SystemKind::Wave ? 1 : 6);
    }

    // stationary edges go after all particle-particle edges so their learned
    // weights can be appended as one block
    g.n_stat_edges = static_cast<int>(stat_recv_buf.size());
    if (g.n_stat_edges > 0) {
        Mat sg = from_buf(stat_geom_buf, 3);
        Mat all(g.edge_geom.rows() + sg.rows(), 3);
        all << g.edge_geom, sg;
        g.edge_geom = std::move(all);
        for (size_t e = 0; e < stat_recv_buf.size(); ++e) {
            g.recv.push_back(stat_recv_buf[e]);
            g.send.push_back(-1);
            g.erow_recv.push_back(g.embed_row[stat_recv_buf[e]]);
            g.erow_send.push_back(-1);
        }
        g.stat_src = std::move(stat_src_buf);
        g.stat_xy = from_buf(stat_xy_buf, 3);
    }

    if (opts.with_targets) {
        if (is_moving(cfg.kind)) {
            g.target.push_back(from_buf(tgt_buf, 2));
        } else if (is_mesh(cfg.kind)) {
            g.target.push_back(from_buf(tgt_buf, cfg.kind == SystemKind::Wave ? 1 : 3));
        } else {
            for (int k = 0; k < steps; ++k) g.target.push_back(from_buf(step_tgt[k], 1));
        }
    }
    return g;
}

BatchGraph assemble_state(const GnnModel& model, const Trajectory& context,
                          const Frame& state, double t_frac) {
    BatchGraph g;
    AssembleOpts opts;
    opts.with_targets = false;
    std::vector<double> geom_buf, vel_buf, tgt_buf, feat_buf, u_buf, stat_geom_buf, stat_xy_buf;
    std::vector<int32_t> stat_recv_buf, stat_src_buf;
    if (is_moving(context.config.kind)) {
        append_moving_frame(g, model, context, state, nullptr, t_frac, opts, stat_recv_buf,
                            stat_geom_buf, stat_src_buf, stat_xy_buf, geom_buf, vel_buf, tgt_buf);
    } else if (is_mesh(context.config.kind)) {
        append_mesh_frame(g, model, context, state, nullptr, opts, feat_buf, tgt_buf);
    } else {
        append_signal_frame(g, model, context, state, u_buf);
    }
    g.edge_geom = from_buf(geom_buf, 3);
    g.node_vel = from_buf(vel_buf, 2);
    g.node_u = from_buf(u_buf, 1);
    if (is_mesh(context.config.kind)) {
        g.node_feat = from_buf(feat_buf, context.config.kind == SystemKind::Wave ? 1 : 6);
    }
    g.n_stat_edges = static_cast<int>(stat_recv_buf.size());
    if (g.n_stat_edges > 0) {
        Mat sg = from_buf(stat_geom_buf, 3);
        Mat all(g.edge_geom.rows() + sg.rows(), 3);
        all << g.edge_geom, sg;
        g.edge_geom = std::move(all);
        for (size_t e = 0; e < stat_recv_buf.size(); ++e) {
            g.recv.push_back(stat_recv_buf[e]);
            g.send.push_back(-1);
            g.erow_recv.push_back(g.embed_row[stat_recv_buf[e]]);
            g.erow_send.push_back(-1);
        }
        g.stat_src = std::move(stat_src_buf);
        g.stat_xy = from_buf(stat_xy_buf, 3);
    }
    return g;
}

namespace {

Tape::Var signal_step(Tape& t, GnnModel& m, const BatchGraph& g, Tape::Var u) {
    Tape::Var emb = t.param(m.embed);
    Tape::Var self = m.phi.apply(t, t.concat_cols({t.gather_rows(emb, g.embed_row), u}));
    if (g.recv.empty()) return self;
    Tape::Var msg = m.f.apply(t, t.gather_rows(u, g.send));
    Tape::Var w = t.gather_rows(t.param(m.a_vals), g.edge_pair);
    return t.add(self, t.segment_sum(t.row_scale(msg, w), g.recv, g.n_rows));
}

}  // namespace

Tape::Var predict(Tape& t, GnnModel& m, const BatchGraph& g) {
    switch (m.spec.kind) {
        case SystemKind::AttractionRepulsion:
        case SystemKind::Gravity:
        case SystemKind::Coulomb:
        case SystemKind::Boids: {
            if (g.recv.empty()) {
                return t.input(Mat::Zero(g.n_rows, 2));
            }
            Tape::Var emb = t.param(m.embed);
            Tape::Var geom = t.input(g.edge_geom);
            std::vector<Tape::Var> parts;
            if (m.spec.kind == SystemKind::Gravity) {
                parts = {t.gather_rows(emb, g.erow_send), geom};
            } else if (m.spec.kind == SystemKind::Coulomb) {
                parts = {t.gather_rows(emb, g.erow_recv), t.gather_rows(emb, g.erow_send), geom};
            } else if (m.spec.kind == SystemKind::Boids) {
                Tape::Var vel = t.input(g.node_vel);
                parts = {t.gather_rows(emb, g.erow_recv), geom, t.gather_rows(vel, g.recv),
                         t.gather_rows(vel, g.send)};
            } else {
                parts = {t.gather_rows(emb, g.erow_recv), geom};
            }
            Tape::Var msg = m.f.apply(t, t.concat_cols(parts));
            if (m.spec.has_field && g.n_stat_edges > 0) {
                Tape::Var fv = m.field_net.apply(t, t.input(g.stat_xy));
                Eigen::Index n_mm = g.edge_geom.rows() - g.n_stat_edges;
                Tape::Var w = t.concat_rows(
                    {t.input(Mat::Ones(n_mm, 1)), t.gather_rows(fv, g.stat_src)});
                msg = t.row_scale(msg, w);
            }
            return uses_mean_agg(m.spec.kind) ? t.segment_mean(msg, g.recv, g.n_rows)
                                              : t.segment_sum(msg, g.recv, g.n_rows);
        }
        case SystemKind::Wave:
        case SystemKind::Rps: {
            Tape::Var emb = t.param(m.embed);
            Tape::Var feats =
                t.concat_cols({t.gather_rows(emb, g.embed_row), t.input(g.node_feat)});
            return m.phi.apply(t, feats);
        }
        case SystemKind::Signaling: {
            return signal_step(t, m, g, t.input(g.node_u));
        }
    }
    return -1;
}

Tape::Var batch_loss(Tape& t, GnnModel& m, const BatchGraph& g, double dt) {
    if (m.spec.kind != SystemKind::Signaling || m.spec.multi_step <= 1) {
        Tape::Var pred = predict(t, m, g);
        Tape::Var at_loss = t.gather_rows(pred, g.loss_rows);
        return t.sum_sq(t.sub(at_loss, t.input(g.target.at(0))));
    }
    // unrolled closed-loop loss: later steps consume the model's own state
    double advance = dt * m.scales.target / m.scales.u;
    Tape::Var u = t.input(g.node_u);
    Tape::Var total = -1;
    for (int k = 0; k < m.spec.multi_step; ++k) {
        Tape::Var pred = signal_step(t, m, g, u);
        Tape::Var at_loss = t.gather_rows(pred, g.loss_rows);
        Tape::Var l = t.sum_sq(t.sub(at_loss, t.input(g.target.at(k))));
        total = k == 0 ? l : t.add(total, l);
        if (k + 1 < m.spec.multi_step) {
            u = t.add(u, t.scale(pred, advance));
        }
    }
    return total;
}

Mat predict_frame(GnnModel& model, const Trajectory& context, const Frame& state, double t_frac) {
    BatchGraph g = assemble_state(model, context, state, t_frac);
    Tape t;
    Tape::Var pred = predict(t, model, g);
    Mat out = t.val(pred) * model.scales.target;
    return out;
}

std::vector<Frame> model_rollout(GnnModel& model, const Trajectory& context, const Frame& start,
                                 int steps) {
    const SystemConfig& cfg = context.config;
    std::vector<Frame> frames{start};
    frames.reserve(steps + 1);
    Frame cur = start;
    for (int s = 0; s < steps; ++s) {
        double t_frac = steps > 0 ? static_cast<double>(s) / steps : 0.0;
        Mat deriv = predict_frame(model, context, cur, t_frac);
        if (!deriv.allFinite()) {
            throw SimulationDiverged("model rollout diverged at step " + std::to_string(s), s);
        }
        int n = cfg.n_nodes();
        switch (cfg.kind) {
            case SystemKind::AttractionRepulsion: {
                for (int i = 0; i < n; ++i) {
                    cur.vel[i] = {deriv(i, 0), deriv(i, 1)};
                }
                euler_first_order(cur.pos, cur.vel, cfg.dt, cfg.periodic, cfg.box);
                break;
            }
            case SystemKind::Gravity:
            case SystemKind::Coulomb:
            case SystemKind::Boids: {
                std::vector<Vec2> a(n);
                for (int i = 0; i < n; ++i) a[i] = {deriv(i, 0), deriv(i, 1)};
                euler_semi_implicit(cur.pos, cur.vel, a, cfg.dt, cfg.periodic, cfg.box);
                break;
            }
            case SystemKind::Wave: {
                for (int i = 0; i < n; ++i) {
                    if (context.mesh.boundary[i]) continue;
                    cur.field[2 * i + 1] += cfg.dt * deriv(i, 0);
                    cur.field[2 * i] += cfg.dt * cur.field[2 * i + 1];
                }
                break;
            }
            case SystemKind::Rps: {
                for (int i = 0; i < n; ++i) {
                    if (context.mesh.boundary[i]) continue;
                    for (int c = 0; c < 3; ++c) cur.field[3 * i + c] += cfg.dt * deriv(i, c);
                }
                break;
            }
            case SystemKind::Signaling: {
                for (int i = 0; i < n; ++i) cur.field[i] += cfg.dt * deriv(i, 0);
                break;
            }
        }
        frames.push_back(cur);
    }
    return frames;
}

Mat node_profiles(const GnnModel& model, const std::vector<double>& probe) {
    const FeatureScales& sc = model.scales;
    int n = model.spec.n_nodes;
    int np = static_cast<int>(probe.size());
    const Mat& emb = model.embed.value;
    Mat out(n, np);

    auto radial_stack = [&](bool coulomb, bool boids) {
        int in = coulomb ? 7 : (boids ? 9 : 5);
        Mat x(static_cast<Eigen::Index>(n) * np, in);
        x.setZero();
        for (int i = 0; i < n; ++i) {
            for (int p = 0; p < np; ++p) {
                Eigen::Index r = static_cast<Eigen::Index>(i) * np + p;
                int col = 0;
                x(r, col++) = emb(i, 0);
                x(r, col++) = emb(i, 1);
                if (coulomb) {
                    x(r, col++) = emb(i, 0);
                    x(r, col++) = emb(i, 1);
                }
                x(r, col++) = probe[p] / sc.d;
                x(r, col++) = probe[p] / sc.dx;  // dx = (d, 0)
                x(r, col++) = 0.0;
                // boids velocity slots stay zero
            }
        }
        Mat y = model.f.apply_plain(x);
        for (int i = 0; i < n; ++i) {
            for (int p = 0; p < np; ++p) {
                out(i, p) = y(static_cast<Eigen::Index>(i) * np + p, 0) * sc.target;
            }
        }
    };

    switch (model.spec.kind) {
        case SystemKind::AttractionRepulsion:
        case SystemKind::Gravity:
            // gravity reads the sender slot, which sits in the same columns
            radial_stack(false, false);
            break;
        case SystemKind::Coulomb:
            radial_stack(true, false);
            break;
        case SystemKind::Boids:
            radial_stack(false, true);
            break;
        case SystemKind::Wave: {
            Mat x(static_cast<Eigen::Index>(n) * np, 3);
            for (int i = 0; i < n; ++i) {
                for (int p = 0; p < np; ++p) {
                    Eigen::Index r = static_cast<Eigen::Index>(i) * np + p;
                    x(r, 0) = emb(i, 0);
                    x(r, 1) = emb(i, 1);
                    x(r, 2) = probe[p] / sc.lap;
                }
            }
            Mat y = model.phi.apply_plain(x);
            for (int i = 0; i < n; ++i)
                for (int p = 0; p < np; ++p)
                    out(i, p) = y(static_cast<Eigen::Index>(i) * np + p, 0) * sc.target;
            break;
        }
        case SystemKind::Rps: {
            // probe the u-channel response to its own laplacian at a typical
            // concentration; this isolates the per-node diffusion behavior
            double c = 0.25 / sc.u;
            Mat x(static_cast<Eigen::Index>(n) * np, 8);
            for (int i = 0; i < n; ++i) {
                for (int p = 0; p < np; ++p) {
                    Eigen::Index r = static_cast<Eigen::Index>(i) * np + p;
                    x(r, 0) = emb(i, 0);
                    x(r, 1) = emb(i, 1);
                    x(r, 2) = c;
                    x(r, 3) = c;
                    x(r, 4) = c;
                    x(r, 5) = probe[p] / sc.lap;
                    x(r, 6) = 0.0;
                    x(r, 7) = 0.0;
                }
            }
            Mat y = model.phi.apply_plain(x);
            for (int i = 0; i < n; ++i)
                for (int p = 0; p < np; ++p)
                    out(i, p) = y(static_cast<Eigen::Index>(i) * np + p, 0) * sc.target;
            break;
        }
        case SystemKind::Signaling: {
            Mat x(static_cast<Eigen::Index>(n) * np, 3);
            for (int i = 0; i < n; ++i) {
                for (int p = 0; p < np; ++p) {
                    Eigen::Index r = static_cast<Eigen::Index>(i) * np + p;
                    x(r, 0) = emb(i, 0);
                    x(r, 1) = emb(i, 1);
                    x(r, 2) = probe[p] / sc.u;
                }
            }
            Mat y = model.phi.apply_plain(x);
            for (int i = 0; i < n; ++i)
                for (int p = 0; p < np; ++p)
                    out(i, p) = y(static_cast<Eigen::Index>(i) * np + p, 0) * sc.target;
            break;
        }
    }
    return out;
}

std::vector<double> pair_profile(const GnnModel& model, int i, int j,
                                 const std::vector<double>& probe) {
    const FeatureScales& sc = model.scales;
    const Mat& emb = model.embed.value;
    Mat x(static_cast<Eigen::Index>(probe.size()), 7);
    for (size_t p = 0; p < probe.size(); ++p) {
        x(p, 0) = emb(i, 0);
        x(p, 1) = emb(i, 1);
        x(p, 2) = emb(j, 0);
        x(p, 3) = emb(j, 1);
        x(p, 4) = probe[p] / sc.d;
        x(p, 5) = probe[p] / sc.dx;
        x(p, 6) = 0.0;
    }
    Mat y = model.f.apply_plain(x);
    std::vector<double> out(probe.size());
    for (size_t p = 0; p < probe.size(); ++p) out[p] = y(p, 0) * sc.target;
    return out;
}

void save_model(const GnnModel& model, const std::string& path, int epoch, int64_t adam_t) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    json head;
    head["format"] = "hdyn-model";
    head["version"] = 1;
    head["endian"] = "LE";
    head["kind"] = kind_name(model.spec.kind);
    head["n_nodes"] = model.spec.n_nodes;
    head["n_ghosts"] = model.spec.n_ghosts;
    head["hidden_f"] = model.spec.hidden_f;
    head["hidden_phi"] = model.spec.hidden_phi;
    head["has_field"] = model.spec.has_field;
    head["multi_step"] = model.spec.multi_step;
    head["seed"] = model.spec.seed;
    head["scales"] = {model.scales.d, model.scales.dx, model.scales.vel,
                      model.scales.u, model.scales.lap, model.scales.target};
    head["band"] = {model.band.d_min, model.band.d_max, model.band.periodic, model.band.box};
    head["pairs"] = model.pair_i.size();
    head["epoch"] = epoch;
    head["adam_t"] = adam_t;
    std::string hs = head.dump();
    out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    out.put('\n');

    GnnModel& m = const_cast<GnnModel&>(model);
    for (nn::Parameter* p : m.params()) {
        Mat mm = p->m.size() ? p->m : Mat::Zero(p->value.rows(), p->value.cols());
        Mat vv = p->v.size() ? p->v : Mat::Zero(p->value.rows(), p->value.cols());
        out.write(reinterpret_cast<const char*>(p->value.data()),
                  static_cast<std::streamsize>(p->value.size() * sizeof(double)));
        out.write(reinterpret_cast<const char*>(mm.data()),
                  static_cast<std::streamsize>(mm.size() * sizeof(double)));
        out.write(reinterpret_cast<const char*>(vv.data()),
                  static_cast<std::streamsize>(vv.size() * sizeof(double)));
    }
    if (!model.pair_i.empty()) {
        out.write(reinterpret_cast<const char*>(model.pair_i.data()),
                  static_cast<std::streamsize>(model.pair_i.size() * sizeof(int32_t)));
        out.write(reinterpret_cast<const char*>(model.pair_j.data()),
                  static_cast<std::streamsize>(model.pair_j.size() * sizeof(int32_t)));
    }
    if (!out) throw IoError("write to '" + path + "' failed");
}

LoadedModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw IoError(path + ": missing model header");
    json head = json::parse(line, nullptr, false);
    if (head.is_discarded() || head.value("format", "") != "hdyn-model") {
        throw IoError(path + ": not a model checkpoint");
    }
    if (head.value("version", 0) != 1) {
        throw IoError(path + ": unsupported checkpoint version");
    }

    ModelSpec spec;
    spec.kind = kind_from_name(head.at("kind").get<std::string>());
    spec.n_nodes = head.at("n_nodes").get<int>();
    spec.n_ghosts = head.at("n_ghosts").get<int>();
    spec.hidden_f = head.at("hidden_f").get<int>();
    spec.hidden_phi = head.at("hidden_phi").get<int>();
    spec.has_field = head.at("has_field").get<bool>();
    spec.multi_step = head.at("multi_step").get<int>();
    spec.seed = head.at("seed").get<uint64_t>();

    LoadedModel lm;
    lm.model = GnnModel::make(spec);
    lm.epoch = head.value("epoch", 0);
    lm.adam_t = head.value("adam_t", 0);
    auto sc = head.at("scales").get<std::vector<double>>();
    lm.model.scales = {sc.at(0), sc.at(1), sc.at(2), sc.at(3), sc.at(4), sc.at(5)};
    auto bd = head.at("band");
    lm.model.band = {bd.at(0).get<double>(), bd.at(1).get<double>(), bd.at(2).get<bool>(),
                     bd.at(3).get<double>()};
    size_t pairs = head.at("pairs").get<size_t>();
    if (pairs > 0) {
        lm.model.pair_i.resize(pairs);
        lm.model.pair_j.resize(pairs);
        lm.model.a_vals = nn::Parameter(Mat::Zero(static_cast<Eigen::Index>(pairs), 1));
        lm.model.a_vals.row_table = true;
    }

    for (nn::Parameter* p : lm.model.params()) {
        p->m = Mat::Zero(p->value.rows(), p->value.cols());
        p->v = Mat::Zero(p->value.rows(), p->value.cols());
        for (Mat* mat : {&p->value, &p->m, &p->v}) {
            in.read(reinterpret_cast<char*>(mat->data()),
                    static_cast<std::streamsize>(mat->size() * sizeof(double)));
            if (static_cast<size_t>(in.gcount()) != mat->size() * sizeof(double)) {
                throw IoError(path + ": truncated checkpoint");
            }
        }
    }
    if (pairs > 0) {
        in.read(reinterpret_cast<char*>(lm.model.pair_i.data()),
                static_cast<std::streamsize>(pairs * sizeof(int32_t)));
        in.read(reinterpret_cast<char*>(lm.model.pair_j.data()),
                static_cast<std::streamsize>(pairs * sizeof(int32_t)));
        if (static_cast<size_t>(in.gcount()) != pairs * sizeof(int32_t)) {
            throw IoError(path + ": truncated checkpoint (support pairs)");
        }
    }
    return lm;
}

}  // namespace hdyn::gnn
