#include "hdyn/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>

namespace hdyn::gnn {

namespace fs = std::filesystem;

namespace {

ModelSpec spec_from(const Trajectory& data, const TrainConfig& cfg) {
    ModelSpec s;
    s.kind = data.config.kind;
    s.n_nodes = data.config.n_nodes();
    s.n_ghosts = is_moving(s.kind) ? cfg.ghosts : 0;
    s.hidden_f = cfg.hidden_f;
    s.hidden_phi = cfg.hidden_phi;
    s.has_field = data.config.field.has_value();
    s.multi_step = s.kind == SystemKind::Signaling ? cfg.multi_step : 1;
    s.seed = cfg.seed;
    return s;
}

// root-mean-square with a floor so empty or constant channels scale by 1
double rms_or_one(double sum_sq, int64_t count) {
    if (count == 0) return 1.0;
    double r = std::sqrt(sum_sq / static_cast<double>(count));
    return r > 1e-12 ? r : 1.0;
}

}  // namespace

Trainer::Trainer(const Trajectory& data, const TrainConfig& cfg)
    : data_(data), cfg_(cfg), model_(GnnModel::make(spec_from(data, cfg))) {
    model_.band = data.config.radius();
    if (cfg.train_d_min >= 0.0) model_.band.d_min = cfg.train_d_min;
    if (model_.spec.kind == SystemKind::Signaling) {
        if (data.conn.empty()) throw ConfigError("signaling training needs the coupling support");
        model_.set_support(data.conn, data.config.n);
    }
    fit_scales();
    adam_ = std::make_unique<nn::Adam>(model_.params(), nn::AdamConfig{.lr = cfg.lr});
    if (!cfg_.out_dir.empty()) fs::create_directories(cfg_.out_dir);
}

Trainer::Trainer(const Trajectory& data, const TrainConfig& cfg, const std::string& checkpoint)
    : data_(data), cfg_(cfg), model_(GnnModel::make(spec_from(data, cfg))) {
    LoadedModel lm = load_model(checkpoint);
    if (lm.model.spec.kind != model_.spec.kind || lm.model.spec.n_nodes != model_.spec.n_nodes) {
        throw ConfigError("checkpoint '" + checkpoint + "' does not match this dataset");
    }
    model_ = std::move(lm.model);
    epoch_ = lm.epoch;
    adam_ = std::make_unique<nn::Adam>(model_.params(), nn::AdamConfig{.lr = cfg.lr});
    adam_->set_t(lm.adam_t);
    if (!cfg_.out_dir.empty()) fs::create_directories(cfg_.out_dir);
}

void Trainer::fit_scales() {
    const SystemConfig& c = data_.config;
    FeatureScales& sc = model_.scales;
    sc.d = model_.band.d_max;
    sc.dx = model_.band.d_max;

    // deterministic subsample: stride the frames so at most ~200 per series
    // contribute, which is plenty for a stable scale estimate
    double tgt_ss = 0.0, vel_ss = 0.0, u_ss = 0.0, lap_ss = 0.0;
    int64_t tgt_n = 0, vel_n = 0, u_n = 0, lap_n = 0;
    int ch = is_moving(c.kind) ? 0 : field_arity(c.kind);
    for (const auto& frames : data_.series) {
        int last = static_cast<int>(frames.size()) - 2;
        if (last < 0) continue;
        int stride = std::max(1, (last + 1) / 200);
        for (int t = 0; t <= last; t += stride) {
            const Frame& a = frames[t];
            const Frame& b = frames[t + 1];
            if (is_moving(c.kind)) {
                for (int i = 0; i < c.n; ++i) {
                    Vec2 tg = c.kind == SystemKind::AttractionRepulsion
                                  ? a.vel[i]
                                  : (b.vel[i] - a.vel[i]) / c.dt;
                    tgt_ss += tg.x * tg.x + tg.y * tg.y;
                    tgt_n += 2;
                    vel_ss += a.vel[i].x * a.vel[i].x + a.vel[i].y * a.vel[i].y;
                    vel_n += 2;
                }
            } else if (is_mesh(c.kind)) {
                int n = c.n_nodes();
                bool wave = c.kind == SystemKind::Wave;
                for (int k = 0; k < ch; ++k) {
                    std::vector<double> u(n);
                    for (int i = 0; i < n; ++i) u[i] = a.field[static_cast<size_t>(i) * ch + k];
                    std::vector<double> lap = laplacian(data_.mesh, u);
                    for (int i = 0; i < n; ++i) {
                        u_ss += u[i] * u[i];
                        lap_ss += lap[i] * lap[i];
                    }
                    u_n += n;
                    lap_n += n;
                }
                for (int i = 0; i < n; ++i) {
                    if (data_.mesh.boundary[i]) continue;
                    if (wave) {
                        double tg = (b.field[2 * i + 1] - a.field[2 * i + 1]) / c.dt;
                        tgt_ss += tg * tg;
                        tgt_n += 1;
                    } else {
                        for (int k = 0; k < 3; ++k) {
                            double tg = (b.field[3 * i + k] - a.field[3 * i + k]) / c.dt;
                            tgt_ss += tg * tg;
                            tgt_n += 1;
                        }
                    }
                }
            } else {
                for (int i = 0; i < c.n; ++i) {
                    double tg = (b.field[i] - a.field[i]) / c.dt;
                    tgt_ss += tg * tg;
                    tgt_n += 1;
                    u_ss += a.field[i] * a.field[i];
                    u_n += 1;
                }
            }
        }
    }
    sc.target = rms_or_one(tgt_ss, tgt_n);
    sc.vel = rms_or_one(vel_ss, vel_n);
    sc.u = rms_or_one(u_ss, u_n);
    sc.lap = rms_or_one(lap_ss, lap_n);
}

std::vector<std::pair<int, int>> Trainer::enumerate_samples() const {
    int need_ahead = std::max(1, model_.spec.multi_step);
    std::vector<std::pair<int, int>> out;
    for (int s = 0; s < static_cast<int>(data_.series.size()); ++s) {
        int frames = static_cast<int>(data_.series[s].size());
        for (int t = 0; t + need_ahead < frames; ++t) out.emplace_back(s, t);
    }
    if (out.empty()) throw ConfigError("dataset too short to form training pairs");
    return out;
}

bool Trainer::run_one_epoch() {
    if (epoch_ >= cfg_.epochs) return false;
    auto tick = std::chrono::steady_clock::now();
    if (cfg_.bootstrap &&
        std::find(cfg_.bootstrap_epochs.begin(), cfg_.bootstrap_epochs.end(), epoch_) !=
            cfg_.bootstrap_epochs.end()) {
        bootstrap_embeddings();
    }

    // a fresh per-epoch stream keeps resumed runs on the same sample order
    Rng rng(cfg_.seed ^ (0x9e3779b97f4a7c15ULL * static_cast<uint64_t>(epoch_ + 1)));
    std::vector<std::pair<int, int>> samples = enumerate_samples();
    rng.shuffle(samples);

    AssembleOpts opts;
    opts.rng = &rng;
    opts.noise_sigma = cfg_.noise_sigma;
    bool rotate = rotation_invariant(model_.spec.kind) && !model_.spec.has_field;
    opts.n_rotations = rotate ? cfg_.n_rotations : 0;

    double loss_sum = 0.0;
    int64_t comp_sum = 0;
    int batches = 0;
    Tape tape;
    for (size_t at = 0; at < samples.size(); at += cfg_.batch) {
        if (cfg_.max_steps_per_epoch > 0 && batches >= cfg_.max_steps_per_epoch) break;
        size_t hi = std::min(samples.size(), at + cfg_.batch);
        std::vector<std::pair<int, int>> chunk(samples.begin() + at, samples.begin() + hi);
        BatchGraph g = assemble_batch(model_, data_, chunk, opts);
        Tape::Var loss = batch_loss(tape, model_, g, data_.config.dt);
        double lv = tape.val(loss)(0, 0);
        int64_t comps = 0;
        for (const Mat& t : g.target) comps += t.size();
        if (!std::isfinite(lv)) {
            throw std::runtime_error("training diverged: non-finite loss at epoch " +
                                     std::to_string(epoch_) + ", step " +
                                     std::to_string(batches) + " (mse so far " +
                                     std::to_string(loss_sum / std::max<int64_t>(1, comp_sum)) +
                                     ")");
        }
        tape.backward(loss);
        tape.reset();
        adam_->step();
        loss_sum += lv;
        comp_sum += comps;
        ++batches;
    }

    EpochLog e;
    e.epoch = epoch_;
    e.loss = comp_sum > 0 ? loss_sum / static_cast<double>(comp_sum) : 0.0;
    e.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - tick).count();
    log_.push_back(e);
    ++epoch_;
    write_epoch_outputs(e);
    return true;
}

void Trainer::run() {
    while (run_one_epoch()) {
    }
}

bool snap_embedding_clusters(Mat& emb, int n_rows, double threshold, double min_frac) {
    if (n_rows < 2) return false;

    // single-linkage components at the threshold distance
    std::vector<int> parent(n_rows);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int i) {
        while (parent[i] != i) i = parent[i] = parent[parent[i]];
        return i;
    };
    double thr2 = threshold * threshold;
    for (int i = 0; i < n_rows; ++i) {
        for (int j = i + 1; j < n_rows; ++j) {
            double dx = emb(i, 0) - emb(j, 0);
            double dy = emb(i, 1) - emb(j, 1);
            if (dx * dx + dy * dy < thr2) parent[find(i)] = find(j);
        }
    }
    std::vector<std::vector<int>> groups(n_rows);
    for (int i = 0; i < n_rows; ++i) groups[find(i)].push_back(i);

    // snap every big-enough component to its per-dimension median; stragglers
    // keep their positions and can join a component later
    int min_size = std::max(2, static_cast<int>(std::ceil(min_frac * n_rows)));
    bool changed = false;
    for (const auto& members : groups) {
        if (static_cast<int>(members.size()) < min_size) continue;
        for (int d = 0; d < 2; ++d) {
            std::vector<double> vals;
            vals.reserve(members.size());
            for (int i : members) vals.push_back(emb(i, d));
            size_t mid = vals.size() / 2;
            std::nth_element(vals.begin(), vals.begin() + mid, vals.end());
            double med = vals[mid];
            for (int i : members) emb(i, d) = med;
        }
        changed = true;
    }
    return changed;
}

void Trainer::bootstrap_embeddings() {
    if (snap_embedding_clusters(model_.embed.value, model_.spec.n_nodes,
                                cfg_.bootstrap_threshold, cfg_.bootstrap_min_frac)) {
        adam_->reset_moments(&model_.embed);
    }
}

void Trainer::write_epoch_outputs(const EpochLog& e) {
    if (cfg_.out_dir.empty()) return;
    fs::path dir(cfg_.out_dir);
    {
        std::ofstream csv(dir / "metrics.csv", std::ios::app);
        if (e.epoch == 0) csv << "epoch,step,loss,seconds\n";
        csv << e.epoch << ',' << adam_->t() << ',' << std::setprecision(17) << e.loss
            << ',' << std::setprecision(6) << e.seconds << '\n';
    }
    save_model(model_, (dir / "checkpoint.bin").string(), epoch_, adam_->t());
    if (cfg_.save_snapshots) {
        char name[32];
        std::snprintf(name, sizeof(name), "embed_%03d.csv", e.epoch);
        std::ofstream snap(dir / name);
        snap << "node,e0,e1\n";
        for (int i = 0; i < model_.spec.n_nodes; ++i) {
            snap << i << ',' << model_.embed.value(i, 0) << ',' << model_.embed.value(i, 1)
                 << '\n';
        }
    }
}

}  // namespace hdyn::gnn
