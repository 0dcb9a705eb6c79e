// Full-scale acceptance ladder. Each criterion builds (or reloads) a
// reference dataset, trains (or reloads) a model on it, and checks the
// headline recovery claims end to end, printing one [PASS]/[FAIL] line per
// criterion. Heavy artifacts are cached under the work directory, keyed by
// their generating config, so a rerun only redoes the analysis.
#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "hdyn/config_json.hpp"
#include "hdyn/dataset.hpp"
#include "hdyn/recover.hpp"
#include "hdyn/report.hpp"
#include "hdyn/simulate.hpp"
#include "hdyn/train.hpp"

using namespace hdyn;
namespace fs = std::filesystem;
using nlohmann::json;
using Mat = Eigen::MatrixXd;

namespace {

fs::path g_work;

double now_s() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

template <class... A>
std::string cat(A&&... a) {
    std::ostringstream o;
    o.precision(6);
    (o << ... << a);
    return o.str();
}

void detail(const std::string& msg) {
    std::printf("  - %s\n", msg.c_str());
    std::fflush(stdout);
}

// every gate goes through here so the transcript shows each measured number
// next to its threshold
bool expect(bool ok, const std::string& msg) {
    std::printf("  - %s [%s]\n", msg.c_str(), ok ? "ok" : "FAIL");
    std::fflush(stdout);
    return ok;
}

double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    double hi = v[mid];
    if (v.size() % 2 == 1) return hi;
    std::nth_element(v.begin(), v.begin() + mid - 1, v.begin() + mid);
    return 0.5 * (v[mid - 1] + hi);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---------------------------------------------------------------- caching

// Simulate a named dataset, or reload it when the stored config still matches.
Trajectory ensure_dataset(const std::string& name, const SystemConfig& cfg) {
    fs::path dir = g_work / name;
    fs::path data_path = dir / "data.hdyn";
    fs::path cfg_path = dir / "config.json";
    std::string want = config_to_json(cfg).dump(2);
    if (fs::exists(data_path) && fs::exists(cfg_path) && slurp(cfg_path) == want) {
        detail(cat("dataset ", name, ": cached"));
        return read_dataset(data_path.string());
    }
    fs::remove_all(dir);
    fs::create_directories(dir);
    double t0 = now_s();
    Trajectory traj = simulate(cfg);
    write_dataset(traj, data_path.string());
    std::ofstream(cfg_path) << want;
    detail(cat("dataset ", name, ": simulated ", cfg.n_nodes(), " nodes x ", traj.n_frames(),
               " frames x ", cfg.series, " series in ", now_s() - t0, " s"));
    return traj;
}

struct TrainedModel {
    gnn::GnnModel model;
    std::vector<gnn::EpochLog> log;  // parsed back from metrics.csv
};

json train_guard(const gnn::TrainConfig& tc, const SystemConfig& data_cfg) {
    return {{"epochs", tc.epochs},
            {"batch", tc.batch},
            {"lr", tc.lr},
            {"n_rotations", tc.n_rotations},
            {"noise_sigma", tc.noise_sigma},
            {"ghosts", tc.ghosts},
            {"hidden_f", tc.hidden_f},
            {"hidden_phi", tc.hidden_phi},
            {"multi_step", tc.multi_step},
            {"train_d_min", tc.train_d_min},
            {"max_steps_per_epoch", tc.max_steps_per_epoch},
            {"bootstrap", tc.bootstrap},
            {"bootstrap_epochs", tc.bootstrap_epochs},
            {"bootstrap_threshold", tc.bootstrap_threshold},
            {"bootstrap_min_frac", tc.bootstrap_min_frac},
            {"seed", tc.seed},
            {"data", config_to_json(data_cfg)}};
}

std::vector<gnn::EpochLog> read_metrics(const fs::path& dir) {
    std::vector<gnn::EpochLog> log;
    std::ifstream in(dir / "metrics.csv");
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || !std::isdigit(static_cast<unsigned char>(line[0]))) continue;
        gnn::EpochLog e;
        std::istringstream row(line);
        char comma;
        long long step = 0;
        row >> e.epoch >> comma >> step >> comma >> e.loss >> comma >> e.seconds;
        if (row) log.push_back(e);
    }
    return log;
}

// Train a named model to tc.epochs, resuming a cached checkpoint when the
// stored training config still matches, retraining from scratch otherwise.
TrainedModel ensure_model(const Trajectory& data, gnn::TrainConfig tc, const std::string& name) {
    fs::path dir = g_work / name;
    tc.out_dir = dir.string();
    tc.save_snapshots = false;
    std::string want = train_guard(tc, data.config).dump(2);
    fs::path guard_path = dir / "train_config.json";
    fs::path ckpt = dir / "checkpoint.bin";

    std::unique_ptr<gnn::Trainer> tr;
    if (fs::exists(guard_path) && fs::exists(ckpt) && slurp(guard_path) == want) {
        try {
            tr = std::make_unique<gnn::Trainer>(data, tc, ckpt.string());
        } catch (const std::exception& e) {
            detail(cat("model ", name, ": cached checkpoint unusable (", e.what(),
                       "), retraining"));
        }
    }
    if (!tr) {
        fs::remove_all(dir);
        fs::create_directories(dir);
        std::ofstream(guard_path) << want;
        tr = std::make_unique<gnn::Trainer>(data, tc);
    }
    int start_epoch = tr->epoch();
    double t0 = now_s();
    tr->run();
    TrainedModel out{std::move(tr->model()), read_metrics(dir)};
    double loss = out.log.empty() ? std::nan("") : out.log.back().loss;
    if (tr->epoch() > start_epoch) {
        detail(cat("model ", name, ": trained epochs ", start_epoch + 1, "-", tr->epoch(),
                   " in ", now_s() - t0, " s (final loss ", loss, ")"));
    } else {
        detail(cat("model ", name, ": cached at epoch ", tr->epoch(), " (final loss ", loss,
                   ")"));
    }
    return out;
}

// ---------------------------------------------------------------- fixtures

// 600 particles, three parameter sets mixing short- and long-range kernels.
SystemConfig att600_config() {
    SystemConfig c;
    c.kind = SystemKind::AttractionRepulsion;
    c.n = 600;
    c.steps = 250;
    c.dt = 0.005;
    c.seed = 1001;
    c.d_min = 0.002;
    c.d_max = 0.075;
    c.periodic = true;
    c.box = 1.0;
    c.latents.types = {
        {{"a", 2.0}, {"b", 1.0}, {"c", 1.0}, {"d", 2.0}},
        {{"a", 1.0}, {"b", 2.0}, {"c", 2.0}, {"d", 1.0}},
        {{"a", 1.5}, {"b", 1.5}, {"c", 0.8}, {"d", 1.0}},
    };
    return c;
}

gnn::TrainConfig att600_train() {
    gnn::TrainConfig tc;
    tc.epochs = 20;
    tc.bootstrap = true;
    tc.seed = 7;
    return tc;
}

// Orbital disk of 240 bodies drawn from eight masses. Total mass is chosen so
// the disk completes roughly one revolution over the recorded window.
SystemConfig grav240_config() {
    SystemConfig c;
    c.kind = SystemKind::Gravity;
    c.n = 240;
    c.steps = 500;
    c.dt = 1e-3;
    c.seed = 1002;
    c.d_min = 0.005;
    c.d_max = 0.15;
    for (int k = 1; k <= 8; ++k) c.latents.types.push_back({{"m", 0.01 * k}});
    c.init.layout = "disk";
    c.init.orbital = true;
    c.init.speed = 4.0;
    return c;
}

gnn::TrainConfig grav240_train() {
    gnn::TrainConfig tc;
    tc.epochs = 16;
    tc.max_steps_per_epoch = 24;
    tc.train_d_min = 0.02;  // keep the near-singular encounters out of the loss
    tc.bootstrap = true;
    tc.seed = 7;
    return tc;
}

SystemConfig coul240_config() {
    SystemConfig c;
    c.kind = SystemKind::Coulomb;
    c.n = 240;
    c.steps = 500;
    c.dt = 1e-4;
    c.seed = 1003;
    c.d_min = 0.005;
    c.d_max = 0.15;
    c.periodic = true;
    c.box = 1.0;
    c.latents.types = {{{"q", -1.0}}, {{"q", 1.0}}, {{"q", 2.0}}};
    return c;
}

gnn::TrainConfig coul240_train() {
    gnn::TrainConfig tc;
    tc.epochs = 16;
    tc.max_steps_per_epoch = 20;
    tc.train_d_min = 0.02;
    tc.bootstrap = true;
    tc.seed = 7;
    return tc;
}

// 448 flockers drawn from the eight corners of the (alignment, cohesion,
// separation) cube.
SystemConfig boids448_config() {
    SystemConfig c;
    c.kind = SystemKind::Boids;
    c.n = 448;
    c.steps = 2000;
    c.dt = 0.01;
    c.seed = 1004;
    c.d_min = 0.001;
    c.d_max = 0.08;
    c.periodic = true;
    c.box = 1.0;
    for (double a : {0.5, 1.5}) {
        for (double coh : {1.0, 2.0}) {
            for (double s : {0.02, 0.06}) {
                c.latents.types.push_back({{"a", a}, {"c", coh}, {"s", s}});
            }
        }
    }
    c.init.speed = 0.1;
    return c;
}

gnn::TrainConfig boids448_train() {
    gnn::TrainConfig tc;
    tc.epochs = 16;
    tc.max_steps_per_epoch = 25;
    tc.bootstrap = true;
    tc.seed = 7;
    return tc;
}

// 32x32 membrane: smooth stiffness bumps over a soft background plus a
// sound-proof block where the propagation speed is exactly zero.
SystemConfig wave32_config() {
    SystemConfig c;
    c.kind = SystemKind::Wave;
    c.mesh_side = 32;
    c.steps = 2000;
    c.dt = 0.05;
    c.seed = 1005;
    c.init.pulses = 4;
    std::vector<double> a(32 * 32);
    for (int r = 0; r < 32; ++r) {
        for (int col = 0; col < 32; ++col) {
            double g1 = std::exp(-((r - 10.0) * (r - 10.0) + (col - 8.0) * (col - 8.0)) /
                                 (2.0 * 4.0 * 4.0));
            double g2 = std::exp(-((r - 22.0) * (r - 22.0) + (col - 24.0) * (col - 24.0)) /
                                 (2.0 * 5.0 * 5.0));
            a[r * 32 + col] = 0.4 + 1.2 * g1 + 2.0 * g2;
        }
    }
    for (int r = 14; r <= 17; ++r) {
        for (int col = 4; col <= 7; ++col) a[r * 32 + col] = 0.0;
    }
    c.latents.patterns["a"] = std::move(a);
    return c;
}

gnn::TrainConfig wave32_train() {
    gnn::TrainConfig tc;
    tc.epochs = 20;
    tc.max_steps_per_epoch = 100;
    tc.seed = 7;
    return tc;
}

// Quadrants of four diffusion rates under the cyclic three-species reaction.
SystemConfig rps32_config() {
    SystemConfig c;
    c.kind = SystemKind::Rps;
    c.mesh_side = 32;
    c.steps = 2000;
    c.dt = 0.05;
    c.seed = 1006;
    c.beta = 0.7;
    std::vector<double> a(32 * 32);
    const double rate[4] = {0.6, 1.1, 1.6, 2.1};
    for (int r = 0; r < 32; ++r) {
        for (int col = 0; col < 32; ++col) {
            a[r * 32 + col] = rate[(r / 16) * 2 + (col / 16)];
        }
    }
    c.latents.patterns["a"] = std::move(a);
    return c;
}

gnn::TrainConfig rps32_train() {
    gnn::TrainConfig tc;
    tc.epochs = 20;
    tc.max_steps_per_epoch = 100;
    tc.seed = 7;
    return tc;
}

// 200-node random network (~3600 directed edges), two cell programs, twenty
// independent runs from random initial expression.
SystemConfig sig200_config() {
    SystemConfig c;
    c.kind = SystemKind::Signaling;
    c.n = 200;
    c.steps = 400;
    c.series = 20;
    c.dt = 0.01;
    c.seed = 1007;
    c.edge_prob = 0.0905;
    c.latents.types = {
        {{"b", 0.8}, {"c", 1.2}},
        {{"b", 1.5}, {"c", 0.5}},
    };
    c.init.field_lo = -1.0;
    c.init.field_hi = 1.0;
    return c;
}

gnn::TrainConfig sig200_train() {
    gnn::TrainConfig tc;
    tc.epochs = 20;
    tc.max_steps_per_epoch = 120;
    tc.multi_step = 2;
    tc.seed = 7;
    return tc;
}

// The attraction mixture moving through a hidden multiplicative emitter field.
SystemConfig att_field_config() {
    SystemConfig c = att600_config();
    c.n = 400;
    c.seed = 1008;
    FieldSpec f;
    f.n_stationary = 256;
    f.image_side = 64;
    f.image.resize(64 * 64);
    for (int r = 0; r < 64; ++r) {
        for (int col = 0; col < 64; ++col) {
            double x = (col + 0.5) / 64.0;
            double y = (r + 0.5) / 64.0;
            f.image[r * 64 + col] =
                0.5 + 0.5 * std::sin(2.0 * M_PI * x) * std::sin(2.0 * M_PI * y);
        }
    }
    c.field = std::move(f);
    return c;
}

// ---------------------------------------------------------------- criteria

// 1: the whole unit ladder holds in under a minute, and the standard wirings
// carry exactly the promised parameter counts.
bool crit_unit_suite() {
    fs::path self = fs::read_symlink("/proc/self/exe");
    fs::path tests = self.parent_path() / "hdyn_tests";
    fs::path cli = self.parent_path().parent_path() / "tools" / "hdyn";
    setenv("HDYN_CLI", cli.c_str(), 1);
    fs::path log = g_work / "unit_suite.log";
    double t0 = now_s();
    int rc = std::system(cat(tests.string(), " > ", log.string(), " 2>&1").c_str());
    double secs = now_s() - t0;
    bool ok = expect(rc == 0, cat("unit suite exit status ", rc, " == 0 (log: ", log.string(), ")"));
    ok &= expect(secs < 60.0, cat("unit suite wall time ", secs, " s < 60 s"));

    gnn::ModelSpec ms;
    ms.n_nodes = 2;
    ms.seed = 1;
    ms.kind = SystemKind::AttractionRepulsion;
    gnn::GnnModel att = gnn::GnnModel::make(ms);
    ok &= expect(att.f.n_params() == 50562,
                 cat("attraction message net: ", att.f.n_params(), " parameters == 50562"));
    ms.kind = SystemKind::Wave;
    gnn::GnnModel wave = gnn::GnnModel::make(ms);
    ok &= expect(wave.phi.n_params() == 897,
                 cat("wave node net: ", wave.phi.n_params(), " parameters == 897"));
    ms.kind = SystemKind::Signaling;
    gnn::GnnModel sig = gnn::GnnModel::make(ms);
    ok &= expect(sig.phi.n_params() == 4481,
                 cat("signaling node net: ", sig.phi.n_params(), " parameters == 4481"));
    ok &= expect(sig.f.n_params() == 4353,
                 cat("signaling message net: ", sig.f.n_params(), " parameters == 4353"));
    ms.kind = SystemKind::AttractionRepulsion;
    ms.has_field = true;
    gnn::GnnModel fld = gnn::GnnModel::make(ms);
    ok &= expect(fld.field_net.n_params() == 83201,
                 cat("emitter field net: ", fld.field_net.n_params(), " parameters == 83201"));
    return ok;
}

// 2: simulator invariants that hold to machine precision.
bool crit_conservation() {
    bool ok = true;
    {
        // gravity sums antisymmetric pair forces, so total momentum is frozen
        SystemConfig c;
        c.kind = SystemKind::Gravity;
        c.n = 100;
        c.steps = 1000;
        c.dt = 1e-3;
        c.seed = 77;
        c.d_min = 0.05;
        c.d_max = 1.0;
        c.latents.ranges["m"] = {0.5, 2.0};
        c.init.layout = "disk";
        c.init.orbital = true;
        c.init.speed = 0.5;
        Trajectory traj = simulate(c);
        auto m = traj.latents.col("m");
        Vec2 p0{};
        double drift = 0.0;
        for (size_t k = 0; k < traj.series[0].size(); ++k) {
            Vec2 p{};
            for (int i = 0; i < c.n; ++i) p += traj.series[0][k].vel[i] * m[i];
            if (k == 0) p0 = p;
            drift = std::max(drift, (p - p0).norm());
        }
        ok &= expect(drift < 1e-9, cat("gravity momentum drift ", drift, " < 1e-9 over 1000 steps"));
    }
    {
        // the uniform state u = v = w = 1/(3+beta) is a fixed point of the
        // cyclic reaction, and a constant field has zero laplacian
        double beta = 0.8;
        double s = 1.0 / (3.0 + beta);
        Trajectory ctx;
        ctx.config.kind = SystemKind::Rps;
        ctx.config.mesh_side = 16;
        ctx.config.dt = 0.05;
        ctx.config.beta = beta;
        ctx.mesh = GridMesh::make(16);
        int n = ctx.config.n_nodes();
        ctx.latents.type.assign(n, 0);
        ctx.latents.add("a", n).assign(n, 1.0);
        Frame f0;
        f0.field.assign(3 * static_cast<size_t>(n), s);
        std::vector<Frame> frames = truth_rollout(ctx, f0, 100);
        double dev = 0.0;
        for (const Frame& f : frames) {
            for (double v : f.field) dev = std::max(dev, std::fabs(v - s));
        }
        ok &= expect(dev < 1e-12,
                     cat("rps uniform-state deviation ", dev, " < 1e-12 over 100 steps"));
    }
    {
        // with zero coupling and zero tanh gain, signaling is forward-Euler
        // exponential decay: u_k = u_0 (1 - b dt)^k
        Trajectory ctx;
        ctx.config.kind = SystemKind::Signaling;
        ctx.config.n = 6;
        ctx.config.dt = 0.01;
        ctx.conn.assign(36, 0.0);
        ctx.latents.type.assign(6, 0);
        ctx.latents.add("c", 6);
        std::vector<double>& b = ctx.latents.add("b", 6);
        for (int i = 0; i < 6; ++i) b[i] = 0.2 + 0.1 * i;
        Frame f0;
        f0.field = {1.0, -0.7, 0.4, -1.0, 0.25, 0.9};
        std::vector<Frame> frames = truth_rollout(ctx, f0, 500);
        double dev = 0.0;
        for (size_t k = 0; k < frames.size(); ++k) {
            for (int i = 0; i < 6; ++i) {
                double want = f0.field[i] * std::pow(1.0 - b[i] * ctx.config.dt,
                                                     static_cast<double>(k));
                dev = std::max(dev, std::fabs(frames[k].field[i] - want));
            }
        }
        ok &= expect(dev < 1e-12,
                     cat("signaling closed-form decay deviation ", dev, " < 1e-12 over 500 steps"));
    }
    return ok;
}

// 3: the flagship attraction-repulsion run — type clustering, recovered
// interaction laws, and closed-loop rollout.
bool crit_attraction() {
    Trajectory data = ensure_dataset("att600", att600_config());
    TrainedModel tm = ensure_model(data, att600_train(), "att600_model");
    gnn::GnnModel& m = tm.model;
    report::AnalyzeOptions opt;
    bool ok = true;

    json cl = report::run_cluster(m, data, opt);
    double acc_prof = cl["profile"]["accuracy"].get<double>();
    double acc_emb = cl["embedding"]["accuracy"].get<double>();
    ok &= expect(acc_prof >= 0.95, cat("profile clustering accuracy ", acc_prof,
                                       " >= 0.95 (embedding clustering: ", acc_emb, ")"));

    std::vector<double> probe(200);
    for (int i = 0; i < 200; ++i) probe[i] = 0.005 + (0.075 - 0.005) * i / 199.0;
    Mat prof = gnn::node_profiles(m, probe);
    Mat truth = report::truth_profiles(data, m, probe);
    double mean_rmse = 0.0;
    for (Eigen::Index r = 0; r < prof.rows(); ++r) {
        mean_rmse += std::sqrt((prof.row(r) - truth.row(r)).squaredNorm() / prof.cols());
    }
    mean_rmse /= static_cast<double>(prof.rows());
    ok &= expect(mean_rmse <= 5e-3,
                 cat("interaction-law RMSE ", mean_rmse, " <= 5e-3 over d in [0.005, 0.075]"));

    json met = report::run_metrics(m, data, opt);
    double rmse = met["rmse"].get<double>();
    ok &= expect(rmse <= 1e-2, cat("250-step rollout RMSE ", rmse, " <= 1e-2"));
    return ok;
}

// 4: gravity — inverse-square exponent, per-node masses, distributional
// rollout fidelity.
bool crit_gravity() {
    Trajectory data = ensure_dataset("grav240", grav240_config());
    TrainedModel tm = ensure_model(data, grav240_train(), "grav240_model");
    report::AnalyzeOptions opt;
    bool ok = true;

    json fit = report::run_fit(tm.model, data, opt);
    double expn = fit["mean_exponent"].get<double>();
    double slope = fit["slope"].get<double>();
    double r2 = fit["r2"].get<double>();
    ok &= expect(std::fabs(expn + 2.0) <= 0.1,
                 cat("mean interaction exponent ", expn, " within -2 +- 0.1"));
    ok &= expect(slope >= 0.9 && slope <= 1.1,
                 cat("recovered-vs-true mass slope ", slope, " in [0.9, 1.1]"));
    ok &= expect(r2 >= 0.95, cat("mass fit r2 ", r2, " >= 0.95"));

    opt.rollout_steps = 500;
    json met = report::run_metrics(tm.model, data, opt);
    double sink = met["final_sinkhorn"].get<double>();
    ok &= expect(sink <= 5e-2,
                 cat("sinkhorn divergence after 500 rolled-out steps ", sink, " <= 5e-2"));
    return ok;
}

// 5: coulomb — per-node charges from the rank-1 structure of pair products.
bool crit_coulomb() {
    Trajectory data = ensure_dataset("coul240", coul240_config());
    TrainedModel tm = ensure_model(data, coul240_train(), "coul240_model");
    report::AnalyzeOptions opt;
    json fit = report::run_fit(tm.model, data, opt);
    double err = fit["max_error"].get<double>();
    detail(cat("charge scatter slope ", fit["slope"].get<double>(), ", r2 ",
               fit["r2"].get<double>()));
    return expect(err <= 5e-2, cat("worst charge error ", err,
                                   " <= 5e-2 after sign canonicalization"));
}

// 6: boids — the eight flocking programs, separated and quantified.
bool crit_boids() {
    Trajectory data = ensure_dataset("boids448", boids448_config());
    TrainedModel tm = ensure_model(data, boids448_train(), "boids448_model");
    report::AnalyzeOptions opt;
    bool ok = true;

    json cl = report::run_cluster(tm.model, data, opt);
    double acc = cl["embedding"]["accuracy"].get<double>();
    ok &= expect(acc >= 0.9, cat("embedding clustering accuracy ", acc, " >= 0.9"));

    opt.fit_samples = 5000;
    json fit = report::run_fit(tm.model, data, opt);
    for (const json& t : fit["types"]) {
        detail(cat("type ", t["type"].get<int>(), ": worst relative error ",
                   t["max_rel_error"].get<double>(), " over (cohesion, alignment, separation)"));
    }
    int good = fit["types_within_25pct"].get<int>();
    ok &= expect(good == 8, cat(good, "/8 types within 25% on all three coefficients"));
    return ok;
}

// 7: wave — the per-node stiffness field, including the silent block.
bool crit_wave() {
    Trajectory data = ensure_dataset("wave32", wave32_config());
    TrainedModel tm = ensure_model(data, wave32_train(), "wave32_model");
    report::AnalyzeOptions opt;
    json fit = report::run_fit(tm.model, data, opt);
    double slope = fit["slope"].get<double>();
    double r2 = fit["r2"].get<double>();
    double obstacle = fit["obstacle_max_recovered"].get<double>();
    bool ok = expect(slope >= 0.85 && slope <= 1.1,
                     cat("stiffness slope ", slope, " in [0.85, 1.1]"));
    ok &= expect(r2 >= 0.9, cat("stiffness fit r2 ", r2, " >= 0.9"));
    ok &= expect(obstacle < 0.05,
                 cat("worst recovered stiffness inside the silent block ", obstacle, " < 0.05"));
    return ok;
}

// 8: rps — diffusion patches via embedding clusters plus the pooled reaction
// polynomial.
bool crit_rps() {
    Trajectory data = ensure_dataset("rps32", rps32_config());
    TrainedModel tm = ensure_model(data, rps32_train(), "rps32_model");
    report::AnalyzeOptions opt;
    json fit = report::run_fit(tm.model, data, opt);
    int nc = fit["interior_clusters"].get<int>();
    double slope = fit["slope"].get<double>();
    double r2 = fit["r2"].get<double>();
    detail(cat("coefficient scatter holds ", fit["n_coefficients"].get<int>(),
               " recovered-vs-true pairs"));
    bool ok = expect(nc >= 4, cat("interior embedding clusters ", nc, " >= 4"));
    ok &= expect(slope >= 0.9, cat("coefficient scatter slope ", slope, " >= 0.9"));
    ok &= expect(r2 >= 0.9, cat("coefficient scatter r2 ", r2, " >= 0.9"));
    return ok;
}

// 9: signaling — the coupling matrix from two-step training, and the failure
// of one-step training on the same data.
bool crit_signaling() {
    Trajectory data = ensure_dataset("sig200", sig200_config());
    TrainedModel tm = ensure_model(data, sig200_train(), "sig200_model");
    report::AnalyzeOptions opt;
    bool ok = true;

    json fit = report::run_fit(tm.model, data, opt);
    double slope = fit["coupling"]["slope"].get<double>();
    double r2 = fit["coupling"]["r2"].get<double>();
    detail(cat("message amplitude ", fit["msg_gain"].get<double>(), ", type split accuracy ",
               fit["type_split_accuracy"].get<double>()));
    ok &= expect(slope >= 0.9 && slope <= 1.1,
                 cat("coupling weight slope ", slope, " in [0.9, 1.1] after scale correction"));
    ok &= expect(r2 >= 0.95, cat("coupling weight r2 ", r2, " >= 0.95"));

    // the same data trained with the one-step loss must go nowhere
    gnn::TrainConfig tc1 = sig200_train();
    tc1.epochs = 5;
    tc1.multi_step = 1;
    bool stuck = false;
    std::string note;
    try {
        TrainedModel one = ensure_model(data, tc1, "sig200_onestep");
        double first = one.log.front().loss;
        double last = one.log.back().loss;
        stuck = last >= first;
        note = cat("one-step loss went ", first, " -> ", last, " over 5 epochs (must not improve)");
    } catch (const std::runtime_error& e) {
        if (std::string(e.what()).find("diverged") == std::string::npos) throw;
        stuck = true;
        note = cat("one-step training diverged outright (", e.what(), ")");
    }
    ok &= expect(stuck, note);
    return ok;
}

// 10: robustness — heavy target noise, then a hidden emitter field.
bool crit_noise_and_field() {
    bool ok = true;
    {
        Trajectory data = ensure_dataset("att600", att600_config());
        gnn::TrainConfig tc = att600_train();
        tc.noise_sigma = 0.3;
        TrainedModel tm = ensure_model(data, tc, "att600_noise");
        report::AnalyzeOptions opt;
        json cl = report::run_cluster(tm.model, data, opt);
        double acc = cl["profile"]["accuracy"].get<double>();
        ok &= expect(acc >= 0.9,
                     cat("clustering accuracy under 30% target noise ", acc, " >= 0.9"));
    }
    {
        Trajectory data = ensure_dataset("att_field", att_field_config());
        TrainedModel tm = ensure_model(data, att600_train(), "att_field_model");
        Mat img = analyze::field_image(tm.model, 64, 0.0);
        const FieldSpec& f = *data.config.field;
        std::vector<double> got(f.image.size());
        for (int r = 0; r < 64; ++r) {
            for (int col = 0; col < 64; ++col) got[r * 64 + col] = img(r, col);
        }
        double r = analyze::pearson(got, f.image);
        ok &= expect(r >= 0.8, cat("hidden emitter field Pearson correlation ", r, " >= 0.8"));
    }
    return ok;
}

// 11: decomposition — rolling out one purified sub-population must match a
// fresh simulation of that type alone, from the same starting state.
bool crit_decompose() {
    SystemConfig base = att600_config();
    Trajectory data = ensure_dataset("att600", base);
    TrainedModel tm = ensure_model(data, att600_train(), "att600_model");
    gnn::GnnModel& m = tm.model;
    std::vector<int32_t> truth = report::truth_type_labels(data);
    bool ok = true;

    for (int t = 0; t < static_cast<int>(base.latents.types.size()); ++t) {
        std::vector<int> members;
        for (size_t i = 0; i < truth.size(); ++i) {
            if (truth[i] == t) members.push_back(static_cast<int>(i));
        }
        int nm = static_cast<int>(members.size());
        std::vector<double> e0s, e1s;
        for (int i : members) {
            e0s.push_back(m.embed.value(i, 0));
            e1s.push_back(m.embed.value(i, 1));
        }
        double e0 = median_of(e0s), e1 = median_of(e1s);

        // matched pure-type reference system, started from the members' state
        Trajectory ctx;
        ctx.config = base;
        ctx.config.n = nm;
        ctx.config.series = 1;
        ctx.latents.type.assign(nm, 0);
        for (const auto& [name, val] : base.latents.types[t]) {
            ctx.latents.add(name, nm).assign(nm, val);
        }
        Frame start;
        for (int i : members) {
            start.pos.push_back(data.series[0][0].pos[i]);
            start.vel.push_back(data.series[0][0].vel[i]);
        }
        std::vector<Frame> want = truth_rollout(ctx, start, 250);

        gnn::ModelSpec ss = m.spec;
        ss.n_nodes = nm;
        ss.n_ghosts = 0;
        gnn::GnnModel sub = gnn::GnnModel::make(ss);
        sub.scales = m.scales;
        sub.band = m.band;
        sub.f = m.f;
        sub.phi = m.phi;
        sub.field_net = m.field_net;
        std::vector<Frame> got = report::purified_rollout(sub, ctx, start, 250, e0, e1);

        double total = 0.0;
        for (size_t k = 0; k < want.size(); ++k) {
            double fr = report::frame_rmse(ctx.config, want[k], got[k]);
            total += fr * fr;
        }
        double rmse = std::sqrt(total / static_cast<double>(want.size()));
        ok &= expect(rmse <= 2e-2, cat("type ", t, " (", nm, " particles): purified rollout RMSE ",
                                       rmse, " <= 2e-2 over 250 steps"));
    }
    return ok;
}

struct Criterion {
    int id;
    const char* label;
    bool (*fn)();
};

const Criterion kCriteria[] = {
    {1, "unit oracles and parameter counts", crit_unit_suite},
    {2, "simulator conservation and closed-form invariants", crit_conservation},
    {3, "attraction-repulsion recovery at scale", crit_attraction},
    {4, "gravity mass recovery", crit_gravity},
    {5, "coulomb charge recovery", crit_coulomb},
    {6, "boids coefficient recovery", crit_boids},
    {7, "wave stiffness-field recovery", crit_wave},
    {8, "rps diffusion and reaction recovery", crit_rps},
    {9, "signaling coupling recovery", crit_signaling},
    {10, "noise robustness and hidden-field recovery", crit_noise_and_field},
    {11, "purified rollouts match single-type reruns", crit_decompose},
};

}  // namespace

int main(int argc, char** argv) {
#if defined(__GLIBC__)
    // large Eigen temporaries otherwise round-trip through mmap on every
    // training batch, roughly doubling wall time in system calls
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
    CLI::App app{"full-scale acceptance ladder for the heterogeneous-dynamics toolkit"};
    int criterion = 0;
    std::string work = "acceptance_work";
    if (const char* env = std::getenv("HDYN_ACCEPT_DIR")) work = env;
    app.add_option("--criterion", criterion, "run a single criterion (1-11); 0 runs all")
        ->check(CLI::Range(0, 11));
    app.add_option("--work", work, "cache directory for datasets and trained models");
    CLI11_PARSE(app, argc, argv);
    g_work = fs::absolute(work);
    fs::create_directories(g_work);

    int failed = 0;
    for (const Criterion& c : kCriteria) {
        if (criterion != 0 && c.id != criterion) continue;
        std::printf("criterion %d: %s\n", c.id, c.label);
        std::fflush(stdout);
        double t0 = now_s();
        bool ok = false;
        try {
            ok = c.fn();
        } catch (const std::exception& e) {
            detail(cat("unhandled exception: ", e.what()));
        }
        std::printf("[%s] criterion %d: %s (%.1f s)\n", ok ? "PASS" : "FAIL", c.id, c.label,
                    now_s() - t0);
        std::fflush(stdout);
        if (!ok) ++failed;
    }
    return failed == 0 ? 0 : 1;
}
