#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include <CLI11.hpp>
#include <Eigen/Core>
#include <json.hpp>
#include <openssl/evp.h>

#include "hdyn/analyze.hpp"
#include "hdyn/config_json.hpp"
#include "hdyn/dataset.hpp"
#include "hdyn/report.hpp"
#include "hdyn/simulate.hpp"
#include "hdyn/train.hpp"

#ifndef HDYN_VERSION
#define HDYN_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hdyn;

namespace {

// Missing inputs are usage errors (exit 2), not I/O failures: the user named
// a file that is not there.
std::string read_input_bytes(const std::string& path) {
    if (!fs::exists(path)) throw ConfigError("no such file: " + path);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string sha256_hex(const std::string& bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr);
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[md[i] >> 4]);
        out.push_back(hex[md[i] & 0xf]);
    }
    return out;
}

std::string iso_utc_now() {
    auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

struct InputRecord {
    std::string path;
    std::string sha256;
};

// One manifest per output directory ties the artifacts back to the exact
// inputs and seed that produced them.
void write_manifest(const std::string& out_dir, const std::string& command,
                    const std::vector<InputRecord>& inputs, uint64_t seed,
                    const std::string& started) {
    json m;
    m["command"] = command;
    m["config"] = {{"path", inputs.at(0).path}, {"sha256", inputs.at(0).sha256}};
    if (inputs.size() > 1) {
        json extra = json::array();
        for (size_t i = 1; i < inputs.size(); ++i) {
            extra.push_back({{"path", inputs[i].path}, {"sha256", inputs[i].sha256}});
        }
        m["extra_inputs"] = extra;
    }
    m["seed"] = seed;
    m["tool_version"] = HDYN_VERSION;
    m["out_dir"] = out_dir;
    m["started"] = started;
    m["finished"] = iso_utc_now();
    std::ofstream f(fs::path(out_dir) / "manifest.json");
    if (!f) throw IoError("cannot write manifest in " + out_dir);
    f << m.dump(2) << "\n";
}

void ensure_out_dir(const std::string& out) {
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw IoError("cannot create output directory " + out + ": " + ec.message());
}

Trajectory load_input_dataset(const std::string& path, InputRecord& rec) {
    rec = {path, sha256_hex(read_input_bytes(path))};
    return read_dataset(path);
}

gnn::LoadedModel load_input_model(const std::string& path, InputRecord& rec) {
    rec = {path, sha256_hex(read_input_bytes(path))};
    return gnn::load_model(path);
}

// --- subcommands ---------------------------------------------------------

struct SimulateArgs {
    std::string config, out;
    int64_t seed = -1;  // <0 = keep the config's seed
};

int cmd_simulate(const SimulateArgs& a) {
    std::string started = iso_utc_now();
    std::string bytes = read_input_bytes(a.config);
    json doc = json::parse(bytes);
    SystemConfig cfg = config_from_json(doc);
    if (a.seed >= 0) cfg.seed = static_cast<uint64_t>(a.seed);

    Trajectory traj = simulate(cfg);

    ensure_out_dir(a.out);
    write_dataset(traj, (fs::path(a.out) / "data.hdyn").string());
    write_manifest(a.out, "simulate", {{a.config, sha256_hex(bytes)}}, cfg.seed, started);
    std::cout << "wrote " << (fs::path(a.out) / "data.hdyn").string() << " ("
              << cfg.n_nodes() << " nodes, " << traj.n_frames() << " frames x "
              << cfg.series << " series)\n";
    return 0;
}

struct TrainArgs {
    std::string data, out;
    int epochs = 20;
    double noise_sigma = 0.0;
    int ghosts = 0;
    std::string bootstrap = "off";
    int multi_step = 0;  // 0 = kind default
};

int cmd_train(const TrainArgs& a) {
    std::string started = iso_utc_now();
    InputRecord data_rec;
    Trajectory data = load_input_dataset(a.data, data_rec);

    gnn::TrainConfig tc;
    tc.epochs = a.epochs;
    tc.noise_sigma = a.noise_sigma;
    tc.ghosts = a.ghosts;
    tc.bootstrap = a.bootstrap == "on";
    if (data.config.kind == SystemKind::Signaling) {
        if (a.multi_step == 1) {
            throw ConfigError(
                "--multi-step 1 on signaling data is refused: the one-step loss "
                "does not constrain the coupling direction and training fails to "
                "converge; use --multi-step 2 or higher");
        }
        tc.multi_step = a.multi_step == 0 ? 2 : a.multi_step;
    } else {
        tc.multi_step = a.multi_step == 0 ? 1 : a.multi_step;
    }
    tc.out_dir = a.out;
    tc.save_snapshots = true;

    ensure_out_dir(a.out);
    fs::path ckpt = fs::path(a.out) / "checkpoint.bin";
    std::unique_ptr<gnn::Trainer> trainer;
    if (fs::exists(ckpt)) {
        trainer = std::make_unique<gnn::Trainer>(data, tc, ckpt.string());
        std::cout << "resuming from epoch " << trainer->epoch() << "\n";
    } else {
        trainer = std::make_unique<gnn::Trainer>(data, tc);
    }
    trainer->run();

    write_manifest(a.out, "train", {data_rec}, tc.seed, started);
    double final_loss = trainer->log().empty() ? 0.0 : trainer->log().back().loss;
    std::cout << "trained " << trainer->epoch() << " epochs, final loss " << final_loss
              << ", checkpoint " << ckpt.string() << "\n";
    return 0;
}

struct RolloutArgs {
    std::string model, data, out;
    int steps = 0;
};

int cmd_rollout(const RolloutArgs& a) {
    std::string started = iso_utc_now();
    InputRecord model_rec, data_rec;
    gnn::LoadedModel lm = load_input_model(a.model, model_rec);
    Trajectory data = load_input_dataset(a.data, data_rec);
    if (data.series.empty() || data.series[0].empty()) {
        throw ConfigError(a.data + " holds no frames to start a rollout from");
    }

    std::vector<Frame> frames =
        gnn::model_rollout(lm.model, data, data.series[0][0], a.steps);

    ensure_out_dir(a.out);
    Trajectory rt = data;
    rt.config.steps = a.steps;
    rt.config.series = 1;
    rt.series = {frames};
    write_dataset(rt, (fs::path(a.out) / "rollout.hdyn").string());

    // error vs the recorded trajectory over the overlapping frames
    int overlap = std::min(a.steps, static_cast<int>(data.series[0].size()) - 1);
    double total = 0.0;
    for (int t = 0; t <= overlap; ++t) {
        double r = report::frame_rmse(data.config, frames[t], data.series[0][t]);
        total += r * r;
    }
    json summary;
    summary["steps"] = a.steps;
    summary["compared_frames"] = overlap + 1;
    summary["rmse"] = std::sqrt(total / (overlap + 1));
    summary["final_sinkhorn"] =
        is_moving(data.config.kind)
            ? json(analyze::sinkhorn_divergence(frames[overlap].pos,
                                                data.series[0][overlap].pos))
            : json(nullptr);
    std::ofstream sf(fs::path(a.out) / "summary.json");
    sf << summary.dump(2) << "\n";

    write_manifest(a.out, "rollout", {model_rec, data_rec}, lm.model.spec.seed, started);
    std::cout << "rolled out " << a.steps << " steps, rmse vs recorded "
              << summary["rmse"].get<double>() << "\n";
    return 0;
}

struct AnalyzeArgs {
    std::string model, data, out;
    std::string tasks = "cluster,profiles,fit,metrics,decompose";
};

int cmd_analyze(const AnalyzeArgs& a) {
    std::string started = iso_utc_now();
    InputRecord model_rec, data_rec;
    gnn::LoadedModel lm = load_input_model(a.model, model_rec);
    Trajectory data = load_input_dataset(a.data, data_rec);

    std::vector<std::string> tasks;
    std::stringstream ss(a.tasks);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) tasks.push_back(item);
    }
    if (tasks.empty()) throw ConfigError("--tasks parsed to an empty list");

    ensure_out_dir(a.out);
    report::AnalyzeOptions opt;
    opt.out_dir = a.out;
    json rep = report::build_report(lm.model, data, a.model, a.data, tasks, opt);
    std::ofstream rf(fs::path(a.out) / "report.json");
    if (!rf) throw IoError("cannot write report in " + a.out);
    rf << rep.dump(2) << "\n";

    write_manifest(a.out, "analyze", {model_rec, data_rec}, opt.seed, started);
    std::cout << "wrote " << (fs::path(a.out) / "report.json").string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
#if defined(__GLIBC__)
    // large Eigen temporaries otherwise round-trip through mmap on every
    // training batch, roughly doubling wall time in system calls
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
    CLI::App app{"heterogeneous-dynamics toolkit: simulate, train, roll out, analyze"};
    app.set_version_flag("--version", HDYN_VERSION);
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "cap worker parallelism (default: logical cores)")
        ->envname("HDYN_THREADS");

    SimulateArgs sa;
    CLI::App* sim = app.add_subcommand("simulate", "run a configured simulation");
    sim->add_option("--config", sa.config, "system config (JSON)")->required();
    sim->add_option("--out", sa.out, "output directory")->required();
    sim->add_option("--seed", sa.seed, "override the config's seed");

    TrainArgs ta;
    CLI::App* trn = app.add_subcommand("train", "fit a model to a dataset");
    trn->add_option("--data", ta.data, "training dataset (.hdyn)")->required();
    trn->add_option("--out", ta.out, "run directory (checkpoints + metrics)")->required();
    trn->add_option("--epochs", ta.epochs, "training epochs");
    trn->add_option("--noise-sigma", ta.noise_sigma, "multiplicative target noise");
    trn->add_option("--ghosts", ta.ghosts, "extra free-embedding particles per frame");
    trn->add_option("--bootstrap", ta.bootstrap, "embedding cluster snapping")
        ->check(CLI::IsMember({"on", "off"}));
    trn->add_option("--multi-step", ta.multi_step, "unrolled loss sub-steps (0 = kind default)");

    RolloutArgs ra;
    CLI::App* rol = app.add_subcommand("rollout", "integrate a trained model forward");
    rol->add_option("--model", ra.model, "model checkpoint")->required();
    rol->add_option("--data", ra.data, "dataset providing the start frame")->required();
    rol->add_option("--steps", ra.steps, "steps to integrate")->required()
        ->check(CLI::NonNegativeNumber);
    rol->add_option("--out", ra.out, "output directory")->required();

    AnalyzeArgs aa;
    CLI::App* ana = app.add_subcommand("analyze", "recover structure from a trained model");
    ana->add_option("--model", aa.model, "model checkpoint")->required();
    ana->add_option("--data", aa.data, "dataset the model was trained on")->required();
    ana->add_option("--tasks", aa.tasks, "comma list: cluster,profiles,fit,metrics,decompose");
    ana->add_option("--out", aa.out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;  // normalize CLI11's usage errors to the documented code
    }
    if (threads > 0) Eigen::setNbThreads(threads);

    try {
        if (*sim) return cmd_simulate(sa);
        if (*trn) return cmd_train(ta);
        if (*rol) return cmd_rollout(ra);
        if (*ana) return cmd_analyze(aa);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const SimulationDiverged& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
