#include <doctest.h>

#include <sys/wait.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>

#include "hdyn/config_json.hpp"
#include "hdyn/dataset.hpp"
#include "hdyn/report.hpp"
#include "hdyn/simulate.hpp"

using namespace hdyn;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path tmp_dir(const char* name) {
    auto p = fs::temp_directory_path() / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// run the installed CLI binary; exit code comes back, combined output lands
// in *output when asked for
int run_cli(const std::string& args, std::string* output = nullptr) {
    const char* exe = std::getenv("HDYN_CLI");
    REQUIRE_MESSAGE(exe != nullptr, "HDYN_CLI must point at the hdyn binary");
    static int counter = 0;
    fs::path log = fs::temp_directory_path() / ("hdyn_cli_log_" + std::to_string(counter++));
    std::string cmd = std::string(exe) + " " + args + " >" + log.string() + " 2>&1";
    int st = std::system(cmd.c_str());
    if (output) *output = slurp(log);
    fs::remove(log);
    return WEXITSTATUS(st);
}

std::string sha256_hex(const std::string& bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr);
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[md[i] >> 4]);
        out.push_back(hex[md[i] & 0xf]);
    }
    return out;
}

SystemConfig small_attraction(int n) {
    SystemConfig cfg;
    cfg.kind = SystemKind::AttractionRepulsion;
    cfg.n = n;
    cfg.steps = 3;
    cfg.dt = 0.005;
    cfg.seed = 41;
    cfg.d_min = 0.002;
    cfg.d_max = 0.15;
    cfg.periodic = true;
    cfg.latents.types = {{{"a", 2.0}, {"b", 1.0}, {"c", 1.0}, {"d", 2.0}},
                         {{"a", 1.0}, {"b", 2.0}, {"c", 2.0}, {"d", 1.0}}};
    return cfg;
}

fs::path write_config(const fs::path& dir, const SystemConfig& cfg) {
    fs::path p = dir / "config.json";
    std::ofstream f(p);
    f << config_to_json(cfg).dump(2) << "\n";
    return p;
}

// overwrite a relu net so it computes exactly y = x * coef + bias (inputs
// ride through the hidden layers shifted above the relu cut)
void make_linear_net(nn::Mlp& net, const nn::Mat& coef, const Eigen::RowVectorXd& bias) {
    const double shift = 100.0;
    int in = net.spec.in;
    for (int l = 0; l < net.spec.layers; ++l) {
        net.W[l].value.setZero();
        net.b[l].value.setZero();
    }
    for (int k = 0; k < in; ++k) net.W[0].value(k, k) = 1.0;
    net.b[0].value.row(0).head(in).setConstant(shift);
    for (int l = 1; l + 1 < net.spec.layers; ++l) net.W[l].value.setIdentity();
    net.W.back().value.topRows(in) = coef;
    net.b.back().value.row(0) = bias - shift * coef.colwise().sum();
}

// wave dataset with one uniform coefficient + a checkpoint whose phi computes
// the true law exactly, so rollouts must reproduce the recorded frames
struct WaveStub {
    fs::path data, model;
};

WaveStub make_wave_stub(const fs::path& dir, double a, double gain) {
    fs::create_directories(dir);
    SystemConfig cfg;
    cfg.kind = SystemKind::Wave;
    cfg.mesh_side = 8;
    cfg.steps = 20;
    cfg.dt = 0.05;
    cfg.seed = 42;
    cfg.latents.patterns["a"] = std::vector<double>(64, a);
    cfg.init.pulses = 2;
    cfg.init.pulse_amp = 1.0;
    cfg.init.pulse_width = 2.0;
    Trajectory t = simulate(cfg);
    fs::path data = dir / "wave.hdyn";
    write_dataset(t, data.string());

    gnn::ModelSpec spec;
    spec.kind = SystemKind::Wave;
    spec.n_nodes = 64;
    spec.seed = 7;
    gnn::GnnModel m = gnn::GnnModel::make(spec);
    m.band = cfg.radius();
    nn::Mat coef = nn::Mat::Zero(3, 1);
    coef(2, 0) = gain;  // the laplacian slot; embeddings contribute nothing
    make_linear_net(m.phi, coef, Eigen::RowVectorXd::Zero(1));
    fs::path model = dir / "stub.bin";
    gnn::save_model(m, model.string());
    return {data, model};
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("simulate writes a readable dataset plus a matching manifest") {
    fs::path dir = tmp_dir("hdyn_cli_sim");
    fs::path cfgp = write_config(dir, small_attraction(10));
    fs::path out = dir / "run";

    std::string log;
    int rc = run_cli("simulate --config " + cfgp.string() + " --out " + out.string(), &log);
    CHECK(rc == 0);

    Trajectory t = read_dataset((out / "data.hdyn").string());
    CHECK(t.config.n == 10);
    CHECK(t.n_frames() == 4);

    json man = json::parse(slurp(out / "manifest.json"));
    CHECK(man["command"] == "simulate");
    CHECK(man["config"]["path"] == cfgp.string());
    CHECK(man["config"]["sha256"] == sha256_hex(slurp(cfgp)));
    CHECK(man["seed"] == 41);
    CHECK(man["tool_version"].is_string());
    CHECK(man["started"].is_string());

    int manifests = 0;
    for (const auto& e : fs::directory_iterator(out)) {
        manifests += e.path().filename() == "manifest.json";
    }
    CHECK(manifests == 1);
}

TEST_CASE("same config and seed produce byte-identical datasets") {
    fs::path dir = tmp_dir("hdyn_cli_det");
    fs::path cfgp = write_config(dir, small_attraction(10));
    CHECK(run_cli("simulate --config " + cfgp.string() + " --seed 5 --out " +
                  (dir / "a").string()) == 0);
    CHECK(run_cli("simulate --config " + cfgp.string() + " --seed 5 --out " +
                  (dir / "b").string()) == 0);
    CHECK(slurp(dir / "a" / "data.hdyn") == slurp(dir / "b" / "data.hdyn"));
    CHECK(slurp(dir / "a" / "data.hdyn") != "");
}

TEST_CASE("config problems exit with code 2 and name the offender") {
    fs::path dir = tmp_dir("hdyn_cli_cfg");
    json doc = config_to_json(small_attraction(10));

    SUBCASE("unknown kind") {
        doc["kind"] = "warp_drive";
        std::ofstream(dir / "bad.json") << doc.dump();
        std::string log;
        int rc = run_cli("simulate --config " + (dir / "bad.json").string() + " --out " +
                         (dir / "o").string(), &log);
        CHECK(rc == 2);
        CHECK(log.find("warp_drive") != std::string::npos);
    }
    SUBCASE("unknown key") {
        doc["volume"] = 11;
        std::ofstream(dir / "bad.json") << doc.dump();
        std::string log;
        int rc = run_cli("simulate --config " + (dir / "bad.json").string() + " --out " +
                         (dir / "o").string(), &log);
        CHECK(rc == 2);
        CHECK(log.find("volume") != std::string::npos);
    }
    SUBCASE("missing file") {
        CHECK(run_cli("simulate --config " + (dir / "nope.json").string() + " --out " +
                      (dir / "o").string()) == 2);
    }
    SUBCASE("missing required flag") {
        CHECK(run_cli("simulate --config " + (dir / "x.json").string()) == 2);
    }
}

TEST_CASE("train smoke run finishes fast and refuses one-step signaling") {
    fs::path dir = tmp_dir("hdyn_cli_train");

    SUBCASE("one epoch on a hundred particles") {
        Trajectory t = simulate(small_attraction(100));
        write_dataset(t, (dir / "data.hdyn").string());
        auto t0 = std::chrono::steady_clock::now();
        std::string log;
        int rc = run_cli("train --data " + (dir / "data.hdyn").string() + " --out " +
                         (dir / "run").string() + " --epochs 1", &log);
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        CHECK(rc == 0);
        CHECK(secs < 60.0);
        CHECK(fs::exists(dir / "run" / "checkpoint.bin"));
        CHECK(fs::exists(dir / "run" / "metrics.csv"));
        gnn::LoadedModel lm = gnn::load_model((dir / "run" / "checkpoint.bin").string());
        CHECK(lm.epoch == 1);
        CHECK(lm.model.spec.kind == SystemKind::AttractionRepulsion);
    }

    SUBCASE("multi-step 1 on signaling data") {
        SystemConfig cfg;
        cfg.kind = SystemKind::Signaling;
        cfg.n = 12;
        cfg.steps = 6;
        cfg.dt = 0.01;
        cfg.seed = 43;
        cfg.edge_prob = 0.4;
        cfg.latents.types = {{{"b", 0.8}, {"c", 1.2}}};
        cfg.init.field_lo = -1.0;
        cfg.init.field_hi = 1.0;
        write_dataset(simulate(cfg), (dir / "sig.hdyn").string());
        std::string log;
        int rc = run_cli("train --data " + (dir / "sig.hdyn").string() + " --out " +
                         (dir / "srun").string() + " --epochs 1 --multi-step 1", &log);
        CHECK(rc == 2);
        CHECK(log.find("--multi-step 2") != std::string::npos);
    }
}

TEST_CASE("interrupted training resumes to the same result") {
    fs::path dir = tmp_dir("hdyn_cli_resume");
    Trajectory t = simulate(small_attraction(12));
    write_dataset(t, (dir / "data.hdyn").string());
    std::string base = "train --data " + (dir / "data.hdyn").string();

    CHECK(run_cli(base + " --out " + (dir / "full").string() + " --epochs 2") == 0);
    CHECK(run_cli(base + " --out " + (dir / "split").string() + " --epochs 1") == 0);
    std::string log;
    CHECK(run_cli(base + " --out " + (dir / "split").string() + " --epochs 2", &log) == 0);
    CHECK(log.find("resuming") != std::string::npos);

    gnn::LoadedModel a = gnn::load_model((dir / "full" / "checkpoint.bin").string());
    gnn::LoadedModel b = gnn::load_model((dir / "split" / "checkpoint.bin").string());
    CHECK(a.epoch == b.epoch);
    CHECK(a.adam_t == b.adam_t);
    auto pa = a.model.params();
    auto pb = b.model.params();
    REQUIRE(pa.size() == pb.size());
    for (size_t k = 0; k < pa.size(); ++k) {
        CHECK((pa[k]->value - pb[k]->value).cwiseAbs().maxCoeff() == 0.0);
    }

    // metrics agree row for row on everything but wall time
    auto rows = [](const fs::path& p) {
        std::vector<std::string> out;
        std::ifstream in(p);
        std::string line;
        while (std::getline(in, line)) {
            out.push_back(line.substr(0, line.rfind(',')));  // drop the seconds column
        }
        return out;
    };
    CHECK(rows(dir / "full" / "metrics.csv") == rows(dir / "split" / "metrics.csv"));
}

TEST_CASE("rollout reproduces the simulator through an exact stub model") {
    fs::path dir = tmp_dir("hdyn_cli_roll");
    WaveStub ws = make_wave_stub(dir, 0.8, 0.8);
    std::string base = "rollout --model " + ws.model.string() + " --data " + ws.data.string();

    SUBCASE("matches the recorded frames") {
        fs::path out = dir / "roll";
        CHECK(run_cli(base + " --steps 10 --out " + out.string()) == 0);
        json sum = json::parse(slurp(out / "summary.json"));
        CHECK(sum["rmse"].get<double>() < 1e-6);
        CHECK(sum["compared_frames"] == 11);
        CHECK(sum["final_sinkhorn"].is_null());
        Trajectory r = read_dataset((out / "rollout.hdyn").string());
        REQUIRE(r.series.size() == 1);
        CHECK(r.series[0].size() == 11);
    }

    SUBCASE("zero steps emit just the start frame") {
        fs::path out = dir / "zero";
        CHECK(run_cli(base + " --steps 0 --out " + out.string()) == 0);
        Trajectory r = read_dataset((out / "rollout.hdyn").string());
        CHECK(r.series[0].size() == 1);
        CHECK(json::parse(slurp(out / "summary.json"))["rmse"].get<double>() == 0.0);
    }

    SUBCASE("missing model file exits 2") {
        CHECK(run_cli("rollout --model " + (dir / "absent.bin").string() + " --data " +
                      ws.data.string() + " --steps 3 --out " + (dir / "o").string()) == 2);
    }

    SUBCASE("numeric blowup exits 3") {
        WaveStub boom = make_wave_stub(dir / "boom_fix", 0.8, 1e150);
        CHECK(run_cli("rollout --model " + boom.model.string() + " --data " +
                      boom.data.string() + " --steps 10 --out " +
                      (dir / "boom").string()) == 3);
    }

    SUBCASE("unwritable output exits 4") {
        std::ofstream(dir / "plain.txt") << "x";
        CHECK(run_cli(base + " --steps 1 --out " +
                      (dir / "plain.txt" / "sub").string()) == 4);
    }
}

TEST_CASE("analyze writes a report that passes the shipped schema") {
    fs::path dir = tmp_dir("hdyn_cli_analyze");
    Trajectory t = simulate(small_attraction(12));
    write_dataset(t, (dir / "data.hdyn").string());
    REQUIRE(run_cli("train --data " + (dir / "data.hdyn").string() + " --out " +
                    (dir / "run").string() + " --epochs 1") == 0);
    std::string model = (dir / "run" / "checkpoint.bin").string();
    std::string base = "analyze --model " + model + " --data " + (dir / "data.hdyn").string();

    SUBCASE("cluster task emits labels and accuracy") {
        fs::path out = dir / "rep";
        CHECK(run_cli(base + " --tasks cluster,profiles,fit,metrics --out " +
                      out.string()) == 0);
        json rep = json::parse(slurp(out / "report.json"));

        // the copy on disk must match the compiled-in schema, and validate
        json shipped = json::parse(slurp(fs::path(HDYN_SOURCE_DIR) /
                                         "share/analysis_report.schema.json"));
        CHECK(shipped == json::parse(report::report_schema_text()));
        CHECK(report::schema_error(rep, shipped) == "");

        CHECK(rep["tasks"]["cluster"]["profile"]["labels"].size() == 12);
        CHECK(rep["tasks"]["cluster"]["profile"]["accuracy"].is_number());
        CHECK(fs::exists(out / "embedding_scatter.csv"));
        CHECK(fs::exists(out / "profiles.csv"));
    }

    SUBCASE("unknown task exits 2 and lists the valid ones") {
        std::string log;
        int rc = run_cli(base + " --tasks cluster,frobnicate --out " +
                         (dir / "bad").string(), &log);
        CHECK(rc == 2);
        CHECK(log.find("frobnicate") != std::string::npos);
        CHECK(log.find("decompose") != std::string::npos);
    }
}

}  // TEST_SUITE
