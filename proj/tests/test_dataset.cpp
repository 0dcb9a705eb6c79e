#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "hdyn/config_json.hpp"
#include "hdyn/dataset.hpp"
#include "hdyn/simulate.hpp"

using namespace hdyn;

namespace {

std::string tmp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

bool frames_identical(const Trajectory& a, const Trajectory& b) {
    if (a.series.size() != b.series.size()) return false;
    for (size_t s = 0; s < a.series.size(); ++s) {
        if (a.series[s].size() != b.series[s].size()) return false;
        for (size_t t = 0; t < a.series[s].size(); ++t) {
            const Frame& fa = a.series[s][t];
            const Frame& fb = b.series[s][t];
            if (fa.field != fb.field) return false;
            if (fa.pos.size() != fb.pos.size()) return false;
            for (size_t i = 0; i < fa.pos.size(); ++i) {
                if (fa.pos[i].x != fb.pos[i].x || fa.pos[i].y != fb.pos[i].y) return false;
                if (fa.vel[i].x != fb.vel[i].x || fa.vel[i].y != fb.vel[i].y) return false;
            }
        }
    }
    return true;
}

}  // namespace

TEST_SUITE("dataset") {

TEST_CASE("config json round trip") {
    SystemConfig cfg;
    cfg.kind = SystemKind::Coulomb;
    cfg.n = 77;
    cfg.steps = 13;
    cfg.dt = 0.12345678901234567;  // must survive text round trip exactly
    cfg.seed = 998877665544332211ull;
    cfg.d_min = 0.001;
    cfg.d_max = 0.3;
    cfg.periodic = true;
    cfg.box = 1.0;
    cfg.latents.types = {{{"q", -1.0}}, {{"q", 1.0}}, {{"q", 2.0}}};
    SystemConfig back = config_from_json(config_to_json(cfg));
    CHECK(back.kind == cfg.kind);
    CHECK(back.n == cfg.n);
    CHECK(back.dt == cfg.dt);
    CHECK(back.seed == cfg.seed);
    CHECK(back.d_max == cfg.d_max);
    CHECK(back.latents.types == cfg.latents.types);
}

TEST_CASE("unknown config keys are rejected") {
    nlohmann::json j = config_to_json([] {
        SystemConfig cfg;
        cfg.kind = SystemKind::Signaling;
        cfg.n = 10;
        cfg.steps = 5;
        cfg.edge_prob = 0.2;
        cfg.latents.types = {{{"b", 1.0}, {"c", 1.0}}};
        return cfg;
    }());
    j["step"] = 5;  // typo for "steps"
    CHECK_THROWS_AS(config_from_json(j), ConfigError);
    j.erase("step");
    j["neighborhood"] = {{"dmin", 0.1}};
    CHECK_THROWS_AS(config_from_json(j), ConfigError);
}

TEST_CASE("moving-kind dataset round trips bit-exactly") {
    SystemConfig cfg;
    cfg.kind = SystemKind::AttractionRepulsion;
    cfg.n = 40;
    cfg.steps = 12;
    cfg.dt = 0.005;
    cfg.seed = 21;
    cfg.d_min = 0.002;
    cfg.d_max = 0.075;
    cfg.periodic = true;
    cfg.latents.types = {{{"a", 1.5}, {"b", 1.0}, {"c", 1.0}, {"d", 2.0}}};
    Trajectory t = simulate(cfg);
    std::string path = tmp_path("roundtrip_moving.hdyn");
    write_dataset(t, path);
    Trajectory r = read_dataset(path);
    CHECK(frames_identical(t, r));
    CHECK(r.latents.names == t.latents.names);
    CHECK(r.latents.type == t.latents.type);
    CHECK(r.latents.values == t.latents.values);
    CHECK(r.config.dt == cfg.dt);
    std::remove(path.c_str());
}

TEST_CASE("field and network datasets round trip") {
    SUBCASE("rps mesh") {
        SystemConfig cfg;
        cfg.kind = SystemKind::Rps;
        cfg.mesh_side = 8;
        cfg.steps = 6;
        cfg.dt = 0.05;
        cfg.seed = 2;
        cfg.latents.patterns["a"] = std::vector<double>(64, 0.25);
        Trajectory t = simulate(cfg);
        std::string path = tmp_path("roundtrip_rps.hdyn");
        write_dataset(t, path);
        Trajectory r = read_dataset(path);
        CHECK(frames_identical(t, r));
        CHECK(r.mesh.n_nodes() == 64);
        CHECK(r.latents.type == t.latents.type);
        std::remove(path.c_str());
    }
    SUBCASE("signaling with coupling matrix") {
        SystemConfig cfg;
        cfg.kind = SystemKind::Signaling;
        cfg.n = 30;
        cfg.steps = 4;
        cfg.dt = 0.01;
        cfg.seed = 3;
        cfg.edge_prob = 0.2;
        cfg.latents.types = {{{"b", 1.0}, {"c", 0.5}}};
        Trajectory t = simulate(cfg);
        std::string path = tmp_path("roundtrip_sig.hdyn");
        write_dataset(t, path);
        Trajectory r = read_dataset(path);
        CHECK(frames_identical(t, r));
        CHECK(r.conn == t.conn);
        std::remove(path.c_str());
    }
    SUBCASE("hidden-field emitters") {
        SystemConfig cfg;
        cfg.kind = SystemKind::AttractionRepulsion;
        cfg.n = 30;
        cfg.steps = 4;
        cfg.dt = 0.005;
        cfg.seed = 4;
        cfg.d_min = 0.002;
        cfg.d_max = 0.075;
        cfg.periodic = true;
        cfg.latents.types = {{{"a", 1.5}, {"b", 1.0}, {"c", 1.0}, {"d", 2.0}}};
        FieldSpec f;
        f.n_stationary = 50;
        f.image_side = 4;
        f.image.assign(16, 0.5);
        cfg.field = f;
        Trajectory t = simulate(cfg);
        REQUIRE(t.stationary_pos.size() == 50);
        std::string path = tmp_path("roundtrip_field.hdyn");
        write_dataset(t, path);
        Trajectory r = read_dataset(path);
        CHECK(frames_identical(t, r));
        REQUIRE(r.stationary_pos.size() == 50);
        bool same = true;
        for (size_t i = 0; i < 50; ++i) {
            same &= r.stationary_pos[i].x == t.stationary_pos[i].x;
            same &= r.stationary_b[i] == t.stationary_b[i];
        }
        CHECK(same);
        std::remove(path.c_str());
    }
}

TEST_CASE("reader fails loudly on damaged files") {
    SystemConfig cfg;
    cfg.kind = SystemKind::Signaling;
    cfg.n = 20;
    cfg.steps = 3;
    cfg.dt = 0.01;
    cfg.seed = 9;
    cfg.edge_prob = 0.2;
    cfg.latents.types = {{{"b", 1.0}, {"c", 0.5}}};
    Trajectory t = simulate(cfg);
    std::string path = tmp_path("damaged.hdyn");
    write_dataset(t, path);

    SUBCASE("truncation") {
        auto size = std::filesystem::file_size(path);
        std::filesystem::resize_file(path, size / 2);
        CHECK_THROWS_AS(read_dataset(path), IoError);
    }
    SUBCASE("wrong magic") {
        std::ofstream out(path, std::ios::binary);
        out << "{\"format\":\"something-else\"}\n";
        out.close();
        CHECK_THROWS_AS(read_dataset(path), IoError);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(read_dataset(tmp_path("no_such_file.hdyn")), IoError);
    }
    std::remove(path.c_str());
}

}  // TEST_SUITE
