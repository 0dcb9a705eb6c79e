#include "hdyn/dataset.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "hdyn/config_json.hpp"

namespace hdyn {

using nlohmann::json;

int frame_channels(SystemKind k) { return is_moving(k) ? 4 : field_arity(k); }

namespace {

void require_little_endian() {
    if constexpr (std::endian::native != std::endian::little) {
        throw IoError(".hdyn files are little-endian; big-endian hosts are not supported");
    }
}

void put_line(std::ofstream& out, const json& j) {
    std::string s = j.dump();
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
    out.put('\n');
}

void put_raw(std::ofstream& out, const void* data, size_t bytes) {
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
}

json get_line(std::ifstream& in, const std::string& path) {
    std::string line;
    if (!std::getline(in, line)) {
        throw IoError(path + ": truncated (expected a block header line)");
    }
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw IoError(path + ": malformed block header: " + line.substr(0, 80));
    return j;
}

void get_raw(std::ifstream& in, void* data, size_t bytes, const std::string& path,
             const std::string& what) {
    in.read(static_cast<char*>(data), static_cast<std::streamsize>(bytes));
    if (static_cast<size_t>(in.gcount()) != bytes) {
        throw IoError(path + ": truncated while reading " + what + " (wanted " +
                      std::to_string(bytes) + " bytes, got " + std::to_string(in.gcount()) + ")");
    }
}

void flatten_frames(const std::vector<Frame>& frames, SystemKind kind, int n,
                    std::vector<double>& buf) {
    int ch = frame_channels(kind);
    buf.resize(static_cast<size_t>(frames.size()) * n * ch);
    size_t o = 0;
    for (const Frame& f : frames) {
        if (is_moving(kind)) {
            for (int i = 0; i < n; ++i) {
                buf[o++] = f.pos[i].x;
                buf[o++] = f.pos[i].y;
                buf[o++] = f.vel[i].x;
                buf[o++] = f.vel[i].y;
            }
        } else {
            std::memcpy(buf.data() + o, f.field.data(), f.field.size() * sizeof(double));
            o += f.field.size();
        }
    }
}

std::vector<Frame> unflatten_frames(const std::vector<double>& buf, SystemKind kind, int n,
                                    int count) {
    int ch = frame_channels(kind);
    std::vector<Frame> frames(count);
    size_t o = 0;
    for (Frame& f : frames) {
        if (is_moving(kind)) {
            f.pos.resize(n);
            f.vel.resize(n);
            for (int i = 0; i < n; ++i) {
                f.pos[i].x = buf[o++];
                f.pos[i].y = buf[o++];
                f.vel[i].x = buf[o++];
                f.vel[i].y = buf[o++];
            }
        } else {
            f.field.assign(buf.begin() + o, buf.begin() + o + static_cast<size_t>(n) * ch);
            o += static_cast<size_t>(n) * ch;
        }
    }
    return frames;
}

}  // namespace

void write_dataset(const Trajectory& traj, const std::string& path) {
    require_little_endian();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");

    const SystemConfig& cfg = traj.config;
    int n = cfg.n_nodes();
    json head;
    head["format"] = "hdyn";
    head["version"] = 1;
    head["endian"] = "LE";
    head["kind"] = kind_name(cfg.kind);
    head["n"] = n;
    head["series"] = static_cast<int>(traj.series.size());
    head["frames"] = traj.n_frames();
    head["channels"] = frame_channels(cfg.kind);
    head["config"] = config_to_json(cfg);
    put_line(out, head);

    std::vector<double> buf;
    for (size_t s = 0; s < traj.series.size(); ++s) {
        put_line(out, json{{"block", "frames"},
                           {"series", s},
                           {"count", traj.series[s].size()}});
        flatten_frames(traj.series[s], cfg.kind, n, buf);
        put_raw(out, buf.data(), buf.size() * sizeof(double));
    }

    put_line(out, json{{"block", "latents"},
                       {"names", traj.latents.names},
                       {"typed", !traj.latents.type.empty()}});
    if (!traj.latents.type.empty()) {
        put_raw(out, traj.latents.type.data(), traj.latents.type.size() * sizeof(int32_t));
    }
    for (const auto& col : traj.latents.values) {
        put_raw(out, col.data(), col.size() * sizeof(double));
    }

    if (!traj.conn.empty()) {
        put_line(out, json{{"block", "conn"}, {"n", n}});
        put_raw(out, traj.conn.data(), traj.conn.size() * sizeof(double));
    }

    if (!traj.stationary_pos.empty()) {
        put_line(out, json{{"block", "stationary"},
                           {"count", traj.stationary_pos.size()},
                           {"has_values", !traj.stationary_b.empty()}});
        put_raw(out, traj.stationary_pos.data(), traj.stationary_pos.size() * sizeof(Vec2));
        if (!traj.stationary_b.empty()) {
            put_raw(out, traj.stationary_b.data(), traj.stationary_b.size() * sizeof(double));
        }
    }

    put_line(out, json{{"block", "end"}});
    if (!out) throw IoError("write to '" + path + "' failed");
}

Trajectory read_dataset(const std::string& path) {
    require_little_endian();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");

    json head = get_line(in, path);
    if (!head.is_object() || head.value("format", "") != "hdyn") {
        throw IoError(path + ": not an .hdyn dataset (bad header)");
    }
    if (head.value("version", 0) != 1) {
        throw IoError(path + ": unsupported format version " + head["version"].dump());
    }
    if (head.value("endian", "") != "LE") {
        throw IoError(path + ": unsupported byte order '" + head.value("endian", "") + "'");
    }

    Trajectory traj;
    traj.config = config_from_json(head.at("config"));
    const SystemConfig& cfg = traj.config;
    int n = cfg.n_nodes();
    if (head.value("n", -1) != n) throw IoError(path + ": header node count disagrees with config");
    if (is_mesh(cfg.kind)) traj.mesh = GridMesh::make(cfg.mesh_side);

    std::vector<double> buf;
    for (;;) {
        json b = get_line(in, path);
        std::string kind = b.value("block", "");
        if (kind == "end") break;
        if (kind == "frames") {
            size_t s = b.at("series").get<size_t>();
            int count = b.at("count").get<int>();
            if (traj.series.size() != s) throw IoError(path + ": frame blocks out of order");
            buf.resize(static_cast<size_t>(count) * n * frame_channels(cfg.kind));
            get_raw(in, buf.data(), buf.size() * sizeof(double), path, "frames");
            traj.series.push_back(unflatten_frames(buf, cfg.kind, n, count));
        } else if (kind == "latents") {
            traj.latents.names = b.at("names").get<std::vector<std::string>>();
            if (b.value("typed", false)) {
                traj.latents.type.resize(n);
                get_raw(in, traj.latents.type.data(), static_cast<size_t>(n) * sizeof(int32_t),
                        path, "latent types");
            }
            for (const auto& name : traj.latents.names) {
                (void)name;
                traj.latents.values.emplace_back(n);
                get_raw(in, traj.latents.values.back().data(), static_cast<size_t>(n) * sizeof(double),
                        path, "latent column");
            }
        } else if (kind == "conn") {
            traj.conn.resize(static_cast<size_t>(n) * n);
            get_raw(in, traj.conn.data(), traj.conn.size() * sizeof(double), path, "conn matrix");
        } else if (kind == "stationary") {
            size_t count = b.at("count").get<size_t>();
            traj.stationary_pos.resize(count);
            get_raw(in, traj.stationary_pos.data(), count * sizeof(Vec2), path, "stationary positions");
            if (b.value("has_values", false)) {
                traj.stationary_b.resize(count);
                get_raw(in, traj.stationary_b.data(), count * sizeof(double), path, "stationary values");
            }
        } else {
            throw IoError(path + ": unknown block '" + kind + "'");
        }
    }
    return traj;
}

}  // namespace hdyn
