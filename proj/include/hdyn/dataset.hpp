#pragma once
#include <string>

#include "hdyn/system.hpp"

namespace hdyn {

// .hdyn container: one JSON header line (format tag, version, endianness,
// shape, full config), then labeled blocks, each a JSON line followed by raw
// little-endian binary. Numeric payloads round-trip bit-exactly.
//
// Blocks, in order: "frames" (one per series; frames * n * channels doubles,
// frame-major / node-minor; moving kinds store px,py,vx,vy, field kinds store
// their channels), "latents" (type ids as int32, then one double column per
// parameter), optional "conn" (n*n doubles), optional "stationary"
// (emitter positions + static field values), and a closing "end".
void write_dataset(const Trajectory& traj, const std::string& path);
Trajectory read_dataset(const std::string& path);

// Channels stored per node per frame for this kind (4 for moving kinds).
int frame_channels(SystemKind k);

}  // namespace hdyn
