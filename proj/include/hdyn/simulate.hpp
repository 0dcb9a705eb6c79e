#pragma once
#include <span>
#include <vector>

#include "hdyn/system.hpp"

namespace hdyn {

// Pairwise interaction terms, exposed for tests and for hand-built reference
// models. Conventions: dx = x_send - x_recv (minimum image when periodic),
// d = |dx|, and every term is the contribution of one sender to the
// receiver's derivative before aggregation.

// exp(-d^(2w) / (2 sigma^2)) — the range kernel of the attraction-repulsion rule.
double ar_kernel(double d, double w, double sigma);

// (a * K(d, b) - c * K(d, dd)) * dx / d: radial attraction minus repulsion,
// all four coefficients belonging to the receiving particle.
Vec2 ar_pair_vel(double a, double b, double c, double dd, double sigma,
                 const Vec2& dx, double d);

// m_send * dx / d^3: Newtonian pull toward the sender.
Vec2 gravity_pair_accel(double m_send, const Vec2& dx, double d);

// -q_recv * q_send * dx / d^3: like charges repel.
Vec2 coulomb_pair_accel(double q_recv, double q_send, const Vec2& dx, double d);

// c * dx + a * dvel - s * dx / d^2 with dvel = v_send - v_recv: cohesion,
// alignment, separation; coefficients belong to the receiver.
Vec2 boids_pair_accel(double a, double c, double s, const Vec2& dx,
                      const Vec2& dvel, double d);

// Reaction part of the cyclic three-species rule for one node:
// du = u * (1 - p - beta*v), dv = v * (1 - p - beta*w), dw = w * (1 - p - beta*u)
// with p = u + v + w.
void rps_reaction(double u, double v, double w, double beta, double out[3]);

// Signaling node derivative: -b*u + c*tanh(u) + coupled, where `coupled` is
// sum_j A_ij * tanh(u_j), supplied by the caller.
double signaling_deriv(double b, double c, double u, double coupled);

// Sample the hidden field b(x) (bilinear over pixel centers, clamped at the
// border). `t_frac` in [0, 1] selects the movie frame for time-varying fields.
double field_sample(const FieldSpec& f, const Vec2& p, double t_frac);

// Symmetric coupling matrix -> directed edge list + per-edge weights,
// (recv, send)-sorted. Zeros are non-edges.
struct NetGraph {
    EdgeList edges;
    std::vector<double> w;
};
NetGraph net_from_conn(std::span<const double> conn, int n);

// Run a full experiment from the config's seed: draw latents, initialize every
// series, integrate, and record steps+1 frames per series. Throws
// SimulationDiverged if the state leaves a sane range.
Trajectory simulate(const SystemConfig& cfg);

// Re-integrate the ground-truth dynamics from an arbitrary frame, reusing the
// latents / coupling / emitters recorded in `context`. Returns start + `steps`
// further frames. Shares the simulate() stepper, so continuing from a recorded
// frame reproduces the original series bit-for-bit.
std::vector<Frame> truth_rollout(const Trajectory& context, const Frame& start, int steps);

}  // namespace hdyn
