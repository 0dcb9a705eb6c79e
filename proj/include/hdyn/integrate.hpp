#pragma once
#include <span>
#include <vector>

#include "hdyn/vec2.hpp"

namespace hdyn {

// First-order systems prescribe velocity directly: x += dt * deriv.
// Periodic domains wrap positions back into [0, box).
void euler_first_order(std::vector<Vec2>& pos, std::span<const Vec2> deriv,
                       double dt, bool periodic, double box);

// Second-order systems use the semi-implicit update: the velocity moves first
// and the position then uses the *new* velocity,
//   v <- v + dt * a,  x <- x + dt * v.
void euler_semi_implicit(std::vector<Vec2>& pos, std::vector<Vec2>& vel,
                         std::span<const Vec2> accel, double dt,
                         bool periodic, double box);

// Scalar-field counterparts for mesh systems (per-node channels).
void euler_first_order(std::vector<double>& u, std::span<const double> deriv, double dt);
void euler_semi_implicit(std::vector<double>& u, std::vector<double>& udot,
                         std::span<const double> accel, double dt);

}  // namespace hdyn
