#include "hdyn/integrate.hpp"

#include <stdexcept>

namespace hdyn {

void euler_first_order(std::vector<Vec2>& pos, std::span<const Vec2> deriv,
                       double dt, bool periodic, double box) {
    if (pos.size() != deriv.size()) throw std::invalid_argument("euler: size mismatch");
    for (size_t i = 0; i < pos.size(); ++i) {
        pos[i] += deriv[i] * dt;
        if (periodic) pos[i] = wrap(pos[i], box);
    }
}

void euler_semi_implicit(std::vector<Vec2>& pos, std::vector<Vec2>& vel,
                         std::span<const Vec2> accel, double dt,
                         bool periodic, double box) {
    if (pos.size() != vel.size() || pos.size() != accel.size()) {
        throw std::invalid_argument("euler: size mismatch");
    }
    for (size_t i = 0; i < pos.size(); ++i) {
        vel[i] += accel[i] * dt;
        pos[i] += vel[i] * dt;
        if (periodic) pos[i] = wrap(pos[i], box);
    }
}

void euler_first_order(std::vector<double>& u, std::span<const double> deriv, double dt) {
    if (u.size() != deriv.size()) throw std::invalid_argument("euler: size mismatch");
    for (size_t i = 0; i < u.size(); ++i) u[i] += deriv[i] * dt;
}

void euler_semi_implicit(std::vector<double>& u, std::vector<double>& udot,
                         std::span<const double> accel, double dt) {
    if (u.size() != udot.size() || u.size() != accel.size()) {
        throw std::invalid_argument("euler: size mismatch");
    }
    for (size_t i = 0; i < u.size(); ++i) {
        udot[i] += accel[i] * dt;
        u[i] += udot[i] * dt;
    }
}

}  // namespace hdyn
