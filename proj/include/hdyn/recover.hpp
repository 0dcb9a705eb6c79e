#pragma once
#include <vector>

#include "hdyn/analyze.hpp"
#include "hdyn/model.hpp"

// Latent recovery: turning a trained model's learned functions back into the
// per-node physical quantities that generated the data.
namespace hdyn::analyze {

// Slope of each profile row over the probe grid (least squares).
std::vector<double> profile_slopes(const Mat& profiles, const std::vector<double>& probe);

// Per-row amplitude of amp * d^exponent along the profiles; optionally
// reports the mean fitted exponent across rows.
std::vector<double> profile_power_amps(const Mat& profiles, const std::vector<double>& probe,
                                       double* mean_exponent = nullptr);

// Amplitude of a * x^exponent with the exponent held fixed (plain projection,
// so negative amplitudes are fine).
double fixed_power_amp(const std::vector<double>& x, std::span<const double> y,
                       double exponent);

// Pairwise charge products from an inverse-square fit of every pair profile:
// s(i,j) ~ q_i * q_j, diagonal zero.
Mat pair_product_matrix(const gnn::GnnModel& m, const std::vector<double>& probe);

// Per-node (cohesion, alignment, separation) coefficients of the flocking
// basis {dx, dvel, -dx/d^2}: Huber-weighted iteratively reweighted least
// squares over sampled message inputs.
Mat boids_coefficients(const gnn::GnnModel& m, int samples, uint64_t seed);

struct SignalingFit {
    std::vector<double> decay;     // per-node linear damping
    std::vector<double> gain;      // per-node tanh self-gain
    double msg_gain = 0.0;         // message net amplitude alpha: f(u) ~ alpha * tanh(u)
    std::vector<double> coupling;  // learned support weights rescaled by alpha
};
// Least-squares fits on the basis {u, tanh u}, probed on 41 evenly spaced
// points over u in [-3, 3].
SignalingFit signaling_fit(const gnn::GnnModel& m);

// Pooled quadratic reaction fit for the listed nodes at zero laplacian.
// Rows are the three channels, columns the basis
//   u, v, w, u^2, v^2, w^2, uv, uw, vw.
Mat rps_reaction(const gnn::GnnModel& m, const std::vector<int>& nodes);

// The learned emitter weight field sampled at pixel centers, row-major like
// the images the simulator consumes.
Mat field_image(const gnn::GnnModel& m, int side, double t_frac = 0.0);

// One channel of a lattice frame as a side x side image.
Mat frame_image(const Trajectory& data, const Frame& frame, int channel);

}  // namespace hdyn::analyze
