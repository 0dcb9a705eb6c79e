#pragma once
#include <string>
#include <utility>
#include <vector>

#include "hdyn/mlp.hpp"
#include "hdyn/system.hpp"

namespace hdyn::gnn {

using nn::Mat;
using nn::Tape;

// Divisors applied to raw features before they enter the nets, plus the scale
// multiplied back onto predicted derivatives. Fitted from the training data
// once and frozen into the checkpoint; with lr fixed at 1e-3 the nets train
// reliably only when inputs and targets sit near unit scale.
struct FeatureScales {
    double d = 1.0;
    double dx = 1.0;
    double vel = 1.0;
    double u = 1.0;
    double lap = 1.0;
    double target = 1.0;
};

struct ModelSpec {
    SystemKind kind = SystemKind::AttractionRepulsion;
    int n_nodes = 0;
    int n_ghosts = 0;
    int hidden_f = 0;    // 0 = kind default
    int hidden_phi = 0;
    bool has_field = false;  // learn the stationary-sender weight field b(x)
    int multi_step = 1;      // >1: closed-loop unrolled loss (signaling)
    uint64_t seed = 0;
};

// Message-passing surrogate for one system kind:
//  - moving kinds:  deriv_i = Agg_j f(embeddings, d, dx [, velocities])
//  - lattice kinds: deriv_i = phi(embed_i, local state, laplacians)
//  - signaling:     du_i = phi(embed_i, u_i) + sum_j A_ij f(u_j), A learnable
//    on the known symmetric support
// Per-node 2-D embeddings start at 1 and are trained with everything else.
struct GnnModel {
    ModelSpec spec;
    FeatureScales scales;
    RadiusSpec band;  // connectivity used in training and rollout
    nn::Mlp f, phi, field_net;
    nn::Parameter embed;
    nn::Parameter a_vals;              // signaling: one weight per support pair
    std::vector<int32_t> pair_i, pair_j;  // support pairs (i < j), aligned with a_vals rows

    static GnnModel make(const ModelSpec& spec);
    // signaling models also need the coupling support (from the dataset's
    // conn matrix); pairs are the nonzero upper triangle
    void set_support(std::span<const double> conn, int n);
    Mat a_matrix() const;  // dense symmetric A from a_vals

    std::vector<nn::Parameter*> params();
    int embed_rows() const { return spec.n_nodes + spec.n_ghosts; }
};

// One assembled optimization problem: a set of frames stacked into a single
// graph (node rows carry a frame offset). Built by the trainer per batch and
// by rollout per step.
struct BatchGraph {
    int n_rows = 0;
    std::vector<int32_t> embed_row;       // stacked node -> embedding row
    std::vector<int32_t> recv, send;      // edges over stacked nodes
    std::vector<int32_t> erow_recv, erow_send;  // edge -> embedding rows
    Mat edge_geom;                        // [E,3]: d, dx.x, dx.y (scaled)
    Mat node_vel;                         // [rows,2] scaled (boids)
    Mat node_feat;                        // [rows,k] scaled (lattice kinds)
    Mat node_u;                           // [rows,1] scaled (signaling)
    int n_stat_edges = 0;                 // trailing edges come from emitters
    std::vector<int32_t> stat_src;        // per stat edge -> row of stat_xy
    Mat stat_xy;                          // [S,3]: x, y, t for the field net
    std::vector<int32_t> loss_rows;
    std::vector<Mat> target;              // per sub-step, rows = loss_rows
    std::vector<int32_t> edge_pair;       // signaling: edge -> a_vals row
};

struct AssembleOpts {
    Rng* rng = nullptr;       // required for ghosts / noise / rotations
    int n_rotations = 0;      // 0 = no rotation augmentation
    double noise_sigma = 0.0; // multiplicative target noise
    bool with_targets = true;
};

// Stack dataset samples (series, t) into one problem.
BatchGraph assemble_batch(const GnnModel& model, const Trajectory& data,
                          const std::vector<std::pair<int, int>>& samples,
                          const AssembleOpts& opts);

// One bare state (rollout): no ghosts, no augmentation, no targets.
BatchGraph assemble_state(const GnnModel& model, const Trajectory& context,
                          const Frame& state, double t_frac = 0.0);

// Predicted derivative for every stacked row, in *normalized* units
// (multiply by scales.target for physical values). Single step.
Tape::Var predict(Tape& t, GnnModel& model, const BatchGraph& g);

// Sum-of-squares training loss over the loss rows; unrolls multi_step
// sub-steps for signaling models.
Tape::Var batch_loss(Tape& t, GnnModel& model, const BatchGraph& g, double dt);

// Physical-units derivative prediction for one frame (convenience wrapper).
Mat predict_frame(GnnModel& model, const Trajectory& context, const Frame& state,
                  double t_frac = 0.0);

// Closed-loop integration of the learned model from `start`.
std::vector<Frame> model_rollout(GnnModel& model, const Trajectory& context,
                                 const Frame& start, int steps);

// Per-node response curves used for clustering, recovery fits, and embedding
// re-centering. Moving kinds: signed radial interaction strength over the
// probe distances (receiver or sender slot per kind, velocities zero).
// Lattice/signaling kinds: the node function over a probe grid of its scalar
// input. Rows align with real nodes (ghosts excluded).
Mat node_profiles(const GnnModel& model, const std::vector<double>& probe);

// Pair profile (coulomb): signed radial acceleration of i due to j over the
// probe distances.
std::vector<double> pair_profile(const GnnModel& model, int i, int j,
                                 const std::vector<double>& probe);

// Checkpointing: JSON header + raw little-endian parameter and Adam-moment
// payloads; loads reproduce training state bit-for-bit.
void save_model(const GnnModel& model, const std::string& path, int epoch = 0,
                int64_t adam_t = 0);
struct LoadedModel {
    GnnModel model;
    int epoch = 0;
    int64_t adam_t = 0;
};
LoadedModel load_model(const std::string& path);

}  // namespace hdyn::gnn
