#pragma once
#include <string>
#include <vector>

#include <json.hpp>

#include "hdyn/model.hpp"

// Analysis pipelines over a trained model + the dataset it was trained on:
// clustering, profile export, latent-recovery fits, rollout metrics, and
// purified (single-cluster) decomposition. Each task returns a JSON fragment
// and optionally drops plot-ready CSVs next to the report.
namespace hdyn::report {

using gnn::GnnModel;
using gnn::Mat;
using nlohmann::json;

struct AnalyzeOptions {
    std::string out_dir;           // CSV / dataset outputs; empty = JSON only
    double cluster_threshold = 0.01;
    int rollout_steps = 250;
    int rollout_series = 0;        // which recorded series to roll out against
    int fit_samples = 20000;       // message-space samples for the boids fit
    uint64_t seed = 123;
};

// Probe grid for node_profiles: moving kinds get `points` distances strictly
// inside the connectivity band, lattice kinds a laplacian ramp, signaling and
// rps their scalar input range.
std::vector<double> default_probe(const GnnModel& m, int points = 200);

// Ground-truth response curves on the same grid, from the recorded latents;
// empty when the kind has no per-node truth curve (coulomb).
Mat truth_profiles(const Trajectory& data, const GnnModel& m,
                   const std::vector<double>& probe);

// Type labels from the recorded latents: the generating type ids for discrete
// mixtures, groups of equal first-parameter values for lattice patterns,
// empty for continuous latents.
std::vector<int32_t> truth_type_labels(const Trajectory& data);

// Closed-loop rollout with every real node's embedding replaced by (e0, e1);
// ghost rows keep their trained values. The model is restored afterwards.
std::vector<Frame> purified_rollout(GnnModel& m, const Trajectory& context,
                                    const Frame& start, int steps, double e0, double e1);

// RMSE between two frames of the same system: positions (min-image when
// periodic) for moving kinds, per-channel state otherwise.
double frame_rmse(const SystemConfig& cfg, const Frame& a, const Frame& b);

json run_cluster(GnnModel& m, const Trajectory& data, const AnalyzeOptions& opt);
json run_profiles(GnnModel& m, const Trajectory& data, const AnalyzeOptions& opt);
json run_fit(GnnModel& m, const Trajectory& data, const AnalyzeOptions& opt);
json run_metrics(GnnModel& m, const Trajectory& data, const AnalyzeOptions& opt);
json run_decompose(GnnModel& m, const Trajectory& data, const AnalyzeOptions& opt);

// Runs the requested tasks (any of cluster, profiles, fit, metrics,
// decompose), assembles the report document, and verifies it against the
// shipped schema. Unknown task names throw ConfigError.
json build_report(GnnModel& m, const Trajectory& data, const std::string& model_path,
                  const std::string& data_path, const std::vector<std::string>& tasks,
                  const AnalyzeOptions& opt);

// The schema the report is promised to satisfy (shipped copy:
// share/analysis_report.schema.json).
const char* report_schema_text();

// Minimal structural validator covering the subset of JSON Schema the report
// schema uses (type / properties / required / additionalProperties / items /
// enum). Returns "" when valid, else "<json-path>: <problem>".
std::string schema_error(const json& doc, const json& schema);

}  // namespace hdyn::report
