#pragma once
#include <memory>
#include <string>
#include <vector>

#include "hdyn/model.hpp"
#include "hdyn/optim.hpp"

namespace hdyn::gnn {

struct TrainConfig {
    int epochs = 20;
    int batch = 8;           // frames stacked per optimization step
    double lr = 1e-3;
    int n_rotations = 200;   // rotation augmentation granularity (invariant kinds)
    double noise_sigma = 0.0;
    int ghosts = 0;          // extra free-embedding particles per frame
    int hidden_f = 0;        // 0 = kind default
    int hidden_phi = 0;
    int multi_step = 1;      // signaling: unrolled sub-steps per sample
    double train_d_min = -1.0;  // override the interaction band floor when >= 0
    int max_steps_per_epoch = 0;  // 0 = every sample each epoch

    bool bootstrap = false;  // periodically snap embedding clusters together
    std::vector<int> bootstrap_epochs = {5, 10, 15};
    double bootstrap_threshold = 0.02;  // single-linkage distance
    double bootstrap_min_frac = 0.01;   // ignore clusters below this share

    uint64_t seed = 0;
    std::string out_dir;     // checkpoints + metrics.csv; empty = keep in memory
    bool save_snapshots = false;  // per-epoch embedding CSVs
};

struct EpochLog {
    int epoch = 0;
    double loss = 0.0;  // mean squared error per target component
    double seconds = 0.0;
};

// Snap single-linkage clusters of the first n_rows embedding rows to their
// per-dimension median. Rows closer than `threshold` chain into one cluster;
// clusters holding less than min_frac of the rows are left alone. Returns
// whether anything moved.
bool snap_embedding_clusters(Mat& emb, int n_rows, double threshold, double min_frac);

// Fits a GnnModel to one dataset: enumerates (series, frame) samples, stacks
// them into batch graphs, and runs Adam on the tape loss. Checkpoints land in
// cfg.out_dir after every epoch, so a killed run resumes where it stopped.
class Trainer {
public:
    Trainer(const Trajectory& data, const TrainConfig& cfg);
    // resume from a checkpoint written by an earlier run with the same config
    Trainer(const Trajectory& data, const TrainConfig& cfg, const std::string& checkpoint);

    void run();             // train through cfg.epochs
    bool run_one_epoch();   // returns false once cfg.epochs is reached

    GnnModel& model() { return model_; }
    int epoch() const { return epoch_; }
    const std::vector<EpochLog>& log() const { return log_; }

private:
    void fit_scales();
    std::vector<std::pair<int, int>> enumerate_samples() const;
    void bootstrap_embeddings();
    void write_epoch_outputs(const EpochLog& e);

    const Trajectory& data_;
    TrainConfig cfg_;
    GnnModel model_;
    std::unique_ptr<nn::Adam> adam_;  // built after model_ is in its final place
    int epoch_ = 0;
    std::vector<EpochLog> log_;
};

}  // namespace hdyn::gnn
