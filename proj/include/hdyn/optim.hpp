#pragma once
#include <vector>

#include "hdyn/tensor.hpp"

namespace hdyn::nn {

// Adam over a fixed parameter set. Row tables (embedding matrices) have their
// gradient rows divided by the number of times the row was gathered during the
// accumulation window, so a node appearing in several batch frames contributes
// the *average* of its per-appearance gradients rather than the sum.
// step() consumes and re-zeroes the gradients.
struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    bool mean_row_grads = true;
};

class Adam {
public:
    Adam(std::vector<Parameter*> params, AdamConfig cfg = {});
    void step();
    int64_t t() const { return t_; }
    void set_t(int64_t t) { t_ = t; }  // restore the step count when resuming
    // forget accumulated moments for one parameter (used after its values are
    // overwritten out-of-band, e.g. by the embedding re-centering pass)
    void reset_moments(Parameter* p);

private:
    std::vector<Parameter*> params_;
    AdamConfig cfg_;
    int64_t t_ = 0;
};

}  // namespace hdyn::nn
