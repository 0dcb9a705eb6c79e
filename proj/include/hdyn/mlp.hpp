#pragma once
#include <cstdint>

#include "hdyn/rng.hpp"
#include "hdyn/tensor.hpp"

namespace hdyn::nn {

// Fully connected net: `layers` linear maps with the activation between them
// (none after the last). Relu nets get He-uniform weights and zero biases;
// Sine nets get the coordinate-network init (first layer U(+-1/in), later
// layers U(+-sqrt(6/fan_in)/w0), biases U(+-1/sqrt(fan_in))).
struct MlpSpec {
    int in = 0;
    int hidden = 0;
    int out = 0;
    int layers = 5;  // number of linear layers, >= 2
    enum class Act { Relu, Sine } act = Act::Relu;
    double w0 = 30.0;

    int64_t param_count() const;
};

struct Mlp {
    MlpSpec spec;
    std::vector<Parameter> W, b;

    void init(const MlpSpec& s, Rng& rng);
    Tape::Var apply(Tape& t, Tape::Var x);
    // tape-free forward for inference / profile extraction
    Mat apply_plain(const Mat& x) const;
    int64_t n_params() const;
    std::vector<Parameter*> params();
};

}  // namespace hdyn::nn
