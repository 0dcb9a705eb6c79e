#include "hdyn/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace hdyn::nn {

int64_t MlpSpec::param_count() const {
    int64_t total = 0;
    for (int l = 0; l < layers; ++l) {
        int64_t fan_in = l == 0 ? in : hidden;
        int64_t fan_out = l == layers - 1 ? out : hidden;
        total += fan_in * fan_out + fan_out;
    }
    return total;
}

void Mlp::init(const MlpSpec& s, Rng& rng) {
    if (s.layers < 2 || s.in < 1 || s.hidden < 1 || s.out < 1) {
        throw std::invalid_argument("mlp: bad spec");
    }
    spec = s;
    W.clear();
    b.clear();
    for (int l = 0; l < s.layers; ++l) {
        int fan_in = l == 0 ? s.in : s.hidden;
        int fan_out = l == s.layers - 1 ? s.out : s.hidden;
        Mat w(fan_in, fan_out), bias = Mat::Zero(1, fan_out);
        double bound;
        if (s.act == MlpSpec::Act::Sine) {
            bound = l == 0 ? 1.0 / fan_in : std::sqrt(6.0 / fan_in) / s.w0;
        } else {
            bound = std::sqrt(6.0 / fan_in);
        }
        for (int r = 0; r < fan_in; ++r) {
            for (int c = 0; c < fan_out; ++c) w(r, c) = rng.uniform(-bound, bound);
        }
        if (s.act == MlpSpec::Act::Sine) {
            double bb = 1.0 / std::sqrt(static_cast<double>(fan_in));
            for (int c = 0; c < fan_out; ++c) bias(0, c) = rng.uniform(-bb, bb);
        }
        W.emplace_back(std::move(w));
        b.emplace_back(std::move(bias));
    }
}

Tape::Var Mlp::apply(Tape& t, Tape::Var x) {
    Tape::Var z = x;
    for (int l = 0; l < spec.layers; ++l) {
        z = t.add_rowvec(t.matmul(z, t.param(W[l])), t.param(b[l]));
        if (l + 1 < spec.layers) {
            z = spec.act == MlpSpec::Act::Sine ? t.sin_wave(z, spec.w0) : t.relu(z);
        }
    }
    return z;
}

Mat Mlp::apply_plain(const Mat& x) const {
    Mat z = x;
    for (int l = 0; l < spec.layers; ++l) {
        Mat y = (z * W[l].value).rowwise() + b[l].value.row(0);
        if (l + 1 < spec.layers) {
            if (spec.act == MlpSpec::Act::Sine) {
                y = (spec.w0 * y.array()).sin();
            } else {
                y = y.cwiseMax(0.0);
            }
        }
        z = std::move(y);
    }
    return z;
}

int64_t Mlp::n_params() const {
    int64_t total = 0;
    for (const auto& p : W) total += p.value.size();
    for (const auto& p : b) total += p.value.size();
    return total;
}

std::vector<Parameter*> Mlp::params() {
    std::vector<Parameter*> out;
    for (auto& p : W) out.push_back(&p);
    for (auto& p : b) out.push_back(&p);
    return out;
}

}  // namespace hdyn::nn
