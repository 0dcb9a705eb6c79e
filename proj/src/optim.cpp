#include "hdyn/optim.hpp"

#include <cmath>

namespace hdyn::nn {

Adam::Adam(std::vector<Parameter*> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {}

void Adam::step() {
    ++t_;
    double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (Parameter* p : params_) {
        if (p->grad.size() == 0) p->zero_grad();
        if (p->m.size() == 0) {
            p->m = Mat::Zero(p->value.rows(), p->value.cols());
            p->v = Mat::Zero(p->value.rows(), p->value.cols());
        }
        if (p->row_table && cfg_.mean_row_grads &&
            p->use_count.size() == static_cast<size_t>(p->value.rows())) {
            for (Eigen::Index r = 0; r < p->value.rows(); ++r) {
                if (p->use_count[r] > 1.0) p->grad.row(r) /= p->use_count[r];
            }
        }
        p->m = cfg_.beta1 * p->m + (1.0 - cfg_.beta1) * p->grad;
        p->v.array() = cfg_.beta2 * p->v.array() + (1.0 - cfg_.beta2) * p->grad.array().square();
        p->value.array() -=
            cfg_.lr * (p->m.array() / bc1) / ((p->v.array() / bc2).sqrt() + cfg_.eps);
        p->zero_grad();
    }
}

void Adam::reset_moments(Parameter* p) {
    if (p->m.size() != 0) {
        p->m.setZero();
        p->v.setZero();
    }
}

}  // namespace hdyn::nn
