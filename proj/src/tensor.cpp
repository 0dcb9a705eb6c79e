#include "hdyn/tensor.hpp"

#include <stdexcept>

namespace hdyn::nn {

namespace {
void check(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("tape: ") + what);
}
}  // namespace

const Mat& Tape::val(Var v) const {
    const Node& n = nodes_.at(v);
    return n.par ? n.par->value : n.value;
}

Tape::Var Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<Var>(nodes_.size() - 1);
}

Mat& Tape::grad_of(Var v) {
    Node& n = nodes_[v];
    if (n.par) {
        if (n.par->grad.size() == 0) n.par->zero_grad();
        return n.par->grad;
    }
    if (n.grad.size() == 0) {
        const Mat& val = n.par ? n.par->value : n.value;
        n.grad = Mat::Zero(val.rows(), val.cols());
    }
    return n.grad;
}

Tape::Var Tape::input(Mat value) {
    Node n;
    n.op = Op::Input;
    n.value = std::move(value);
    return push(std::move(n));
}

Tape::Var Tape::param(Parameter& p) {
    auto it = param_cache_.find(&p);
    if (it != param_cache_.end()) return it->second;
    Node n;
    n.op = Op::Param;
    n.par = &p;
    n.rg = true;
    Var v = push(std::move(n));
    param_cache_[&p] = v;
    return v;
}

Tape::Var Tape::matmul(Var x, Var w) {
    check(val(x).cols() == val(w).rows(), "matmul shape mismatch");
    Node n;
    n.op = Op::MatMul;
    n.in = {x, w};
    n.rg = rg(x) || rg(w);
    n.value.noalias() = val(x) * val(w);
    return push(std::move(n));
}

Tape::Var Tape::add_rowvec(Var x, Var b) {
    check(val(b).rows() == 1 && val(b).cols() == val(x).cols(), "add_rowvec shape mismatch");
    Node n;
    n.op = Op::AddRow;
    n.in = {x, b};
    n.rg = rg(x) || rg(b);
    n.value = val(x).rowwise() + val(b).row(0);
    return push(std::move(n));
}

Tape::Var Tape::relu(Var x) {
    Node n;
    n.op = Op::Relu;
    n.in = {x};
    n.rg = rg(x);
    n.value = val(x).cwiseMax(0.0);
    return push(std::move(n));
}

Tape::Var Tape::sin_wave(Var x, double w0) {
    Node n;
    n.op = Op::Sin;
    n.in = {x};
    n.rg = rg(x);
    n.k = w0;
    n.value = (w0 * val(x).array()).sin();
    return push(std::move(n));
}

Tape::Var Tape::tanh_act(Var x) {
    Node n;
    n.op = Op::Tanh;
    n.in = {x};
    n.rg = rg(x);
    n.value = val(x).array().tanh();
    return push(std::move(n));
}

Tape::Var Tape::add(Var a, Var b) {
    check(val(a).rows() == val(b).rows() && val(a).cols() == val(b).cols(), "add shape mismatch");
    Node n;
    n.op = Op::Add;
    n.in = {a, b};
    n.rg = rg(a) || rg(b);
    n.value = val(a) + val(b);
    return push(std::move(n));
}

Tape::Var Tape::sub(Var a, Var b) {
    check(val(a).rows() == val(b).rows() && val(a).cols() == val(b).cols(), "sub shape mismatch");
    Node n;
    n.op = Op::Sub;
    n.in = {a, b};
    n.rg = rg(a) || rg(b);
    n.value = val(a) - val(b);
    return push(std::move(n));
}

Tape::Var Tape::mul(Var a, Var b) {
    check(val(a).rows() == val(b).rows() && val(a).cols() == val(b).cols(), "mul shape mismatch");
    Node n;
    n.op = Op::Mul;
    n.in = {a, b};
    n.rg = rg(a) || rg(b);
    n.value = val(a).cwiseProduct(val(b));
    return push(std::move(n));
}

Tape::Var Tape::scale(Var x, double k) {
    Node n;
    n.op = Op::Scale;
    n.in = {x};
    n.rg = rg(x);
    n.k = k;
    n.value = k * val(x);
    return push(std::move(n));
}

Tape::Var Tape::concat_cols(const std::vector<Var>& xs) {
    check(!xs.empty(), "concat of nothing");
    Eigen::Index rows = val(xs[0]).rows();
    Eigen::Index cols = 0;
    std::vector<int> offsets{0};
    for (Var v : xs) {
        check(val(v).rows() == rows, "concat_cols row mismatch");
        cols += val(v).cols();
        offsets.push_back(static_cast<int>(cols));
    }
    Node n;
    n.op = Op::ConcatCols;
    n.in = xs;
    n.offsets = std::move(offsets);
    n.value.resize(rows, cols);
    for (size_t i = 0; i < xs.size(); ++i) {
        n.rg = n.rg || rg(xs[i]);
        n.value.middleCols(n.offsets[i], n.offsets[i + 1] - n.offsets[i]) = val(xs[i]);
    }
    return push(std::move(n));
}

Tape::Var Tape::concat_rows(const std::vector<Var>& xs) {
    check(!xs.empty(), "concat of nothing");
    Eigen::Index cols = val(xs[0]).cols();
    Eigen::Index rows = 0;
    std::vector<int> offsets{0};
    for (Var v : xs) {
        check(val(v).cols() == cols, "concat_rows col mismatch");
        rows += val(v).rows();
        offsets.push_back(static_cast<int>(rows));
    }
    Node n;
    n.op = Op::ConcatRows;
    n.in = xs;
    n.offsets = std::move(offsets);
    n.value.resize(rows, cols);
    for (size_t i = 0; i < xs.size(); ++i) {
        n.rg = n.rg || rg(xs[i]);
        n.value.middleRows(n.offsets[i], n.offsets[i + 1] - n.offsets[i]) = val(xs[i]);
    }
    return push(std::move(n));
}

Tape::Var Tape::gather_rows(Var x, std::vector<int32_t> rows) {
    const Mat& src = val(x);
    Node n;
    n.op = Op::Gather;
    n.in = {x};
    n.rg = rg(x);
    n.value.resize(static_cast<Eigen::Index>(rows.size()), src.cols());
    for (size_t r = 0; r < rows.size(); ++r) {
        check(rows[r] >= 0 && rows[r] < src.rows(), "gather row out of range");
        n.value.row(static_cast<Eigen::Index>(r)) = src.row(rows[r]);
    }
    // row tables track gather multiplicity for the optimizer's mean mode
    Node& leaf = nodes_[x];
    if (leaf.par && leaf.par->row_table) {
        if (leaf.par->use_count.size() != static_cast<size_t>(src.rows())) {
            leaf.par->use_count.assign(src.rows(), 0.0);
        }
        for (int32_t r : rows) leaf.par->use_count[r] += 1.0;
    }
    n.idx = std::move(rows);
    return push(std::move(n));
}

Tape::Var Tape::segment_sum(Var x, std::vector<int32_t> recv, int n_out) {
    check(static_cast<Eigen::Index>(recv.size()) == val(x).rows(), "segment rows mismatch");
    Node n;
    n.op = Op::SegSum;
    n.in = {x};
    n.rg = rg(x);
    n.value = Mat::Zero(n_out, val(x).cols());
    const Mat& src = val(x);
    for (size_t e = 0; e < recv.size(); ++e) {
        check(recv[e] >= 0 && recv[e] < n_out, "segment receiver out of range");
        n.value.row(recv[e]) += src.row(static_cast<Eigen::Index>(e));
    }
    n.idx = std::move(recv);
    return push(std::move(n));
}

Tape::Var Tape::segment_mean(Var x, std::vector<int32_t> recv, int n_out) {
    check(static_cast<Eigen::Index>(recv.size()) == val(x).rows(), "segment rows mismatch");
    Node n;
    n.op = Op::SegMean;
    n.in = {x};
    n.rg = rg(x);
    n.cnt.assign(n_out, 0.0);
    for (int32_t r : recv) {
        check(r >= 0 && r < n_out, "segment receiver out of range");
        n.cnt[r] += 1.0;
    }
    n.value = Mat::Zero(n_out, val(x).cols());
    const Mat& src = val(x);
    for (size_t e = 0; e < recv.size(); ++e) {
        n.value.row(recv[e]) += src.row(static_cast<Eigen::Index>(e));
    }
    for (int i = 0; i < n_out; ++i) {
        if (n.cnt[i] > 0.0) n.value.row(i) /= n.cnt[i];
    }
    n.idx = std::move(recv);
    return push(std::move(n));
}

Tape::Var Tape::row_scale(Var x, Var s) {
    check(val(s).cols() == 1 && val(s).rows() == val(x).rows(), "row_scale needs [r,1] scales");
    Node n;
    n.op = Op::RowScale;
    n.in = {x, s};
    n.rg = rg(x) || rg(s);
    n.value = val(x).array().colwise() * val(s).col(0).array();
    return push(std::move(n));
}

Tape::Var Tape::sum_sq(Var x) {
    Node n;
    n.op = Op::SumSq;
    n.in = {x};
    n.rg = rg(x);
    n.value = Mat::Constant(1, 1, val(x).squaredNorm());
    return push(std::move(n));
}

void Tape::step_back(Node& n) {
    const Mat& g = n.grad;
    switch (n.op) {
        case Op::Input:
        case Op::Param:
            break;
        case Op::MatMul: {
            if (rg(n.in[0])) grad_of(n.in[0]).noalias() += g * val(n.in[1]).transpose();
            if (rg(n.in[1])) grad_of(n.in[1]).noalias() += val(n.in[0]).transpose() * g;
            break;
        }
        case Op::AddRow: {
            if (rg(n.in[0])) grad_of(n.in[0]) += g;
            if (rg(n.in[1])) grad_of(n.in[1]).row(0) += g.colwise().sum();
            break;
        }
        case Op::Relu: {
            if (rg(n.in[0])) {
                grad_of(n.in[0]).array() += (n.value.array() > 0.0).cast<double>() * g.array();
            }
            break;
        }
        case Op::Sin: {
            if (rg(n.in[0])) {
                grad_of(n.in[0]).array() += n.k * (n.k * val(n.in[0]).array()).cos() * g.array();
            }
            break;
        }
        case Op::Tanh: {
            if (rg(n.in[0])) {
                grad_of(n.in[0]).array() += (1.0 - n.value.array().square()) * g.array();
            }
            break;
        }
        case Op::Add: {
            if (rg(n.in[0])) grad_of(n.in[0]) += g;
            if (rg(n.in[1])) grad_of(n.in[1]) += g;
            break;
        }
        case Op::Sub: {
            if (rg(n.in[0])) grad_of(n.in[0]) += g;
            if (rg(n.in[1])) grad_of(n.in[1]) -= g;
            break;
        }
        case Op::Mul: {
            if (rg(n.in[0])) grad_of(n.in[0]).array() += val(n.in[1]).array() * g.array();
            if (rg(n.in[1])) grad_of(n.in[1]).array() += val(n.in[0]).array() * g.array();
            break;
        }
        case Op::Scale: {
            if (rg(n.in[0])) grad_of(n.in[0]) += n.k * g;
            break;
        }
        case Op::ConcatCols: {
            for (size_t i = 0; i < n.in.size(); ++i) {
                if (rg(n.in[i])) {
                    grad_of(n.in[i]) += g.middleCols(n.offsets[i], n.offsets[i + 1] - n.offsets[i]);
                }
            }
            break;
        }
        case Op::ConcatRows: {
            for (size_t i = 0; i < n.in.size(); ++i) {
                if (rg(n.in[i])) {
                    grad_of(n.in[i]) += g.middleRows(n.offsets[i], n.offsets[i + 1] - n.offsets[i]);
                }
            }
            break;
        }
        case Op::Gather: {
            if (rg(n.in[0])) {
                Mat& gi = grad_of(n.in[0]);
                for (size_t r = 0; r < n.idx.size(); ++r) {
                    gi.row(n.idx[r]) += g.row(static_cast<Eigen::Index>(r));
                }
            }
            break;
        }
        case Op::SegSum: {
            if (rg(n.in[0])) {
                Mat& gi = grad_of(n.in[0]);
                for (size_t e = 0; e < n.idx.size(); ++e) {
                    gi.row(static_cast<Eigen::Index>(e)) += g.row(n.idx[e]);
                }
            }
            break;
        }
        case Op::SegMean: {
            if (rg(n.in[0])) {
                Mat& gi = grad_of(n.in[0]);
                for (size_t e = 0; e < n.idx.size(); ++e) {
                    gi.row(static_cast<Eigen::Index>(e)) += g.row(n.idx[e]) / n.cnt[n.idx[e]];
                }
            }
            break;
        }
        case Op::RowScale: {
            if (rg(n.in[0])) {
                grad_of(n.in[0]).array() += g.array().colwise() * val(n.in[1]).col(0).array();
            }
            if (rg(n.in[1])) {
                grad_of(n.in[1]).col(0) += g.cwiseProduct(val(n.in[0])).rowwise().sum();
            }
            break;
        }
        case Op::SumSq: {
            if (rg(n.in[0])) grad_of(n.in[0]) += 2.0 * g(0, 0) * val(n.in[0]);
            break;
        }
    }
}

void Tape::backward(Var loss) {
    check(loss >= 0 && loss < static_cast<Var>(nodes_.size()), "backward on unknown var");
    check(val(loss).rows() == 1 && val(loss).cols() == 1, "backward needs a scalar loss");
    grad_of(loss) = Mat::Constant(1, 1, 1.0);
    for (Var v = loss; v >= 0; --v) {
        Node& n = nodes_[v];
        if (!n.rg || n.par != nullptr) continue;
        if (n.grad.size() == 0) continue;  // not on a path to the loss
        step_back(n);
        // consumers all live later on the tape and are already processed, so
        // this node's buffers can go; inputs keep their values until their turn
        n.grad.resize(0, 0);
        n.value.resize(0, 0);
    }
}

void Tape::reset() {
    nodes_.clear();
    param_cache_.clear();
}

}  // namespace hdyn::nn
