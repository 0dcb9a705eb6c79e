#pragma once
#include <Eigen/Dense>
#include <cstdint>
#include <unordered_map>
#include <vector>

namespace hdyn::nn {

using Mat = Eigen::MatrixXd;

// A trainable tensor. Gradients accumulate across tape uses until zero_grad().
// Row tables (embedding matrices addressed via gather) additionally track how
// often each row was gathered, so the optimizer can average duplicate-row
// gradients instead of summing them.
struct Parameter {
    Mat value;
    Mat grad;
    Mat m, v;                       // Adam moments, sized on first step
    std::vector<double> use_count;  // per-row gather counts (row tables only)
    bool row_table = false;

    Parameter() = default;
    explicit Parameter(Mat val) : value(std::move(val)) { zero_grad(); }

    void zero_grad() {
        grad = Mat::Zero(value.rows(), value.cols());
        if (row_table) use_count.assign(value.rows(), 0.0);
    }
};

// Reverse-mode tape over dense double matrices. Build a graph with the ops
// below, call backward(loss) once, read parameter gradients, reset(). Values
// held by the tape are released during the backward sweep, so read any outputs
// you need before calling backward().
class Tape {
public:
    using Var = int;

    const Mat& val(Var v) const;

    Var input(Mat value);                 // constant leaf
    Var param(Parameter& p);              // trainable leaf; cached per tape

    Var matmul(Var x, Var w);             // [r,k] x [k,c]
    Var add_rowvec(Var x, Var b);         // broadcast a [1,c] row over all rows
    Var relu(Var x);
    Var sin_wave(Var x, double w0);       // sin(w0 * x), elementwise
    Var tanh_act(Var x);
    Var add(Var a, Var b);                // same shape
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);                // elementwise
    Var scale(Var x, double k);
    Var concat_cols(const std::vector<Var>& xs);
    Var concat_rows(const std::vector<Var>& xs);
    Var gather_rows(Var x, std::vector<int32_t> rows);
    Var segment_sum(Var x, std::vector<int32_t> recv, int n_out);
    Var segment_mean(Var x, std::vector<int32_t> recv, int n_out);
    Var row_scale(Var x, Var s);          // s is [r,1]
    Var sum_sq(Var x);                    // scalar [1,1]

    void backward(Var loss);
    void reset();
    size_t size() const { return nodes_.size(); }

private:
    enum class Op {
        Input, Param, MatMul, AddRow, Relu, Sin, Tanh, Add, Sub, Mul, Scale,
        ConcatCols, ConcatRows, Gather, SegSum, SegMean, RowScale, SumSq
    };

    struct Node {
        Op op = Op::Input;
        Mat value;
        Mat grad;
        Parameter* par = nullptr;
        bool rg = false;
        std::vector<Var> in;
        double k = 0.0;                // Scale factor / sine frequency
        std::vector<int32_t> idx;      // Gather rows / segment receivers
        std::vector<double> cnt;       // SegMean denominators
        std::vector<int> offsets;      // concat boundaries
    };

    Var push(Node n);
    Mat& grad_of(Var v);
    bool rg(Var v) const { return nodes_[v].rg; }
    void step_back(Node& n);

    std::vector<Node> nodes_;
    std::unordered_map<const Parameter*, Var> param_cache_;
};

}  // namespace hdyn::nn
