#pragma once
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "hdyn/vec2.hpp"

namespace hdyn::analyze {

using Mat = Eigen::MatrixXd;

// --- clustering ---------------------------------------------------------

// Single-linkage labels: rows within `eps` chain into one component. Labels
// are dense, ordered by first appearance.
std::vector<int> cluster_eps(const Mat& pts, double eps);

// Single-linkage agglomeration until exactly k clusters remain (fewer if the
// input has fewer rows).
std::vector<int> cluster_to_k(const Mat& pts, int k);

int n_clusters(const std::vector<int>& labels);

// Minimum-cost assignment of rows to columns. Returns the chosen column per
// row (-1 when cols < rows leaves a row unmatched).
std::vector<int> hungarian(const Mat& cost);

// Fraction of points whose predicted cluster maps onto their true class under
// the best one-to-one label matching.
double cluster_accuracy(const std::vector<int>& pred, std::span<const int32_t> truth);

// --- fits and summary statistics ----------------------------------------

double pearson(std::span<const double> x, std::span<const double> y);
double rmse(std::span<const double> x, std::span<const double> y);

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;  // of the points the fit was computed on
};
LineFit fit_line(std::span<const double> x, std::span<const double> y);
// least squares, then refit with residuals above 5x the median absolute
// deviation excluded
LineFit fit_line_robust(std::span<const double> x, std::span<const double> y);

struct PowerFit {
    double amp = 0.0;
    double exponent = 0.0;  // y ~ amp * x^exponent
};
// log-log line fit over the strictly positive pairs
PowerFit fit_power(std::span<const double> x, std::span<const double> y);

// Bayesian information criterion for a least-squares fit.
double bic(double rss, int n_samples, int n_params);

// Symmetric rank-1 factor: find q minimizing sum_{i<j} (q_i q_j - s(i,j))^2,
// ignoring the diagonal. The entry with the largest magnitude is made
// positive; the global sign is not identifiable.
std::vector<double> factor_rank1(const Mat& s);

// Rows projected onto their top principal components. Components are sign-
// fixed so the largest-magnitude loading is positive.
Mat pca_project(const Mat& x, int dims);

// --- distribution and image comparison ----------------------------------

// Entropy-regularized optimal-transport divergence between two point clouds
// (uniform weights, squared-distance cost), debiased with the self terms.
double sinkhorn_divergence(const std::vector<Vec2>& a, const std::vector<Vec2>& b,
                           double eps = 1e-3, int max_iters = 500);

// Mean structural similarity over all fully covered 11x11 windows, with the
// standard gaussian weighting (sigma 1.5) and stabilizers for value range
// `range`.
double ssim(const Mat& a, const Mat& b, double range = 1.0);

}  // namespace hdyn::analyze
