#include "hdyn/analyze.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace hdyn::analyze {

namespace {

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int i) {
        while (parent[i] != i) i = parent[i] = parent[parent[i]];
        return i;
    }
    bool unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        parent[b] = a;
        return true;
    }
};

std::vector<int> dense_labels(UnionFind& uf, int n) {
    std::vector<int> labels(n, -1);
    std::vector<int> remap(n, -1);
    int next = 0;
    for (int i = 0; i < n; ++i) {
        int r = uf.find(i);
        if (remap[r] < 0) remap[r] = next++;
        labels[i] = remap[r];
    }
    return labels;
}

}  // namespace

std::vector<int> cluster_eps(const Mat& pts, double eps) {
    int n = static_cast<int>(pts.rows());
    UnionFind uf(n);
    double e2 = eps * eps;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            if ((pts.row(i) - pts.row(j)).squaredNorm() < e2) uf.unite(i, j);
        }
    }
    return dense_labels(uf, n);
}

std::vector<int> cluster_to_k(const Mat& pts, int k) {
    int n = static_cast<int>(pts.rows());
    struct Pair {
        double d2;
        int i, j;
    };
    std::vector<Pair> pairs;
    pairs.reserve(static_cast<size_t>(n) * (n - 1) / 2);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            pairs.push_back({(pts.row(i) - pts.row(j)).squaredNorm(), i, j});
        }
    }
    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
        if (a.d2 != b.d2) return a.d2 < b.d2;
        if (a.i != b.i) return a.i < b.i;
        return a.j < b.j;
    });
    UnionFind uf(n);
    int components = n;
    for (const Pair& p : pairs) {
        if (components <= k) break;
        if (uf.unite(p.i, p.j)) --components;
    }
    return dense_labels(uf, n);
}

int n_clusters(const std::vector<int>& labels) {
    int mx = -1;
    for (int l : labels) mx = std::max(mx, l);
    return mx + 1;
}

std::vector<int> hungarian(const Mat& cost) {
    int n = static_cast<int>(cost.rows());
    int m = static_cast<int>(cost.cols());
    if (n > m) {
        // solve the transposed problem and invert the matching
        std::vector<int> col_to_row = hungarian(cost.transpose());
        std::vector<int> out(n, -1);
        for (int j = 0; j < m; ++j) {
            if (col_to_row[j] >= 0) out[col_to_row[j]] = j;
        }
        return out;
    }
    constexpr double kInf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
    std::vector<int> match(m + 1, 0), way(m + 1, 0);
    for (int i = 1; i <= n; ++i) {
        match[0] = i;
        int j0 = 0;
        std::vector<double> minv(m + 1, kInf);
        std::vector<char> used(m + 1, 0);
        do {
            used[j0] = 1;
            int i0 = match[j0], j1 = -1;
            double delta = kInf;
            for (int j = 1; j <= m; ++j) {
                if (used[j]) continue;
                double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            int j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> out(n, -1);
    for (int j = 1; j <= m; ++j) {
        if (match[j] > 0) out[match[j] - 1] = j - 1;
    }
    return out;
}

double cluster_accuracy(const std::vector<int>& pred, std::span<const int32_t> truth) {
    int n = static_cast<int>(pred.size());
    if (n == 0 || truth.size() != pred.size()) return 0.0;
    int kp = n_clusters(pred);
    int kt = 0;
    for (int32_t t : truth) kt = std::max(kt, static_cast<int>(t) + 1);
    int k = std::max(kp, kt);
    Mat count = Mat::Zero(k, k);
    for (int i = 0; i < n; ++i) {
        if (truth[i] < 0) return 0.0;  // truth must be labeled
        count(pred[i], truth[i]) += 1.0;
    }
    std::vector<int> assign = hungarian(-count);
    double hits = 0.0;
    for (int r = 0; r < k; ++r) {
        if (assign[r] >= 0) hits += count(r, assign[r]);
    }
    return hits / n;
}

double pearson(std::span<const double> x, std::span<const double> y) {
    size_t n = std::min(x.size(), y.size());
    if (n < 2) return 0.0;
    double mx = 0.0, my = 0.0;
    for (size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (size_t i = 0; i < n; ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx <= 0.0 || syy <= 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

double rmse(std::span<const double> x, std::span<const double> y) {
    size_t n = std::min(x.size(), y.size());
    if (n == 0) return 0.0;
    double ss = 0.0;
    for (size_t i = 0; i < n; ++i) ss += (x[i] - y[i]) * (x[i] - y[i]);
    return std::sqrt(ss / n);
}

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
    size_t n = std::min(x.size(), y.size());
    if (n < 2) return {};
    double mx = 0.0, my = 0.0;
    for (size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (size_t i = 0; i < n; ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx <= 0.0) return {0.0, my, syy <= 0.0 ? 1.0 : 0.0};
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r2 = syy <= 0.0 ? 1.0 : sxy * sxy / (sxx * syy);
    return f;
}

LineFit fit_line_robust(std::span<const double> x, std::span<const double> y) {
    size_t n = std::min(x.size(), y.size());
    LineFit f = fit_line(x, y);
    if (n < 4) return f;
    std::vector<double> res(n);
    for (size_t i = 0; i < n; ++i) res[i] = std::fabs(y[i] - (f.slope * x[i] + f.intercept));
    std::vector<double> sorted = res;
    std::nth_element(sorted.begin(), sorted.begin() + n / 2, sorted.end());
    double mad = sorted[n / 2];
    if (mad <= 0.0) return f;
    std::vector<double> xs, ys;
    for (size_t i = 0; i < n; ++i) {
        if (res[i] <= 5.0 * mad) {
            xs.push_back(x[i]);
            ys.push_back(y[i]);
        }
    }
    if (xs.size() < 2 || xs.size() == n) return f;
    return fit_line(xs, ys);
}

PowerFit fit_power(std::span<const double> x, std::span<const double> y) {
    std::vector<double> lx, ly;
    for (size_t i = 0; i < std::min(x.size(), y.size()); ++i) {
        if (x[i] > 0.0 && y[i] > 0.0) {
            lx.push_back(std::log(x[i]));
            ly.push_back(std::log(y[i]));
        }
    }
    LineFit f = fit_line(lx, ly);
    return {std::exp(f.intercept), f.slope};
}

double bic(double rss, int n_samples, int n_params) {
    double var = std::max(rss / std::max(1, n_samples), 1e-300);
    return n_samples * std::log(var) + n_params * std::log(std::max(1, n_samples));
}

std::vector<double> factor_rank1(const Mat& s) {
    int n = static_cast<int>(s.rows());
    std::vector<double> q(n, 0.0);
    if (n < 2) return q;

    // seed signs and magnitudes from the strongest row, then alternate exact
    // coordinate updates of the off-diagonal least-squares objective
    int ref = 0;
    double best = -1.0;
    for (int i = 0; i < n; ++i) {
        double r = s.row(i).cwiseAbs().sum() - std::fabs(s(i, i));
        if (r > best) {
            best = r;
            ref = i;
        }
    }
    for (int i = 0; i < n; ++i) q[i] = i == ref ? 1.0 : s(i, ref);
    for (int iter = 0; iter < 200; ++iter) {
        double moved = 0.0;
        for (int i = 0; i < n; ++i) {
            double num = 0.0, den = 0.0;
            for (int j = 0; j < n; ++j) {
                if (j == i) continue;
                num += s(i, j) * q[j];
                den += q[j] * q[j];
            }
            if (den <= 0.0) continue;
            double nv = num / den;
            moved = std::max(moved, std::fabs(nv - q[i]));
            q[i] = nv;
        }
        if (moved < 1e-12) break;
    }
    int top = 0;
    for (int i = 1; i < n; ++i) {
        if (std::fabs(q[i]) > std::fabs(q[top])) top = i;
    }
    if (q[top] < 0.0) {
        for (double& v : q) v = -v;
    }
    return q;
}

Mat pca_project(const Mat& x, int dims) {
    Mat centered = x.rowwise() - x.colwise().mean();
    Eigen::JacobiSVD<Mat> svd(centered, Eigen::ComputeThinV);
    Mat v = svd.matrixV().leftCols(std::min<int>(dims, svd.matrixV().cols()));
    for (Eigen::Index c = 0; c < v.cols(); ++c) {
        Eigen::Index at = 0;
        v.col(c).cwiseAbs().maxCoeff(&at);
        if (v(at, c) < 0.0) v.col(c) = -v.col(c);
    }
    return centered * v;
}

namespace {

double log_sum_exp(const std::vector<double>& vals) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : vals) mx = std::max(mx, v);
    if (!std::isfinite(mx)) return mx;
    double s = 0.0;
    for (double v : vals) s += std::exp(v - mx);
    return mx + std::log(s);
}

// dual value of the eps-regularized transport problem with uniform weights;
// anneals the regularizer down from the cost scale so the tiny target eps
// still converges in a reasonable number of sweeps
double ot_eps(const std::vector<Vec2>& a, const std::vector<Vec2>& b, double eps,
              int max_iters) {
    int n = static_cast<int>(a.size());
    int m = static_cast<int>(b.size());
    Mat c(n, m);
    double cmax = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < m; ++j) {
            c(i, j) = (a[i] - b[j]).dot(a[i] - b[j]);
            cmax = std::max(cmax, c(i, j));
        }
    }
    double la = -std::log(static_cast<double>(n));
    double lb = -std::log(static_cast<double>(m));
    std::vector<double> f(n, 0.0), g(m, 0.0), tmp(std::max(n, m));

    auto sweep = [&](double e) {
        double moved = 0.0;
        tmp.resize(m);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < m; ++j) tmp[j] = lb + (g[j] - c(i, j)) / e;
            double nf = -e * log_sum_exp(tmp);
            moved = std::max(moved, std::fabs(nf - f[i]));
            f[i] = nf;
        }
        tmp.resize(n);
        for (int j = 0; j < m; ++j) {
            for (int i = 0; i < n; ++i) tmp[i] = la + (f[i] - c(i, j)) / e;
            g[j] = -e * log_sum_exp(tmp);
        }
        return moved;
    };

    double cur = std::max(eps, cmax);
    while (cur > eps) {
        for (int it = 0; it < 10; ++it) {
            if (sweep(cur) < 1e-12) break;
        }
        cur = std::max(eps, cur * 0.5);
    }
    for (int it = 0; it < max_iters; ++it) {
        if (sweep(eps) < 1e-12) break;
    }

    double val = 0.0;
    for (int i = 0; i < n; ++i) val += f[i] / n;
    for (int j = 0; j < m; ++j) val += g[j] / m;
    return val;
}

}  // namespace

double sinkhorn_divergence(const std::vector<Vec2>& a, const std::vector<Vec2>& b,
                           double eps, int max_iters) {
    if (a.empty() || b.empty()) return 0.0;
    double ab = ot_eps(a, b, eps, max_iters);
    double aa = ot_eps(a, a, eps, max_iters);
    double bb = ot_eps(b, b, eps, max_iters);
    return ab - 0.5 * aa - 0.5 * bb;
}

double ssim(const Mat& a, const Mat& b, double range) {
    constexpr int kWin = 11;
    constexpr double kSigma = 1.5;
    if (a.rows() != b.rows() || a.cols() != b.cols()) return 0.0;
    if (a.rows() < kWin || a.cols() < kWin) return 0.0;

    Mat w(kWin, kWin);
    double sum = 0.0;
    for (int r = 0; r < kWin; ++r) {
        for (int c = 0; c < kWin; ++c) {
            double dr = r - kWin / 2, dc = c - kWin / 2;
            w(r, c) = std::exp(-(dr * dr + dc * dc) / (2.0 * kSigma * kSigma));
            sum += w(r, c);
        }
    }
    w /= sum;

    double c1 = (0.01 * range) * (0.01 * range);
    double c2 = (0.03 * range) * (0.03 * range);
    double total = 0.0;
    int count = 0;
    for (Eigen::Index r = 0; r + kWin <= a.rows(); ++r) {
        for (Eigen::Index c = 0; c + kWin <= a.cols(); ++c) {
            auto wa = a.block(r, c, kWin, kWin);
            auto wb = b.block(r, c, kWin, kWin);
            double mu_a = (w.array() * wa.array()).sum();
            double mu_b = (w.array() * wb.array()).sum();
            double var_a = (w.array() * wa.array().square()).sum() - mu_a * mu_a;
            double var_b = (w.array() * wb.array().square()).sum() - mu_b * mu_b;
            double cov = (w.array() * (wa.array() * wb.array())).sum() - mu_a * mu_b;
            double v = ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) /
                       ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
            total += v;
            ++count;
        }
    }
    return count > 0 ? total / count : 0.0;
}

}  // namespace hdyn::analyze
