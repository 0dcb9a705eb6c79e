#include "hdyn/recover.hpp"

#include <cmath>

#include "hdyn/rng.hpp"

namespace hdyn::analyze {

std::vector<double> profile_slopes(const Mat& profiles, const std::vector<double>& probe) {
    std::vector<double> out(profiles.rows());
    for (Eigen::Index i = 0; i < profiles.rows(); ++i) {
        std::vector<double> y(profiles.cols());
        for (Eigen::Index c = 0; c < profiles.cols(); ++c) y[c] = profiles(i, c);
        out[i] = fit_line(probe, y).slope;
    }
    return out;
}

std::vector<double> profile_power_amps(const Mat& profiles, const std::vector<double>& probe,
                                       double* mean_exponent) {
    std::vector<double> out(profiles.rows());
    double esum = 0.0;
    int ecount = 0;
    for (Eigen::Index i = 0; i < profiles.rows(); ++i) {
        std::vector<double> y(profiles.cols());
        for (Eigen::Index c = 0; c < profiles.cols(); ++c) y[c] = profiles(i, c);
        PowerFit f = fit_power(probe, y);
        out[i] = f.amp;
        if (f.amp > 0.0) {
            esum += f.exponent;
            ++ecount;
        }
    }
    if (mean_exponent) *mean_exponent = ecount > 0 ? esum / ecount : 0.0;
    return out;
}

double fixed_power_amp(const std::vector<double>& x, std::span<const double> y,
                       double exponent) {
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < std::min(x.size(), y.size()); ++i) {
        double b = std::pow(x[i], exponent);
        num += y[i] * b;
        den += b * b;
    }
    return den > 0.0 ? num / den : 0.0;
}

Mat pair_product_matrix(const gnn::GnnModel& m, const std::vector<double>& probe) {
    int n = m.spec.n_nodes;
    Mat s = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            std::vector<double> prof = pair_profile(m, i, j, probe);
            // the radial response of i to j is -q_i q_j / d^2
            double prod = -fixed_power_amp(probe, prof, -2.0);
            s(i, j) = prod;
            s(j, i) = prod;
        }
    }
    return s;
}

Mat boids_coefficients(const gnn::GnnModel& m, int samples, uint64_t seed) {
    const gnn::FeatureScales& sc = m.scales;
    int n = m.spec.n_nodes;
    Rng rng(seed);

    // one shared draw of message inputs keeps the per-node fits comparable
    double d_lo = m.band.d_min + 0.1 * (m.band.d_max - m.band.d_min);
    Mat basis(2 * samples, 3);
    Mat feats_tail(samples, 7);  // d, dx, v_recv, v_send (scaled)
    for (int s = 0; s < samples; ++s) {
        double d = rng.uniform(d_lo, m.band.d_max);
        double th = rng.uniform(0.0, 2.0 * M_PI);
        Vec2 dx{d * std::cos(th), d * std::sin(th)};
        Vec2 vi{rng.uniform(-sc.vel, sc.vel), rng.uniform(-sc.vel, sc.vel)};
        Vec2 vj{rng.uniform(-sc.vel, sc.vel), rng.uniform(-sc.vel, sc.vel)};
        feats_tail.row(s) << d / sc.d, dx.x / sc.dx, dx.y / sc.dx, vi.x / sc.vel,
            vi.y / sc.vel, vj.x / sc.vel, vj.y / sc.vel;
        basis.row(2 * s) << dx.x, vj.x - vi.x, -dx.x / (d * d);
        basis.row(2 * s + 1) << dx.y, vj.y - vi.y, -dx.y / (d * d);
    }

    Mat out(n, 3);
    Mat x(samples, 9);
    std::vector<double> resid(2 * samples);
    for (int i = 0; i < n; ++i) {
        for (int s = 0; s < samples; ++s) {
            x(s, 0) = m.embed.value(i, 0);
            x(s, 1) = m.embed.value(i, 1);
            x.row(s).segment(2, 7) = feats_tail.row(s);
        }
        Mat y_net = m.f.apply_plain(x) * sc.target;
        Eigen::VectorXd y(2 * samples);
        for (int s = 0; s < samples; ++s) {
            y(2 * s) = y_net(s, 0);
            y(2 * s + 1) = y_net(s, 1);
        }
        Eigen::Vector3d coef = (basis.transpose() * basis)
                                   .ldlt()
                                   .solve(basis.transpose() * y);
        // Huber-weighted IRLS; the MAD scale keeps the reweighting immune to
        // the handful of samples a net extrapolates badly on
        const double huber_k = 1.345;
        for (int iter = 0; iter < 20; ++iter) {
            Eigen::VectorXd r = y - basis * coef;
            for (int k = 0; k < r.size(); ++k) resid[k] = std::fabs(r(k));
            std::vector<double> sorted = resid;
            std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2,
                             sorted.end());
            double scale = 1.4826 * sorted[sorted.size() / 2];
            if (scale <= 0.0) break;
            Eigen::Matrix3d g = Eigen::Matrix3d::Zero();
            Eigen::Vector3d rhs = Eigen::Vector3d::Zero();
            for (int k = 0; k < r.size(); ++k) {
                double w = resid[k] <= huber_k * scale ? 1.0 : huber_k * scale / resid[k];
                g += w * basis.row(k).transpose() * basis.row(k);
                rhs += w * basis.row(k).transpose() * y(k);
            }
            Eigen::Vector3d next = g.ldlt().solve(rhs);
            double moved = (next - coef).cwiseAbs().maxCoeff();
            coef = next;
            if (moved < 1e-12 * (1.0 + coef.cwiseAbs().maxCoeff())) break;
        }
        out.row(i) = coef.transpose();
    }
    return out;
}

SignalingFit signaling_fit(const gnn::GnnModel& m) {
    const gnn::FeatureScales& sc = m.scales;
    int pn = 41;
    std::vector<double> probe(pn);
    for (int p = 0; p < pn; ++p) probe[p] = -3.0 + 6.0 * p / (pn - 1);

    SignalingFit fit;
    Mat prof = node_profiles(m, probe);  // phi(embed_i, u), physical units

    // per-node least squares on the basis {u, tanh u}
    Eigen::Matrix2d g = Eigen::Matrix2d::Zero();
    for (double u : probe) {
        Eigen::Vector2d b(u, std::tanh(u));
        g += b * b.transpose();
    }
    fit.decay.resize(m.spec.n_nodes);
    fit.gain.resize(m.spec.n_nodes);
    for (int i = 0; i < m.spec.n_nodes; ++i) {
        Eigen::Vector2d rhs = Eigen::Vector2d::Zero();
        for (int p = 0; p < pn; ++p) {
            rhs += Eigen::Vector2d(probe[p], std::tanh(probe[p])) * prof(i, p);
        }
        Eigen::Vector2d coef = g.ldlt().solve(rhs);
        fit.decay[i] = -coef(0);
        fit.gain[i] = coef(1);
    }

    // message amplitude: f(u) ~ alpha * tanh(u)
    Mat fx(pn, 1);
    for (int p = 0; p < pn; ++p) fx(p, 0) = probe[p] / sc.u;
    Mat fy = m.f.apply_plain(fx) * sc.target;
    double num = 0.0, den = 0.0;
    for (int p = 0; p < pn; ++p) {
        double t = std::tanh(probe[p]);
        num += fy(p, 0) * t;
        den += t * t;
    }
    fit.msg_gain = den > 0.0 ? num / den : 0.0;

    fit.coupling.resize(m.pair_i.size());
    for (size_t p = 0; p < m.pair_i.size(); ++p) {
        fit.coupling[p] = m.a_vals.value(static_cast<Eigen::Index>(p), 0) * fit.msg_gain;
    }
    return fit;
}

Mat rps_reaction(const gnn::GnnModel& m, const std::vector<int>& nodes) {
    const gnn::FeatureScales& sc = m.scales;
    // concentration grid inside the physically visited simplex corner
    std::vector<double> levels;
    for (double v = 0.05; v <= 0.451; v += 0.08) levels.push_back(v);
    int g = static_cast<int>(levels.size());
    int rows = g * g * g;

    Mat basis(rows, 9);
    Mat x(rows, 8);
    Mat pooled = Mat::Zero(rows, 3);
    int r = 0;
    for (double u : levels) {
        for (double v : levels) {
            for (double w : levels) {
                basis.row(r) << u, v, w, u * u, v * v, w * w, u * v, u * w, v * w;
                x(r, 2) = u / sc.u;
                x(r, 3) = v / sc.u;
                x(r, 4) = w / sc.u;
                x(r, 5) = 0.0;
                x(r, 6) = 0.0;
                x(r, 7) = 0.0;
                ++r;
            }
        }
    }
    for (int node : nodes) {
        x.col(0).setConstant(m.embed.value(node, 0));
        x.col(1).setConstant(m.embed.value(node, 1));
        pooled += m.phi.apply_plain(x) * sc.target;
    }
    pooled /= static_cast<double>(nodes.size());

    Mat gram = basis.transpose() * basis;
    Mat coef(3, 9);
    for (int c = 0; c < 3; ++c) {
        coef.row(c) = gram.ldlt().solve(basis.transpose() * pooled.col(c)).transpose();
    }
    return coef;
}

Mat field_image(const gnn::GnnModel& m, int side, double t_frac) {
    Mat x(static_cast<Eigen::Index>(side) * side, 3);
    for (int r = 0; r < side; ++r) {
        for (int c = 0; c < side; ++c) {
            // pixel centers, matching the simulator's bilinear grid
            x(static_cast<Eigen::Index>(r) * side + c, 0) = (c + 0.5) / side;
            x(static_cast<Eigen::Index>(r) * side + c, 1) = (r + 0.5) / side;
            x(static_cast<Eigen::Index>(r) * side + c, 2) = t_frac;
        }
    }
    Mat y = m.field_net.apply_plain(x);
    Mat img(side, side);
    for (int r = 0; r < side; ++r) {
        for (int c = 0; c < side; ++c) img(r, c) = y(static_cast<Eigen::Index>(r) * side + c, 0);
    }
    return img;
}

Mat frame_image(const Trajectory& data, const Frame& frame, int channel) {
    int side = data.config.mesh_side;
    int ch = field_arity(data.config.kind);
    Mat img(side, side);
    for (int r = 0; r < side; ++r) {
        for (int c = 0; c < side; ++c) {
            img(r, c) = frame.field[static_cast<size_t>(r * side + c) * ch + channel];
        }
    }
    return img;
}

}  // namespace hdyn::analyze
