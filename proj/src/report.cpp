#include "hdyn/report.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "hdyn/analyze.hpp"
#include "hdyn/dataset.hpp"
#include "hdyn/recover.hpp"
#include "hdyn/simulate.hpp"

#include "report_schema.hpp"

namespace hdyn::report {

namespace fs = std::filesystem;

std::vector<double> default_probe(const GnnModel& m, int points) {
    std::vector<double> probe(std::max(points, 1));
    int np = static_cast<int>(probe.size());
    switch (m.spec.kind) {
        case SystemKind::AttractionRepulsion:
        case SystemKind::Gravity:
        case SystemKind::Coulomb:
        case SystemKind::Boids: {
            double lo = m.band.d_min, span = m.band.d_max - m.band.d_min;
            for (int i = 0; i < np; ++i) probe[i] = lo + (i + 1) * span / (np + 1);
            break;
        }
        case SystemKind::Wave:
        case SystemKind::Rps: {
            double half = 2.0 * m.scales.lap;
            for (int i = 0; i < np; ++i)
                probe[i] = np > 1 ? -half + 2.0 * half * i / (np - 1) : 0.0;
            break;
        }
        case SystemKind::Signaling: {
            double half = 3.0 * m.scales.u;
            for (int i = 0; i < np; ++i)
                probe[i] = np > 1 ? -half + 2.0 * half * i / (np - 1) : 0.0;
            break;
        }
    }
    return probe;
}

Mat truth_profiles(const Trajectory& data, const GnnModel& m,
                   const std::vector<double>& probe) {
    const Latents& lat = data.latents;
    int n = m.spec.n_nodes;
    int np = static_cast<int>(probe.size());
    Mat out(n, np);
    switch (m.spec.kind) {
        case SystemKind::AttractionRepulsion: {
            if (!lat.has("a") || !lat.has("b") || !lat.has("c") || !lat.has("d")) return {};
            auto a = lat.col("a"), b = lat.col("b"), c = lat.col("c"), dd = lat.col("d");
            double sigma = data.config.sigma;
            for (int i = 0; i < n; ++i) {
                for (int p = 0; p < np; ++p) {
                    out(i, p) = a[i] * ar_kernel(probe[p], b[i], sigma) -
                                c[i] * ar_kernel(probe[p], dd[i], sigma);
                }
            }
            return out;
        }
        case SystemKind::Gravity: {
            if (!lat.has("m")) return {};
            auto mm = lat.col("m");
            for (int i = 0; i < n; ++i)
                for (int p = 0; p < np; ++p) out(i, p) = mm[i] / (probe[p] * probe[p]);
            return out;
        }
        case SystemKind::Boids: {
            if (!lat.has("c") || !lat.has("s")) return {};
            auto c = lat.col("c"), s = lat.col("s");
            for (int i = 0; i < n; ++i)
                for (int p = 0; p < np; ++p) out(i, p) = c[i] * probe[p] - s[i] / probe[p];
            return out;
        }
        case SystemKind::Wave: {
            if (!lat.has("a")) return {};
            auto a = lat.col("a");
            for (int i = 0; i < n; ++i)
                for (int p = 0; p < np; ++p) out(i, p) = a[i] * probe[p];
            return out;
        }
        case SystemKind::Rps: {
            // node_profiles probes the u channel at u=v=w=0.25, so the truth
            // curve carries the constant reaction offset of that state
            if (!lat.has("a")) return {};
            auto a = lat.col("a");
            double off = 0.25 * (1.0 - 0.75 - 0.25 * data.config.beta);
            for (int i = 0; i < n; ++i)
                for (int p = 0; p < np; ++p) out(i, p) = a[i] * probe[p] + off;
            return out;
        }
        case SystemKind::Signaling: {
            if (!lat.has("b") || !lat.has("c")) return {};
            auto b = lat.col("b"), c = lat.col("c");
            for (int i = 0; i < n; ++i)
                for (int p = 0; p < np; ++p)
                    out(i, p) = -b[i] * probe[p] + c[i] * std::tanh(probe[p]);
            return out;
        }
        case SystemKind::Coulomb:
            return {};
    }
    return {};
}

std::vector<int32_t> truth_type_labels(const Trajectory& data) {
    const Latents& lat = data.latents;
    bool discrete = !lat.type.empty() &&
                    std::all_of(lat.type.begin(), lat.type.end(),
                                [](int32_t t) { return t >= 0; });
    if (discrete) return lat.type;
    if (data.config.latents.is_pattern() && !lat.values.empty()) {
        // patch labels from exact first-parameter values, by first appearance
        const std::vector<double>& v = lat.values[0];
        std::vector<int32_t> labels(v.size());
        std::map<double, int32_t> seen;
        for (size_t i = 0; i < v.size(); ++i) {
            auto [it, fresh] = seen.try_emplace(v[i], static_cast<int32_t>(seen.size()));
            labels[i] = it->second;
        }
        return labels;
    }
    return {};
}

std::vector<Frame> purified_rollout(GnnModel& m, const Trajectory& context,
                                    const Frame& start, int steps, double e0, double e1) {
    int n = m.spec.n_nodes;
    Mat saved = m.embed.value.topRows(n);
    m.embed.value.topRows(n).col(0).setConstant(e0);
    m.embed.value.topRows(n).col(1).setConstant(e1);
    std::vector<Frame> frames;
    try {
        frames = model_rollout(m, context, start, steps);
    } catch (...) {
        m.embed.value.topRows(n) = saved;
        throw;
    }
    m.embed.value.topRows(n) = saved;
    return frames;
}

namespace {

// z-score the columns (constant columns just get centered)
Mat standardize(const Mat& x) {
    Mat z = x.rowwise() - x.colwise().mean();
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
        double sd = std::sqrt(z.col(c).squaredNorm() / std::max<Eigen::Index>(z.rows(), 1));
        if (sd > 1e-12) z.col(c) /= sd;
    }
    return z;
}

json label_block(const std::vector<int>& labels, const std::vector<int32_t>& truth) {
    json b;
    b["n_clusters"] = analyze::n_clusters(labels);
    b["labels"] = labels;
    b["accuracy"] = truth.empty() ? json(nullptr)
                                  : json(analyze::cluster_accuracy(labels, truth));
    return b;
}

std::vector<int> interior_nodes(const Trajectory& data) {
    std::vector<int> out;
    for (size_t i = 0; i < data.mesh.boundary.size(); ++i) {
        if (!data.mesh.boundary[i]) out.push_back(static_cast<int>(i));
    }
    return out;
}

double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    return v[mid];
}

}  // namespace

json run_cluster(GnnModel& m, const Trajectory& data, const AnalyzeOptions& opt) {
    int n = m.spec.n_nodes;
    std::vector<int32_t> truth = truth_type_labels(data);

    Mat prof = gnn::node_profiles(m, default_probe(m));
    Mat pts = analyze::pca_project(standardize(prof), 2);
    std::vector<int> prof_labels = analyze::cluster_eps(pts, opt.cluster_threshold);
    std::vector<int> emb_labels =
        analyze::cluster_eps(m.embed.value.topRows(n), opt.cluster_threshold);

    json out;
    out["threshold"] = opt.cluster_threshold;
    out["truth_available"] = !truth.empty();
    out["profile"] = label_block(prof_labels, truth);
    out["embedding"] = label_block(emb_labels, truth);
    out["csv"] = nullptr;
    if (!opt.out_dir.empty()) {
        fs::path p = fs::path(opt.out_dir) / "embedding_scatter.csv";
        std::ofstream csv(p);
        csv << "node,e0,e1,pc0,pc1,label_profile,label_embedding,truth\n";
        for (int i = 0; i < n; ++i) {
            csv << i << ',' << m.embed.value(i, 0) << ',' << m.embed.value(i, 1) << ','
                << pts(i, 0) << ',' << pts(i, 1) << ',' << prof_labels[i] << ','
                << emb_labels[i] << ',' << (truth.empty() ? -1 : truth[i]) << '\n';
        }
        out["csv"] = "embedding_scatter.csv";
    }
    return out;
}

json run_profiles(GnnModel& m, const Trajectory& data, const AnalyzeOptions& opt) {
    std::vector<double> probe = default_probe(m);
    Mat prof = gnn::node_profiles(m, probe);
    Mat truth = truth_profiles(data, m, probe);
    bool have_truth = truth.size() > 0;

    json out;
    out["points"] = static_cast<int>(probe.size());
    out["x_min"] = probe.front();
    out["x_max"] = probe.back();
    out["truth_available"] = have_truth;
    out["rmse_mean"] = nullptr;
    out["rmse_std"] = nullptr;
    if (have_truth) {
        // per-node profile RMSE, summarized over nodes
        double mean = 0.0, sq = 0.0;
        for (Eigen::Index i = 0; i < prof.rows(); ++i) {
            double r = std::sqrt((prof.row(i) - truth.row(i)).squaredNorm() / prof.cols());
            mean += r;
            sq += r * r;
        }
        mean /= prof.rows();
        out["rmse_mean"] = mean;
        out["rmse_std"] = std::sqrt(std::max(0.0, sq / prof.rows() - mean * mean));
    }
    out["csv"] = nullptr;
    if (!opt.out_dir.empty()) {
        std::ofstream csv(fs::path(opt.out_dir) / "profiles.csv");
        csv << "node,x,response" << (have_truth ? ",truth" : "") << "\n";
        for (Eigen::Index i = 0; i < prof.rows(); ++i) {
            for (size_t p = 0; p < probe.size(); ++p) {
                csv << i << ',' << probe[p] << ',' << prof(i, p);
                if (have_truth) csv << ',' << truth(i, p);
                csv << '\n';
            }
        }
        out["csv"] = "profiles.csv";
    }
    return out;
}

namespace {

void write_scatter(const AnalyzeOptions& opt, json& out, const char* name,
                   std::span<const double> truth, std::span<const double> recovered) {
    out["csv"] = nullptr;
    if (opt.out_dir.empty()) return;
    std::ofstream csv(fs::path(opt.out_dir) / name);
    csv << "truth,recovered\n";
    for (size_t i = 0; i < std::min(truth.size(), recovered.size()); ++i) {
        csv << truth[i] << ',' << recovered[i] << '\n';
    }
    out["csv"] = name;
}

json fit_gravity(GnnModel& m, const Trajectory& data, const AnalyzeOptions& opt) {
    std::vector<double> probe = default_probe(m);
    Mat prof = gnn::node_profiles(m, probe);
    double mean_exp = 0.0;
    std::vector<double> amp = analyze::profile_power_amps(prof, probe, &mean_exp);

    json out;
    out["family"] = "power_law";
    out["mean_exponent"] = mean_exp;

    // small model-selection echo on the mean profile: does a power law beat
    // a straight line?
    Eigen::RowVectorXd mean_prof = prof.colwise().mean();
    std::vector<double> mp(mean_prof.data(), mean_prof.data() + mean_prof.size());
    analyze::PowerFit pw = analyze::fit_power(probe, mp);
    analyze::LineFit ln = analyze::fit_line(probe, mp);
    double rss_pw = 0.0, rss_ln = 0.0;
    for (size_t p = 0; p < probe.size(); ++p) {
        double e1 = mp[p] - pw.amp * std::pow(probe[p], pw.exponent);
        double e2 = mp[p] - (ln.slope * probe[p] + ln.intercept);
        rss_pw += e1 * e1;
        rss_ln += e2 * e2;
    }
    int np = static_cast<int>(probe.size());
    out["bic_power"] = analyze::bic(rss_pw, np, 2);
    out["bic_line"] = analyze::bic(rss_ln, np, 2);

    if (data.latents.has("m")) {
        auto mm = data.latents.col("m");
        analyze::LineFit sc = analyze::fit_line_robust({mm.data(), mm.size()}, amp);
        out["slope"] = sc.slope;
        out["r2"] = sc.r2;
        write_scatter(opt, out, "recovered_vs_true.csv", mm, amp);
    }
    return out;
}

json fit_coulomb(GnnModel& m, const Trajectory& data, const AnalyzeOptions& opt) {
    std::vector<double> probe = default_probe(m, 40);
    Mat s = analyze::pair_product_matrix(m, probe);
    std::vector<double> q = analyze::factor_rank1(s);
    if (!q.empty() && q[0] < 0.0) {
        for (double& v : q) v = -v;  // canonical: first node positive
    }

    json out;
    out["family"] = "pair_products";
    if (data.latents.has("q")) {
        auto qt = data.latents.col("q");
        // truth comparison is sign-free: score the better global sign
        double best = std::numeric_limits<double>::infinity();
        int best_sign = 1;
        for (int sign : {1, -1}) {
            double worst = 0.0;
            for (size_t i = 0; i < q.size(); ++i) {
                worst = std::max(worst, std::fabs(sign * q[i] - qt[i]));
            }
            if (worst < best) {
                best = worst;
                best_sign = sign;
            }
        }
        std::vector<double> qs(q.size());
        for (size_t i = 0; i < q.size(); ++i) qs[i] = best_sign * q[i];
        analyze::LineFit sc = analyze::fit_line_robust({qt.data(), qt.size()}, qs);
        out["max_error"] = best;
        out["slope"] = sc.slope;
        out["r2"] = sc.r2;
        write_scatter(opt, out, "recovered_vs_true.csv", qt, qs);
    }
    return out;
}

json fit_boids(GnnModel& m, const Trajectory& data, const AnalyzeOptions& opt) {
    Mat coef = analyze::boids_coefficients(m, opt.fit_samples, opt.seed);
    json out;
    out["family"] = "flocking_terms";

    if (!opt.out_dir.empty()) {
        std::ofstream csv(fs::path(opt.out_dir) / "boids_coefficients.csv");
        csv << "node,cohesion,alignment,separation\n";
        for (Eigen::Index i = 0; i < coef.rows(); ++i) {
            csv << i << ',' << coef(i, 0) << ',' << coef(i, 1) << ',' << coef(i, 2)
                << '\n';
        }
        out["csv"] = "boids_coefficients.csv";
    }

    const Latents& lat = data.latents;
    std::vector<int32_t> truth = truth_type_labels(data);
    if (truth.empty() || !lat.has("a") || !lat.has("c") || !lat.has("s")) return out;

    auto ta = lat.col("a");
    auto tc = lat.col("c");
    auto ts = lat.col("s");
    int n_types = 1 + *std::max_element(truth.begin(), truth.end());
    json types = json::array();
    int good = 0;
    for (int t = 0; t < n_types; ++t) {
        std::vector<double> rc, ra, rs;
        double wa = 0.0, wc = 0.0, ws = 0.0;
        int count = 0;
        for (size_t i = 0; i < truth.size(); ++i) {
            if (truth[i] != t) continue;
            rc.push_back(coef(static_cast<Eigen::Index>(i), 0));
            ra.push_back(coef(static_cast<Eigen::Index>(i), 1));
            rs.push_back(coef(static_cast<Eigen::Index>(i), 2));
            wa = ta[i];
            wc = tc[i];
            ws = ts[i];
            ++count;
        }
        if (count == 0) continue;
        double mc = median_of(rc), ma = median_of(ra), msep = median_of(rs);
        auto rel = [](double got, double want) {
            return std::fabs(got - want) / std::max(std::fabs(want), 1e-12);
        };
        double worst = std::max({rel(mc, wc), rel(ma, wa), rel(msep, ws)});
        if (worst < 0.25) ++good;
        types.push_back({{"type", t},
                         {"count", count},
                         {"cohesion", {{"recovered", mc}, {"truth", wc}}},
                         {"alignment", {{"recovered", ma}, {"truth", wa}}},
                         {"separation", {{"recovered", msep}, {"truth", ws}}},
                         {"max_rel_error", worst}});
    }
    out["types"] = std::move(types);
    out["types_within_25pct"] = good;
    return out;
}

json fit_wave(GnnModel& m, const Trajectory& data, const AnalyzeOptions& opt) {
    std::vector<double> probe = default_probe(m);
    Mat prof = gnn::node_profiles(m, probe);
    std::vector<double> slopes = analyze::profile_slopes(prof, probe);

    json out;
    out["family"] = "linear_in_laplacian";
    if (!data.latents.has("a")) return out;
    auto a = data.latents.col("a");

    // boundary nodes never enter the loss, so their fits are noise
    std::vector<double> xt, yr;
    double obstacle_worst = 0.0;
    for (int i : interior_nodes(data)) {
        xt.push_back(a[i]);
        yr.push_back(slopes[i]);
        if (a[i] == 0.0) obstacle_worst = std::max(obstacle_worst, std::fabs(slopes[i]));
    }
    analyze::LineFit sc = analyze::fit_line_robust(xt, yr);
    out["slope"] = sc.slope;
    out["r2"] = sc.r2;
    out["obstacle_max_recovered"] = obstacle_worst;
    write_scatter(opt, out, "recovered_vs_true.csv", xt, yr);
    return out;
}

json fit_rps(GnnModel& m, const Trajectory& data, const AnalyzeOptions& opt) {
    json out;
    out["family"] = "rps_polynomial";
    std::vector<int> interior = interior_nodes(data);
    if (interior.empty() || !data.latents.has("a")) return out;
    auto ta = data.latents.col("a");
    double beta = data.config.beta;

    // per-node diffusion response, then per-cluster medians
    std::vector<double> probe = default_probe(m);
    Mat prof = gnn::node_profiles(m, probe);
    std::vector<double> slopes = analyze::profile_slopes(prof, probe);

    Mat ipts(interior.size(), 2);
    for (size_t k = 0; k < interior.size(); ++k) {
        ipts.row(k) = m.embed.value.row(interior[k]);
    }
    std::vector<int> labels = analyze::cluster_eps(ipts, opt.cluster_threshold);
    int nc = analyze::n_clusters(labels);
    out["interior_clusters"] = nc;

    std::vector<double> scatter_truth, scatter_rec;
    json clusters = json::array();
    for (int cl = 0; cl < nc; ++cl) {
        std::vector<double> sl;
        std::map<double, int> votes;
        for (size_t k = 0; k < interior.size(); ++k) {
            if (labels[k] != cl) continue;
            sl.push_back(slopes[interior[k]]);
            votes[ta[interior[k]]]++;
        }
        if (sl.size() < 2) continue;
        double rec = median_of(sl);
        double tru = std::max_element(votes.begin(), votes.end(),
                                      [](auto& a, auto& b) { return a.second < b.second; })
                         ->first;
        clusters.push_back({{"cluster", cl},
                            {"size", static_cast<int>(sl.size())},
                            {"diffusion", {{"recovered", rec}, {"truth", tru}}}});
        scatter_truth.push_back(tru);
        scatter_rec.push_back(rec);
    }
    out["clusters"] = std::move(clusters);

    // pooled quadratic reaction coefficients across the interior
    Mat coef = analyze::rps_reaction(m, interior);
    Mat truth = Mat::Zero(3, 9);
    // u' = u - u^2 - (1+beta) uv - uw, and cyclically for v and w
    truth(0, 0) = 1.0; truth(0, 3) = -1.0; truth(0, 6) = -(1.0 + beta); truth(0, 7) = -1.0;
    truth(1, 1) = 1.0; truth(1, 4) = -1.0; truth(1, 6) = -1.0; truth(1, 8) = -(1.0 + beta);
    truth(2, 2) = 1.0; truth(2, 5) = -1.0; truth(2, 7) = -(1.0 + beta); truth(2, 8) = -1.0;
    json reaction = json::array();
    for (int c = 0; c < 3; ++c) {
        for (int k = 0; k < 9; ++k) {
            scatter_truth.push_back(truth(c, k));
            scatter_rec.push_back(coef(c, k));
            reaction.push_back({{"channel", c},
                                {"basis", k},
                                {"recovered", coef(c, k)},
                                {"truth", truth(c, k)}});
        }
    }
    out["reaction"] = std::move(reaction);

    analyze::LineFit sc = analyze::fit_line_robust(scatter_truth, scatter_rec);
    out["slope"] = sc.slope;
    out["r2"] = sc.r2;
    out["n_coefficients"] = static_cast<int>(scatter_truth.size());
    write_scatter(opt, out, "recovered_vs_true.csv", scatter_truth, scatter_rec);
    return out;
}

json fit_signaling(GnnModel& m, const Trajectory& data, const AnalyzeOptions& opt) {
    analyze::SignalingFit fit = analyze::signaling_fit(m);
    json out;
    out["family"] = "signaling_symbolic";
    out["msg_gain"] = fit.msg_gain;

    const Latents& lat = data.latents;
    if (lat.has("b") && lat.has("c")) {
        auto tb = lat.col("b");
        auto tc = lat.col("c");
        analyze::LineFit fb =
            analyze::fit_line_robust({tb.data(), tb.size()}, fit.decay);
        analyze::LineFit fc =
            analyze::fit_line_robust({tc.data(), tc.size()}, fit.gain);
        out["decay"] = {{"slope", fb.slope}, {"r2", fb.r2}};
        out["gain"] = {{"slope", fc.slope}, {"r2", fc.r2}};

        // split the node types on the fitted node-law coefficients
        Mat bc(fit.decay.size(), 2);
        for (size_t i = 0; i < fit.decay.size(); ++i) {
            bc(static_cast<Eigen::Index>(i), 0) = fit.decay[i];
            bc(static_cast<Eigen::Index>(i), 1) = fit.gain[i];
        }
        std::vector<int32_t> truth = truth_type_labels(data);
        if (!truth.empty()) {
            int k = 1 + *std::max_element(truth.begin(), truth.end());
            std::vector<int> split = analyze::cluster_to_k(bc, k);
            out["type_split_accuracy"] = analyze::cluster_accuracy(split, truth);
        }
    }
    if (!data.conn.empty()) {
        std::vector<double> at(m.pair_i.size());
        int n = m.spec.n_nodes;
        for (size_t p = 0; p < m.pair_i.size(); ++p) {
            at[p] = data.conn[static_cast<size_t>(m.pair_i[p]) * n + m.pair_j[p]];
        }
        analyze::LineFit fa = analyze::fit_line_robust(at, fit.coupling);
        out["coupling"] = {{"slope", fa.slope}, {"r2", fa.r2}};
        write_scatter(opt, out, "recovered_vs_true.csv", at, fit.coupling);
    }
    return out;
}

}  // namespace

json run_fit(GnnModel& m, const Trajectory& data, const AnalyzeOptions& opt) {
    json out;
    switch (m.spec.kind) {
        case SystemKind::Gravity: out = fit_gravity(m, data, opt); break;
        case SystemKind::Coulomb: out = fit_coulomb(m, data, opt); break;
        case SystemKind::Boids: out = fit_boids(m, data, opt); break;
        case SystemKind::Wave: out = fit_wave(m, data, opt); break;
        case SystemKind::Rps: out = fit_rps(m, data, opt); break;
        case SystemKind::Signaling: out = fit_signaling(m, data, opt); break;
        case SystemKind::AttractionRepulsion:
            // everything recoverable lives in the profiles / cluster tasks
            out["family"] = "interaction_profile";
            break;
    }
    if (m.spec.has_field) {
        // learned emitter weight field as a plot-ready grid
        out["field_csv"] = nullptr;
        if (!opt.out_dir.empty()) {
            const int side = 64;
            Mat img = analyze::field_image(m, side, 0.0);
            std::ofstream csv(fs::path(opt.out_dir) / "field_image.csv");
            for (int r = 0; r < side; ++r) {
                for (int c = 0; c < side; ++c) csv << (c ? "," : "") << img(r, c);
                csv << '\n';
            }
            out["field_csv"] = "field_image.csv";
            out["field_side"] = side;
        }
    }
    return out;
}

double frame_rmse(const SystemConfig& cfg, const Frame& a, const Frame& b) {
    double sq = 0.0;
    if (is_moving(cfg.kind)) {
        int n = cfg.n_nodes();
        for (int i = 0; i < n; ++i) {
            Vec2 d = displacement(a.pos[i], b.pos[i], cfg.periodic, cfg.box);
            sq += d.x * d.x + d.y * d.y;
        }
        return std::sqrt(sq / (2.0 * n));
    }
    size_t ch = std::min(a.field.size(), b.field.size());
    for (size_t k = 0; k < ch; ++k) {
        double d = a.field[k] - b.field[k];
        sq += d * d;
    }
    return std::sqrt(sq / std::max<size_t>(ch, 1));
}

json run_metrics(GnnModel& m, const Trajectory& data, const AnalyzeOptions& opt) {
    const SystemConfig& cfg = data.config;
    int si = std::clamp(opt.rollout_series, 0, static_cast<int>(data.series.size()) - 1);
    const std::vector<Frame>& truth = data.series[si];
    int steps = std::min(opt.rollout_steps, static_cast<int>(truth.size()) - 1);
    std::vector<Frame> roll = model_rollout(m, data, truth[0], steps);

    json out;
    out["steps"] = steps;
    out["series"] = si;
    out["final_sinkhorn"] = nullptr;
    out["final_ssim"] = nullptr;

    std::vector<double> per_frame(steps + 1, 0.0);
    double total = 0.0;
    for (int t = 0; t <= steps; ++t) {
        per_frame[t] = frame_rmse(cfg, roll[t], truth[t]);
        total += per_frame[t] * per_frame[t];
    }
    out["rmse"] = std::sqrt(total / (steps + 1));

    if (is_moving(cfg.kind)) {
        out["final_sinkhorn"] =
            analyze::sinkhorn_divergence(roll[steps].pos, truth[steps].pos);
    } else if (is_mesh(cfg.kind)) {
        int arity = field_arity(cfg.kind);
        double acc = 0.0;
        for (int c = 0; c < arity; ++c) {
            acc += analyze::ssim(analyze::frame_image(data, roll[steps], c),
                                 analyze::frame_image(data, truth[steps], c));
        }
        out["final_ssim"] = acc / arity;
    }

    out["csv"] = nullptr;
    if (!opt.out_dir.empty()) {
        std::ofstream csv(fs::path(opt.out_dir) / "rollout_rmse.csv");
        csv << "step,rmse\n";
        for (int t = 0; t <= steps; ++t) csv << t << ',' << per_frame[t] << '\n';
        out["csv"] = "rollout_rmse.csv";
    }
    return out;
}

json run_decompose(GnnModel& m, const Trajectory& data, const AnalyzeOptions& opt) {
    const SystemConfig& cfg = data.config;
    if (is_mesh(cfg.kind) || cfg.kind == SystemKind::Signaling) {
        return {{"skipped", "decomposition applies to moving-particle kinds"}};
    }
    int n = m.spec.n_nodes;
    std::vector<int> labels =
        analyze::cluster_eps(m.embed.value.topRows(n), opt.cluster_threshold);
    int nc = analyze::n_clusters(labels);
    int min_size = std::max(2, static_cast<int>(std::ceil(0.01 * n)));

    json out;
    out["threshold"] = opt.cluster_threshold;
    out["steps"] = opt.rollout_steps;
    json clusters = json::array();
    const Frame& start = data.series[0][0];
    for (int cl = 0; cl < nc; ++cl) {
        std::vector<int> members;
        for (int i = 0; i < n; ++i) {
            if (labels[i] == cl) members.push_back(i);
        }
        if (static_cast<int>(members.size()) < min_size) continue;

        std::vector<double> e0s, e1s;
        for (int i : members) {
            e0s.push_back(m.embed.value(i, 0));
            e1s.push_back(m.embed.value(i, 1));
        }
        double e0 = median_of(e0s), e1 = median_of(e1s);

        json entry;
        entry["label"] = cl;
        entry["size"] = static_cast<int>(members.size());
        entry["embedding"] = {e0, e1};
        entry["file"] = nullptr;
        if (!opt.out_dir.empty() && opt.rollout_steps > 0) {
            // purified run: this cluster's nodes from the recorded start,
            // every embedding pinned to the cluster median
            Frame init;
            for (int i : members) {
                init.pos.push_back(start.pos[i]);
                init.vel.push_back(start.vel[i]);
            }
            Trajectory ctx;
            ctx.config = cfg;
            ctx.config.n = static_cast<int>(members.size());
            ctx.config.series = 1;
            ctx.config.steps = opt.rollout_steps;
            ctx.stationary_pos = data.stationary_pos;
            ctx.stationary_b = data.stationary_b;

            gnn::ModelSpec sub_spec = m.spec;
            sub_spec.n_nodes = ctx.config.n;
            gnn::GnnModel sub = gnn::GnnModel::make(sub_spec);
            sub.scales = m.scales;
            sub.band = m.band;
            sub.f = m.f;
            sub.phi = m.phi;
            sub.field_net = m.field_net;
            std::vector<Frame> frames =
                purified_rollout(sub, ctx, init, opt.rollout_steps, e0, e1);

            ctx.latents.type.assign(members.size(), cl);
            ctx.series.push_back(std::move(frames));
            std::string name = "decompose_" + std::to_string(cl) + ".hdyn";
            write_dataset(ctx, (fs::path(opt.out_dir) / name).string());
            entry["file"] = name;
        }
        clusters.push_back(std::move(entry));
    }
    out["clusters"] = std::move(clusters);
    return out;
}

const char* report_schema_text() { return kReportSchemaText; }

namespace {

bool type_matches(const json& v, const std::string& t) {
    if (t == "object") return v.is_object();
    if (t == "array") return v.is_array();
    if (t == "string") return v.is_string();
    if (t == "boolean") return v.is_boolean();
    if (t == "null") return v.is_null();
    if (t == "integer") return v.is_number_integer();
    if (t == "number") return v.is_number();
    return false;
}

std::string check_node(const json& doc, const json& schema, const std::string& path) {
    if (schema.contains("type")) {
        const json& t = schema["type"];
        bool ok = false;
        if (t.is_string()) {
            ok = type_matches(doc, t.get<std::string>());
        } else {
            for (const auto& alt : t) ok = ok || type_matches(doc, alt.get<std::string>());
        }
        if (!ok) return path + ": expected type " + t.dump();
    }
    if (schema.contains("enum")) {
        bool ok = false;
        for (const auto& alt : schema["enum"]) ok = ok || doc == alt;
        if (!ok) return path + ": not one of " + schema["enum"].dump();
    }
    if (doc.is_object()) {
        if (schema.contains("required")) {
            for (const auto& key : schema["required"]) {
                if (!doc.contains(key.get<std::string>())) {
                    return path + ": missing required key '" + key.get<std::string>() + "'";
                }
            }
        }
        const json* props = schema.contains("properties") ? &schema["properties"] : nullptr;
        bool extra_ok = !schema.contains("additionalProperties") ||
                        schema["additionalProperties"].get<bool>();
        for (const auto& [key, value] : doc.items()) {
            if (props && props->contains(key)) {
                std::string err = check_node(value, (*props)[key], path + "/" + key);
                if (!err.empty()) return err;
            } else if (!extra_ok) {
                return path + ": unexpected key '" + key + "'";
            }
        }
    }
    if (doc.is_array() && schema.contains("items")) {
        for (size_t i = 0; i < doc.size(); ++i) {
            std::string err =
                check_node(doc[i], schema["items"], path + "/" + std::to_string(i));
            if (!err.empty()) return err;
        }
    }
    return "";
}

}  // namespace

std::string schema_error(const json& doc, const json& schema) {
    return check_node(doc, schema, "");
}

json build_report(GnnModel& m, const Trajectory& data, const std::string& model_path,
                  const std::string& data_path, const std::vector<std::string>& tasks,
                  const AnalyzeOptions& opt) {
    static const std::vector<std::string> known = {"cluster", "profiles", "fit",
                                                   "metrics", "decompose"};
    for (const std::string& t : tasks) {
        if (std::find(known.begin(), known.end(), t) == known.end()) {
            std::string msg = "unknown analysis task '" + t + "'; valid tasks:";
            for (const std::string& k : known) msg += " " + k;
            throw ConfigError(msg);
        }
    }

    json report;
    report["format"] = "hdyn-report";
    report["version"] = 1;
    report["kind"] = kind_name(data.config.kind);
    report["model"] = model_path;
    report["data"] = data_path;
    report["n_nodes"] = m.spec.n_nodes;
    json& frag = report["tasks"] = json::object();
    for (const std::string& t : tasks) {
        if (t == "cluster") frag["cluster"] = run_cluster(m, data, opt);
        if (t == "profiles") frag["profiles"] = run_profiles(m, data, opt);
        if (t == "fit") frag["fit"] = run_fit(m, data, opt);
        if (t == "metrics") frag["metrics"] = run_metrics(m, data, opt);
        if (t == "decompose") frag["decompose"] = run_decompose(m, data, opt);
    }

    std::string err = schema_error(report, json::parse(report_schema_text()));
    if (!err.empty()) {
        throw std::logic_error("analysis report failed its own schema: " + err);
    }
    return report;
}

}  // namespace hdyn::report
