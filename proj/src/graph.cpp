#include "hdyn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hdyn {
namespace {

// Uniform cell grid over a point set. Cells are at least d_max wide so a 3x3
// neighborhood always covers the interaction radius.
class CellGrid {
public:
    CellGrid(std::span<const Vec2> pts, const RadiusSpec& spec) : spec_(spec) {
        if (spec.periodic) {
            nx_ = ny_ = std::max(1, static_cast<int>(std::floor(spec.box / spec.d_max)));
            wx_ = wy_ = spec.box / nx_;
            lo_ = {0.0, 0.0};
        } else {
            Vec2 lo{1e300, 1e300}, hi{-1e300, -1e300};
            for (const Vec2& p : pts) {
                lo.x = std::min(lo.x, p.x); lo.y = std::min(lo.y, p.y);
                hi.x = std::max(hi.x, p.x); hi.y = std::max(hi.y, p.y);
            }
            if (pts.empty()) { lo = {0, 0}; hi = {1, 1}; }
            lo_ = lo;
            // wider-than-d_max cells stay correct (3x3 still covers the
            // radius), so cap the grid for degenerate, far-flung point sets
            constexpr int kMaxCells = 2048;
            nx_ = std::clamp(static_cast<int>(std::floor((hi.x - lo.x) / spec.d_max)) + 1, 1, kMaxCells);
            ny_ = std::clamp(static_cast<int>(std::floor((hi.y - lo.y) / spec.d_max)) + 1, 1, kMaxCells);
            wx_ = std::max(spec.d_max, (hi.x - lo.x) / nx_ + 1e-12);
            wy_ = std::max(spec.d_max, (hi.y - lo.y) / ny_ + 1e-12);
        }
        cells_.assign(static_cast<size_t>(nx_) * ny_, {});
        for (size_t i = 0; i < pts.size(); ++i) {
            cells_[cell_of(pts[i])].push_back(static_cast<int32_t>(i));
        }
    }

    // Candidate sender indices around p: the 3x3 cell block (wrapped or
    // clamped). May contain points outside the radius band; caller filters.
    void candidates(const Vec2& p, std::vector<int32_t>& out) const {
        out.clear();
        auto [cx, cy] = cell_coords(p);
        for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
                int x = cx + dx, y = cy + dy;
                if (spec_.periodic) {
                    x = (x + nx_) % nx_;
                    y = (y + ny_) % ny_;
                } else {
                    if (x < 0 || x >= nx_ || y < 0 || y >= ny_) continue;
                }
                size_t id = static_cast<size_t>(y) * nx_ + x;
                if (std::find(seen_.begin(), seen_.end(), id) != seen_.end()) continue;
                seen_.push_back(id);
                const auto& cell = cells_[id];
                out.insert(out.end(), cell.begin(), cell.end());
            }
        }
        seen_.clear();
    }

private:
    std::pair<int, int> cell_coords(const Vec2& p) const {
        int cx, cy;
        if (spec_.periodic) {
            cx = static_cast<int>(wrap_coord(p.x, spec_.box) / wx_);
            cy = static_cast<int>(wrap_coord(p.y, spec_.box) / wy_);
        } else {
            cx = static_cast<int>(std::floor((p.x - lo_.x) / wx_));
            cy = static_cast<int>(std::floor((p.y - lo_.y) / wy_));
        }
        cx = std::clamp(cx, 0, nx_ - 1);
        cy = std::clamp(cy, 0, ny_ - 1);
        return {cx, cy};
    }

    size_t cell_of(const Vec2& p) const {
        auto [cx, cy] = cell_coords(p);
        return static_cast<size_t>(cy) * nx_ + cx;
    }

    RadiusSpec spec_;
    int nx_ = 1, ny_ = 1;
    double wx_ = 1, wy_ = 1;
    Vec2 lo_;
    std::vector<std::vector<int32_t>> cells_;
    mutable std::vector<size_t> seen_;  // dedup when the wrapped 3x3 block folds onto itself
};

EdgeList build_edges(std::span<const Vec2> receivers, std::span<const Vec2> senders,
                     const RadiusSpec& spec, bool same_set) {
    if (!(spec.d_min < spec.d_max)) {
        throw std::invalid_argument("radius_edges: d_min must be < d_max");
    }
    CellGrid grid(senders, spec);
    EdgeList out;
    std::vector<int32_t> cand, hits;
    for (size_t i = 0; i < receivers.size(); ++i) {
        grid.candidates(receivers[i], cand);
        hits.clear();
        for (int32_t j : cand) {
            if (same_set && j == static_cast<int32_t>(i)) continue;
            Vec2 d = displacement(receivers[i], senders[j], spec.periodic, spec.box);
            double dist = d.norm();
            if (dist > spec.d_min && dist < spec.d_max) hits.push_back(j);
        }
        std::sort(hits.begin(), hits.end());
        for (int32_t j : hits) out.push(static_cast<int32_t>(i), j);
    }
    return out;
}

}  // namespace

EdgeList radius_edges(std::span<const Vec2> pts, const RadiusSpec& spec) {
    return build_edges(pts, pts, spec, true);
}

EdgeList radius_edges_cross(std::span<const Vec2> receivers,
                            std::span<const Vec2> senders,
                            const RadiusSpec& spec) {
    return build_edges(receivers, senders, spec, false);
}

GridMesh GridMesh::make(int side) {
    if (side < 2) throw std::invalid_argument("GridMesh: side must be >= 2");
    GridMesh m;
    m.side = side;
    int n = side * side;
    m.boundary.assign(n, 0);
    m.row_ptr.assign(n + 1, 0);
    for (int r = 0; r < side; ++r) {
        for (int c = 0; c < side; ++c) {
            int i = r * side + c;
            if (r == 0 || c == 0 || r == side - 1 || c == side - 1) m.boundary[i] = 1;
            // 4-neighborhood in (recv, send)-sorted order: up, left, right, down
            if (r > 0) m.edges.push(i, i - side);
            if (c > 0) m.edges.push(i, i - 1);
            if (c < side - 1) m.edges.push(i, i + 1);
            if (r < side - 1) m.edges.push(i, i + side);
        }
    }
    for (size_t e = 0; e < m.edges.size(); ++e) m.row_ptr[m.edges.recv[e] + 1]++;
    for (int i = 0; i < n; ++i) m.row_ptr[i + 1] += m.row_ptr[i];
    return m;
}

std::vector<double> laplacian(const GridMesh& mesh, std::span<const double> u) {
    int n = mesh.n_nodes();
    if (static_cast<int>(u.size()) != n) {
        throw std::invalid_argument("laplacian: field size does not match mesh");
    }
    std::vector<double> out(n, 0.0);
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int32_t e = mesh.row_ptr[i]; e < mesh.row_ptr[i + 1]; ++e) {
            acc += u[mesh.edges.send[e]] - u[i];
        }
        out[i] = acc;
    }
    return out;
}

}  // namespace hdyn
