#pragma once
#include <cstdint>
#include <span>
#include <vector>

#include "hdyn/vec2.hpp"

namespace hdyn {

// Directed edge list, always sorted by (recv, send). Symmetric interactions
// list both directions explicitly; the fixed ordering keeps every downstream
// reduction deterministic.
struct EdgeList {
    std::vector<int32_t> recv;
    std::vector<int32_t> send;

    size_t size() const { return recv.size(); }
    void push(int32_t r, int32_t s) { recv.push_back(r); send.push_back(s); }
    void clear() { recv.clear(); send.clear(); }
};

struct RadiusSpec {
    double d_min = 0.0;
    double d_max = 1.0;
    bool periodic = false;
    double box = 1.0;  // used when periodic
};

// All ordered pairs (i, j), i != j, with d_min < |x_j - x_i| < d_max.
// Cell-grid implementation; distances honor the minimum-image convention when
// periodic.
EdgeList radius_edges(std::span<const Vec2> pts, const RadiusSpec& spec);

// Cross-set variant: receivers and senders are distinct point sets, edge (r, s)
// means receiver r hears sender s. Indices are local to each set.
EdgeList radius_edges_cross(std::span<const Vec2> receivers,
                            std::span<const Vec2> senders,
                            const RadiusSpec& spec);

// Regular side x side grid with 4-neighbor connectivity. Nodes are indexed
// row-major (r * side + c). Boundary nodes are flagged so callers can hold them
// fixed / exclude them from fits.
struct GridMesh {
    int side = 0;
    EdgeList edges;
    std::vector<uint8_t> boundary;      // 1 on the outer ring
    std::vector<int32_t> row_ptr;       // CSR over edges (recv-major)

    int n_nodes() const { return side * side; }
    static GridMesh make(int side);
};

// Unweighted graph Laplacian sum_{j in N(i)} (u_j - u_i) for every node.
// Boundary nodes get the same formula over the neighbors they have; use
// mesh.boundary to exclude them downstream.
std::vector<double> laplacian(const GridMesh& mesh, std::span<const double> u);

}  // namespace hdyn
