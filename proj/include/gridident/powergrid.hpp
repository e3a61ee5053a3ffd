#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "gridident/tensor.hpp"
#include "gridident/util.hpp"

namespace gridident {

// Undirected graph; node ids are external labels (buses), indices are the
// internal order.
struct GridTopology {
    std::vector<int> node_ids;
    std::vector<std::pair<int, int>> edges;  // unordered pairs of node ids

    // derived; rebuilt by finalize()
    std::vector<std::vector<std::pair<size_t, size_t>>> neighbors;  // (node idx, edge idx),
                                                                    // ascending neighbor id

    void finalize();  // validates and rebuilds adjacency
    size_t node_count() const { return node_ids.size(); }
    size_t edge_count() const { return edges.size(); }
    size_t index_of(int node_id) const;
    bool has_node(int node_id) const;
    bool has_edge(int a, int b) const;
    size_t edge_index(int a, int b) const;
    uint64_t hash() const;
};

struct EdgeAdmittance {
    double g = 0.0;  // pu, >= 0
    double b = 0.0;  // pu
};

struct ShuntAdmittance {
    double g = 0.0;  // pu, >= 0
    double b = 0.0;  // pu
};

struct UnitParams {
    double k_p = 1.0;      // frequency droop gain
    double k_q = 0.1;      // voltage droop gain
    double tau = 1.0;      // filter time constant, s
    double omega_d = 1.0;  // frequency setpoint, pu
    double v_d = 1.0;      // voltage setpoint, pu
    double p_d_nom = 0.0;  // nominal active power setpoint, pu
    double q_d_nom = 0.0;  // nominal reactive power setpoint, pu
};

// State layout: x = [delta_1 omega_1 v_1 ... delta_N omega_N v_N],
// inputs u = [p_d_1 ... p_d_N], outputs y = [omega_1 v_1 ...].
struct GridModel {
    GridTopology topo;
    std::vector<EdgeAdmittance> edge_adm;  // parallel to topo.edges
    std::vector<ShuntAdmittance> shunts;   // parallel to topo.node_ids
    std::vector<UnitParams> units;         // parallel to topo.node_ids
    double omega_ref = 1.0;                // pu

    void validate() const;
    size_t node_count() const { return topo.node_count(); }
    size_t edge_count() const { return topo.edge_count(); }
};

constexpr size_t kStatesPerNode = 3;   // delta, omega, v
constexpr size_t kOutputsPerNode = 2;  // omega, v
// Reporting base for angular velocity, rad/s (60 Hz system).
constexpr double kOmegaBaseRadPerSec = 2.0 * M_PI * 60.0;

namespace phys {

inline double gi_sin(double x) { return std::sin(x); }
inline double gi_cos(double x) { return std::cos(x); }
inline double gi_square(double x) { return x * x; }
inline Tensor gi_sin(const Tensor& x) { return sin_t(x); }
inline Tensor gi_cos(const Tensor& x) { return cos_t(x); }
inline Tensor gi_square(const Tensor& x) { return square(x); }

template <class S>
struct PQ {
    S p, q;
};

template <class S>
struct UnitDerivative {
    S d_delta, d_omega, d_v;
};

// Active/reactive power flowing from i to j over a line with series
// admittance g + jb.
template <class S>
PQ<S> line_flow(const S& v_i, const S& v_j, const S& delta_ij, double g, double b) {
    S c = gi_cos(delta_ij);
    S s = gi_sin(delta_ij);
    S vv = v_i * v_j;
    PQ<S> out{g * gi_square(v_i) - vv * (g * c + b * s),
              (-b) * gi_square(v_i) + vv * (b * c - g * s)};
    return out;
}

// Injection at node i: shunt consumption plus flows to all neighbors.
// x is the full state vector [3N].
template <class S>
PQ<S> node_injection(const GridModel& grid, const std::vector<S>& x, size_t i) {
    const S& d_i = x[kStatesPerNode * i];
    const S& v_i = x[kStatesPerNode * i + 2];
    const auto& sh = grid.shunts[i];
    PQ<S> acc{sh.g * gi_square(v_i), (-sh.b) * gi_square(v_i)};
    for (const auto& [j, e] : grid.topo.neighbors[i]) {
        const auto& adm = grid.edge_adm[e];
        const S& d_j = x[kStatesPerNode * j];
        const S& v_j = x[kStatesPerNode * j + 2];
        PQ<S> flow = line_flow<S>(v_i, v_j, d_i - d_j, adm.g, adm.b);
        acc.p = acc.p + flow.p;
        acc.q = acc.q + flow.q;
    }
    return acc;
}

// Droop-controlled unit with first-order filtered power deviations.
template <class S>
UnitDerivative<S> unit_rhs(const S& /*delta*/, const S& omega, const S& v, const S& p_inj,
                           const S& q_inj, const UnitParams& up, const S& p_d, double omega_ref) {
    UnitDerivative<S> d;
    double inv_tau = 1.0 / up.tau;
    d.d_delta = omega - omega_ref;
    d.d_omega = ((up.omega_d - omega) - up.k_p * (p_inj - p_d)) * inv_tau;
    d.d_v = ((up.v_d - v) - up.k_q * (q_inj - up.q_d_nom)) * inv_tau;
    return d;
}

template <class S>
void system_rhs_into(const GridModel& grid, const std::vector<S>& x, const std::vector<S>& u,
                     std::vector<S>& dx) {
    size_t n = grid.node_count();
    if (x.size() != kStatesPerNode * n || u.size() != n) {
        throw ShapeError(format_str("system_rhs: expected %zu states and %zu inputs, got %zu/%zu",
                                    kStatesPerNode * n, n, x.size(), u.size()));
    }
    dx.resize(kStatesPerNode * n);
    for (size_t i = 0; i < n; ++i) {
        PQ<S> pq = node_injection(grid, x, i);
        UnitDerivative<S> d =
            unit_rhs(x[kStatesPerNode * i], x[kStatesPerNode * i + 1], x[kStatesPerNode * i + 2],
                     pq.p, pq.q, grid.units[i], u[i], grid.omega_ref);
        dx[kStatesPerNode * i] = d.d_delta;
        dx[kStatesPerNode * i + 1] = d.d_omega;
        dx[kStatesPerNode * i + 2] = d.d_v;
    }
}

template <class S>
std::vector<S> system_rhs(const GridModel& grid, const std::vector<S>& x,
                          const std::vector<S>& u) {
    std::vector<S> dx;
    system_rhs_into(grid, x, u, dx);
    return dx;
}

// Output selector: y = [omega_1 v_1 ... omega_N v_N].
template <class S>
std::vector<S> measure(const std::vector<S>& x) {
    size_t n = x.size() / kStatesPerNode;
    std::vector<S> y;
    y.reserve(kOutputsPerNode * n);
    for (size_t i = 0; i < n; ++i) {
        y.push_back(x[kStatesPerNode * i + 1]);
        y.push_back(x[kStatesPerNode * i + 2]);
    }
    return y;
}

}  // namespace phys

// IEEE 9-bus system: case9 topology and admittances, Table-I style units
// (nodes 1-3 slow, 4-9 fast; taus drawn once from a fixed seed).
GridModel ieee9_model();

// Small fully-connected 3-node system with the same unit parameter style,
// used for desk-scale studies.
GridModel triangle3_model();

// JSON persistence; field names: nodes[].{id,k_p,k_q,tau,omega_d,v_d,
// p_d_nom,q_d_nom,g_shunt,b_shunt}, edges[].{from,to,g,b}, omega_ref.
std::string grid_to_json(const GridModel& grid);
GridModel grid_from_json(const std::string& text);
void save_grid(const GridModel& grid, const std::string& path);
GridModel load_grid(const std::string& path);

}  // namespace gridident
