#include "gridident/powergrid.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "json.hpp"

namespace gridident {

void GridTopology::finalize() {
    std::set<int> ids(node_ids.begin(), node_ids.end());
    if (ids.size() != node_ids.size()) throw ConfigError("topology: duplicate node ids");
    std::set<std::pair<int, int>> seen;
    for (auto& [a, b] : edges) {
        if (a == b) throw ConfigError(format_str("topology: self-loop at node %d", a));
        if (!ids.count(a) || !ids.count(b))
            throw ConfigError(format_str("topology: edge (%d,%d) references unknown node", a, b));
        auto key = std::minmax(a, b);
        if (!seen.insert(key).second)
            throw ConfigError(format_str("topology: duplicate edge (%d,%d)", a, b));
    }
    neighbors.assign(node_ids.size(), {});
    for (size_t e = 0; e < edges.size(); ++e) {
        size_t ia = index_of(edges[e].first);
        size_t ib = index_of(edges[e].second);
        neighbors[ia].emplace_back(ib, e);
        neighbors[ib].emplace_back(ia, e);
    }
    // fixed summation order: ascending neighbor id
    for (auto& nb : neighbors) {
        std::sort(nb.begin(), nb.end(), [this](const auto& l, const auto& r) {
            return node_ids[l.first] < node_ids[r.first];
        });
    }
}

size_t GridTopology::index_of(int node_id) const {
    for (size_t i = 0; i < node_ids.size(); ++i) {
        if (node_ids[i] == node_id) return i;
    }
    throw ConfigError(format_str("topology: unknown node id %d", node_id));
}

bool GridTopology::has_node(int node_id) const {
    return std::find(node_ids.begin(), node_ids.end(), node_id) != node_ids.end();
}

bool GridTopology::has_edge(int a, int b) const {
    for (const auto& [x, y] : edges) {
        if ((x == a && y == b) || (x == b && y == a)) return true;
    }
    return false;
}

size_t GridTopology::edge_index(int a, int b) const {
    for (size_t e = 0; e < edges.size(); ++e) {
        const auto& [x, y] = edges[e];
        if ((x == a && y == b) || (x == b && y == a)) return e;
    }
    throw ConfigError(format_str("topology: no edge (%d,%d)", a, b));
}

uint64_t GridTopology::hash() const {
    uint64_t h = 0xcbf29ce484222325ull;
    for (int id : node_ids) h = fnv1a(&id, sizeof(id), h);
    for (const auto& [a, b] : edges) {
        auto key = std::minmax(a, b);
        h = fnv1a(&key.first, sizeof(int), h);
        h = fnv1a(&key.second, sizeof(int), h);
    }
    return h;
}

void GridModel::validate() const {
    if (edge_adm.size() != topo.edge_count() || shunts.size() != topo.node_count() ||
        units.size() != topo.node_count()) {
        throw ConfigError("grid: admittance/unit array sizes inconsistent with topology");
    }
    for (const auto& e : edge_adm) {
        if (e.g < 0.0) throw ConfigError("grid: edge conductance must be >= 0");
    }
    for (const auto& s : shunts) {
        if (s.g < 0.0) throw ConfigError("grid: shunt conductance must be >= 0");
    }
    for (const auto& u : units) {
        if (!(u.k_p > 0.0) || !(u.k_q > 0.0) || !(u.tau > 0.0) || !(u.v_d > 0.0)) {
            throw ConfigError("grid: unit params must satisfy k_p,k_q,tau,v_d > 0");
        }
    }
}

namespace {

EdgeAdmittance series_admittance(double r, double x) {
    double denom = r * r + x * x;
    return {r / denom, -x / denom};
}

struct Case9Branch {
    int from, to;
    double r, x, b_charge;
};

// case9 reference branch data (per-unit on 100 MVA)
const Case9Branch kCase9Branches[] = {
    {1, 4, 0.0, 0.0576, 0.0},      {4, 5, 0.017, 0.092, 0.158},  {5, 6, 0.039, 0.17, 0.358},
    {3, 6, 0.0, 0.0586, 0.0},      {6, 7, 0.0119, 0.1008, 0.209}, {7, 8, 0.0085, 0.072, 0.149},
    {2, 8, 0.0, 0.0625, 0.0},      {8, 9, 0.032, 0.161, 0.306},  {4, 9, 0.01, 0.085, 0.176},
};

// net injection setpoints: generation minus load (solved slack at bus 1)
const double kCase9PNom[9] = {0.7164, 1.63, 0.85, 0.0, -0.90, 0.0, -1.00, 0.0, -1.25};
const double kCase9QNom[9] = {0.2705, 0.0665, -0.1086, 0.0, -0.30, 0.0, -0.35, 0.0, -0.50};

}  // namespace

GridModel ieee9_model() {
    GridModel g;
    for (int i = 1; i <= 9; ++i) g.topo.node_ids.push_back(i);
    g.shunts.assign(9, ShuntAdmittance{});
    for (const auto& br : kCase9Branches) {
        g.topo.edges.emplace_back(br.from, br.to);
        g.edge_adm.push_back(series_admittance(br.r, br.x));
        // line charging splits evenly onto the endpoint shunts
        g.shunts[static_cast<size_t>(br.from - 1)].b += br.b_charge / 2.0;
        g.shunts[static_cast<size_t>(br.to - 1)].b += br.b_charge / 2.0;
    }
    g.topo.finalize();
    Rng rng(derive_seed(0x49454539ull, "ieee9-tau"));
    for (int i = 0; i < 9; ++i) {
        UnitParams up;
        up.k_p = 1.0;
        up.k_q = 0.1;
        up.tau = i < 3 ? rng.uniform(0.9, 1.1) : rng.uniform(0.3, 0.5);
        up.omega_d = 1.0;
        up.v_d = 1.0;
        up.p_d_nom = kCase9PNom[i];
        up.q_d_nom = kCase9QNom[i];
        g.units.push_back(up);
    }
    g.validate();
    return g;
}

GridModel triangle3_model() {
    GridModel g;
    g.topo.node_ids = {1, 2, 3};
    g.topo.edges = {{1, 2}, {2, 3}, {1, 3}};
    g.edge_adm = {{1.0, -10.0}, {1.0, -8.0}, {0.8, -12.0}};
    g.shunts.assign(3, ShuntAdmittance{});
    g.topo.finalize();
    Rng rng(derive_seed(0x49454539ull, "triangle3-tau"));
    const double p_nom[3] = {0.3, -0.2, -0.1};
    const double q_nom[3] = {0.1, -0.05, -0.05};
    for (int i = 0; i < 3; ++i) {
        UnitParams up;
        up.k_p = 1.0;
        up.k_q = 0.1;
        up.tau = i < 1 ? rng.uniform(0.9, 1.1) : rng.uniform(0.3, 0.5);
        up.p_d_nom = p_nom[i];
        up.q_d_nom = q_nom[i];
        g.units.push_back(up);
    }
    g.validate();
    return g;
}

using nlohmann::json;

std::string grid_to_json(const GridModel& grid) {
    json j;
    j["omega_ref"] = grid.omega_ref;
    j["nodes"] = json::array();
    for (size_t i = 0; i < grid.node_count(); ++i) {
        const auto& u = grid.units[i];
        const auto& s = grid.shunts[i];
        j["nodes"].push_back({{"id", grid.topo.node_ids[i]},
                              {"k_p", u.k_p},
                              {"k_q", u.k_q},
                              {"tau", u.tau},
                              {"omega_d", u.omega_d},
                              {"v_d", u.v_d},
                              {"p_d_nom", u.p_d_nom},
                              {"q_d_nom", u.q_d_nom},
                              {"g_shunt", s.g},
                              {"b_shunt", s.b}});
    }
    j["edges"] = json::array();
    for (size_t e = 0; e < grid.edge_count(); ++e) {
        j["edges"].push_back({{"from", grid.topo.edges[e].first},
                              {"to", grid.topo.edges[e].second},
                              {"g", grid.edge_adm[e].g},
                              {"b", grid.edge_adm[e].b}});
    }
    return j.dump(2) + "\n";
}

GridModel grid_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("grid: invalid JSON: ") + e.what());
    }
    GridModel g;
    try {
        g.omega_ref = j.value("omega_ref", 1.0);
        for (const auto& n : j.at("nodes")) {
            g.topo.node_ids.push_back(n.at("id").get<int>());
            UnitParams u;
            u.k_p = n.at("k_p").get<double>();
            u.k_q = n.at("k_q").get<double>();
            u.tau = n.at("tau").get<double>();
            u.omega_d = n.at("omega_d").get<double>();
            u.v_d = n.at("v_d").get<double>();
            u.p_d_nom = n.at("p_d_nom").get<double>();
            u.q_d_nom = n.at("q_d_nom").get<double>();
            g.units.push_back(u);
            g.shunts.push_back({n.at("g_shunt").get<double>(), n.at("b_shunt").get<double>()});
        }
        for (const auto& e : j.at("edges")) {
            g.topo.edges.emplace_back(e.at("from").get<int>(), e.at("to").get<int>());
            g.edge_adm.push_back({e.at("g").get<double>(), e.at("b").get<double>()});
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("grid: missing or mistyped field: ") + e.what());
    }
    g.topo.finalize();
    g.validate();
    return g;
}

void save_grid(const GridModel& grid, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for write: " + path);
    out << grid_to_json(grid);
    if (!out) throw IoError("write failed: " + path);
}

GridModel load_grid(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return grid_from_json(text);
}

}  // namespace gridident
