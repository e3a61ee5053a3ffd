#include "gridident/transfer.hpp"

#include <cmath>
#include <numeric>

#include "json.hpp"

namespace gridident {

void apply_edits(MpgNodeModel& model, const EditScript& script) {
    for (const auto& e : script) {
        if (e.op == "add_node") {
            model.add_node(e.id, e.copy_from_node);
        } else if (e.op == "remove_node") {
            model.remove_node(e.id);
        } else if (e.op == "add_edge") {
            model.add_edge(e.from, e.to, e.copy_from_edge);
        } else if (e.op == "remove_edge") {
            model.remove_edge(e.from, e.to);
        } else {
            throw ConfigError("edit script: unknown op '" + e.op + "'");
        }
    }
}

using nlohmann::json;

std::string edit_script_to_json(const EditScript& script) {
    json j = json::array();
    for (const auto& e : script) {
        json o;
        o["op"] = e.op;
        if (e.op == "add_node") {
            o["id"] = e.id;
            o["copy_from"] = e.copy_from_node;
        } else if (e.op == "remove_node") {
            o["id"] = e.id;
        } else {
            o["from"] = e.from;
            o["to"] = e.to;
            if (e.op == "add_edge")
                o["copy_from"] = json::array({e.copy_from_edge.first, e.copy_from_edge.second});
        }
        j.push_back(o);
    }
    return j.dump(2) + "\n";
}

EditScript edit_script_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& ex) {
        throw ConfigError(std::string("edit script: invalid JSON: ") + ex.what());
    }
    EditScript script;
    try {
        for (const auto& o : j) {
            EditOp e;
            e.op = o.at("op").get<std::string>();
            if (e.op == "add_node") {
                e.id = o.at("id").get<int>();
                e.copy_from_node = o.at("copy_from").get<int>();
            } else if (e.op == "remove_node") {
                e.id = o.at("id").get<int>();
            } else if (e.op == "add_edge" || e.op == "remove_edge") {
                e.from = o.at("from").get<int>();
                e.to = o.at("to").get<int>();
                if (e.op == "add_edge") {
                    auto arr = o.at("copy_from");
                    e.copy_from_edge = {arr.at(0).get<int>(), arr.at(1).get<int>()};
                }
            } else {
                throw ConfigError("edit script: unknown op '" + e.op + "'");
            }
            script.push_back(e);
        }
    } catch (const json::exception& ex) {
        throw ConfigError(std::string("edit script: missing field: ") + ex.what());
    }
    return script;
}

namespace {

TransferScenario extend_grid(GridModel grid, const std::string& name, int new_node,
                             int attach_to, int copy_node, std::pair<int, int> copy_edge) {
    UnitParams up;
    up.k_p = 1.0;
    up.k_q = 0.1;
    up.tau = 0.4;  // fast power-electronics unit
    up.p_d_nom = 0.0;
    up.q_d_nom = 0.0;
    grid.topo.node_ids.push_back(new_node);
    grid.units.push_back(up);
    grid.shunts.push_back({0.0, 0.0});
    grid.topo.edges.emplace_back(new_node, attach_to);
    grid.edge_adm.push_back({1.0, -10.0});
    grid.topo.finalize();
    grid.validate();
    TransferScenario sc;
    sc.name = name;
    sc.altered_grid = std::move(grid);
    EditOp add_node;
    add_node.op = "add_node";
    add_node.id = new_node;
    add_node.copy_from_node = copy_node;
    EditOp add_edge;
    add_edge.op = "add_edge";
    add_edge.from = new_node;
    add_edge.to = attach_to;
    add_edge.copy_from_edge = copy_edge;
    sc.script = {add_node, add_edge};
    return sc;
}

}  // namespace

TransferScenario ieee9_transfer_scenario() {
    return extend_grid(ieee9_model(), "ieee9-add-node", 10, 6, 6, {6, 7});
}

TransferScenario triangle3_transfer_scenario() {
    return extend_grid(triangle3_model(), "triangle3-add-node", 4, 3, 3, {2, 3});
}

TransferScenario transfer_scenario_by_name(const std::string& name) {
    if (name == "ieee9-add-node") return ieee9_transfer_scenario();
    if (name == "triangle3-add-node") return triangle3_transfer_scenario();
    throw ConfigError("unknown transfer scenario '" + name + "'");
}

std::pair<SampleSet, std::vector<int64_t>> sample_fraction(const SampleSet& data, double fraction,
                                                           uint64_t seed) {
    if (!(fraction > 0.0) || fraction > 1.0)
        throw ConfigError("sample_fraction: fraction must be in (0, 1]");
    auto want = static_cast<int64_t>(
        std::floor(fraction * static_cast<double>(data.num_samples)));
    if (want < 1) throw ConfigError("sample_fraction: empty subsample");
    std::vector<int64_t> order(static_cast<size_t>(data.num_samples));
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(seed, "subsample"));
    rng.shuffle(order);
    order.resize(static_cast<size_t>(want));
    return {data.subset(order), order};
}

TrainReport retrain_fraction(SeqModel& model, const SampleSet& train_set,
                             const SampleSet& val_set, double fraction, const TrainConfig& cfg) {
    auto [subset, indices] = sample_fraction(train_set, fraction, cfg.seed);
    GI_LOG_INFO("retrain: using %lld of %lld samples",
                static_cast<long long>(subset.num_samples),
                static_cast<long long>(train_set.num_samples));
    return train(model, subset, val_set, cfg);
}

}  // namespace gridident
