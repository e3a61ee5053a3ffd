#pragma once

#include <string>
#include <utility>
#include <vector>

#include "gridident/models.hpp"
#include "gridident/training.hpp"

namespace gridident {

// Ordered topology edit with copy-from references for new embeddings.
struct EditOp {
    std::string op;  // add_node | remove_node | add_edge | remove_edge
    int id = 0;
    int from = 0, to = 0;
    int copy_from_node = 0;
    std::pair<int, int> copy_from_edge{0, 0};
};
using EditScript = std::vector<EditOp>;

void apply_edits(MpgNodeModel& model, const EditScript& script);
std::string edit_script_to_json(const EditScript& script);
EditScript edit_script_from_json(const std::string& text);

struct TransferScenario {
    std::string name;
    GridModel altered_grid;
    EditScript script;
};

// New fast unit (tau = 0.4) on node 10, tied to node 6 over a g=1, b=-10
// line; embeddings copied from node 6 and edge {6,7}.
TransferScenario ieee9_transfer_scenario();
// Desk-scale analog on the 3-node system: node 4 attached to node 3,
// embeddings copied from node 3 and edge {2,3}.
TransferScenario triangle3_transfer_scenario();
TransferScenario transfer_scenario_by_name(const std::string& name);

// floor(fraction * N) samples drawn without replacement, deterministic under
// the seed; returns the subset and the chosen indices.
std::pair<SampleSet, std::vector<int64_t>> sample_fraction(const SampleSet& data, double fraction,
                                                           uint64_t seed);

// Retrains all parameters on the subsample (validation set untouched).
TrainReport retrain_fraction(SeqModel& model, const SampleSet& train_set,
                             const SampleSet& val_set, double fraction, const TrainConfig& cfg);

}  // namespace gridident
