#pragma once

#include <memory>
#include <string>

#include "gridident/models.hpp"

namespace gridident {

// Binary checkpoint: magic GNCK, version, model kind, config block, topology
// plus its hash, normalization stats, then named f64 parameter arrays in the
// parameters() order.
void save_checkpoint(const SeqModel& model, const std::string& path);

// When a grid is supplied, the stored topology hash must match it unless
// override_topology is set (needed after transfer edits).
std::unique_ptr<SeqModel> load_checkpoint(const std::string& path,
                                          const GridModel* grid = nullptr,
                                          bool override_topology = false);

}  // namespace gridident
