#pragma once

#include <string>
#include <vector>

#include "gridident/models.hpp"

namespace gridident {

enum class TruthSource { noisy_targets, clean_trajectory };

// sqrt(mean squared componentwise error); series must be equal-length and
// non-empty.
double rmse(const std::vector<double>& pred, const std::vector<double>& truth);

struct EvalRow {
    int64_t sample = 0;
    int node = 0;
    std::string quantity;  // "omega" (rad/s) or "v" (pu)
    double rmse = 0.0;
};

struct EvalTable {
    std::vector<EvalRow> rows;  // sample-major, then node, then quantity
};

// Per-sample, per-node, per-quantity RMSE over the K-step horizon. Angular
// velocity errors are reported in rad/s via the 2*pi*60 base.
EvalTable evaluate(const SeqModel& model, const SampleSet& data, TruthSource source,
                   int64_t batch_size = 256);

struct AggregateRow {
    std::string quantity;
    std::string model;
    double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
    double whisker_lo = 0, whisker_hi = 0;  // 1.5 IQR fences clamped to data
};

std::vector<AggregateRow> aggregate(const EvalTable& table, const std::string& model_label);
// restricted to one node id (per-node boxplots)
std::vector<AggregateRow> aggregate_node(const EvalTable& table, int node,
                                         const std::string& model_label);

void write_eval_csv(const EvalTable& table, const std::string& path);
void write_aggregate_csv(const std::vector<AggregateRow>& rows, const std::string& path);

// Writes trajectory_omega.csv / trajectory_v.csv for one sample with columns
// time,node,true,measured plus one prediction column per model label.
void export_trajectory(const std::vector<const SeqModel*>& models,
                       const std::vector<std::string>& labels, const SampleSet& data,
                       int64_t sample_index, const std::string& out_dir);

}  // namespace gridident
