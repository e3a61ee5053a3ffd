#pragma once

#include <limits>
#include <string>
#include <vector>

#include "gridident/models.hpp"

namespace gridident {

struct TrainConfig {
    int64_t batch_size = 512;
    double learning_rate = 1e-3;
    int64_t max_epochs = 2000;
    int64_t patience = 50;
    uint64_t seed = 1;
    int64_t eval_every = 1;

    void validate() const;
};

struct TrainReport {
    std::vector<double> train_loss;  // one entry per epoch
    std::vector<double> val_loss;    // NaN on epochs without validation
    int64_t best_epoch = -1;         // 0-based
    double best_val = std::numeric_limits<double>::infinity();
    int64_t epochs_run = 0;
    double wall_seconds = 0.0;
    uint64_t param_checksum = 0;
};

// L = sum of squared errors / (|V| N K); inputs must be shaped alike.
Tensor mse_loss(const Tensor& predictions, const Tensor& targets, int64_t num_nodes,
                int64_t num_samples, int64_t horizon);

// Standard Adam with bias correction; moments are addressed positionally, so
// keep the parameter list stable across steps.
class Adam {
  public:
    explicit Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
    void step(const std::vector<Tensor>& params, double lr);
    void reset();
    int64_t step_count() const { return t_; }

  private:
    double beta1_, beta2_, eps_;
    int64_t t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

// Forward-only mean loss over a whole dataset.
double evaluate_loss(const SeqModel& model, const SampleSet& data, int64_t batch_size);

// Mini-batch training with seeded shuffles, per-epoch validation and early
// stopping; the model is left holding the best-validation parameters.
TrainReport train(SeqModel& model, const SampleSet& train_set, const SampleSet& val_set,
                  const TrainConfig& cfg);

void write_train_report_csv(const TrainReport& report, const std::string& path);

struct SweepPoint {
    int64_t hidden_layers = 1;
    int64_t hidden_width = 128;
    int64_t tcn_channels = 128;
    double learning_rate = 1e-3;
};

struct SweepResult {
    SweepPoint point;
    double sel_loss = std::numeric_limits<double>::infinity();
    double best_val = std::numeric_limits<double>::infinity();
    int64_t best_epoch = -1;
};

// Cartesian grid in menu order.
std::vector<SweepPoint> sweep_grid(const std::vector<int64_t>& hidden_layers,
                                   const std::vector<int64_t>& hidden_widths,
                                   const std::vector<int64_t>& tcn_channels,
                                   const std::vector<double>& learning_rates);

// Trains every point from a fresh seed and ranks by loss on the selection
// set (ascending, ties kept in grid order).
std::vector<SweepResult> sweep(const std::string& kind, const GridTopology& topo,
                               const ModelConfig& base, const std::vector<SweepPoint>& points,
                               const SampleSet& train_set, const SampleSet& val_set,
                               const SampleSet& sel_set, const TrainConfig& cfg);

void write_sweep_csv(const std::vector<SweepResult>& results, const std::string& path);

}  // namespace gridident
