#pragma once

#include <memory>
#include <string>
#include <vector>

#include "gridident/datagen.hpp"
#include "gridident/nn.hpp"
#include "gridident/powergrid.hpp"

namespace gridident {

// Per-channel affine standardization; latent channels stay untouched.
struct NormStats {
    double u_mean = 0.0, u_std = 1.0;
    double omega_mean = 0.0, omega_std = 1.0;
    double v_mean = 0.0, v_std = 1.0;
    bool fitted = false;
};

// Training-set statistics over all nodes (the networks are shared across
// nodes, so channels are too).
NormStats fit_norm_stats(const SampleSet& data);

struct ModelConfig {
    int64_t history = 64;  // encoder window H
    double dt = 0.01;
    int64_t substeps = 1;     // RK4 steps per sampling interval
    int64_t latent_dim = 1;   // per node
    int64_t node_embed_dim = 8;
    int64_t edge_embed_dim = 4;
    int64_t message_dim = 2;  // active and reactive flow
    int64_t f_hidden_layers = 2;
    int64_t f_hidden_width = 64;
    int64_t m_hidden_layers = 2;
    int64_t m_hidden_width = 64;
    Activation activation = Activation::silu;
    int64_t tcn_channels = 16;
    int64_t tcn_kernel = 2;

    int64_t state_dim_per_node() const { return 2 + latent_dim; }
    void validate() const;
};

// Batched request: per node a [B, H, 3] history with channels
// (u lagged one step, omega, v) and a [B, K] control schedule.
struct PredictionRequest {
    std::vector<Tensor> history;
    std::vector<Tensor> controls;
    int64_t horizon = 0;
};

// outputs[node][k]: [B, 2] measured (omega, v) at t_{s+k+1}
struct Predictions {
    std::vector<std::vector<Tensor>> outputs;
    int64_t batch = 0;
    int64_t horizon = 0;
};

struct ParameterBreakdown {
    int64_t dynamics = 0;
    int64_t message = 0;
    int64_t encoder = 0;
    int64_t node_embeddings = 0;
    int64_t edge_embeddings = 0;
    int64_t total() const {
        return dynamics + message + encoder + node_embeddings + edge_embeddings;
    }
};

class SeqModel {
  public:
    virtual ~SeqModel() = default;
    virtual std::string kind() const = 0;
    virtual const ModelConfig& config() const = 0;
    virtual const GridTopology& topology() const = 0;
    virtual std::vector<NamedParam> parameters() const = 0;
    virtual Predictions predict(const PredictionRequest& req) const = 0;
    virtual ParameterBreakdown count_parameters() const = 0;

    NormStats& stats() { return stats_; }
    const NormStats& stats() const { return stats_; }

    // Dataset rows -> batched request. Uses the last `history` rows when the
    // dataset carries a longer window (evaluation sets).
    PredictionRequest make_request(const SampleSet& data, const std::vector<int64_t>& idx) const;
    // targets[node][k]: [B, 2] constants
    std::vector<std::vector<Tensor>> make_targets(const SampleSet& data,
                                                  const std::vector<int64_t>& idx,
                                                  bool clean) const;
    // Eq.-18 style MSE on standardized output channels.
    Tensor loss_batch(const SampleSet& data, const std::vector<int64_t>& idx) const;

  protected:
    NormStats stats_;
};

// Message-passing graph NODE: shared dynamics/message MLPs and TCN encoder,
// per-node and per-edge embeddings, autoregressively unrolled.
class MpgNodeModel : public SeqModel {
  public:
    MpgNodeModel(GridTopology topo, ModelConfig cfg, uint64_t seed);

    std::string kind() const override { return "mpg"; }
    const ModelConfig& config() const override { return cfg_; }
    const GridTopology& topology() const override { return topo_; }
    std::vector<NamedParam> parameters() const override;
    Predictions predict(const PredictionRequest& req) const override;
    ParameterBreakdown count_parameters() const override;

    // per-node [B, 2+latent] states; measured part copied from the last
    // history row
    std::vector<Tensor> encode(const std::vector<Tensor>& history) const;
    // per-node aggregated messages at the given states
    std::vector<Tensor> aggregate_messages(const std::vector<Tensor>& states) const;
    // per-node state derivative under the current controls u[i]: [B, 1]
    std::vector<Tensor> rhs(const std::vector<Tensor>& states,
                            const std::vector<Tensor>& u) const;

    // topology editing; shared networks are never touched
    void add_node(int new_id, int copy_embedding_from);
    void remove_node(int id);
    void add_edge(int a, int b, std::pair<int, int> copy_embedding_from);
    void remove_edge(int a, int b);

    Tensor node_embedding(int id) const;
    Tensor edge_embedding(int a, int b) const;
    Mlp& dynamics_mlp() { return f_; }
    Mlp& message_mlp() { return m_; }
    Tcn& encoder() { return h_; }

  private:
    std::vector<Tensor> aggregate_normalized(const std::vector<Tensor>& xn) const;
    Tensor normalize_state(const Tensor& x) const;

    GridTopology topo_;
    ModelConfig cfg_;
    Mlp f_, m_;
    Tcn h_;
    std::vector<Tensor> node_emb_;  // parallel to topo_.node_ids
    std::vector<Tensor> edge_emb_;  // parallel to topo_.edges
};

// Baseline: one dense dynamics MLP over the stacked state and one TCN over
// all nodes' channels.
class MonolithModel : public SeqModel {
  public:
    MonolithModel(GridTopology topo, ModelConfig cfg, uint64_t seed);

    std::string kind() const override { return "monolith"; }
    const ModelConfig& config() const override { return cfg_; }
    const GridTopology& topology() const override { return topo_; }
    std::vector<NamedParam> parameters() const override;
    Predictions predict(const PredictionRequest& req) const override;
    ParameterBreakdown count_parameters() const override;

    Tensor encode(const std::vector<Tensor>& history) const;  // [B, V*(2+latent)]
    Tensor rhs(const Tensor& state, const Tensor& u) const;   // u: [B, V]
    Mlp& dynamics_mlp() { return f_; }
    Tcn& encoder() { return h_; }

  private:
    Tensor normalize_state(const Tensor& x) const;

    GridTopology topo_;
    ModelConfig cfg_;
    Mlp f_;
    Tcn h_;
};

std::unique_ptr<SeqModel> make_model(const std::string& kind, GridTopology topo, ModelConfig cfg,
                                     uint64_t seed);

}  // namespace gridident
