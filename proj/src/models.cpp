#include "gridident/models.hpp"

#include <algorithm>
#include <cmath>

#include "gridident/odeint.hpp"

namespace gridident {

NormStats fit_norm_stats(const SampleSet& data) {
    data.validate();
    auto moments = [](const std::vector<double>& v, size_t stride, size_t offset, double& mean,
                      double& stddev) {
        double acc = 0.0;
        size_t n = 0;
        for (size_t i = offset; i < v.size(); i += stride, ++n) acc += v[i];
        mean = acc / static_cast<double>(n);
        acc = 0.0;
        for (size_t i = offset; i < v.size(); i += stride) acc += (v[i] - mean) * (v[i] - mean);
        stddev = std::sqrt(acc / static_cast<double>(n));
        stddev = std::max(stddev, 1e-12);
    };
    NormStats s;
    moments(data.feat_u, 1, 0, s.u_mean, s.u_std);
    moments(data.feat_y, 2, 0, s.omega_mean, s.omega_std);
    moments(data.feat_y, 2, 1, s.v_mean, s.v_std);
    s.fitted = true;
    return s;
}

void ModelConfig::validate() const {
    if (history < 1) throw ConfigError("model: history must be >= 1");
    if (!(dt > 0.0)) throw ConfigError("model: dt must be positive");
    if (substeps < 1) throw ConfigError("model: substeps must be >= 1");
    if (latent_dim < 0) throw ConfigError("model: latent_dim must be >= 0");
    if (node_embed_dim < 1 || edge_embed_dim < 1 || message_dim < 1)
        throw ConfigError("model: embedding/message dims must be >= 1");
    if (tcn_kernel < 2) throw ConfigError("model: tcn kernel must be >= 2");
}

namespace {

constexpr double kEmbeddingInitStd = 0.1;

Tensor gaussian_embedding(int64_t dim, Rng& rng) {
    Tensor t = Tensor::zeros({dim}, true);
    for (auto& v : t.data()) v = rng.normal(0.0, kEmbeddingInitStd);
    return t;
}

void check_history_tensor(const Tensor& h, int64_t want_h, size_t node) {
    if (h.rank() != 3 || h.dim(2) != 3) {
        throw ShapeError(format_str("request: history for node slot %zu must be [B,H,3]", node));
    }
    if (h.dim(1) != want_h) {
        throw ShapeError(format_str(
            "request: history for node slot %zu has %lld rows, encoder wants %lld", node,
            static_cast<long long>(h.dim(1)), static_cast<long long>(want_h)));
    }
}

}  // namespace

PredictionRequest SeqModel::make_request(const SampleSet& data,
                                         const std::vector<int64_t>& idx) const {
    data.validate();
    const auto& topo = topology();
    if (static_cast<int64_t>(topo.node_count()) != data.num_nodes)
        throw ConfigError("request: dataset node count does not match the model topology");
    int64_t model_h = config().history;
    if (data.history < model_h) {
        throw ConfigError(format_str("request: dataset history %lld shorter than encoder H %lld",
                                     static_cast<long long>(data.history),
                                     static_cast<long long>(model_h)));
    }
    auto batch = static_cast<int64_t>(idx.size());
    int64_t skip = data.history - model_h;
    PredictionRequest req;
    req.horizon = data.horizon;
    for (int64_t i = 0; i < data.num_nodes; ++i) {
        Tensor hist = Tensor::zeros({batch, model_h, 3});
        Tensor ctrl = Tensor::zeros({batch, data.horizon});
        double* hd = hist.data().data();
        double* cd = ctrl.data().data();
        for (int64_t b = 0; b < batch; ++b) {
            int64_t n = idx[static_cast<size_t>(b)];
            if (n < 0 || n >= data.num_samples)
                throw ConfigError("request: sample index out of range");
            const double* su = data.sample_u(n, i);
            const double* sy = data.sample_y(n, i);
            for (int64_t r = 0; r < model_h; ++r) {
                hd[(b * model_h + r) * 3 + 0] = su[skip + r];
                hd[(b * model_h + r) * 3 + 1] = sy[(skip + r) * 2 + 0];
                hd[(b * model_h + r) * 3 + 2] = sy[(skip + r) * 2 + 1];
            }
            for (int64_t k = 0; k < data.horizon; ++k) cd[b * data.horizon + k] = su[data.history + k];
        }
        req.history.push_back(hist);
        req.controls.push_back(ctrl);
    }
    return req;
}

std::vector<std::vector<Tensor>> SeqModel::make_targets(const SampleSet& data,
                                                        const std::vector<int64_t>& idx,
                                                        bool clean) const {
    auto batch = static_cast<int64_t>(idx.size());
    std::vector<std::vector<Tensor>> out(static_cast<size_t>(data.num_nodes));
    for (int64_t i = 0; i < data.num_nodes; ++i) {
        for (int64_t k = 0; k < data.horizon; ++k) {
            Tensor t = Tensor::zeros({batch, 2});
            double* td = t.data().data();
            for (int64_t b = 0; b < batch; ++b) {
                const double* src = clean ? data.sample_target_clean(idx[static_cast<size_t>(b)], i)
                                          : data.sample_target(idx[static_cast<size_t>(b)], i);
                td[b * 2 + 0] = src[k * 2 + 0];
                td[b * 2 + 1] = src[k * 2 + 1];
            }
            out[static_cast<size_t>(i)].push_back(t);
        }
    }
    return out;
}

Tensor SeqModel::loss_batch(const SampleSet& data, const std::vector<int64_t>& idx) const {
    Predictions pred = predict(make_request(data, idx));
    auto targets = make_targets(data, idx, false);
    Tensor inv_scale =
        Tensor::from_data({2}, {1.0 / stats_.omega_std, 1.0 / stats_.v_std});
    Tensor acc;
    auto v = static_cast<size_t>(data.num_nodes);
    for (size_t i = 0; i < v; ++i) {
        for (int64_t k = 0; k < data.horizon; ++k) {
            Tensor diff = mul(sub(pred.outputs[i][static_cast<size_t>(k)],
                                  targets[i][static_cast<size_t>(k)]),
                              inv_scale);
            Tensor part = sum(square(diff));
            acc = acc.defined() ? add(acc, part) : part;
        }
    }
    double denom = static_cast<double>(data.num_nodes) * static_cast<double>(idx.size()) *
                   static_cast<double>(data.horizon);
    return scalar_mul(acc, 1.0 / denom);
}

// ---- MPG-NODE ----

MpgNodeModel::MpgNodeModel(GridTopology topo, ModelConfig cfg, uint64_t seed)
    : topo_(std::move(topo)), cfg_(cfg) {
    cfg_.validate();
    topo_.finalize();
    Rng rng(seed);
    int64_t sd = cfg_.state_dim_per_node();
    f_ = Mlp({sd + 1 + cfg_.message_dim + cfg_.node_embed_dim, cfg_.f_hidden_layers,
              cfg_.f_hidden_width, sd, cfg_.activation},
             rng);
    m_ = Mlp({2 * sd + cfg_.edge_embed_dim, cfg_.m_hidden_layers, cfg_.m_hidden_width,
              cfg_.message_dim, cfg_.activation},
             rng);
    if (cfg_.latent_dim > 0) {
        h_ = Tcn({3, cfg_.tcn_channels, cfg_.latent_dim, cfg_.tcn_kernel,
                  blocks_for_history(cfg_.tcn_kernel, cfg_.history)},
                 rng);
    }
    for (size_t i = 0; i < topo_.node_count(); ++i)
        node_emb_.push_back(gaussian_embedding(cfg_.node_embed_dim, rng));
    for (size_t e = 0; e < topo_.edge_count(); ++e)
        edge_emb_.push_back(gaussian_embedding(cfg_.edge_embed_dim, rng));
}

std::vector<NamedParam> MpgNodeModel::parameters() const {
    std::vector<NamedParam> out;
    f_.collect_parameters("f", out);
    m_.collect_parameters("m", out);
    if (cfg_.latent_dim > 0) h_.collect_parameters("h", out);
    for (size_t i = 0; i < node_emb_.size(); ++i)
        out.push_back({"node_emb." + std::to_string(topo_.node_ids[i]), node_emb_[i]});
    for (size_t e = 0; e < edge_emb_.size(); ++e) {
        auto [a, b] = std::minmax(topo_.edges[e].first, topo_.edges[e].second);
        out.push_back({"edge_emb." + std::to_string(a) + "-" + std::to_string(b), edge_emb_[e]});
    }
    return out;
}

ParameterBreakdown MpgNodeModel::count_parameters() const {
    ParameterBreakdown br;
    br.dynamics = f_.parameter_count();
    br.message = m_.parameter_count();
    br.encoder = cfg_.latent_dim > 0 ? h_.parameter_count() : 0;
    br.node_embeddings = static_cast<int64_t>(node_emb_.size()) * cfg_.node_embed_dim;
    br.edge_embeddings = static_cast<int64_t>(edge_emb_.size()) * cfg_.edge_embed_dim;
    return br;
}

Tensor MpgNodeModel::normalize_state(const Tensor& x) const {
    int64_t sd = cfg_.state_dim_per_node();
    std::vector<double> shift(static_cast<size_t>(sd), 0.0);
    std::vector<double> scale(static_cast<size_t>(sd), 1.0);
    shift[0] = stats_.omega_mean;
    shift[1] = stats_.v_mean;
    scale[0] = 1.0 / stats_.omega_std;
    scale[1] = 1.0 / stats_.v_std;
    return mul(sub(x, Tensor::from_data({sd}, shift)), Tensor::from_data({sd}, scale));
}

std::vector<Tensor> MpgNodeModel::encode(const std::vector<Tensor>& history) const {
    if (history.size() != topo_.node_count())
        throw ShapeError("encode: one history per node required");
    Tensor enc_shift =
        Tensor::from_data({3}, {stats_.u_mean, stats_.omega_mean, stats_.v_mean});
    Tensor enc_scale = Tensor::from_data(
        {3}, {1.0 / stats_.u_std, 1.0 / stats_.omega_std, 1.0 / stats_.v_std});
    std::vector<Tensor> states;
    for (size_t i = 0; i < history.size(); ++i) {
        const Tensor& seq = history[i];
        check_history_tensor(seq, cfg_.history, i);
        int64_t batch = seq.dim(0);
        // measured part bypasses the encoder and any normalization
        Tensor last = reshape(slice(seq, 1, cfg_.history - 1, cfg_.history), {batch, 3});
        Tensor measured = slice(last, 1, 1, 3);
        if (cfg_.latent_dim == 0) {
            states.push_back(measured);
            continue;
        }
        Tensor latent = h_.forward(mul(sub(seq, enc_shift), enc_scale));
        states.push_back(concat({measured, latent}, 1));
    }
    return states;
}

std::vector<Tensor> MpgNodeModel::aggregate_normalized(const std::vector<Tensor>& xn) const {
    std::vector<Tensor> msgs(topo_.node_count());
    int64_t batch = xn.empty() ? 0 : xn[0].dim(0);
    for (size_t i = 0; i < topo_.node_count(); ++i) {
        Tensor acc;
        for (const auto& [j, e] : topo_.neighbors[i]) {
            Tensor emb = repeat_rows(edge_emb_[e], batch);
            Tensor msg = m_.forward(concat({xn[i], xn[j], emb}, 1));
            acc = acc.defined() ? add(acc, msg) : msg;
        }
        msgs[i] = acc.defined() ? acc : Tensor::zeros({batch, cfg_.message_dim});
    }
    return msgs;
}

std::vector<Tensor> MpgNodeModel::aggregate_messages(const std::vector<Tensor>& states) const {
    if (states.size() != topo_.node_count())
        throw ShapeError("aggregate: one state per node required");
    std::vector<Tensor> xn;
    xn.reserve(states.size());
    for (const auto& x : states) xn.push_back(normalize_state(x));
    return aggregate_normalized(xn);
}

std::vector<Tensor> MpgNodeModel::rhs(const std::vector<Tensor>& states,
                                      const std::vector<Tensor>& u) const {
    if (states.size() != topo_.node_count() || u.size() != topo_.node_count())
        throw ShapeError("rhs: states/controls must cover every node");
    std::vector<Tensor> xn;
    xn.reserve(states.size());
    for (const auto& x : states) xn.push_back(normalize_state(x));
    std::vector<Tensor> msgs = aggregate_normalized(xn);
    std::vector<Tensor> dx(states.size());
    for (size_t i = 0; i < states.size(); ++i) {
        int64_t batch = states[i].dim(0);
        Tensor un = scalar_mul(scalar_add(u[i], -stats_.u_mean), 1.0 / stats_.u_std);
        Tensor emb = repeat_rows(node_emb_[i], batch);
        dx[i] = f_.forward(concat({xn[i], un, msgs[i], emb}, 1));
    }
    return dx;
}

Predictions MpgNodeModel::predict(const PredictionRequest& req) const {
    size_t v = topo_.node_count();
    if (req.history.size() != v || req.controls.size() != v)
        throw ShapeError("predict: request must carry one history and control row per node");
    if (req.horizon < 1) throw ShapeError("predict: horizon must be >= 1");
    for (const auto& c : req.controls) {
        if (c.rank() != 2 || c.dim(1) < req.horizon)
            throw ShapeError(format_str("predict: control schedule shorter than horizon %lld",
                                        static_cast<long long>(req.horizon)));
    }
    std::vector<Tensor> states = encode(req.history);
    Predictions pred;
    pred.batch = states[0].dim(0);
    pred.horizon = req.horizon;
    pred.outputs.assign(v, {});
    double h = cfg_.dt / static_cast<double>(cfg_.substeps);
    for (int64_t k = 0; k < req.horizon; ++k) {
        std::vector<Tensor> u_k(v);
        for (size_t i = 0; i < v; ++i) u_k[i] = slice(req.controls[i], 1, k, k + 1);
        auto f = [&](const std::vector<Tensor>& xs) { return rhs(xs, u_k); };
        for (int64_t s = 0; s < cfg_.substeps; ++s) states = ode::rk4_step_multi(f, states, h);
        for (size_t i = 0; i < v; ++i) pred.outputs[i].push_back(slice(states[i], 1, 0, 2));
    }
    return pred;
}

Tensor MpgNodeModel::node_embedding(int id) const { return node_emb_[topo_.index_of(id)]; }

Tensor MpgNodeModel::edge_embedding(int a, int b) const {
    return edge_emb_[topo_.edge_index(a, b)];
}

void MpgNodeModel::add_node(int new_id, int copy_embedding_from) {
    if (topo_.has_node(new_id))
        throw ConfigError(format_str("add_node: id %d already present", new_id));
    Tensor src = node_emb_[topo_.index_of(copy_embedding_from)];
    topo_.node_ids.push_back(new_id);
    topo_.finalize();
    Tensor copy = src.clone();
    copy.set_requires_grad(true);
    node_emb_.push_back(copy);
}

void MpgNodeModel::remove_node(int id) {
    size_t idx = topo_.index_of(id);
    if (!topo_.neighbors[idx].empty())
        throw ConfigError(format_str("remove_node: node %d still has incident edges", id));
    topo_.node_ids.erase(topo_.node_ids.begin() + static_cast<ptrdiff_t>(idx));
    node_emb_.erase(node_emb_.begin() + static_cast<ptrdiff_t>(idx));
    topo_.finalize();
}

void MpgNodeModel::add_edge(int a, int b, std::pair<int, int> copy_embedding_from) {
    if (!topo_.has_node(a) || !topo_.has_node(b))
        throw ConfigError(format_str("add_edge: endpoint (%d,%d) missing", a, b));
    if (topo_.has_edge(a, b))
        throw ConfigError(format_str("add_edge: edge (%d,%d) already present", a, b));
    Tensor src =
        edge_emb_[topo_.edge_index(copy_embedding_from.first, copy_embedding_from.second)];
    topo_.edges.emplace_back(a, b);
    topo_.finalize();
    Tensor copy = src.clone();
    copy.set_requires_grad(true);
    edge_emb_.push_back(copy);
}

void MpgNodeModel::remove_edge(int a, int b) {
    size_t e = topo_.edge_index(a, b);
    topo_.edges.erase(topo_.edges.begin() + static_cast<ptrdiff_t>(e));
    edge_emb_.erase(edge_emb_.begin() + static_cast<ptrdiff_t>(e));
    topo_.finalize();
}

// ---- monolith baseline ----

MonolithModel::MonolithModel(GridTopology topo, ModelConfig cfg, uint64_t seed)
    : topo_(std::move(topo)), cfg_(cfg) {
    cfg_.validate();
    topo_.finalize();
    Rng rng(seed);
    auto v = static_cast<int64_t>(topo_.node_count());
    int64_t sd = cfg_.state_dim_per_node();
    f_ = Mlp({v * sd + v, cfg_.f_hidden_layers, cfg_.f_hidden_width, v * sd, cfg_.activation},
             rng);
    if (cfg_.latent_dim > 0) {
        h_ = Tcn({3 * v, cfg_.tcn_channels, v * cfg_.latent_dim, cfg_.tcn_kernel,
                  blocks_for_history(cfg_.tcn_kernel, cfg_.history)},
                 rng);
    }
}

std::vector<NamedParam> MonolithModel::parameters() const {
    std::vector<NamedParam> out;
    f_.collect_parameters("f", out);
    if (cfg_.latent_dim > 0) h_.collect_parameters("h", out);
    return out;
}

ParameterBreakdown MonolithModel::count_parameters() const {
    ParameterBreakdown br;
    br.dynamics = f_.parameter_count();
    br.encoder = cfg_.latent_dim > 0 ? h_.parameter_count() : 0;
    return br;
}

Tensor MonolithModel::normalize_state(const Tensor& x) const {
    auto v = static_cast<size_t>(topo_.node_count());
    auto sd = static_cast<size_t>(cfg_.state_dim_per_node());
    std::vector<double> shift(v * sd, 0.0), scale(v * sd, 1.0);
    for (size_t i = 0; i < v; ++i) {
        shift[i * sd + 0] = stats_.omega_mean;
        shift[i * sd + 1] = stats_.v_mean;
        scale[i * sd + 0] = 1.0 / stats_.omega_std;
        scale[i * sd + 1] = 1.0 / stats_.v_std;
    }
    auto n = static_cast<int64_t>(v * sd);
    return mul(sub(x, Tensor::from_data({n}, shift)), Tensor::from_data({n}, scale));
}

Tensor MonolithModel::encode(const std::vector<Tensor>& history) const {
    size_t v = topo_.node_count();
    if (history.size() != v) throw ShapeError("encode: one history per node required");
    for (size_t i = 0; i < v; ++i) check_history_tensor(history[i], cfg_.history, i);
    int64_t batch = history[0].dim(0);
    std::vector<Tensor> measured(v);
    for (size_t i = 0; i < v; ++i) {
        Tensor last = reshape(slice(history[i], 1, cfg_.history - 1, cfg_.history), {batch, 3});
        measured[i] = slice(last, 1, 1, 3);
    }
    std::vector<Tensor> parts;
    if (cfg_.latent_dim > 0) {
        Tensor stacked = concat(history, 2);  // [B, H, 3V]
        std::vector<double> shift, scale;
        for (size_t i = 0; i < v; ++i) {
            shift.insert(shift.end(), {stats_.u_mean, stats_.omega_mean, stats_.v_mean});
            scale.insert(scale.end(),
                         {1.0 / stats_.u_std, 1.0 / stats_.omega_std, 1.0 / stats_.v_std});
        }
        auto c = static_cast<int64_t>(3 * v);
        Tensor latent = h_.forward(
            mul(sub(stacked, Tensor::from_data({c}, shift)), Tensor::from_data({c}, scale)));
        for (size_t i = 0; i < v; ++i) {
            parts.push_back(measured[i]);
            parts.push_back(slice(latent, 1, static_cast<int64_t>(i) * cfg_.latent_dim,
                                  static_cast<int64_t>(i + 1) * cfg_.latent_dim));
        }
    } else {
        for (size_t i = 0; i < v; ++i) parts.push_back(measured[i]);
    }
    return concat(parts, 1);
}

Tensor MonolithModel::rhs(const Tensor& state, const Tensor& u) const {
    Tensor un = scalar_mul(scalar_add(u, -stats_.u_mean), 1.0 / stats_.u_std);
    return f_.forward(concat({normalize_state(state), un}, 1));
}

Predictions MonolithModel::predict(const PredictionRequest& req) const {
    size_t v = topo_.node_count();
    if (req.history.size() != v || req.controls.size() != v)
        throw ShapeError("predict: request must carry one history and control row per node");
    if (req.horizon < 1) throw ShapeError("predict: horizon must be >= 1");
    for (const auto& c : req.controls) {
        if (c.rank() != 2 || c.dim(1) < req.horizon)
            throw ShapeError(format_str("predict: control schedule shorter than horizon %lld",
                                        static_cast<long long>(req.horizon)));
    }
    Tensor state = encode(req.history);
    int64_t sd = cfg_.state_dim_per_node();
    Predictions pred;
    pred.batch = state.dim(0);
    pred.horizon = req.horizon;
    pred.outputs.assign(v, {});
    double h = cfg_.dt / static_cast<double>(cfg_.substeps);
    auto f = [this](const Tensor& x, const Tensor& uu) { return rhs(x, uu); };
    for (int64_t k = 0; k < req.horizon; ++k) {
        std::vector<Tensor> u_cols(v);
        for (size_t i = 0; i < v; ++i) u_cols[i] = slice(req.controls[i], 1, k, k + 1);
        Tensor u_k = concat(u_cols, 1);
        for (int64_t s = 0; s < cfg_.substeps; ++s) state = ode::rk4_step(f, state, u_k, h);
        for (size_t i = 0; i < v; ++i) {
            auto off = static_cast<int64_t>(i) * sd;
            pred.outputs[i].push_back(slice(state, 1, off, off + 2));
        }
    }
    return pred;
}

std::unique_ptr<SeqModel> make_model(const std::string& kind, GridTopology topo, ModelConfig cfg,
                                     uint64_t seed) {
    if (kind == "mpg") return std::make_unique<MpgNodeModel>(std::move(topo), cfg, seed);
    if (kind == "monolith") return std::make_unique<MonolithModel>(std::move(topo), cfg, seed);
    throw ConfigError("unknown model kind '" + kind + "'");
}

}  // namespace gridident
