#include "gridident/config.hpp"

#include <fstream>
#include <set>

#include "json.hpp"

namespace gridident {

using nlohmann::json;

void AppConfig::validate() const {
    if (grid_kind != "ieee9" && grid_kind != "triangle3" && grid_kind != "inline")
        throw ConfigError("config: grid.kind must be ieee9, triangle3 or inline");
    if (grid_kind == "inline" && !inline_grid.has_value())
        throw ConfigError("config: grid.kind inline requires grid.nodes/edges");
    if (model_kind != "mpg" && model_kind != "monolith")
        throw ConfigError("config: model.kind must be mpg or monolith");
    if (excitation.trajectories < 1) throw ConfigError("config: trajectories must be >= 1");
    if (!(excitation.amplitude_pu >= 0.0)) throw ConfigError("config: amplitude must be >= 0");
    if (slicing.history < 1 || slicing.horizon < 1 || slicing.stride < 1 ||
        slicing.d4_history < 1 || slicing.d4_horizon < 1 || slicing.d4_stride < 1)
        throw ConfigError("config: slicing values must be >= 1");
    if (!(transfer.fraction > 0.0) || transfer.fraction > 1.0)
        throw ConfigError("config: transfer.fraction must be in (0,1]");
    model.validate();
    training.validate();
}

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& known,
                    const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!known.count(it.key()))
            throw ConfigError("config: unknown key '" + it.key() + "' in " + where);
    }
}

template <class T>
void maybe(const json& obj, const char* key, T& out) {
    if (obj.contains(key)) out = obj.at(key).get<T>();
}

}  // namespace

AppConfig config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    AppConfig cfg;
    try {
        reject_unknown(j, {"seed", "grid", "excitation", "noise", "slicing", "model", "training",
                           "sweep", "transfer"},
                       "the top level");
        maybe(j, "seed", cfg.seed);
        if (j.contains("grid")) {
            const auto& g = j.at("grid");
            reject_unknown(g, {"kind", "nodes", "edges", "omega_ref"}, "grid");
            maybe(g, "kind", cfg.grid_kind);
            if (cfg.grid_kind == "inline") cfg.inline_grid = grid_from_json(g.dump());
        }
        if (j.contains("excitation")) {
            const auto& e = j.at("excitation");
            reject_unknown(e, {"duration_s", "period_s", "amplitude_pu", "trajectories"},
                           "excitation");
            maybe(e, "duration_s", cfg.excitation.duration_s);
            maybe(e, "period_s", cfg.excitation.period_s);
            maybe(e, "amplitude_pu", cfg.excitation.amplitude_pu);
            maybe(e, "trajectories", cfg.excitation.trajectories);
        }
        if (j.contains("noise")) {
            reject_unknown(j.at("noise"), {"snr_db"}, "noise");
            maybe(j.at("noise"), "snr_db", cfg.noise.snr_db);
        }
        if (j.contains("slicing")) {
            const auto& s = j.at("slicing");
            reject_unknown(s,
                           {"history", "horizon", "stride", "d4_history", "d4_horizon",
                            "d4_stride", "d4_align_steps"},
                           "slicing");
            maybe(s, "history", cfg.slicing.history);
            maybe(s, "horizon", cfg.slicing.horizon);
            maybe(s, "stride", cfg.slicing.stride);
            maybe(s, "d4_history", cfg.slicing.d4_history);
            maybe(s, "d4_horizon", cfg.slicing.d4_horizon);
            maybe(s, "d4_stride", cfg.slicing.d4_stride);
            maybe(s, "d4_align_steps", cfg.slicing.d4_align_steps);
        }
        if (j.contains("model")) {
            const auto& m = j.at("model");
            reject_unknown(m,
                           {"kind", "latent_dim", "node_embed_dim", "edge_embed_dim",
                            "message_dim", "f_hidden_layers", "f_hidden_width",
                            "m_hidden_layers", "m_hidden_width", "activation", "tcn_channels",
                            "tcn_kernel", "substeps"},
                           "model");
            maybe(m, "kind", cfg.model_kind);
            maybe(m, "latent_dim", cfg.model.latent_dim);
            maybe(m, "node_embed_dim", cfg.model.node_embed_dim);
            maybe(m, "edge_embed_dim", cfg.model.edge_embed_dim);
            maybe(m, "message_dim", cfg.model.message_dim);
            maybe(m, "f_hidden_layers", cfg.model.f_hidden_layers);
            maybe(m, "f_hidden_width", cfg.model.f_hidden_width);
            maybe(m, "m_hidden_layers", cfg.model.m_hidden_layers);
            maybe(m, "m_hidden_width", cfg.model.m_hidden_width);
            if (m.contains("activation"))
                cfg.model.activation = activation_from_string(m.at("activation").get<std::string>());
            maybe(m, "tcn_channels", cfg.model.tcn_channels);
            maybe(m, "tcn_kernel", cfg.model.tcn_kernel);
            maybe(m, "substeps", cfg.model.substeps);
        }
        if (j.contains("training")) {
            const auto& t = j.at("training");
            reject_unknown(
                t, {"batch_size", "learning_rate", "max_epochs", "patience", "eval_every"},
                "training");
            maybe(t, "batch_size", cfg.training.batch_size);
            maybe(t, "learning_rate", cfg.training.learning_rate);
            maybe(t, "max_epochs", cfg.training.max_epochs);
            maybe(t, "patience", cfg.training.patience);
            maybe(t, "eval_every", cfg.training.eval_every);
        }
        if (j.contains("sweep")) {
            const auto& s = j.at("sweep");
            reject_unknown(s, {"hidden_layers", "hidden_widths", "tcn_channels", "learning_rates"},
                           "sweep");
            maybe(s, "hidden_layers", cfg.sweep.hidden_layers);
            maybe(s, "hidden_widths", cfg.sweep.hidden_widths);
            maybe(s, "tcn_channels", cfg.sweep.tcn_channels);
            maybe(s, "learning_rates", cfg.sweep.learning_rates);
        }
        if (j.contains("transfer")) {
            const auto& t = j.at("transfer");
            reject_unknown(t, {"scenario", "fraction"}, "transfer");
            maybe(t, "scenario", cfg.transfer.scenario);
            maybe(t, "fraction", cfg.transfer.fraction);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: mistyped value: ") + e.what());
    }
    // model.history/horizon follow the slicing section; the encoder window is
    // what D1-D3 provide
    cfg.model.history = cfg.slicing.history;
    cfg.training.seed = cfg.seed;
    cfg.validate();
    return cfg;
}

std::string config_to_json(const AppConfig& cfg) {
    json j;
    j["seed"] = cfg.seed;
    j["grid"]["kind"] = cfg.grid_kind;
    if (cfg.grid_kind == "inline") {
        json g = json::parse(grid_to_json(*cfg.inline_grid));
        g["kind"] = "inline";
        j["grid"] = g;
    }
    j["excitation"] = {{"duration_s", cfg.excitation.duration_s},
                       {"period_s", cfg.excitation.period_s},
                       {"amplitude_pu", cfg.excitation.amplitude_pu},
                       {"trajectories", cfg.excitation.trajectories}};
    j["noise"] = {{"snr_db", cfg.noise.snr_db}};
    j["slicing"] = {{"history", cfg.slicing.history},
                    {"horizon", cfg.slicing.horizon},
                    {"stride", cfg.slicing.stride},
                    {"d4_history", cfg.slicing.d4_history},
                    {"d4_horizon", cfg.slicing.d4_horizon},
                    {"d4_stride", cfg.slicing.d4_stride},
                    {"d4_align_steps", cfg.slicing.d4_align_steps}};
    j["model"] = {{"kind", cfg.model_kind},
                  {"latent_dim", cfg.model.latent_dim},
                  {"node_embed_dim", cfg.model.node_embed_dim},
                  {"edge_embed_dim", cfg.model.edge_embed_dim},
                  {"message_dim", cfg.model.message_dim},
                  {"f_hidden_layers", cfg.model.f_hidden_layers},
                  {"f_hidden_width", cfg.model.f_hidden_width},
                  {"m_hidden_layers", cfg.model.m_hidden_layers},
                  {"m_hidden_width", cfg.model.m_hidden_width},
                  {"activation", activation_to_string(cfg.model.activation)},
                  {"tcn_channels", cfg.model.tcn_channels},
                  {"tcn_kernel", cfg.model.tcn_kernel},
                  {"substeps", cfg.model.substeps}};
    j["training"] = {{"batch_size", cfg.training.batch_size},
                     {"learning_rate", cfg.training.learning_rate},
                     {"max_epochs", cfg.training.max_epochs},
                     {"patience", cfg.training.patience},
                     {"eval_every", cfg.training.eval_every}};
    j["sweep"] = {{"hidden_layers", cfg.sweep.hidden_layers},
                  {"hidden_widths", cfg.sweep.hidden_widths},
                  {"tcn_channels", cfg.sweep.tcn_channels},
                  {"learning_rates", cfg.sweep.learning_rates}};
    j["transfer"] = {{"scenario", cfg.transfer.scenario}, {"fraction", cfg.transfer.fraction}};
    return j.dump(2) + "\n";
}

AppConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return config_from_json(text);
}

GridModel build_grid(const AppConfig& cfg) {
    if (cfg.grid_kind == "ieee9") return ieee9_model();
    if (cfg.grid_kind == "triangle3") return triangle3_model();
    return *cfg.inline_grid;
}

}  // namespace gridident
