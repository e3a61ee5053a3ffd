#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gridident/models.hpp"
#include "gridident/powergrid.hpp"
#include "gridident/training.hpp"

namespace gridident {

struct ExcitationConfig {
    double duration_s = 1000.0;
    double period_s = 5.0;
    double amplitude_pu = 0.2;
    int64_t trajectories = 4;
};

struct NoiseConfig {
    double snr_db = 30.0;
};

struct SliceConfig {
    int64_t history = 64;  // H for D1-D3
    int64_t horizon = 64;  // K
    int64_t stride = 16;   // D
    int64_t d4_history = 500;
    int64_t d4_horizon = 500;
    int64_t d4_stride = 500;
    bool d4_align_steps = true;
};

struct SweepConfig {
    std::vector<int64_t> hidden_layers = {1, 2, 3};
    std::vector<int64_t> hidden_widths = {128, 256, 512};
    std::vector<int64_t> tcn_channels = {128, 256, 512};
    std::vector<double> learning_rates = {1e-4, 1e-3, 1e-2};
};

struct TransferConfig {
    std::string scenario = "ieee9-add-node";
    double fraction = 0.1;
};

struct AppConfig {
    uint64_t seed = 1;
    std::string grid_kind = "ieee9";  // ieee9 | triangle3 | inline
    std::optional<GridModel> inline_grid;
    std::string model_kind = "mpg";  // mpg | monolith
    ExcitationConfig excitation;
    NoiseConfig noise;
    SliceConfig slicing;
    ModelConfig model;
    TrainConfig training;
    SweepConfig sweep;
    TransferConfig transfer;

    void validate() const;
};

AppConfig config_from_json(const std::string& text);
// canonical form: every field serialized, keys sorted, two-space indent
std::string config_to_json(const AppConfig& cfg);
AppConfig load_config(const std::string& path);

GridModel build_grid(const AppConfig& cfg);

}  // namespace gridident
