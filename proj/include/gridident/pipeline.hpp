#pragma once

#include <string>

#include "gridident/config.hpp"
#include "gridident/evaluation.hpp"

namespace gridident::pipeline {

// The CLI is a thin wrapper over these; tests drive them directly.

// Writes grid.json and traj_<k>.csv for every configured trajectory.
void cmd_simulate(const AppConfig& cfg, const std::string& out_dir);

// Slices d1..d4.gnds from traj_0..traj_3; d4 uses the d4 slicing parameters
// and aligns t_s with the step-change instants when configured.
void cmd_dataset(const AppConfig& cfg, const std::string& traj_dir, const std::string& out_dir);

// Trains on d1 with early stopping against d2, writes checkpoint + report.
void cmd_train(const AppConfig& cfg, const std::string& data_dir, const std::string& model_kind,
               const std::string& ckpt_path, const std::string& report_csv);

// Deterministic grid sweep ranked on d3.
void cmd_sweep(const AppConfig& cfg, const std::string& data_dir, const std::string& out_dir);

// Writes eval.csv, aggregate.csv and example trajectory CSVs.
void cmd_eval(const std::string& ckpt_path, const std::string& dataset_path,
              const std::string& out_dir, TruthSource source);

// Applies the scenario edit script, generates altered-system data, and
// writes the three RMSE tables (original / no-retrain / retrained).
void cmd_transfer(const AppConfig& cfg, const std::string& ckpt_path,
                  const std::string& orig_data_dir, double fraction,
                  const std::string& out_dir);

struct GradCheckReport {
    double layer_max = 0.0;       // every nn layer
    double rk4_max = 0.0;         // one RK4 step through a random MLP rhs
    double full_model_max = 0.0;  // full MPG-NODE loss on a 2-node grid
    bool pass() const {
        return layer_max < 1e-6 && rk4_max < 1e-6 && full_model_max < 1e-4;
    }
};

GradCheckReport run_gradcheck_suite(bool verbose);

}  // namespace gridident::pipeline
