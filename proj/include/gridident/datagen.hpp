#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gridident/powergrid.hpp"
#include "gridident/util.hpp"

namespace gridident {

// Per-node piecewise-constant setpoint levels, one per period.
struct ExcitationSchedule {
    double duration_s = 0.0;
    double period_s = 5.0;
    std::vector<std::vector<double>> levels;  // [node][segment]

    size_t segments() const { return levels.empty() ? 0 : levels[0].size(); }
    double level_at(size_t node, double t) const;
    void fill_u(double t, std::vector<double>& u) const;
};

ExcitationSchedule generate_excitation(const GridModel& grid, double duration_s, double period_s,
                                       double amplitude, uint64_t seed);

struct Trajectory {
    double dt = 0.01;  // 100 Hz grid
    std::vector<int> node_ids;
    std::vector<double> time;  // row k at k*dt
    // per node, one value per row
    std::vector<std::vector<double>> u;
    std::vector<std::vector<double>> omega, v;              // clean outputs
    std::vector<std::vector<double>> omega_noisy, v_noisy;  // filled by add_noise
    std::vector<std::vector<double>> delta;                 // diagnostic only
    std::vector<double> noise_std_omega, noise_std_v;       // per node, 0 before add_noise

    size_t rows() const { return time.size(); }
    size_t num_nodes() const { return node_ids.size(); }
};

// Pre-rolls 20 s from a flat start under nominal setpoints, discards it, then
// integrates on the 100 Hz grid with 10 RK4 substeps per interval.
Trajectory simulate_trajectory(const GridModel& grid, const ExcitationSchedule& sched,
                               int substeps = 10, double preroll_s = 20.0);

// Per measured channel: std = rms(zero-mean component) * 10^(-snr/20).
// Controls stay noiseless.
void add_noise(Trajectory& traj, double snr_db, uint64_t seed);

// One sample per (t_s, node): features are u over [t_s-H, t_s+K] and noisy y
// over (t_s-H, t_s]; targets are noisy y over (t_s, t_s+K].
struct SampleSet {
    int64_t history = 0;     // H
    int64_t horizon = 0;     // K
    int64_t stride = 0;      // D (0 when sliced at explicit instants)
    int64_t num_nodes = 0;
    int64_t num_samples = 0;
    double dt = 0.01;
    uint64_t seed_traj = 0;
    uint64_t seed_noise = 0;
    std::string source;
    std::vector<int> node_ids;
    std::vector<int64_t> t_s;  // [num_samples]

    // node-major then time-major within each sample
    std::vector<double> feat_u;      // [N][V][H+K+1]
    std::vector<double> feat_y;      // [N][V][H][2]
    std::vector<double> targ_y;      // [N][V][K][2]
    std::vector<double> targ_clean;  // same layout as targ_y

    int64_t u_len() const { return history + horizon + 1; }
    const double* sample_u(int64_t n, int64_t node) const {
        return feat_u.data() + (n * num_nodes + node) * u_len();
    }
    const double* sample_y(int64_t n, int64_t node) const {
        return feat_y.data() + (n * num_nodes + node) * history * 2;
    }
    const double* sample_target(int64_t n, int64_t node) const {
        return targ_y.data() + (n * num_nodes + node) * horizon * 2;
    }
    const double* sample_target_clean(int64_t n, int64_t node) const {
        return targ_clean.data() + (n * num_nodes + node) * horizon * 2;
    }

    SampleSet subset(const std::vector<int64_t>& indices) const;
    void validate() const;
};

// t_s starts at H and advances by D while the target window fits.
SampleSet slice_samples(const Trajectory& traj, int64_t history, int64_t horizon,
                        int64_t stride);
// Explicit slice instants (step-change alignment for the evaluation set).
SampleSet slice_samples_at(const Trajectory& traj, int64_t history, int64_t horizon,
                           const std::vector<int64_t>& instants);
// Step-change grid indices that admit a full (H, K) window.
std::vector<int64_t> step_change_indices(const ExcitationSchedule& sched, const Trajectory& traj,
                                         int64_t history, int64_t horizon);

// Binary dataset: magic GNDS, version, metadata, little-endian f64 arrays.
void save_dataset(const SampleSet& set, const std::string& path);
SampleSet load_dataset(const std::string& path);

// Long-format CSV: time,node,u,omega,v,omega_noisy,v_noisy,delta_diag.
void save_trajectory_csv(const Trajectory& traj, const std::string& path);
Trajectory load_trajectory_csv(const std::string& path);

}  // namespace gridident
