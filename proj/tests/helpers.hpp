#pragma once

// shared fixtures for the model/training/evaluation tests

#include "gridident/datagen.hpp"
#include "gridident/models.hpp"
#include "gridident/powergrid.hpp"

namespace gridident::testing {

struct TriangleData {
    GridModel grid;
    ExcitationSchedule sched;
    Trajectory traj;
    SampleSet set;
};

inline TriangleData make_triangle_dataset(int64_t history, int64_t horizon, int64_t stride,
                                          double duration_s, double snr_db, uint64_t seed) {
    TriangleData out;
    out.grid = triangle3_model();
    out.sched = generate_excitation(out.grid, duration_s, 1.0, 0.15, seed);
    out.traj = simulate_trajectory(out.grid, out.sched);
    if (snr_db > 0.0) add_noise(out.traj, snr_db, seed + 1);
    out.set = slice_samples(out.traj, history, horizon, stride);
    return out;
}

inline ModelConfig small_mpg_config(int64_t history) {
    ModelConfig mc;
    mc.history = history;
    mc.latent_dim = 1;
    mc.f_hidden_layers = 1;
    mc.f_hidden_width = 12;
    mc.m_hidden_layers = 1;
    mc.m_hidden_width = 12;
    mc.tcn_channels = 4;
    mc.tcn_kernel = 2;
    return mc;
}

inline GridTopology two_node_topology() {
    GridTopology topo;
    topo.node_ids = {1, 2};
    topo.edges = {{1, 2}};
    topo.finalize();
    return topo;
}

}  // namespace gridident::testing
