#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "gridident/datagen.hpp"

using namespace gridident;

namespace {

// synthetic trajectory with recognizable values, no simulation involved
Trajectory synthetic_traj(size_t rows, size_t nodes) {
    Trajectory t;
    t.dt = 0.01;
    for (size_t i = 0; i < nodes; ++i) t.node_ids.push_back(static_cast<int>(i + 1));
    t.time.resize(rows);
    for (size_t k = 0; k < rows; ++k) t.time[k] = static_cast<double>(k) * t.dt;
    auto grid_fn = [](size_t i, size_t k, double base) {
        return base + 10.0 * static_cast<double>(i) + 0.001 * static_cast<double>(k);
    };
    for (size_t i = 0; i < nodes; ++i) {
        t.u.emplace_back(rows);
        t.omega.emplace_back(rows);
        t.v.emplace_back(rows);
        t.delta.emplace_back(rows, 0.0);
        for (size_t k = 0; k < rows; ++k) {
            t.u[i][k] = grid_fn(i, k, 1000.0);
            t.omega[i][k] = grid_fn(i, k, 2000.0);
            t.v[i][k] = grid_fn(i, k, 3000.0);
        }
    }
    t.omega_noisy = t.omega;
    t.v_noisy = t.v;
    for (auto& arr : t.omega_noisy)
        for (auto& x : arr) x += 0.5;  // make noisy distinguishable
    for (auto& arr : t.v_noisy)
        for (auto& x : arr) x += 0.25;
    t.noise_std_omega.assign(nodes, 0.0);
    t.noise_std_v.assign(nodes, 0.0);
    return t;
}

GridModel lossless_triangle() {
    GridModel g = triangle3_model();
    for (auto& e : g.edge_adm) e.g = 0.0;
    for (auto& s : g.shunts) s.g = 0.0;
    return g;
}

std::string temp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("zero-amplitude excitation stays at the nominal setpoints") {
    GridModel g = triangle3_model();
    auto sched = generate_excitation(g, 20.0, 5.0, 0.0, 7);
    CHECK(sched.segments() == 4);
    for (size_t i = 0; i < 3; ++i) {
        for (double lv : sched.levels[i]) CHECK(lv == g.units[i].p_d_nom);
    }
}

TEST_CASE("study-scale excitation: 200 levels per node, bounded steps") {
    GridModel g = ieee9_model();
    auto sched = generate_excitation(g, 1000.0, 5.0, 0.2, 11);
    CHECK(sched.segments() == 200);
    for (size_t i = 0; i < 9; ++i) {
        CHECK(sched.levels[i].size() == 200);
        for (double lv : sched.levels[i]) {
            CHECK(std::abs(lv - g.units[i].p_d_nom) <= 0.2);
        }
    }
    // deterministic under the seed
    auto again = generate_excitation(g, 1000.0, 5.0, 0.2, 11);
    CHECK(again.levels == sched.levels);
    CHECK_THROWS_AS(generate_excitation(g, 11.0, 5.0, 0.2, 1), ConfigError);
}

TEST_CASE("simulation rows and determinism") {
    GridModel g = triangle3_model();
    auto sched = generate_excitation(g, 2.0, 1.0, 0.1, 3);
    Trajectory a = simulate_trajectory(g, sched);
    CHECK(a.rows() == 201);
    Trajectory b = simulate_trajectory(g, sched);
    for (size_t i = 0; i < 3; ++i) {
        CHECK(a.omega[i] == b.omega[i]);
        CHECK(a.v[i] == b.v[i]);
        CHECK(a.delta[i] == b.delta[i]);
    }
}

TEST_CASE("zero-amplitude trajectory is steady after the pre-roll") {
    GridModel g = triangle3_model();
    auto sched = generate_excitation(g, 2.0, 1.0, 0.0, 3);
    Trajectory t = simulate_trajectory(g, sched);
    for (size_t i = 0; i < 3; ++i) {
        for (size_t k = 0; k < t.rows(); ++k) {
            CHECK(std::abs(t.omega[i][k] - t.omega[i][0]) < 1e-6);
            CHECK(std::abs(t.v[i][k] - t.v[i][0]) < 1e-6);
        }
    }
}

TEST_CASE("pre-rolled lossless equilibrium has vanishing derivative") {
    GridModel g = lossless_triangle();
    auto sched = generate_excitation(g, 0.01, 0.01, 0.0, 3);
    Trajectory t = simulate_trajectory(g, sched, 10, 40.0);
    std::vector<double> x(9), u(3);
    for (size_t i = 0; i < 3; ++i) {
        x[3 * i] = t.delta[i][0];
        x[3 * i + 1] = t.omega[i][0];
        x[3 * i + 2] = t.v[i][0];
        u[i] = g.units[i].p_d_nom;
    }
    auto dx = phys::system_rhs(g, x, u);
    double norm = 0.0;
    for (double d : dx) norm += d * d;
    CHECK(std::sqrt(norm) < 1e-9);
}

TEST_CASE("doubling the substeps barely moves the solution") {
    GridModel g = triangle3_model();
    auto sched = generate_excitation(g, 1.0, 0.5, 0.15, 5);
    Trajectory a = simulate_trajectory(g, sched, 10);
    Trajectory b = simulate_trajectory(g, sched, 20);
    double max_diff = 0.0;
    for (size_t i = 0; i < 3; ++i) {
        for (size_t k = 0; k < a.rows(); ++k) {
            max_diff = std::max(max_diff, std::abs(a.omega[i][k] - b.omega[i][k]));
            max_diff = std::max(max_diff, std::abs(a.v[i][k] - b.v[i][k]));
        }
    }
    CHECK(max_diff < 1e-8);
}

TEST_CASE("divergent simulation aborts with a timestamp") {
    GridModel g = triangle3_model();
    g.units[0].v_d = 3.0;  // drives v beyond the 2 pu guard
    auto sched = generate_excitation(g, 1.0, 1.0, 0.0, 3);
    try {
        simulate_trajectory(g, sched);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("t=") != std::string::npos);
    }
}

TEST_CASE("noise std follows the SNR and spares the controls") {
    GridModel g = triangle3_model();
    auto sched = generate_excitation(g, 5.0, 1.0, 0.2, 9);
    Trajectory t = simulate_trajectory(g, sched);
    auto u_before = t.u;
    add_noise(t, 30.0, 123);
    CHECK(t.u == u_before);
    for (size_t i = 0; i < 3; ++i) {
        double rms = 0.0, mean = 0.0;
        for (double x : t.omega[i]) mean += x;
        mean /= static_cast<double>(t.rows());
        for (double x : t.omega[i]) rms += (x - mean) * (x - mean);
        rms = std::sqrt(rms / static_cast<double>(t.rows()));
        CHECK(t.noise_std_omega[i] == doctest::Approx(rms * std::pow(10.0, -1.5)).epsilon(1e-12));
        // clean channels untouched
        CHECK(t.omega[i][10] != t.omega_noisy[i][10]);
    }
    // near-infinite SNR leaves the signals effectively clean
    Trajectory t2 = simulate_trajectory(g, sched);
    add_noise(t2, 300.0, 123);
    for (size_t k = 0; k < t2.rows(); ++k)
        CHECK(std::abs(t2.omega[0][k] - t2.omega_noisy[0][k]) < 1e-12);
}

TEST_CASE("empirical SNR of the injected noise is within 1 dB of the target") {
    // 1e5-sample Monte-Carlo estimate on a synthetic channel
    Trajectory t;
    t.dt = 0.01;
    t.node_ids = {1};
    size_t rows = 100000;
    t.time.resize(rows);
    t.u.assign(1, std::vector<double>(rows, 0.0));
    t.omega.assign(1, std::vector<double>(rows));
    t.v.assign(1, std::vector<double>(rows));
    t.delta.assign(1, std::vector<double>(rows, 0.0));
    for (size_t k = 0; k < rows; ++k) {
        t.omega[0][k] = 1.0 + std::sin(0.001 * static_cast<double>(k));
        t.v[0][k] = 1.0 + 0.1 * std::cos(0.002 * static_cast<double>(k));
    }
    t.omega_noisy = t.omega;
    t.v_noisy = t.v;
    t.noise_std_omega.assign(1, 0.0);
    t.noise_std_v.assign(1, 0.0);
    add_noise(t, 30.0, 77);
    double sig = 0.0, noise = 0.0, mean = 0.0;
    for (double x : t.omega[0]) mean += x;
    mean /= static_cast<double>(rows);
    for (size_t k = 0; k < rows; ++k) {
        sig += (t.omega[0][k] - mean) * (t.omega[0][k] - mean);
        double e = t.omega_noisy[0][k] - t.omega[0][k];
        noise += e * e;
    }
    double snr = 10.0 * std::log10(sig / noise);
    CHECK(std::abs(snr - 30.0) < 1.0);
}

TEST_CASE("slice counting matches the floor formula") {
    Trajectory t = synthetic_traj(1001, 2);  // len = 1000
    SampleSet set = slice_samples(t, 64, 64, 16);
    CHECK(set.num_samples == 55);
    CHECK(set.t_s.front() == 64);
    CHECK(set.t_s[1] == 80);

    Trajectory tiny = synthetic_traj(64 + 64 + 1, 2);  // len = H+K
    SampleSet one = slice_samples(tiny, 64, 64, 16);
    CHECK(one.num_samples == 1);

    Trajectory too_short = synthetic_traj(64 + 64, 2);
    try {
        slice_samples(too_short, 64, 64, 16);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("129") != std::string::npos);
    }
}

TEST_CASE("sample windows agree with the source trajectory") {
    Trajectory t = synthetic_traj(301, 3);
    SampleSet set = slice_samples(t, 8, 4, 5);
    for (int64_t n = 0; n < set.num_samples; ++n) {
        int64_t ts = set.t_s[n];
        for (int64_t i = 0; i < 3; ++i) {
            const double* su = set.sample_u(n, i);
            for (int64_t r = 0; r <= 12; ++r) {
                CHECK(su[r] == t.u[i][static_cast<size_t>(ts - 8 + r)]);
            }
            const double* sy = set.sample_y(n, i);
            // last history row is y(t_s), noisy channels
            CHECK(sy[(8 - 1) * 2 + 0] == t.omega_noisy[i][static_cast<size_t>(ts)]);
            CHECK(sy[(8 - 1) * 2 + 1] == t.v_noisy[i][static_cast<size_t>(ts)]);
            const double* tg = set.sample_target(n, i);
            CHECK(tg[0] == t.omega_noisy[i][static_cast<size_t>(ts + 1)]);
            CHECK(tg[(4 - 1) * 2 + 1] == t.v_noisy[i][static_cast<size_t>(ts + 4)]);
            const double* tc = set.sample_target_clean(n, i);
            CHECK(tc[0] == t.omega[i][static_cast<size_t>(ts + 1)]);
        }
    }
}

TEST_CASE("step-aligned slicing picks the excitation instants") {
    GridModel g = triangle3_model();
    auto sched = generate_excitation(g, 30.0, 5.0, 0.1, 13);
    Trajectory t = simulate_trajectory(g, sched);
    auto instants = step_change_indices(sched, t, 500, 500);
    // steps at 5,10,...,25 s; the 25 s instant leaves exactly K=500 rows
    CHECK(instants == std::vector<int64_t>{500, 1000, 1500, 2000, 2500});
    SampleSet d4 = slice_samples_at(t, 500, 500, instants);
    CHECK(d4.num_samples == 5);
    CHECK(d4.stride == 0);
    // u changes exactly at each t_s
    for (int64_t ts : instants) {
        CHECK(t.u[0][static_cast<size_t>(ts) - 1] != t.u[0][static_cast<size_t>(ts)]);
    }
}

TEST_CASE("dataset round-trip is bit-exact") {
    Trajectory t = synthetic_traj(201, 2);
    SampleSet set = slice_samples(t, 16, 8, 4);
    set.seed_traj = 42;
    set.seed_noise = 43;
    set.source = "traj_0";
    std::string path = temp_path("gridident_test.gnds");
    save_dataset(set, path);
    SampleSet back = load_dataset(path);
    CHECK(back.history == 16);
    CHECK(back.horizon == 8);
    CHECK(back.stride == 4);
    CHECK(back.seed_traj == 42);
    CHECK(back.seed_noise == 43);
    CHECK(back.source == "traj_0");
    CHECK(back.node_ids == set.node_ids);
    CHECK(back.t_s == set.t_s);
    CHECK(back.feat_u == set.feat_u);
    CHECK(back.feat_y == set.feat_y);
    CHECK(back.targ_y == set.targ_y);
    CHECK(back.targ_clean == set.targ_clean);
    std::remove(path.c_str());
}

TEST_CASE("corrupt dataset files are rejected with the path") {
    std::string path = temp_path("gridident_bad.gnds");
    {
        std::ofstream out(path, std::ios::binary);
        out << "XXXXjunk";
    }
    try {
        load_dataset(path);
        FAIL("expected IoError");
    } catch (const IoError& e) {
        CHECK(std::string(e.what()).find(path) != std::string::npos);
    }
    std::remove(path.c_str());
    CHECK_THROWS_AS(load_dataset(temp_path("gridident_missing.gnds")), IoError);
}

TEST_CASE("subset keeps the selected samples in order") {
    Trajectory t = synthetic_traj(201, 2);
    SampleSet set = slice_samples(t, 16, 8, 4);
    SampleSet sub = set.subset({3, 0, 5});
    CHECK(sub.num_samples == 3);
    CHECK(sub.t_s == std::vector<int64_t>{set.t_s[3], set.t_s[0], set.t_s[5]});
    for (int64_t i = 0; i < 2; ++i) {
        CHECK(std::equal(sub.sample_u(0, i), sub.sample_u(0, i) + sub.u_len(),
                         set.sample_u(3, i)));
        CHECK(std::equal(sub.sample_target(2, i), sub.sample_target(2, i) + 16,
                         set.sample_target(5, i)));
    }
    CHECK_THROWS_AS(set.subset({999}), ConfigError);
}

TEST_CASE("trajectory CSV round-trips bit-exactly") {
    GridModel g = triangle3_model();
    auto sched = generate_excitation(g, 1.0, 0.5, 0.1, 21);
    Trajectory t = simulate_trajectory(g, sched);
    add_noise(t, 30.0, 22);
    std::string path = temp_path("gridident_traj.csv");
    save_trajectory_csv(t, path);
    Trajectory back = load_trajectory_csv(path);
    CHECK(back.node_ids == t.node_ids);
    CHECK(back.rows() == t.rows());
    for (size_t i = 0; i < 3; ++i) {
        CHECK(back.u[i] == t.u[i]);
        CHECK(back.omega[i] == t.omega[i]);
        CHECK(back.v[i] == t.v[i]);
        CHECK(back.omega_noisy[i] == t.omega_noisy[i]);
        CHECK(back.v_noisy[i] == t.v_noisy[i]);
        CHECK(back.delta[i] == t.delta[i]);
    }
    std::remove(path.c_str());
}
