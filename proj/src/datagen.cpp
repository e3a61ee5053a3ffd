#include "gridident/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "gridident/odeint.hpp"

namespace gridident {

double ExcitationSchedule::level_at(size_t node, double t) const {
    const auto& lv = levels[node];
    auto seg = static_cast<int64_t>(std::floor(t / period_s));
    seg = std::clamp<int64_t>(seg, 0, static_cast<int64_t>(lv.size()) - 1);
    return lv[static_cast<size_t>(seg)];
}

void ExcitationSchedule::fill_u(double t, std::vector<double>& u) const {
    u.resize(levels.size());
    for (size_t i = 0; i < levels.size(); ++i) u[i] = level_at(i, t);
}

ExcitationSchedule generate_excitation(const GridModel& grid, double duration_s, double period_s,
                                       double amplitude, uint64_t seed) {
    if (!(period_s > 0.0) || !(duration_s > 0.0))
        throw ConfigError("excitation: duration and period must be positive");
    if (amplitude < 0.0) throw ConfigError("excitation: amplitude must be >= 0");
    double ratio = duration_s / period_s;
    if (std::abs(ratio - std::round(ratio)) > 1e-9)
        throw ConfigError("excitation: period must divide duration");
    auto segments = static_cast<size_t>(std::llround(ratio));
    ExcitationSchedule sched;
    sched.duration_s = duration_s;
    sched.period_s = period_s;
    Rng rng(seed);
    sched.levels.resize(grid.node_count());
    for (size_t i = 0; i < grid.node_count(); ++i) {
        sched.levels[i].resize(segments);
        for (size_t s = 0; s < segments; ++s) {
            sched.levels[i][s] = grid.units[i].p_d_nom + rng.uniform(-amplitude, amplitude);
        }
    }
    return sched;
}

Trajectory simulate_trajectory(const GridModel& grid, const ExcitationSchedule& sched,
                               int substeps, double preroll_s) {
    grid.validate();
    if (sched.levels.size() != grid.node_count())
        throw ConfigError("simulate: schedule node count does not match grid");
    if (substeps < 1) throw ConfigError("simulate: substeps must be >= 1");

    const double dt = 0.01;
    size_t n = grid.node_count();
    auto rows = static_cast<size_t>(std::llround(sched.duration_s / dt)) + 1;

    ode::RhsD rhs = [&grid](const std::vector<double>& x, const std::vector<double>& u,
                            std::vector<double>& dx) { phys::system_rhs_into(grid, x, u, dx); };

    // flat start
    std::vector<double> x(kStatesPerNode * n);
    for (size_t i = 0; i < n; ++i) {
        x[3 * i] = 0.0;
        x[3 * i + 1] = grid.units[i].omega_d;
        x[3 * i + 2] = grid.units[i].v_d;
    }

    auto check_state = [&](double t) {
        for (size_t i = 0; i < n; ++i) {
            double vv = x[3 * i + 2];
            if (!std::isfinite(vv) || std::abs(vv) > 2.0) {
                throw NumericError(
                    format_str("simulate: divergence at t=%.3f s (node %d, v=%g)", t,
                               grid.topo.node_ids[i], vv));
            }
            if (!std::isfinite(x[3 * i]) || !std::isfinite(x[3 * i + 1])) {
                throw NumericError(format_str("simulate: non-finite state at t=%.3f s", t));
            }
        }
    };

    ode::Rk4Scratch scratch;
    std::vector<double> u(n), x_next;

    // pre-roll under nominal setpoints, discarded
    for (size_t i = 0; i < n; ++i) u[i] = grid.units[i].p_d_nom;
    auto preroll_steps = static_cast<size_t>(std::llround(preroll_s / dt));
    for (size_t k = 0; k < preroll_steps; ++k) {
        double h = dt / substeps;
        for (int s = 0; s < substeps; ++s) {
            ode::rk4_step_d(rhs, x, u, h, x_next, scratch);
            x.swap(x_next);
        }
        check_state(static_cast<double>(k) * dt - preroll_s);
    }

    Trajectory traj;
    traj.dt = dt;
    traj.node_ids = grid.topo.node_ids;
    traj.time.resize(rows);
    traj.u.assign(n, std::vector<double>(rows));
    traj.omega.assign(n, std::vector<double>(rows));
    traj.v.assign(n, std::vector<double>(rows));
    traj.delta.assign(n, std::vector<double>(rows));
    traj.noise_std_omega.assign(n, 0.0);
    traj.noise_std_v.assign(n, 0.0);

    for (size_t k = 0; k < rows; ++k) {
        double t = static_cast<double>(k) * dt;
        traj.time[k] = t;
        sched.fill_u(t, u);
        for (size_t i = 0; i < n; ++i) {
            traj.u[i][k] = u[i];
            traj.delta[i][k] = x[3 * i];
            traj.omega[i][k] = x[3 * i + 1];
            traj.v[i][k] = x[3 * i + 2];
        }
        if (k + 1 == rows) break;
        double h = dt / substeps;
        for (int s = 0; s < substeps; ++s) {
            ode::rk4_step_d(rhs, x, u, h, x_next, scratch);
            x.swap(x_next);
        }
        check_state(t + dt);
    }
    traj.omega_noisy = traj.omega;
    traj.v_noisy = traj.v;
    return traj;
}

namespace {

double centered_rms(const std::vector<double>& x) {
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double acc = 0.0;
    for (double v : x) acc += (v - mean) * (v - mean);
    return std::sqrt(acc / static_cast<double>(x.size()));
}

}  // namespace

void add_noise(Trajectory& traj, double snr_db, uint64_t seed) {
    if (!std::isfinite(snr_db)) throw ConfigError("add_noise: snr must be finite");
    double gain = std::pow(10.0, -snr_db / 20.0);
    Rng rng(seed);
    auto apply = [&](const std::vector<double>& clean, std::vector<double>& noisy,
                     double& std_out, size_t node, const char* channel) {
        double std = centered_rms(clean) * gain;
        if (std == 0.0) {
            GI_LOG_WARN("add_noise: zero-variance channel %s at node %d, leaving it clean",
                        channel, traj.node_ids[node]);
        }
        std_out = std;
        noisy.resize(clean.size());
        for (size_t k = 0; k < clean.size(); ++k) noisy[k] = clean[k] + rng.normal(0.0, std);
    };
    for (size_t i = 0; i < traj.num_nodes(); ++i) {
        apply(traj.omega[i], traj.omega_noisy[i], traj.noise_std_omega[i], i, "omega");
        apply(traj.v[i], traj.v_noisy[i], traj.noise_std_v[i], i, "v");
    }
}

void SampleSet::validate() const {
    if (history < 1 || horizon < 1) throw ConfigError("dataset: H and K must be >= 1");
    if (num_nodes < 1 || num_samples < 0) throw ConfigError("dataset: bad counts");
    auto expect = [&](const std::vector<double>& v, int64_t per_sample, const char* what) {
        if (static_cast<int64_t>(v.size()) != num_samples * num_nodes * per_sample)
            throw ConfigError(format_str("dataset: %s array size mismatch", what));
    };
    expect(feat_u, u_len(), "feat_u");
    expect(feat_y, history * 2, "feat_y");
    expect(targ_y, horizon * 2, "targ_y");
    expect(targ_clean, horizon * 2, "targ_clean");
    if (static_cast<int64_t>(t_s.size()) != num_samples)
        throw ConfigError("dataset: t_s size mismatch");
    if (static_cast<int64_t>(node_ids.size()) != num_nodes)
        throw ConfigError("dataset: node_ids size mismatch");
}

SampleSet SampleSet::subset(const std::vector<int64_t>& indices) const {
    SampleSet out = *this;
    out.num_samples = static_cast<int64_t>(indices.size());
    out.t_s.clear();
    out.feat_u.clear();
    out.feat_y.clear();
    out.targ_y.clear();
    out.targ_clean.clear();
    for (int64_t n : indices) {
        if (n < 0 || n >= num_samples) throw ConfigError("subset: sample index out of range");
        out.t_s.push_back(t_s[n]);
        auto copy_block = [&](const std::vector<double>& src, std::vector<double>& dst,
                              int64_t per_sample) {
            int64_t off = n * num_nodes * per_sample;
            dst.insert(dst.end(), src.begin() + off, src.begin() + off + num_nodes * per_sample);
        };
        copy_block(feat_u, out.feat_u, u_len());
        copy_block(feat_y, out.feat_y, history * 2);
        copy_block(targ_y, out.targ_y, horizon * 2);
        copy_block(targ_clean, out.targ_clean, horizon * 2);
    }
    return out;
}

namespace {

SampleSet slice_impl(const Trajectory& traj, int64_t history, int64_t horizon,
                     const std::vector<int64_t>& instants, int64_t stride) {
    auto len = static_cast<int64_t>(traj.rows()) - 1;
    SampleSet set;
    set.history = history;
    set.horizon = horizon;
    set.stride = stride;
    set.dt = traj.dt;
    set.num_nodes = static_cast<int64_t>(traj.num_nodes());
    set.node_ids = traj.node_ids;
    set.num_samples = static_cast<int64_t>(instants.size());
    set.t_s = instants;
    int64_t v = set.num_nodes;
    set.feat_u.reserve(set.num_samples * v * set.u_len());
    set.feat_y.reserve(set.num_samples * v * history * 2);
    set.targ_y.reserve(set.num_samples * v * horizon * 2);
    set.targ_clean.reserve(set.num_samples * v * horizon * 2);
    for (int64_t ts : instants) {
        if (ts < history || ts + horizon > len)
            throw ConfigError(format_str("slice: t_s=%lld does not admit H=%lld, K=%lld",
                                         static_cast<long long>(ts),
                                         static_cast<long long>(history),
                                         static_cast<long long>(horizon)));
        for (int64_t i = 0; i < v; ++i) {
            auto ui = static_cast<size_t>(i);
            for (int64_t r = ts - history; r <= ts + horizon; ++r)
                set.feat_u.push_back(traj.u[ui][static_cast<size_t>(r)]);
            for (int64_t r = ts - history + 1; r <= ts; ++r) {
                set.feat_y.push_back(traj.omega_noisy[ui][static_cast<size_t>(r)]);
                set.feat_y.push_back(traj.v_noisy[ui][static_cast<size_t>(r)]);
            }
            for (int64_t r = ts + 1; r <= ts + horizon; ++r) {
                set.targ_y.push_back(traj.omega_noisy[ui][static_cast<size_t>(r)]);
                set.targ_y.push_back(traj.v_noisy[ui][static_cast<size_t>(r)]);
                set.targ_clean.push_back(traj.omega[ui][static_cast<size_t>(r)]);
                set.targ_clean.push_back(traj.v[ui][static_cast<size_t>(r)]);
            }
        }
    }
    set.validate();
    return set;
}

}  // namespace

SampleSet slice_samples(const Trajectory& traj, int64_t history, int64_t horizon,
                        int64_t stride) {
    if (history < 1 || horizon < 1 || stride < 1)
        throw ConfigError("slice: H, K, D must be >= 1");
    auto len = static_cast<int64_t>(traj.rows()) - 1;
    if (len < history + horizon) {
        throw ConfigError(format_str(
            "slice: trajectory too short, need at least %lld rows for H=%lld K=%lld, got %lld",
            static_cast<long long>(history + horizon + 1), static_cast<long long>(history),
            static_cast<long long>(horizon), static_cast<long long>(len + 1)));
    }
    std::vector<int64_t> instants;
    for (int64_t ts = history; ts + horizon <= len; ts += stride) instants.push_back(ts);
    return slice_impl(traj, history, horizon, instants, stride);
}

SampleSet slice_samples_at(const Trajectory& traj, int64_t history, int64_t horizon,
                           const std::vector<int64_t>& instants) {
    if (instants.empty()) throw ConfigError("slice: no sample instants");
    return slice_impl(traj, history, horizon, instants, 0);
}

std::vector<int64_t> step_change_indices(const ExcitationSchedule& sched, const Trajectory& traj,
                                         int64_t history, int64_t horizon) {
    auto len = static_cast<int64_t>(traj.rows()) - 1;
    auto period_steps = static_cast<int64_t>(std::llround(sched.period_s / traj.dt));
    std::vector<int64_t> out;
    for (int64_t ts = period_steps; ts + horizon <= len; ts += period_steps) {
        if (ts >= history) out.push_back(ts);
    }
    return out;
}

namespace {

constexpr char kDatasetMagic[4] = {'G', 'N', 'D', 'S'};
constexpr uint32_t kDatasetVersion = 1;

template <class T>
void write_pod(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
void read_pod(std::ifstream& in, T& v, const std::string& path) {
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw IoError("dataset: truncated file: " + path);
}

void write_f64_array(std::ofstream& out, const std::vector<double>& v) {
    write_pod(out, static_cast<uint64_t>(v.size()));
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void read_f64_array(std::ifstream& in, std::vector<double>& v, const std::string& path) {
    uint64_t n = 0;
    read_pod(in, n, path);
    v.resize(n);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw IoError("dataset: truncated file: " + path);
}

}  // namespace

void save_dataset(const SampleSet& set, const std::string& path) {
    set.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for write: " + path);
    out.write(kDatasetMagic, 4);
    write_pod(out, kDatasetVersion);
    write_pod(out, set.history);
    write_pod(out, set.horizon);
    write_pod(out, set.stride);
    write_pod(out, set.num_nodes);
    write_pod(out, set.num_samples);
    write_pod(out, set.dt);
    write_pod(out, set.seed_traj);
    write_pod(out, set.seed_noise);
    write_pod(out, static_cast<uint32_t>(set.source.size()));
    out.write(set.source.data(), static_cast<std::streamsize>(set.source.size()));
    for (int id : set.node_ids) write_pod(out, static_cast<int32_t>(id));
    for (int64_t ts : set.t_s) write_pod(out, ts);
    write_f64_array(out, set.feat_u);
    write_f64_array(out, set.feat_y);
    write_f64_array(out, set.targ_y);
    write_f64_array(out, set.targ_clean);
    if (!out) throw IoError("write failed: " + path);
}

SampleSet load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kDatasetMagic, 4) != 0)
        throw IoError("dataset: bad magic bytes in " + path);
    uint32_t version = 0;
    read_pod(in, version, path);
    if (version != kDatasetVersion)
        throw IoError(format_str("dataset: unsupported version %u in %s", version, path.c_str()));
    SampleSet set;
    read_pod(in, set.history, path);
    read_pod(in, set.horizon, path);
    read_pod(in, set.stride, path);
    read_pod(in, set.num_nodes, path);
    read_pod(in, set.num_samples, path);
    read_pod(in, set.dt, path);
    read_pod(in, set.seed_traj, path);
    read_pod(in, set.seed_noise, path);
    uint32_t src_len = 0;
    read_pod(in, src_len, path);
    set.source.resize(src_len);
    in.read(set.source.data(), src_len);
    if (!in) throw IoError("dataset: truncated file: " + path);
    set.node_ids.resize(static_cast<size_t>(set.num_nodes));
    for (auto& id : set.node_ids) {
        int32_t v = 0;
        read_pod(in, v, path);
        id = v;
    }
    set.t_s.resize(static_cast<size_t>(set.num_samples));
    for (auto& ts : set.t_s) read_pod(in, ts, path);
    read_f64_array(in, set.feat_u, path);
    read_f64_array(in, set.feat_y, path);
    read_f64_array(in, set.targ_y, path);
    read_f64_array(in, set.targ_clean, path);
    set.validate();
    return set;
}

void save_trajectory_csv(const Trajectory& traj, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw IoError("cannot open for write: " + path);
    std::fputs("time,node,u,omega,v,omega_noisy,v_noisy,delta_diag\n", f);
    for (size_t k = 0; k < traj.rows(); ++k) {
        for (size_t i = 0; i < traj.num_nodes(); ++i) {
            std::fprintf(f, "%.17g,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", traj.time[k],
                         traj.node_ids[i], traj.u[i][k], traj.omega[i][k], traj.v[i][k],
                         traj.omega_noisy[i][k], traj.v_noisy[i][k], traj.delta[i][k]);
        }
    }
    if (std::fclose(f) != 0) throw IoError("write failed: " + path);
}

Trajectory load_trajectory_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    std::string line;
    if (!std::getline(in, line) ||
        line != "time,node,u,omega,v,omega_noisy,v_noisy,delta_diag") {
        throw IoError("trajectory: unexpected header in " + path);
    }
    Trajectory traj;
    std::vector<int> ids;
    std::vector<double> cols(8);
    bool first_block = true;
    size_t node_cursor = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const char* p = line.c_str();
        char* end = nullptr;
        for (int c = 0; c < 8; ++c) {
            cols[static_cast<size_t>(c)] = std::strtod(p, &end);
            if (p == end) throw IoError("trajectory: malformed row in " + path);
            p = (*end == ',') ? end + 1 : end;
        }
        int node_id = static_cast<int>(cols[1]);
        double t = cols[0];
        if (traj.time.empty() || t != traj.time.back()) {
            traj.time.push_back(t);
            first_block = traj.time.size() == 1;
            node_cursor = 0;
        }
        if (first_block && node_cursor >= ids.size()) {
            ids.push_back(node_id);
            for (auto* arr : {&traj.u, &traj.omega, &traj.v, &traj.omega_noisy, &traj.v_noisy,
                              &traj.delta}) {
                arr->emplace_back();
            }
        }
        if (node_cursor >= ids.size() || ids[node_cursor] != node_id)
            throw IoError("trajectory: inconsistent node order in " + path);
        traj.u[node_cursor].push_back(cols[2]);
        traj.omega[node_cursor].push_back(cols[3]);
        traj.v[node_cursor].push_back(cols[4]);
        traj.omega_noisy[node_cursor].push_back(cols[5]);
        traj.v_noisy[node_cursor].push_back(cols[6]);
        traj.delta[node_cursor].push_back(cols[7]);
        ++node_cursor;
    }
    traj.node_ids = ids;
    traj.noise_std_omega.assign(ids.size(), 0.0);
    traj.noise_std_v.assign(ids.size(), 0.0);
    if (traj.rows() >= 2) traj.dt = traj.time[1] - traj.time[0];
    for (size_t i = 0; i < ids.size(); ++i) {
        if (traj.u[i].size() != traj.rows())
            throw IoError("trajectory: ragged columns in " + path);
    }
    return traj;
}

}  // namespace gridident
