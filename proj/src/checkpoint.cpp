#include "gridident/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

namespace gridident {

namespace {

constexpr char kMagic[4] = {'G', 'N', 'C', 'K'};
constexpr uint32_t kVersion = 1;

template <class T>
void write_pod(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
void read_pod(std::ifstream& in, T& v, const std::string& path) {
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw IoError("checkpoint: truncated file: " + path);
}

void write_string(std::ofstream& out, const std::string& s) {
    write_pod(out, static_cast<uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::ifstream& in, const std::string& path) {
    uint32_t n = 0;
    read_pod(in, n, path);
    std::string s(n, '\0');
    in.read(s.data(), n);
    if (!in) throw IoError("checkpoint: truncated file: " + path);
    return s;
}

}  // namespace

void save_checkpoint(const SeqModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for write: " + path);
    out.write(kMagic, 4);
    write_pod(out, kVersion);
    write_string(out, model.kind());
    const ModelConfig& cfg = model.config();
    write_pod(out, cfg.history);
    write_pod(out, cfg.dt);
    write_pod(out, cfg.substeps);
    write_pod(out, cfg.latent_dim);
    write_pod(out, cfg.node_embed_dim);
    write_pod(out, cfg.edge_embed_dim);
    write_pod(out, cfg.message_dim);
    write_pod(out, cfg.f_hidden_layers);
    write_pod(out, cfg.f_hidden_width);
    write_pod(out, cfg.m_hidden_layers);
    write_pod(out, cfg.m_hidden_width);
    write_string(out, activation_to_string(cfg.activation));
    write_pod(out, cfg.tcn_channels);
    write_pod(out, cfg.tcn_kernel);
    const GridTopology& topo = model.topology();
    write_pod(out, static_cast<uint32_t>(topo.node_count()));
    for (int id : topo.node_ids) write_pod(out, static_cast<int32_t>(id));
    write_pod(out, static_cast<uint32_t>(topo.edge_count()));
    for (const auto& [a, b] : topo.edges) {
        write_pod(out, static_cast<int32_t>(a));
        write_pod(out, static_cast<int32_t>(b));
    }
    write_pod(out, topo.hash());
    const NormStats& st = model.stats();
    write_pod(out, static_cast<uint8_t>(st.fitted ? 1 : 0));
    write_pod(out, st.u_mean);
    write_pod(out, st.u_std);
    write_pod(out, st.omega_mean);
    write_pod(out, st.omega_std);
    write_pod(out, st.v_mean);
    write_pod(out, st.v_std);
    auto params = model.parameters();
    write_pod(out, static_cast<uint32_t>(params.size()));
    for (const auto& p : params) {
        write_string(out, p.name);
        write_pod(out, static_cast<uint32_t>(p.tensor.rank()));
        for (auto d : p.tensor.shape()) write_pod(out, d);
        const auto& v = p.tensor.data();
        out.write(reinterpret_cast<const char*>(v.data()),
                  static_cast<std::streamsize>(v.size() * sizeof(double)));
    }
    if (!out) throw IoError("write failed: " + path);
}

std::unique_ptr<SeqModel> load_checkpoint(const std::string& path, const GridModel* grid,
                                          bool override_topology) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw IoError("checkpoint: bad magic bytes in " + path);
    uint32_t version = 0;
    read_pod(in, version, path);
    if (version != kVersion)
        throw IoError(format_str("checkpoint: unsupported version %u in %s", version,
                                 path.c_str()));
    std::string kind = read_string(in, path);
    ModelConfig cfg;
    read_pod(in, cfg.history, path);
    read_pod(in, cfg.dt, path);
    read_pod(in, cfg.substeps, path);
    read_pod(in, cfg.latent_dim, path);
    read_pod(in, cfg.node_embed_dim, path);
    read_pod(in, cfg.edge_embed_dim, path);
    read_pod(in, cfg.message_dim, path);
    read_pod(in, cfg.f_hidden_layers, path);
    read_pod(in, cfg.f_hidden_width, path);
    read_pod(in, cfg.m_hidden_layers, path);
    read_pod(in, cfg.m_hidden_width, path);
    cfg.activation = activation_from_string(read_string(in, path));
    read_pod(in, cfg.tcn_channels, path);
    read_pod(in, cfg.tcn_kernel, path);
    GridTopology topo;
    uint32_t n = 0;
    read_pod(in, n, path);
    for (uint32_t i = 0; i < n; ++i) {
        int32_t id = 0;
        read_pod(in, id, path);
        topo.node_ids.push_back(id);
    }
    uint32_t ne = 0;
    read_pod(in, ne, path);
    for (uint32_t e = 0; e < ne; ++e) {
        int32_t a = 0, b = 0;
        read_pod(in, a, path);
        read_pod(in, b, path);
        topo.edges.emplace_back(a, b);
    }
    uint64_t stored_hash = 0;
    read_pod(in, stored_hash, path);
    topo.finalize();
    if (topo.hash() != stored_hash)
        throw IoError("checkpoint: topology hash does not match its own topology block in " +
                      path);
    if (grid != nullptr && !override_topology && grid->topo.hash() != stored_hash) {
        throw ConfigError(
            "checkpoint: topology hash mismatch against the supplied grid; pass the topology "
            "override to load anyway");
    }
    NormStats st;
    uint8_t fitted = 0;
    read_pod(in, fitted, path);
    st.fitted = fitted != 0;
    read_pod(in, st.u_mean, path);
    read_pod(in, st.u_std, path);
    read_pod(in, st.omega_mean, path);
    read_pod(in, st.omega_std, path);
    read_pod(in, st.v_mean, path);
    read_pod(in, st.v_std, path);

    auto model = make_model(kind, topo, cfg, 0);
    model->stats() = st;
    std::map<std::string, Tensor> by_name;
    for (auto& p : model->parameters()) by_name.emplace(p.name, p.tensor);
    uint32_t count = 0;
    read_pod(in, count, path);
    if (count != by_name.size())
        throw IoError(format_str("checkpoint: expected %zu parameter arrays, file has %u",
                                 by_name.size(), count));
    for (uint32_t p = 0; p < count; ++p) {
        std::string name = read_string(in, path);
        auto it = by_name.find(name);
        if (it == by_name.end())
            throw IoError("checkpoint: unknown parameter '" + name + "' in " + path);
        uint32_t rank = 0;
        read_pod(in, rank, path);
        Shape shape(rank);
        for (auto& d : shape) read_pod(in, d, path);
        if (shape != it->second.shape())
            throw IoError("checkpoint: shape mismatch for parameter '" + name + "' in " + path);
        auto& dst = it->second.data();
        in.read(reinterpret_cast<char*>(dst.data()),
                static_cast<std::streamsize>(dst.size() * sizeof(double)));
        if (!in) throw IoError("checkpoint: truncated file: " + path);
    }
    return model;
}

}  // namespace gridident
