#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "gridident/checkpoint.hpp"
#include "gridident/odeint.hpp"
#include "helpers.hpp"

using namespace gridident;
using gridident::testing::make_triangle_dataset;
using gridident::testing::TriangleData;
using gridident::testing::small_mpg_config;
using gridident::testing::two_node_topology;

namespace {

void zero_params_with_prefix(SeqModel& model, const std::string& prefix, double bias_value,
                             const std::string& bias_suffix) {
    for (auto& p : model.parameters()) {
        if (p.name.rfind(prefix, 0) != 0) continue;
        std::fill(p.tensor.data().begin(), p.tensor.data().end(), 0.0);
        if (!bias_suffix.empty() && p.name.size() >= bias_suffix.size() &&
            p.name.compare(p.name.size() - bias_suffix.size(), bias_suffix.size(),
                           bias_suffix) == 0) {
            std::fill(p.tensor.data().begin(), p.tensor.data().end(), bias_value);
        }
    }
}

Tensor random_history(int64_t batch, int64_t h, Rng& rng) {
    Tensor t = Tensor::zeros({batch, h, 3});
    for (int64_t b = 0; b < batch; ++b) {
        for (int64_t r = 0; r < h; ++r) {
            t.data()[(b * h + r) * 3 + 0] = rng.uniform(-0.3, 0.3);
            t.data()[(b * h + r) * 3 + 1] = rng.uniform(0.95, 1.05);
            t.data()[(b * h + r) * 3 + 2] = rng.uniform(0.9, 1.1);
        }
    }
    return t;
}

}  // namespace

TEST_CASE("encoded measured components equal the last history row exactly") {
    MpgNodeModel model(two_node_topology(), small_mpg_config(8), 1);
    Rng rng(2);
    std::vector<Tensor> hist = {random_history(3, 8, rng), random_history(3, 8, rng)};
    auto states = model.encode(hist);
    for (size_t i = 0; i < 2; ++i) {
        CHECK(states[i].shape() == Shape{3, 3});
        for (int64_t b = 0; b < 3; ++b) {
            CHECK(states[i].data()[b * 3 + 0] == hist[i].data()[(b * 8 + 7) * 3 + 1]);
            CHECK(states[i].data()[b * 3 + 1] == hist[i].data()[(b * 8 + 7) * 3 + 2]);
        }
    }
}

TEST_CASE("zero-weight encoder emits its projection bias as the latent") {
    MpgNodeModel model(two_node_topology(), small_mpg_config(8), 1);
    zero_params_with_prefix(model, "h.", 0.0, "");
    for (auto& p : model.parameters()) {
        if (p.name == "h.proj.b") p.tensor.data() = {0.37};
    }
    Rng rng(3);
    std::vector<Tensor> hist = {random_history(2, 8, rng), random_history(2, 8, rng)};
    auto states = model.encode(hist);
    for (size_t i = 0; i < 2; ++i) {
        for (int64_t b = 0; b < 2; ++b) CHECK(states[i].data()[b * 3 + 2] == 0.37);
    }
}

TEST_CASE("identical local histories encode to identical states") {
    MpgNodeModel model(two_node_topology(), small_mpg_config(8), 5);
    Rng rng(4);
    Tensor h = random_history(2, 8, rng);
    auto states = model.encode({h, h.clone()});
    CHECK(states[0].data() == states[1].data());
}

TEST_CASE("empty neighborhood aggregates to the zero message") {
    GridTopology lonely;
    lonely.node_ids = {1, 2};
    lonely.edges = {};
    lonely.finalize();
    MpgNodeModel model(lonely, small_mpg_config(8), 6);
    Tensor x = Tensor::from_data({2, 3}, {1.0, 1.0, 0.1, 1.0, 1.0, 0.2});
    auto msgs = model.aggregate_messages({x, x.clone()});
    CHECK(msgs[0].shape() == Shape{2, 2});
    for (double v : msgs[0].data()) CHECK(v == 0.0);
}

TEST_CASE("symmetric duplicate neighbors double the single message") {
    GridTopology star;
    star.node_ids = {1, 2, 3};
    star.edges = {{1, 2}, {1, 3}};
    star.finalize();
    MpgNodeModel model(star, small_mpg_config(8), 7);
    // identical embeddings on both edges
    auto params = model.parameters();
    for (auto& p : params) {
        if (p.name == "edge_emb.1-3") {
            p.tensor.data() = model.edge_embedding(1, 2).data();
        }
    }
    Rng rng(8);
    Tensor x0 = random_history(2, 8, rng);  // reuse generator for state values
    Tensor xa = Tensor::from_data({2, 3}, {1.0, 0.98, 0.1, 1.01, 0.99, -0.2});
    Tensor xb = Tensor::from_data({2, 3}, {0.99, 1.02, 0.3, 1.0, 1.0, 0.05});
    auto both = model.aggregate_messages({xa, xb, xb.clone()});

    GridTopology single;
    single.node_ids = {1, 2};
    single.edges = {{1, 2}};
    single.finalize();
    MpgNodeModel one(single, small_mpg_config(8), 7);  // same seed: same f/m/h draws
    for (auto& p : one.parameters()) {
        if (p.name == "edge_emb.1-2") p.tensor.data() = model.edge_embedding(1, 2).data();
    }
    auto msgs_one = one.aggregate_messages({xa.clone(), xb.clone()});
    for (int64_t i = 0; i < both[0].numel(); ++i) {
        CHECK(both[0].data()[i] ==
              doctest::Approx(2.0 * msgs_one[0].data()[i]).epsilon(1e-12));
    }
}

TEST_CASE("message aggregation is bit-deterministic") {
    TriangleData td = make_triangle_dataset(8, 4, 4, 2.0, 0.0, 31);
    MpgNodeModel model(td.grid.topo, small_mpg_config(8), 9);
    Rng rng(10);
    std::vector<Tensor> xs = {random_history(2, 8, rng), random_history(2, 8, rng),
                              random_history(2, 8, rng)};
    std::vector<Tensor> states;
    for (auto& x : xs) states.push_back(reshape(slice(x, 1, 0, 1), {2, 3}));
    auto m1 = model.aggregate_messages(states);
    auto m2 = model.aggregate_messages(states);
    for (size_t i = 0; i < 3; ++i) CHECK(m1[i].data() == m2[i].data());
}

TEST_CASE("zero dynamics MLP with bias yields that bias for every node") {
    MpgNodeModel model(two_node_topology(), small_mpg_config(8), 11);
    model.stats().fitted = true;
    zero_params_with_prefix(model, "f.", 0.0, "");
    for (auto& p : model.parameters()) {
        if (p.name == "f.b1") p.tensor.data() = {0.1, -0.2, 0.3};
    }
    Tensor x = Tensor::from_data({2, 3}, {1.0, 1.0, 0.0, 1.0, 1.0, 0.0});
    Tensor u = Tensor::from_data({2, 1}, {0.0, 0.1});
    auto dx = model.rhs({x, x.clone()}, {u, u.clone()});
    for (size_t i = 0; i < 2; ++i) {
        for (int64_t b = 0; b < 2; ++b) {
            CHECK(dx[i].data()[b * 3 + 0] == 0.1);
            CHECK(dx[i].data()[b * 3 + 1] == -0.2);
            CHECK(dx[i].data()[b * 3 + 2] == 0.3);
        }
    }
}

TEST_CASE("weight sharing: equal inputs and embeddings give equal derivatives") {
    MpgNodeModel model(two_node_topology(), small_mpg_config(8), 12);
    model.stats().fitted = true;
    auto params = model.parameters();
    for (auto& p : params) {
        if (p.name == "node_emb.2") p.tensor.data() = model.node_embedding(1).data();
    }
    Tensor x = Tensor::from_data({1, 3}, {1.0, 0.98, 0.2});
    Tensor u = Tensor::from_data({1, 1}, {0.05});
    auto dx = model.rhs({x, x.clone()}, {u, u.clone()});
    CHECK(dx[0].data() == dx[1].data());
}

TEST_CASE("a node embedding only conditions its own derivative") {
    TriangleData td = make_triangle_dataset(8, 4, 4, 2.0, 0.0, 32);
    MpgNodeModel model(td.grid.topo, small_mpg_config(8), 13);
    model.stats().fitted = true;
    Rng rng(14);
    std::vector<Tensor> states, u;
    for (int i = 0; i < 3; ++i) {
        states.push_back(Tensor::from_data(
            {1, 3}, {rng.uniform(0.95, 1.05), rng.uniform(0.9, 1.1), rng.uniform(-0.3, 0.3)}));
        u.push_back(Tensor::from_data({1, 1}, {rng.uniform(-0.2, 0.2)}));
    }
    auto dx_before = model.rhs(states, u);
    for (auto& p : model.parameters()) {
        if (p.name == "node_emb.3") {
            for (auto& v : p.tensor.data()) v += 0.5;
        }
    }
    auto dx_after = model.rhs(states, u);
    CHECK(dx_after[0].data() == dx_before[0].data());
    CHECK(dx_after[1].data() == dx_before[1].data());
    CHECK(dx_after[2].data() != dx_before[2].data());
}

TEST_CASE("zero dynamics hold the encoded measured values over the horizon") {
    TriangleData td = make_triangle_dataset(8, 6, 4, 2.0, 0.0, 33);
    MpgNodeModel model(td.grid.topo, small_mpg_config(8), 15);
    model.stats() = fit_norm_stats(td.set);
    zero_params_with_prefix(model, "f.", 0.0, "");
    std::vector<int64_t> idx = {0, 1};
    auto req = model.make_request(td.set, idx);
    auto states = model.encode(req.history);
    Predictions pred = model.predict(req);
    CHECK(pred.horizon == 6);
    for (size_t i = 0; i < 3; ++i) {
        for (int64_t k = 0; k < 6; ++k) {
            for (int64_t b = 0; b < 2; ++b) {
                CHECK(pred.outputs[i][static_cast<size_t>(k)].data()[b * 2 + 0] ==
                      states[i].data()[b * 3 + 0]);
                CHECK(pred.outputs[i][static_cast<size_t>(k)].data()[b * 2 + 1] ==
                      states[i].data()[b * 3 + 1]);
            }
        }
    }
}

TEST_CASE("one-step prediction equals a single RK4 step") {
    TriangleData td = make_triangle_dataset(8, 4, 4, 2.0, 0.0, 34);
    MpgNodeModel model(td.grid.topo, small_mpg_config(8), 16);
    model.stats() = fit_norm_stats(td.set);
    std::vector<int64_t> idx = {1};
    auto req = model.make_request(td.set, idx);
    Predictions pred = model.predict(req);

    auto states = model.encode(req.history);
    std::vector<Tensor> u_k;
    for (size_t i = 0; i < 3; ++i) u_k.push_back(slice(req.controls[i], 1, 0, 1));
    auto f = [&](const std::vector<Tensor>& xs) { return model.rhs(xs, u_k); };
    auto stepped = ode::rk4_step_multi(f, states, model.config().dt);
    for (size_t i = 0; i < 3; ++i) {
        CHECK(pred.outputs[i][0].data()[0] == stepped[i].data()[0]);
        CHECK(pred.outputs[i][0].data()[1] == stepped[i].data()[1]);
    }
}

TEST_CASE("prediction continuity: longer horizons extend shorter ones bitwise") {
    TriangleData td = make_triangle_dataset(8, 6, 4, 2.0, 0.0, 35);
    MpgNodeModel model(td.grid.topo, small_mpg_config(8), 17);
    model.stats() = fit_norm_stats(td.set);
    std::vector<int64_t> idx = {0, 2};
    auto req_full = model.make_request(td.set, idx);
    Predictions full = model.predict(req_full);
    PredictionRequest req_short = req_full;
    req_short.horizon = 3;
    Predictions part = model.predict(req_short);
    for (size_t i = 0; i < 3; ++i) {
        for (size_t k = 0; k < 3; ++k) {
            CHECK(full.outputs[i][k].data() == part.outputs[i][k].data());
        }
    }
}

TEST_CASE("rejects a control schedule shorter than the horizon") {
    MpgNodeModel model(two_node_topology(), small_mpg_config(8), 18);
    model.stats().fitted = true;
    Rng rng(19);
    PredictionRequest req;
    req.history = {random_history(1, 8, rng), random_history(1, 8, rng)};
    req.controls = {Tensor::zeros({1, 2}), Tensor::zeros({1, 2})};
    req.horizon = 5;
    CHECK_THROWS_AS(model.predict(req), ShapeError);
}

TEST_CASE("longer dataset histories are truncated to the encoder window") {
    TriangleData td = make_triangle_dataset(12, 4, 4, 2.0, 0.0, 36);
    MpgNodeModel model(td.grid.topo, small_mpg_config(8), 20);
    model.stats().fitted = true;
    std::vector<int64_t> idx = {0};
    auto req = model.make_request(td.set, idx);
    CHECK(req.history[0].shape() == Shape{1, 8, 3});
    // last history row still matches y(t_s)
    const double* sy = td.set.sample_y(0, 0);
    CHECK(req.history[0].data()[(0 * 8 + 7) * 3 + 1] == sy[(12 - 1) * 2 + 0]);
    // and an encoder wanting more history than the dataset carries is refused
    MpgNodeModel big(td.grid.topo, small_mpg_config(64), 20);
    big.stats().fitted = true;
    CHECK_THROWS_AS(big.make_request(td.set, idx), ConfigError);
}

TEST_CASE("parameter breakdown matches the configured dimensions") {
    TriangleData td = make_triangle_dataset(8, 4, 4, 2.0, 0.0, 37);
    ModelConfig mc = small_mpg_config(8);
    MpgNodeModel model(td.grid.topo, mc, 21);
    auto br = model.count_parameters();
    CHECK(br.node_embeddings == 8 * 3);
    CHECK(br.edge_embeddings == 4 * 3);
    CHECK(br.total() == br.dynamics + br.message + br.encoder + 24 + 12);
    // zero hidden layers: affine parameter count
    ModelConfig affine = mc;
    affine.f_hidden_layers = 0;
    MpgNodeModel amodel(td.grid.topo, affine, 21);
    int64_t in_dim = 3 + 1 + 2 + 8;
    CHECK(amodel.count_parameters().dynamics == (in_dim + 1) * 3);
    // one shared copy of f/m/h regardless of node count
    MpgNodeModel bigger(ieee9_model().topo, mc, 21);
    CHECK(bigger.count_parameters().dynamics == br.dynamics);
    CHECK(bigger.count_parameters().message == br.message);
    CHECK(bigger.count_parameters().encoder == br.encoder);
}

TEST_CASE("monolith: zero dynamics give constant predictions, shapes match mpg") {
    TriangleData td = make_triangle_dataset(8, 5, 4, 2.0, 0.0, 38);
    ModelConfig mc = small_mpg_config(8);
    MonolithModel model(td.grid.topo, mc, 22);
    model.stats() = fit_norm_stats(td.set);
    zero_params_with_prefix(model, "f.", 0.0, "");
    std::vector<int64_t> idx = {0, 1, 2};
    auto req = model.make_request(td.set, idx);
    Predictions pred = model.predict(req);
    Tensor enc = model.encode(req.history);
    int64_t sd = mc.state_dim_per_node();
    for (size_t i = 0; i < 3; ++i) {
        CHECK(pred.outputs[i][0].shape() == Shape{3, 2});
        for (int64_t b = 0; b < 3; ++b) {
            for (size_t k = 0; k < 5; ++k) {
                CHECK(pred.outputs[i][k].data()[b * 2] ==
                      enc.data()[b * (3 * sd) + static_cast<int64_t>(i) * sd]);
            }
        }
    }

    // single-node grid: identical output structure across model kinds
    GridTopology solo;
    solo.node_ids = {1};
    solo.finalize();
    MpgNodeModel mpg_solo(solo, mc, 23);
    MonolithModel mono_solo(solo, mc, 23);
    mpg_solo.stats().fitted = true;
    mono_solo.stats().fitted = true;
    Rng rng(24);
    PredictionRequest solo_req;
    solo_req.history = {random_history(2, 8, rng)};
    solo_req.controls = {Tensor::zeros({2, 3})};
    solo_req.horizon = 3;
    auto pa = mpg_solo.predict(solo_req);
    auto pb = mono_solo.predict(solo_req);
    CHECK(pa.outputs.size() == pb.outputs.size());
    CHECK(pa.outputs[0].size() == pb.outputs[0].size());
    CHECK(pa.outputs[0][0].shape() == pb.outputs[0][0].shape());
}

TEST_CASE("checkpoint round-trip preserves parameters, stats and topology") {
    TriangleData td = make_triangle_dataset(8, 4, 4, 2.0, 0.0, 39);
    MpgNodeModel model(td.grid.topo, small_mpg_config(8), 25);
    model.stats() = fit_norm_stats(td.set);
    auto path = (std::filesystem::temp_directory_path() / "gridident_test.gnck").string();
    save_checkpoint(model, path);
    auto loaded = load_checkpoint(path, &td.grid, false);
    CHECK(loaded->kind() == "mpg");
    CHECK(loaded->stats().omega_std == model.stats().omega_std);
    CHECK(parameter_checksum(loaded->parameters()) == parameter_checksum(model.parameters()));
    // identical predictions
    std::vector<int64_t> idx = {0};
    auto req = model.make_request(td.set, idx);
    auto p1 = model.predict(req);
    auto p2 = loaded->predict(req);
    CHECK(p1.outputs[0][0].data() == p2.outputs[0][0].data());

    // topology mismatch is rejected without the override
    GridModel other = ieee9_model();
    CHECK_THROWS_AS(load_checkpoint(path, &other, false), ConfigError);
    CHECK_NOTHROW(load_checkpoint(path, &other, true));
    std::remove(path.c_str());
}

TEST_CASE("corrupt checkpoints are rejected") {
    auto path = (std::filesystem::temp_directory_path() / "gridident_bad.gnck").string();
    {
        std::ofstream out(path, std::ios::binary);
        out << "GNXKgarbage";
    }
    CHECK_THROWS_AS(load_checkpoint(path), IoError);
    std::remove(path.c_str());
}
