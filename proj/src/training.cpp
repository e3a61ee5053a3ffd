#include "gridident/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace gridident {

void TrainConfig::validate() const {
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (!(learning_rate >= 0.0)) throw ConfigError("train: learning_rate must be >= 0");
    if (max_epochs < 1) throw ConfigError("train: max_epochs must be >= 1");
    if (patience < 1) throw ConfigError("train: patience must be >= 1");
    if (eval_every < 1) throw ConfigError("train: eval_every must be >= 1");
}

Tensor mse_loss(const Tensor& predictions, const Tensor& targets, int64_t num_nodes,
                int64_t num_samples, int64_t horizon) {
    if (predictions.shape() != targets.shape()) {
        throw ShapeError("mse_loss: shape mismatch, " + shape_str(predictions.shape()) + " vs " +
                         shape_str(targets.shape()));
    }
    double denom =
        static_cast<double>(num_nodes) * static_cast<double>(num_samples) * static_cast<double>(horizon);
    return scalar_mul(sum(square(sub(predictions, targets))), 1.0 / denom);
}

Adam::Adam(double beta1, double beta2, double eps) : beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Adam::reset() {
    t_ = 0;
    m_.clear();
    v_.clear();
}

void Adam::step(const std::vector<Tensor>& params, double lr) {
    if (m_.empty()) {
        m_.resize(params.size());
        v_.resize(params.size());
        for (size_t p = 0; p < params.size(); ++p) {
            m_[p].assign(params[p].data().size(), 0.0);
            v_[p].assign(params[p].data().size(), 0.0);
        }
    }
    if (m_.size() != params.size()) throw std::logic_error("adam: parameter list changed size");
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (size_t p = 0; p < params.size(); ++p) {
        auto& theta = const_cast<Tensor&>(params[p]).data();
        const auto& g = params[p].grad();
        auto& m = m_[p];
        auto& v = v_[p];
        for (size_t i = 0; i < theta.size(); ++i) {
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
            theta[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps_);
        }
    }
}

namespace {

std::vector<std::vector<int64_t>> make_batches(const std::vector<int64_t>& order,
                                               int64_t batch_size) {
    std::vector<std::vector<int64_t>> out;
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(batch_size)) {
        size_t stop = std::min(order.size(), start + static_cast<size_t>(batch_size));
        out.emplace_back(order.begin() + static_cast<ptrdiff_t>(start),
                         order.begin() + static_cast<ptrdiff_t>(stop));
    }
    return out;
}

}  // namespace

double evaluate_loss(const SeqModel& model, const SampleSet& data, int64_t batch_size) {
    std::vector<int64_t> order(static_cast<size_t>(data.num_samples));
    std::iota(order.begin(), order.end(), 0);
    double acc = 0.0;
    for (const auto& batch : make_batches(order, batch_size)) {
        double l = model.loss_batch(data, batch).item();
        acc += l * static_cast<double>(batch.size());
    }
    return acc / static_cast<double>(data.num_samples);
}

TrainReport train(SeqModel& model, const SampleSet& train_set, const SampleSet& val_set,
                  const TrainConfig& cfg) {
    cfg.validate();
    train_set.validate();
    val_set.validate();
    if (train_set.num_samples < 1 || val_set.num_samples < 1)
        throw ConfigError("train: empty dataset");
    auto t_start = std::chrono::steady_clock::now();
    if (!model.stats().fitted) model.stats() = fit_norm_stats(train_set);

    auto named = model.parameters();
    std::vector<Tensor> params;
    params.reserve(named.size());
    for (auto& p : named) params.push_back(p.tensor);

    Adam opt;
    TrainReport report;
    std::vector<std::vector<double>> best_values;
    int64_t since_best = 0;

    std::vector<int64_t> order(static_cast<size_t>(train_set.num_samples));
    std::iota(order.begin(), order.end(), 0);

    for (int64_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(cfg.seed, "shuffle", static_cast<uint64_t>(epoch)));
        shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;
        int64_t batch_index = 0;
        for (const auto& batch : make_batches(order, cfg.batch_size)) {
            Tape tape;
            Tensor loss = model.loss_batch(train_set, batch);
            double lv = loss.item();
            if (!std::isfinite(lv)) {
                throw NumericError(format_str("train: non-finite loss at epoch %lld batch %lld",
                                              static_cast<long long>(epoch),
                                              static_cast<long long>(batch_index)));
            }
            epoch_loss += lv * static_cast<double>(batch.size());
            zero_grads(params);
            tape.backward(loss);
            opt.step(params, cfg.learning_rate);
            ++batch_index;
        }
        epoch_loss /= static_cast<double>(train_set.num_samples);
        report.train_loss.push_back(epoch_loss);
        report.epochs_run = epoch + 1;

        bool validate = (epoch % cfg.eval_every == 0) || epoch + 1 == cfg.max_epochs;
        double val = std::numeric_limits<double>::quiet_NaN();
        if (validate) {
            val = evaluate_loss(model, val_set, cfg.batch_size);
            if (!std::isfinite(val)) {
                throw NumericError(format_str("train: non-finite validation loss at epoch %lld",
                                              static_cast<long long>(epoch)));
            }
            if (val < report.best_val) {
                report.best_val = val;
                report.best_epoch = epoch;
                since_best = 0;
                best_values.clear();
                for (const auto& p : params) best_values.push_back(p.data());
            } else {
                since_best += cfg.eval_every;
            }
        }
        report.val_loss.push_back(val);
        GI_LOG_INFO("epoch %lld train %.6e val %.6e best %.6e", static_cast<long long>(epoch),
                    epoch_loss, val, report.best_val);
        if (since_best >= cfg.patience) break;
    }

    if (!best_values.empty()) {
        for (size_t p = 0; p < params.size(); ++p) params[p].data() = best_values[p];
    }
    report.param_checksum = parameter_checksum(model.parameters());
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return report;
}

void write_train_report_csv(const TrainReport& report, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw IoError("cannot open for write: " + path);
    std::fputs("epoch,train_loss,val_loss,best\n", f);
    for (size_t e = 0; e < report.train_loss.size(); ++e) {
        double val = report.val_loss[e];
        if (std::isnan(val)) {
            std::fprintf(f, "%zu,%.17g,,%d\n", e, report.train_loss[e],
                         static_cast<int>(static_cast<int64_t>(e) == report.best_epoch));
        } else {
            std::fprintf(f, "%zu,%.17g,%.17g,%d\n", e, report.train_loss[e], val,
                         static_cast<int>(static_cast<int64_t>(e) == report.best_epoch));
        }
    }
    if (std::fclose(f) != 0) throw IoError("write failed: " + path);
}

std::vector<SweepPoint> sweep_grid(const std::vector<int64_t>& hidden_layers,
                                   const std::vector<int64_t>& hidden_widths,
                                   const std::vector<int64_t>& tcn_channels,
                                   const std::vector<double>& learning_rates) {
    std::vector<SweepPoint> out;
    for (int64_t l : hidden_layers) {
        for (int64_t w : hidden_widths) {
            for (int64_t c : tcn_channels) {
                for (double lr : learning_rates) out.push_back({l, w, c, lr});
            }
        }
    }
    return out;
}

std::vector<SweepResult> sweep(const std::string& kind, const GridTopology& topo,
                               const ModelConfig& base, const std::vector<SweepPoint>& points,
                               const SampleSet& train_set, const SampleSet& val_set,
                               const SampleSet& sel_set, const TrainConfig& cfg) {
    if (points.empty()) throw ConfigError("sweep: no configurations");
    std::vector<SweepResult> results;
    for (size_t p = 0; p < points.size(); ++p) {
        const auto& pt = points[p];
        ModelConfig mc = base;
        mc.f_hidden_layers = pt.hidden_layers;
        mc.f_hidden_width = pt.hidden_width;
        mc.m_hidden_layers = pt.hidden_layers;
        mc.m_hidden_width = pt.hidden_width;
        mc.tcn_channels = pt.tcn_channels;
        TrainConfig tc = cfg;
        tc.learning_rate = pt.learning_rate;
        tc.seed = derive_seed(cfg.seed, "sweep", p);
        auto model = make_model(kind, topo, mc, derive_seed(tc.seed, "init"));
        TrainReport rep = train(*model, train_set, val_set, tc);
        SweepResult res;
        res.point = pt;
        res.best_val = rep.best_val;
        res.best_epoch = rep.best_epoch;
        res.sel_loss = evaluate_loss(*model, sel_set, cfg.batch_size);
        GI_LOG_INFO("sweep point %zu/%zu: layers=%lld width=%lld tcn=%lld lr=%g sel=%.6e", p + 1,
                    points.size(), static_cast<long long>(pt.hidden_layers),
                    static_cast<long long>(pt.hidden_width),
                    static_cast<long long>(pt.tcn_channels), pt.learning_rate, res.sel_loss);
        results.push_back(res);
    }
    std::stable_sort(results.begin(), results.end(),
                     [](const SweepResult& a, const SweepResult& b) {
                         return a.sel_loss < b.sel_loss;
                     });
    return results;
}

void write_sweep_csv(const std::vector<SweepResult>& results, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw IoError("cannot open for write: " + path);
    std::fputs("rank,hidden_layers,hidden_width,tcn_channels,learning_rate,sel_loss,val_loss,best_epoch\n",
               f);
    for (size_t r = 0; r < results.size(); ++r) {
        const auto& res = results[r];
        std::fprintf(f, "%zu,%lld,%lld,%lld,%.17g,%.17g,%.17g,%lld\n", r + 1,
                     static_cast<long long>(res.point.hidden_layers),
                     static_cast<long long>(res.point.hidden_width),
                     static_cast<long long>(res.point.tcn_channels), res.point.learning_rate,
                     res.sel_loss, res.best_val, static_cast<long long>(res.best_epoch));
    }
    if (std::fclose(f) != 0) throw IoError("write failed: " + path);
}

}  // namespace gridident
