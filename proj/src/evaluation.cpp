#include "gridident/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>

namespace gridident {

double rmse(const std::vector<double>& pred, const std::vector<double>& truth) {
    if (pred.empty()) throw ShapeError("rmse: empty series");
    if (pred.size() != truth.size()) throw ShapeError("rmse: series length mismatch");
    double acc = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) {
        double e = pred[i] - truth[i];
        acc += e * e;
    }
    return std::sqrt(acc / static_cast<double>(pred.size()));
}

EvalTable evaluate(const SeqModel& model, const SampleSet& data, TruthSource source,
                   int64_t batch_size) {
    data.validate();
    bool clean = source == TruthSource::clean_trajectory;
    auto v = static_cast<size_t>(data.num_nodes);
    auto k_len = static_cast<size_t>(data.horizon);
    EvalTable table;
    table.rows.resize(static_cast<size_t>(data.num_samples) * v * 2);
    TapePause pause;  // read-only pass
    for (int64_t start = 0; start < data.num_samples; start += batch_size) {
        int64_t stop = std::min(data.num_samples, start + batch_size);
        std::vector<int64_t> idx(static_cast<size_t>(stop - start));
        std::iota(idx.begin(), idx.end(), start);
        Predictions pred = model.predict(model.make_request(data, idx));
        auto targets = model.make_targets(data, idx, clean);
        for (size_t i = 0; i < v; ++i) {
            std::vector<double> acc_w(idx.size(), 0.0), acc_v(idx.size(), 0.0);
            for (size_t k = 0; k < k_len; ++k) {
                const auto& pv = pred.outputs[i][k].data();
                const auto& tv = targets[i][k].data();
                for (size_t b = 0; b < idx.size(); ++b) {
                    double ew = pv[b * 2 + 0] - tv[b * 2 + 0];
                    double ev = pv[b * 2 + 1] - tv[b * 2 + 1];
                    acc_w[b] += ew * ew;
                    acc_v[b] += ev * ev;
                }
            }
            for (size_t b = 0; b < idx.size(); ++b) {
                auto n = static_cast<size_t>(start) + b;
                double kd = static_cast<double>(k_len);
                EvalRow& rw = table.rows[(n * v + i) * 2];
                rw.sample = static_cast<int64_t>(n);
                rw.node = data.node_ids[i];
                rw.quantity = "omega";
                rw.rmse = std::sqrt(acc_w[b] / kd) * kOmegaBaseRadPerSec;
                EvalRow& rv = table.rows[(n * v + i) * 2 + 1];
                rv.sample = static_cast<int64_t>(n);
                rv.node = data.node_ids[i];
                rv.quantity = "v";
                rv.rmse = std::sqrt(acc_v[b] / kd);
            }
        }
    }
    return table;
}

namespace {

double quantile(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) return 0.0;
    double pos = p * static_cast<double>(sorted.size() - 1);
    auto lo = static_cast<size_t>(std::floor(pos));
    auto hi = static_cast<size_t>(std::ceil(pos));
    double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

AggregateRow aggregate_values(std::vector<double> values, const std::string& quantity,
                              const std::string& label) {
    std::sort(values.begin(), values.end());
    AggregateRow row;
    row.quantity = quantity;
    row.model = label;
    row.min = values.front();
    row.max = values.back();
    row.q1 = quantile(values, 0.25);
    row.median = quantile(values, 0.5);
    row.q3 = quantile(values, 0.75);
    double iqr = row.q3 - row.q1;
    double lo_fence = row.q1 - 1.5 * iqr;
    double hi_fence = row.q3 + 1.5 * iqr;
    row.whisker_lo = row.max;
    row.whisker_hi = row.min;
    for (double x : values) {
        if (x >= lo_fence) {
            row.whisker_lo = x;
            break;
        }
    }
    for (auto it = values.rbegin(); it != values.rend(); ++it) {
        if (*it <= hi_fence) {
            row.whisker_hi = *it;
            break;
        }
    }
    return row;
}

std::vector<AggregateRow> aggregate_filtered(const EvalTable& table, const std::string& label,
                                             int node, bool filter_node) {
    std::vector<AggregateRow> out;
    for (const char* q : {"omega", "v"}) {
        std::vector<double> values;
        for (const auto& row : table.rows) {
            if (row.quantity == q && (!filter_node || row.node == node))
                values.push_back(row.rmse);
        }
        if (values.empty()) throw ShapeError("aggregate: no rows for quantity");
        out.push_back(aggregate_values(std::move(values), q, label));
    }
    return out;
}

}  // namespace

std::vector<AggregateRow> aggregate(const EvalTable& table, const std::string& model_label) {
    return aggregate_filtered(table, model_label, 0, false);
}

std::vector<AggregateRow> aggregate_node(const EvalTable& table, int node,
                                         const std::string& model_label) {
    return aggregate_filtered(table, model_label, node, true);
}

void write_eval_csv(const EvalTable& table, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw IoError("cannot open for write: " + path);
    std::fputs("sample,node,quantity,rmse\n", f);
    for (const auto& row : table.rows) {
        std::fprintf(f, "%lld,%d,%s,%.17g\n", static_cast<long long>(row.sample), row.node,
                     row.quantity.c_str(), row.rmse);
    }
    if (std::fclose(f) != 0) throw IoError("write failed: " + path);
}

void write_aggregate_csv(const std::vector<AggregateRow>& rows, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw IoError("cannot open for write: " + path);
    std::fputs("quantity,model,min,q1,median,q3,max,whisker_lo,whisker_hi\n", f);
    for (const auto& r : rows) {
        std::fprintf(f, "%s,%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.quantity.c_str(),
                     r.model.c_str(), r.min, r.q1, r.median, r.q3, r.max, r.whisker_lo,
                     r.whisker_hi);
    }
    if (std::fclose(f) != 0) throw IoError("write failed: " + path);
}

void export_trajectory(const std::vector<const SeqModel*>& models,
                       const std::vector<std::string>& labels, const SampleSet& data,
                       int64_t sample_index, const std::string& out_dir) {
    if (models.size() != labels.size())
        throw ConfigError("export: one label per model required");
    if (sample_index < 0 || sample_index >= data.num_samples)
        throw ConfigError("export: sample index out of range");
    TapePause pause;
    std::vector<int64_t> idx = {sample_index};
    std::vector<Predictions> preds;
    for (const auto* m : models) preds.push_back(m->predict(m->make_request(data, idx)));
    auto v = static_cast<size_t>(data.num_nodes);
    auto k_len = static_cast<size_t>(data.horizon);
    for (int q = 0; q < 2; ++q) {
        std::string name = q == 0 ? "trajectory_omega.csv" : "trajectory_v.csv";
        double scale = q == 0 ? kOmegaBaseRadPerSec : 1.0;
        std::string path = (std::filesystem::path(out_dir) / name).string();
        std::FILE* f = std::fopen(path.c_str(), "w");
        if (!f) throw IoError("cannot open for write: " + path);
        std::fputs("time,node", f);
        std::fputs(",true,measured", f);
        for (const auto& label : labels) std::fprintf(f, ",pred_%s", label.c_str());
        std::fputc('\n', f);
        for (size_t k = 0; k < k_len; ++k) {
            for (size_t i = 0; i < v; ++i) {
                double t =
                    (static_cast<double>(data.t_s[static_cast<size_t>(sample_index)]) +
                     static_cast<double>(k) + 1.0) *
                    data.dt;
                const double* clean = data.sample_target_clean(sample_index, static_cast<int64_t>(i));
                const double* meas = data.sample_target(sample_index, static_cast<int64_t>(i));
                std::fprintf(f, "%.17g,%d,%.17g,%.17g", t, data.node_ids[i],
                             clean[k * 2 + static_cast<size_t>(q)] * scale,
                             meas[k * 2 + static_cast<size_t>(q)] * scale);
                for (const auto& pr : preds) {
                    std::fprintf(f, ",%.17g",
                                 pr.outputs[i][k].data()[static_cast<size_t>(q)] * scale);
                }
                std::fputc('\n', f);
            }
        }
        if (std::fclose(f) != 0) throw IoError("write failed: " + path);
    }
}

}  // namespace gridident
