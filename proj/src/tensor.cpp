#include "gridident/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

namespace gridident {

int64_t shape_numel(const Shape& shape) {
    int64_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::string s = "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

namespace {

thread_local Tape* t_active_tape = nullptr;
bool g_debug_checks = false;

void validate_shape(const Shape& shape) {
    for (auto d : shape) {
        if (d <= 0) throw ShapeError("non-positive extent in shape " + shape_str(shape));
    }
}

using NodePtr = std::shared_ptr<detail::TensorNode>;

// Propagate only when somebody downstream can use it.
inline bool recording(bool requires_grad) { return requires_grad && t_active_tape != nullptr; }

void check_finite(const char* op, const std::vector<double>& v) {
    if (!g_debug_checks) return;
    for (double x : v) {
        if (!std::isfinite(x)) {
            throw NumericError(format_str("debug check: op '%s' produced non-finite value", op));
        }
    }
}

// Right-aligned broadcast of `in` against `out`: strides are zeroed on
// expanded dims so a linear scan over `out` can walk `in` with an odometer.
struct BcastWalk {
    Shape out_dims;
    std::vector<int64_t> strides;  // per out dim, stride into the input
    BcastWalk(const Shape& out, const Shape& in) {
        size_t r = out.size();
        out_dims = out;
        strides.assign(r, 0);
        std::vector<int64_t> in_padded(r, 1);
        size_t off = r - in.size();
        for (size_t i = 0; i < in.size(); ++i) in_padded[off + i] = in[i];
        int64_t s = 1;
        std::vector<int64_t> in_strides(r, 0);
        for (size_t i = r; i-- > 0;) {
            in_strides[i] = s;
            s *= in_padded[i];
        }
        for (size_t i = 0; i < r; ++i) {
            if (in_padded[i] == out[i]) {
                strides[i] = in_strides[i];
            } else if (in_padded[i] == 1) {
                strides[i] = 0;
            } else {
                throw ShapeError("broadcast mismatch: " + shape_str(in) + " vs " + shape_str(out));
            }
        }
    }
};

Shape broadcast_shape(const Shape& a, const Shape& b, const char* op) {
    size_t r = std::max(a.size(), b.size());
    Shape out(r, 1);
    for (size_t i = 0; i < r; ++i) {
        int64_t da = i < r - a.size() ? 1 : a[i - (r - a.size())];
        int64_t db = i < r - b.size() ? 1 : b[i - (r - b.size())];
        if (da == db) {
            out[i] = da;
        } else if (da == 1) {
            out[i] = db;
        } else if (db == 1) {
            out[i] = da;
        } else {
            throw ShapeError(format_str("%s: incompatible shapes %s vs %s", op,
                                        shape_str(a).c_str(), shape_str(b).c_str()));
        }
    }
    return out;
}

// Calls fn(i_out, i_a, i_b) for every output element.
template <class Fn>
void for_each_bcast(const Shape& out, const Shape& a, const Shape& b, Fn&& fn) {
    int64_t n = shape_numel(out);
    if (out == a && out == b) {
        for (int64_t i = 0; i < n; ++i) fn(i, i, i);
        return;
    }
    BcastWalk wa(out, a), wb(out, b);
    size_t r = out.size();
    std::vector<int64_t> idx(r, 0);
    int64_t ia = 0, ib = 0;
    for (int64_t i = 0; i < n; ++i) {
        fn(i, ia, ib);
        for (size_t d = r; d-- > 0;) {
            idx[d]++;
            ia += wa.strides[d];
            ib += wb.strides[d];
            if (idx[d] < out[d]) break;
            ia -= wa.strides[d] * out[d];
            ib -= wb.strides[d] * out[d];
            idx[d] = 0;
        }
    }
}

struct BinarySpec {
    const char* name;
    double (*fwd)(double, double);
    // partials given (a, b, out-grad)
    double (*da)(double, double, double);
    double (*db)(double, double, double);
};

Tensor binary_op(const BinarySpec& spec, const Tensor& a, const Tensor& b) {
    Shape out_shape = broadcast_shape(a.shape(), b.shape(), spec.name);
    bool req = a.requires_grad() || b.requires_grad();
    Tensor out = make_result(out_shape, req);
    const auto& av = a.data();
    const auto& bv = b.data();
    auto& ov = out.data();
    for_each_bcast(out_shape, a.shape(), b.shape(),
                   [&](int64_t io, int64_t ia, int64_t ib) { ov[io] = spec.fwd(av[ia], bv[ib]); });
    check_finite(spec.name, ov);
    if (recording(req)) {
        NodePtr an = a.node(), bn = b.node(), on = out.node();
        const BinarySpec* sp = &spec;
        t_active_tape->record(on, [an, bn, on, sp, out_shape] {
            if (on->grad.empty()) return;
            const auto& g = on->grad;
            bool need_a = an->requires_grad;
            bool need_b = bn->requires_grad;
            if (need_a) an->ensure_grad();
            if (need_b) bn->ensure_grad();
            for_each_bcast(out_shape, an->shape, bn->shape,
                           [&](int64_t io, int64_t ia, int64_t ib) {
                               double gv = g[io];
                               if (gv == 0.0) return;
                               if (need_a) an->grad[ia] += sp->da(an->value[ia], bn->value[ib], gv);
                               if (need_b) bn->grad[ib] += sp->db(an->value[ia], bn->value[ib], gv);
                           });
        });
    }
    return out;
}

struct UnarySpec {
    const char* name;
    double (*fwd)(double);
    // derivative given (input, output)
    double (*deriv)(double, double);
};

Tensor unary_op(const UnarySpec& spec, const Tensor& a) {
    bool req = a.requires_grad();
    Tensor out = make_result(a.shape(), req);
    const auto& av = a.data();
    auto& ov = out.data();
    int64_t n = a.numel();
    for (int64_t i = 0; i < n; ++i) ov[i] = spec.fwd(av[i]);
    check_finite(spec.name, ov);
    if (recording(req)) {
        NodePtr an = a.node(), on = out.node();
        const UnarySpec* sp = &spec;
        t_active_tape->record(on, [an, on, sp, n] {
            if (on->grad.empty()) return;
            an->ensure_grad();
            for (int64_t i = 0; i < n; ++i)
                an->grad[i] += sp->deriv(an->value[i], on->value[i]) * on->grad[i];
        });
    }
    return out;
}

}  // namespace

Tensor make_result(Shape shape, bool requires_grad) {
    auto node = std::make_shared<detail::TensorNode>();
    node->shape = std::move(shape);
    node->value.resize(static_cast<size_t>(shape_numel(node->shape)));
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    validate_shape(shape);
    return make_result(std::move(shape), requires_grad);
}

Tensor Tensor::full(Shape shape, double v, bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    std::fill(t.data().begin(), t.data().end(), v);
    return t;
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
    validate_shape(shape);
    if (shape_numel(shape) != static_cast<int64_t>(data.size())) {
        throw ShapeError(format_str("from_data: shape %s wants %lld values, got %zu",
                                    shape_str(shape).c_str(),
                                    static_cast<long long>(shape_numel(shape)), data.size()));
    }
    Tensor t = make_result(std::move(shape), requires_grad);
    t.data() = std::move(data);
    return t;
}

Tensor Tensor::scalar(double v, bool requires_grad) { return full({1}, v, requires_grad); }

double Tensor::item() const {
    if (numel() != 1) throw ShapeError("item() on non-scalar tensor " + shape_str(shape()));
    return node_->value[0];
}

const std::vector<double>& Tensor::grad() const {
    node_->ensure_grad();
    return node_->grad;
}

std::vector<double>& Tensor::grad_buffer() {
    node_->ensure_grad();
    return node_->grad;
}

void Tensor::zero_grad() {
    if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::clone() const {
    Tensor t = make_result(node_->shape, false);
    t.data() = node_->value;
    return t;
}

Tape::Tape() {
    prev_ = t_active_tape;
    t_active_tape = this;
}

Tape::~Tape() { t_active_tape = prev_; }

Tape* Tape::active() { return t_active_tape; }

void Tape::record(std::shared_ptr<detail::TensorNode> output,
                  std::function<void()> backward_step) {
    outputs_.push_back(std::move(output));
    entries_.push_back(std::move(backward_step));
}

void Tape::backward(const Tensor& loss) {
    if (loss.numel() != 1) {
        throw ShapeError("backward requires a scalar loss, got shape " + shape_str(loss.shape()));
    }
    for (const auto& out : outputs_) {
        if (!out->grad.empty()) std::fill(out->grad.begin(), out->grad.end(), 0.0);
    }
    loss.node()->ensure_grad();
    loss.node()->grad[0] += 1.0;
    for (size_t i = entries_.size(); i-- > 0;) entries_[i]();
}

TapePause::TapePause() {
    saved_ = t_active_tape;
    t_active_tape = nullptr;
}

TapePause::~TapePause() { t_active_tape = saved_; }

void set_debug_checks(bool enabled) { g_debug_checks = enabled; }
bool debug_checks_enabled() { return g_debug_checks; }

// ---- binary ops ----

Tensor add(const Tensor& a, const Tensor& b) {
    static const BinarySpec spec{"add", [](double x, double y) { return x + y; },
                                 [](double, double, double g) { return g; },
                                 [](double, double, double g) { return g; }};
    return binary_op(spec, a, b);
}

Tensor sub(const Tensor& a, const Tensor& b) {
    static const BinarySpec spec{"sub", [](double x, double y) { return x - y; },
                                 [](double, double, double g) { return g; },
                                 [](double, double, double g) { return -g; }};
    return binary_op(spec, a, b);
}

Tensor mul(const Tensor& a, const Tensor& b) {
    static const BinarySpec spec{"mul", [](double x, double y) { return x * y; },
                                 [](double, double y, double g) { return g * y; },
                                 [](double x, double, double g) { return g * x; }};
    return binary_op(spec, a, b);
}

Tensor scalar_mul(const Tensor& a, double s) {
    bool req = a.requires_grad();
    Tensor out = make_result(a.shape(), req);
    const auto& av = a.data();
    auto& ov = out.data();
    int64_t n = a.numel();
    for (int64_t i = 0; i < n; ++i) ov[i] = av[i] * s;
    check_finite("scalar_mul", ov);
    if (recording(req)) {
        auto an = a.node();
        auto on = out.node();
        t_active_tape->record(on, [an, on, s, n] {
            if (on->grad.empty()) return;
            an->ensure_grad();
            for (int64_t i = 0; i < n; ++i) an->grad[i] += s * on->grad[i];
        });
    }
    return out;
}

Tensor scalar_add(const Tensor& a, double s) {
    bool req = a.requires_grad();
    Tensor out = make_result(a.shape(), req);
    const auto& av = a.data();
    auto& ov = out.data();
    int64_t n = a.numel();
    for (int64_t i = 0; i < n; ++i) ov[i] = av[i] + s;
    check_finite("scalar_add", ov);
    if (recording(req)) {
        auto an = a.node();
        auto on = out.node();
        t_active_tape->record(on, [an, on, n] {
            if (on->grad.empty()) return;
            an->ensure_grad();
            for (int64_t i = 0; i < n; ++i) an->grad[i] += on->grad[i];
        });
    }
    return out;
}

Tensor neg(const Tensor& a) { return scalar_mul(a, -1.0); }

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2) {
        throw ShapeError(format_str("matmul: expects rank-2 operands, got %s and %s",
                                    shape_str(a.shape()).c_str(), shape_str(b.shape()).c_str()));
    }
    int64_t m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
    if (k != k2) {
        throw ShapeError(format_str("matmul: inner dims differ, %s vs %s",
                                    shape_str(a.shape()).c_str(), shape_str(b.shape()).c_str()));
    }
    bool req = a.requires_grad() || b.requires_grad();
    Tensor out = make_result({m, n}, req);
    const double* A = a.data().data();
    const double* B = b.data().data();
    double* C = out.data().data();
    for (int64_t i = 0; i < m; ++i) {
        double* Ci = C + i * n;
        for (int64_t kk = 0; kk < k; ++kk) {
            double aik = A[i * k + kk];
            if (aik == 0.0) continue;
            const double* Bk = B + kk * n;
            for (int64_t j = 0; j < n; ++j) Ci[j] += aik * Bk[j];
        }
    }
    check_finite("matmul", out.data());
    if (recording(req)) {
        auto an = a.node();
        auto bn = b.node();
        auto on = out.node();
        t_active_tape->record(on, [an, bn, on, m, k, n] {
            if (on->grad.empty()) return;
            const double* G = on->grad.data();
            const double* A = an->value.data();
            const double* B = bn->value.data();
            if (an->requires_grad) {
                // dA = G * B^T
                an->ensure_grad();
                double* dA = an->grad.data();
                for (int64_t i = 0; i < m; ++i) {
                    const double* Gi = G + i * n;
                    for (int64_t kk = 0; kk < k; ++kk) {
                        const double* Bk = B + kk * n;
                        double acc = 0.0;
                        for (int64_t j = 0; j < n; ++j) acc += Gi[j] * Bk[j];
                        dA[i * k + kk] += acc;
                    }
                }
            }
            if (bn->requires_grad) {
                // dB = A^T * G
                bn->ensure_grad();
                double* dB = bn->grad.data();
                for (int64_t i = 0; i < m; ++i) {
                    const double* Gi = G + i * n;
                    for (int64_t kk = 0; kk < k; ++kk) {
                        double aik = A[i * k + kk];
                        if (aik == 0.0) continue;
                        double* dBk = dB + kk * n;
                        for (int64_t j = 0; j < n; ++j) dBk[j] += aik * Gi[j];
                    }
                }
            }
        });
    }
    return out;
}

Tensor sum(const Tensor& a) {
    bool req = a.requires_grad();
    Tensor out = make_result({1}, req);
    double acc = 0.0;
    for (double v : a.data()) acc += v;
    out.data()[0] = acc;
    check_finite("sum", out.data());
    if (recording(req)) {
        auto an = a.node();
        auto on = out.node();
        t_active_tape->record(on, [an, on] {
            if (on->grad.empty()) return;
            double g = on->grad[0];
            if (g == 0.0) return;
            an->ensure_grad();
            for (auto& gi : an->grad) gi += g;
        });
    }
    return out;
}

Tensor mean(const Tensor& a) { return scalar_mul(sum(a), 1.0 / static_cast<double>(a.numel())); }

// ---- unary ops ----

Tensor square(const Tensor& a) {
    static const UnarySpec spec{"square", [](double x) { return x * x; },
                                [](double x, double) { return 2.0 * x; }};
    return unary_op(spec, a);
}

Tensor sqrt_t(const Tensor& a) {
    static const UnarySpec spec{"sqrt", [](double x) { return std::sqrt(x); },
                                [](double, double y) { return 0.5 / y; }};
    return unary_op(spec, a);
}

Tensor exp_t(const Tensor& a) {
    static const UnarySpec spec{"exp", [](double x) { return std::exp(x); },
                                [](double, double y) { return y; }};
    return unary_op(spec, a);
}

Tensor sin_t(const Tensor& a) {
    static const UnarySpec spec{"sin", [](double x) { return std::sin(x); },
                                [](double x, double) { return std::cos(x); }};
    return unary_op(spec, a);
}

Tensor cos_t(const Tensor& a) {
    static const UnarySpec spec{"cos", [](double x) { return std::cos(x); },
                                [](double x, double) { return -std::sin(x); }};
    return unary_op(spec, a);
}

Tensor relu(const Tensor& a) {
    static const UnarySpec spec{"relu", [](double x) { return x > 0.0 ? x : 0.0; },
                                [](double x, double) { return x > 0.0 ? 1.0 : 0.0; }};
    return unary_op(spec, a);
}

namespace {
inline double sigmoid_val(double x) { return 1.0 / (1.0 + std::exp(-x)); }
}  // namespace

Tensor silu(const Tensor& a) {
    static const UnarySpec spec{"silu", [](double x) { return x * sigmoid_val(x); },
                                [](double x, double) {
                                    double s = sigmoid_val(x);
                                    return s * (1.0 + x * (1.0 - s));
                                }};
    return unary_op(spec, a);
}

Tensor gelu(const Tensor& a) {
    static const UnarySpec spec{
        "gelu",
        [](double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); },
        [](double x, double) {
            double phi = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
            return 0.5 * (1.0 + std::erf(x * M_SQRT1_2)) + x * phi;
        }};
    return unary_op(spec, a);
}

Tensor tanh_t(const Tensor& a) {
    static const UnarySpec spec{"tanh", [](double x) { return std::tanh(x); },
                                [](double, double y) { return 1.0 - y * y; }};
    return unary_op(spec, a);
}

Tensor sigmoid(const Tensor& a) {
    static const UnarySpec spec{"sigmoid", [](double x) { return sigmoid_val(x); },
                                [](double, double y) { return y * (1.0 - y); }};
    return unary_op(spec, a);
}

// ---- structural ops ----

namespace {

struct AxisSplit {
    int64_t outer = 1, axis = 1, inner = 1;
};

AxisSplit split_at(const Shape& shape, size_t axis) {
    AxisSplit s;
    for (size_t i = 0; i < axis; ++i) s.outer *= shape[i];
    s.axis = shape[axis];
    for (size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
    return s;
}

}  // namespace

Tensor concat(const std::vector<Tensor>& parts, size_t axis) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    const Shape& first = parts[0].shape();
    if (axis >= first.size()) throw ShapeError("concat: axis out of range");
    Shape out_shape = first;
    int64_t total_axis = 0;
    bool req = false;
    for (const auto& p : parts) {
        if (p.rank() != first.size())
            throw ShapeError("concat: rank mismatch, " + shape_str(p.shape()) + " vs " +
                             shape_str(first));
        for (size_t d = 0; d < first.size(); ++d) {
            if (d != axis && p.shape()[d] != first[d])
                throw ShapeError("concat: shape mismatch, " + shape_str(p.shape()) + " vs " +
                                 shape_str(first));
        }
        total_axis += p.shape()[axis];
        req = req || p.requires_grad();
    }
    out_shape[axis] = total_axis;
    Tensor out = make_result(out_shape, req);
    auto os = split_at(out_shape, axis);
    double* O = out.data().data();
    int64_t axis_off = 0;
    for (const auto& p : parts) {
        auto ps = split_at(p.shape(), axis);
        const double* P = p.data().data();
        for (int64_t o = 0; o < ps.outer; ++o) {
            double* dst = O + (o * os.axis + axis_off) * os.inner;
            const double* src = P + o * ps.axis * ps.inner;
            std::memcpy(dst, src, sizeof(double) * static_cast<size_t>(ps.axis * ps.inner));
        }
        axis_off += ps.axis;
    }
    if (recording(req)) {
        std::vector<NodePtr> part_nodes;
        part_nodes.reserve(parts.size());
        for (const auto& p : parts) part_nodes.push_back(p.node());
        auto on = out.node();
        t_active_tape->record(on, [part_nodes, on, axis, os] {
            if (on->grad.empty()) return;
            const double* G = on->grad.data();
            int64_t axis_off = 0;
            for (const auto& pn : part_nodes) {
                auto ps = split_at(pn->shape, axis);
                if (!pn->requires_grad) {
                    axis_off += ps.axis;
                    continue;
                }
                pn->ensure_grad();
                double* dP = pn->grad.data();
                for (int64_t o = 0; o < ps.outer; ++o) {
                    const double* src = G + (o * os.axis + axis_off) * os.inner;
                    double* dst = dP + o * ps.axis * ps.inner;
                    int64_t len = ps.axis * ps.inner;
                    for (int64_t i = 0; i < len; ++i) dst[i] += src[i];
                }
                axis_off += ps.axis;
            }
        });
    }
    return out;
}

Tensor slice(const Tensor& a, size_t axis, int64_t start, int64_t stop) {
    if (axis >= a.rank()) throw ShapeError("slice: axis out of range");
    int64_t extent = a.shape()[axis];
    if (start < 0 || stop > extent || start >= stop) {
        throw ShapeError(format_str("slice: range [%lld,%lld) invalid for extent %lld",
                                    static_cast<long long>(start), static_cast<long long>(stop),
                                    static_cast<long long>(extent)));
    }
    Shape out_shape = a.shape();
    out_shape[axis] = stop - start;
    bool req = a.requires_grad();
    Tensor out = make_result(out_shape, req);
    auto as = split_at(a.shape(), axis);
    auto os = split_at(out_shape, axis);
    const double* A = a.data().data();
    double* O = out.data().data();
    for (int64_t o = 0; o < as.outer; ++o) {
        const double* src = A + (o * as.axis + start) * as.inner;
        double* dst = O + o * os.axis * os.inner;
        std::memcpy(dst, src, sizeof(double) * static_cast<size_t>(os.axis * os.inner));
    }
    if (recording(req)) {
        auto an = a.node();
        auto on = out.node();
        t_active_tape->record(on, [an, on, as, os, start] {
            if (on->grad.empty()) return;
            an->ensure_grad();
            const double* G = on->grad.data();
            double* dA = an->grad.data();
            for (int64_t o = 0; o < as.outer; ++o) {
                double* dst = dA + (o * as.axis + start) * as.inner;
                const double* src = G + o * os.axis * os.inner;
                int64_t len = os.axis * os.inner;
                for (int64_t i = 0; i < len; ++i) dst[i] += src[i];
            }
        });
    }
    return out;
}

Tensor reshape(const Tensor& a, Shape new_shape) {
    validate_shape(new_shape);
    if (shape_numel(new_shape) != a.numel()) {
        throw ShapeError(format_str("reshape: %s has %lld elements, target %s wants %lld",
                                    shape_str(a.shape()).c_str(),
                                    static_cast<long long>(a.numel()),
                                    shape_str(new_shape).c_str(),
                                    static_cast<long long>(shape_numel(new_shape))));
    }
    bool req = a.requires_grad();
    Tensor out = make_result(std::move(new_shape), req);
    out.data() = a.data();
    if (recording(req)) {
        auto an = a.node();
        auto on = out.node();
        t_active_tape->record(on, [an, on] {
            if (on->grad.empty()) return;
            an->ensure_grad();
            for (size_t i = 0; i < an->grad.size(); ++i) an->grad[i] += on->grad[i];
        });
    }
    return out;
}

Tensor repeat_rows(const Tensor& a, int64_t rows) {
    int64_t n;
    if (a.rank() == 1) {
        n = a.dim(0);
    } else if (a.rank() == 2 && a.dim(0) == 1) {
        n = a.dim(1);
    } else {
        throw ShapeError("repeat_rows: expects [n] or [1,n], got " + shape_str(a.shape()));
    }
    bool req = a.requires_grad();
    Tensor out = make_result({rows, n}, req);
    const double* A = a.data().data();
    double* O = out.data().data();
    for (int64_t r = 0; r < rows; ++r) std::memcpy(O + r * n, A, sizeof(double) * size_t(n));
    if (recording(req)) {
        auto an = a.node();
        auto on = out.node();
        t_active_tape->record(on, [an, on, rows, n] {
            if (on->grad.empty()) return;
            an->ensure_grad();
            const double* G = on->grad.data();
            for (int64_t r = 0; r < rows; ++r)
                for (int64_t i = 0; i < n; ++i) an->grad[i] += G[r * n + i];
        });
    }
    return out;
}

void zero_grads(const std::vector<Tensor>& params) {
    for (const auto& p : params) const_cast<Tensor&>(p).zero_grad();
}

double grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x, double eps) {
    if (eps <= 0.0) throw std::invalid_argument("grad_check: eps must be positive");
    x.set_requires_grad(true);
    std::vector<double> analytic;
    {
        Tape tape;
        Tensor loss = f(x);
        if (loss.numel() != 1)
            throw ShapeError("grad_check: f must return a scalar, got " +
                             shape_str(loss.shape()));
        x.zero_grad();
        tape.backward(loss);
        analytic = x.grad();
    }
    double max_err = 0.0;
    auto& xv = x.data();
    for (size_t i = 0; i < xv.size(); ++i) {
        double saved = xv[i];
        xv[i] = saved + eps;
        double fp = f(x).item();
        xv[i] = saved - eps;
        double fm = f(x).item();
        xv[i] = saved;
        double numeric = (fp - fm) / (2.0 * eps);
        double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i]));
        max_err = std::max(max_err, err);
    }
    return max_err;
}

double grad_check_params(const std::function<Tensor()>& f, const std::vector<Tensor>& params,
                         double eps) {
    if (eps <= 0.0) throw std::invalid_argument("grad_check_params: eps must be positive");
    std::vector<std::vector<double>> analytic(params.size());
    {
        Tape tape;
        Tensor loss = f();
        if (loss.numel() != 1)
            throw ShapeError("grad_check_params: f must return a scalar, got " +
                             shape_str(loss.shape()));
        zero_grads(params);
        tape.backward(loss);
        for (size_t p = 0; p < params.size(); ++p) analytic[p] = params[p].grad();
    }
    double max_err = 0.0;
    for (size_t p = 0; p < params.size(); ++p) {
        auto& pv = const_cast<Tensor&>(params[p]).data();
        for (size_t i = 0; i < pv.size(); ++i) {
            double saved = pv[i];
            pv[i] = saved + eps;
            double fp = f().item();
            pv[i] = saved - eps;
            double fm = f().item();
            pv[i] = saved;
            double numeric = (fp - fm) / (2.0 * eps);
            double err =
                std::abs(analytic[p][i] - numeric) / std::max(1.0, std::abs(analytic[p][i]));
            max_err = std::max(max_err, err);
        }
    }
    return max_err;
}

}  // namespace gridident
