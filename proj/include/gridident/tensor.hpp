#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

#include "gridident/util.hpp"

namespace gridident {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct TensorNode {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // allocated on demand, same length as value
    bool requires_grad = false;

    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    }
};

}  // namespace detail

// Dense f64 tensor, row-major. Value-semantic handle; copies share storage.
class Tensor {
  public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double v, bool requires_grad = false);
    static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    int64_t numel() const { return static_cast<int64_t>(node_->value.size()); }
    int64_t dim(size_t i) const { return node_->shape[i]; }
    size_t rank() const { return node_->shape.size(); }

    std::vector<double>& data() { return node_->value; }
    const std::vector<double>& data() const { return node_->value; }
    double item() const;

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool v) { node_->requires_grad = v; }

    // zero-filled if never written
    const std::vector<double>& grad() const;
    std::vector<double>& grad_buffer();
    void zero_grad();

    // deep copy of values; result is a detached leaf
    Tensor clone() const;

    std::shared_ptr<detail::TensorNode> node() const { return node_; }

  private:
    explicit Tensor(std::shared_ptr<detail::TensorNode> node) : node_(std::move(node)) {}
    std::shared_ptr<detail::TensorNode> node_;

    friend Tensor make_result(Shape shape, bool requires_grad);
};

Tensor make_result(Shape shape, bool requires_grad);

// Define-by-run tape. Ops append themselves in execution order, which is a
// valid topological order; backward replays the record once, in reverse.
// A tape is confined to the thread that created it.
class Tape {
  public:
    Tape();
    ~Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    static Tape* active();

    void record(std::shared_ptr<detail::TensorNode> output, std::function<void()> backward_step);
    size_t size() const { return entries_.size(); }
    void clear() {
        entries_.clear();
        outputs_.clear();
    }

    // Seeds d(loss)/d(loss) = 1 and accumulates into every leaf's grad
    // buffer. Intermediate grads are reset per replay, so repeated calls add
    // one full gradient each; zero leaf grads in between if that is not
    // wanted.
    void backward(const Tensor& loss);

  private:
    std::vector<std::function<void()>> entries_;
    std::vector<std::shared_ptr<detail::TensorNode>> outputs_;
    Tape* prev_ = nullptr;
};

// Suspends recording on the active tape for forward-only evaluation.
class TapePause {
  public:
    TapePause();
    ~TapePause();
    TapePause(const TapePause&) = delete;
    TapePause& operator=(const TapePause&) = delete;

  private:
    Tape* saved_;
};

// Debug-mode non-finite screening of op results (off by default; values
// propagate unmasked when off).
void set_debug_checks(bool enabled);
bool debug_checks_enabled();

// ---- primitive ops ----
// Elementwise binary ops broadcast right-aligned: trailing dims must match
// or be 1.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scalar_mul(const Tensor& a, double s);
Tensor scalar_add(const Tensor& a, double s);
Tensor neg(const Tensor& a);

Tensor matmul(const Tensor& a, const Tensor& b);  // [m,k] x [k,n] -> [m,n]

Tensor sum(const Tensor& a);   // -> [1]
Tensor mean(const Tensor& a);  // -> [1]

Tensor square(const Tensor& a);
Tensor sqrt_t(const Tensor& a);
Tensor exp_t(const Tensor& a);
Tensor sin_t(const Tensor& a);
Tensor cos_t(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor silu(const Tensor& a);
Tensor gelu(const Tensor& a);
Tensor tanh_t(const Tensor& a);
Tensor sigmoid(const Tensor& a);

Tensor concat(const std::vector<Tensor>& parts, size_t axis);
Tensor slice(const Tensor& a, size_t axis, int64_t start, int64_t stop);
Tensor reshape(const Tensor& a, Shape new_shape);
// [n] or [1,n] -> [rows,n], rows copies; grad sums back over rows
Tensor repeat_rows(const Tensor& a, int64_t rows);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(const Tensor& a, double s) { return scalar_mul(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return scalar_mul(a, s); }
inline Tensor operator+(const Tensor& a, double s) { return scalar_add(a, s); }
inline Tensor operator+(double s, const Tensor& a) { return scalar_add(a, s); }
inline Tensor operator-(const Tensor& a, double s) { return scalar_add(a, -s); }
inline Tensor operator-(double s, const Tensor& a) { return scalar_add(neg(a), s); }
inline Tensor operator-(const Tensor& a) { return neg(a); }

void zero_grads(const std::vector<Tensor>& params);

// Max over components of |analytic - central difference| / max(1, |analytic|).
// f must be deterministic and return a scalar.
double grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x, double eps);

// Same check against every component of every listed parameter; f recomputes
// the loss from the parameters' current values.
double grad_check_params(const std::function<Tensor()>& f, const std::vector<Tensor>& params,
                         double eps);

}  // namespace gridident
