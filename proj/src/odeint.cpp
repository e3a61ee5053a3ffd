#include "gridident/odeint.hpp"

#include <cmath>

namespace gridident::ode {

namespace {

void check_stage(const Tensor& k, int stage) {
    for (double v : k.data()) {
        if (!std::isfinite(v)) {
            throw NumericError(format_str("rk4: non-finite value in stage k%d", stage));
        }
    }
}

void check_stage_multi(const std::vector<Tensor>& ks, int stage) {
    for (const auto& k : ks) check_stage(k, stage);
}

}  // namespace

Tensor rk4_step(const RhsFn& f, const Tensor& x, const Tensor& u, double h) {
    if (!(h > 0.0)) throw std::invalid_argument("rk4_step: h must be positive");
    Tensor k1 = f(x, u);
    check_stage(k1, 1);
    Tensor k2 = f(add(x, scalar_mul(k1, h / 2.0)), u);
    check_stage(k2, 2);
    Tensor k3 = f(add(x, scalar_mul(k2, h / 2.0)), u);
    check_stage(k3, 3);
    Tensor k4 = f(add(x, scalar_mul(k3, h)), u);
    check_stage(k4, 4);
    Tensor incr = add(add(k1, scalar_mul(k2, 2.0)), add(scalar_mul(k3, 2.0), k4));
    return add(x, scalar_mul(incr, h / 6.0));
}

Tensor integrate(const RhsFn& f, const Tensor& x0, const std::vector<double>& t_grid,
                 const std::function<Tensor(double)>& u_at, int64_t substeps) {
    if (substeps < 1) throw std::invalid_argument("integrate: substeps must be >= 1");
    if (t_grid.size() < 1) throw std::invalid_argument("integrate: empty time grid");
    for (size_t k = 1; k < t_grid.size(); ++k) {
        if (!(t_grid[k] > t_grid[k - 1])) {
            throw std::invalid_argument(
                format_str("integrate: grid not ascending at index %zu", k));
        }
    }
    int64_t n = x0.numel();
    std::vector<Tensor> rows;
    rows.reserve(t_grid.size());
    Tensor x = x0;
    rows.push_back(reshape(x, {1, n}));
    for (size_t k = 0; k + 1 < t_grid.size(); ++k) {
        Tensor u = u_at(t_grid[k]);
        double h = (t_grid[k + 1] - t_grid[k]) / static_cast<double>(substeps);
        for (int64_t s = 0; s < substeps; ++s) x = rk4_step(f, x, u, h);
        rows.push_back(reshape(x, {1, n}));
    }
    return concat(rows, 0);
}

std::vector<Tensor> rk4_step_multi(const MultiRhsFn& f, const std::vector<Tensor>& x, double h) {
    if (!(h > 0.0)) throw std::invalid_argument("rk4_step_multi: h must be positive");
    size_t n = x.size();
    auto axpy = [n](const std::vector<Tensor>& base, const std::vector<Tensor>& k, double a) {
        std::vector<Tensor> out(n);
        for (size_t i = 0; i < n; ++i) out[i] = add(base[i], scalar_mul(k[i], a));
        return out;
    };
    std::vector<Tensor> k1 = f(x);
    check_stage_multi(k1, 1);
    std::vector<Tensor> k2 = f(axpy(x, k1, h / 2.0));
    check_stage_multi(k2, 2);
    std::vector<Tensor> k3 = f(axpy(x, k2, h / 2.0));
    check_stage_multi(k3, 3);
    std::vector<Tensor> k4 = f(axpy(x, k3, h));
    check_stage_multi(k4, 4);
    std::vector<Tensor> out(n);
    for (size_t i = 0; i < n; ++i) {
        Tensor incr = add(add(k1[i], scalar_mul(k2[i], 2.0)), add(scalar_mul(k3[i], 2.0), k4[i]));
        out[i] = add(x[i], scalar_mul(incr, h / 6.0));
    }
    return out;
}

void Rk4Scratch::resize(size_t n) {
    k1.resize(n);
    k2.resize(n);
    k3.resize(n);
    k4.resize(n);
    tmp.resize(n);
}

void rk4_step_d(const RhsD& f, const std::vector<double>& x, const std::vector<double>& u,
                double h, std::vector<double>& x_out, Rk4Scratch& s) {
    size_t n = x.size();
    s.resize(n);
    f(x, u, s.k1);
    for (size_t i = 0; i < n; ++i) s.tmp[i] = x[i] + 0.5 * h * s.k1[i];
    f(s.tmp, u, s.k2);
    for (size_t i = 0; i < n; ++i) s.tmp[i] = x[i] + 0.5 * h * s.k2[i];
    f(s.tmp, u, s.k3);
    for (size_t i = 0; i < n; ++i) s.tmp[i] = x[i] + h * s.k3[i];
    f(s.tmp, u, s.k4);
    x_out.resize(n);
    for (size_t i = 0; i < n; ++i) {
        x_out[i] = x[i] + h / 6.0 * (s.k1[i] + 2.0 * s.k2[i] + 2.0 * s.k3[i] + s.k4[i]);
    }
    for (size_t i = 0; i < n; ++i) {
        if (!std::isfinite(x_out[i])) throw NumericError("rk4: non-finite state after step");
    }
}

}  // namespace gridident::ode
