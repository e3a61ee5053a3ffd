#pragma once

#include <functional>
#include <vector>

#include "gridident/tensor.hpp"

namespace gridident::ode {

// Differentiable path: states and derivatives are tensors, so a step built
// from autodiff primitives backpropagates through x, u and f's parameters.
using RhsFn = std::function<Tensor(const Tensor& x, const Tensor& u)>;

// Classic RK4 with u held constant over the step. Any non-finite stage result
// is rejected with the stage index.
Tensor rk4_step(const RhsFn& f, const Tensor& x, const Tensor& u, double h);

// Advances across an ascending grid, `substeps` equal RK4 steps per interval,
// u sampled once at the interval start. Row 0 is x0.
Tensor integrate(const RhsFn& f, const Tensor& x0, const std::vector<double>& t_grid,
                 const std::function<Tensor(double)>& u_at, int64_t substeps);

// State split across several tensors (one per graph node); same tableau.
using MultiRhsFn = std::function<std::vector<Tensor>(const std::vector<Tensor>&)>;
std::vector<Tensor> rk4_step_multi(const MultiRhsFn& f, const std::vector<Tensor>& x, double h);

// Allocation-free double path for ground-truth simulation.
using RhsD = std::function<void(const std::vector<double>& x, const std::vector<double>& u,
                                std::vector<double>& dx)>;

struct Rk4Scratch {
    std::vector<double> k1, k2, k3, k4, tmp;
    void resize(size_t n);
};

void rk4_step_d(const RhsD& f, const std::vector<double>& x, const std::vector<double>& u,
                double h, std::vector<double>& x_out, Rk4Scratch& scratch);

}  // namespace gridident::ode
