#pragma once

#include <vector>

#include "osd/autodiff.hpp"
#include "osd/tensor.hpp"

namespace osd {

// Per-timestep diffusion constants. Timesteps are 1-based: arrays are
// indexed t-1.
struct NoiseSchedule {
    int T = 0;
    std::vector<double> betas;
    std::vector<double> alphas;
    std::vector<double> alpha_bars;

    double beta(int t) const { return betas[static_cast<size_t>(t - 1)]; }
    double alpha(int t) const { return alphas[static_cast<size_t>(t - 1)]; }
    double alpha_bar(int t) const { return alpha_bars[static_cast<size_t>(t - 1)]; }
};

// Linear beta interpolation between beta_start and beta_end over T steps.
NoiseSchedule build_schedule(int T, double beta_start, double beta_end);

// z_t = sqrt(abar_t) z + sqrt(1-abar_t) eps
Tensor forward_diffuse(const Tensor& z, int t, const Tensor& eps, const NoiseSchedule& sched);
ad::Var forward_diffuse(ad::Var z, int t, ad::Var eps, const NoiseSchedule& sched);

// z0_hat = (z_t - sqrt(1-abar_t) eps_hat) / sqrt(abar_t)
Tensor recover_clean(const Tensor& z_t, const Tensor& eps_hat, int t, const NoiseSchedule& sched);
ad::Var recover_clean(ad::Var z_t, ad::Var eps_hat, int t, const NoiseSchedule& sched);

}  // namespace osd
