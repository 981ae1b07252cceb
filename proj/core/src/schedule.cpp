#include "osd/schedule.hpp"

#include <cmath>
#include <stdexcept>

namespace osd {

NoiseSchedule build_schedule(int T, double beta_start, double beta_end) {
    if (T < 1) throw std::invalid_argument("build_schedule: T must be >= 1");
    if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
        throw std::invalid_argument("build_schedule: require 0 < beta_start <= beta_end < 1");
    NoiseSchedule s;
    s.T = T;
    s.betas.resize(static_cast<size_t>(T));
    s.alphas.resize(static_cast<size_t>(T));
    s.alpha_bars.resize(static_cast<size_t>(T));
    double prod = 1.0;
    for (int t = 0; t < T; ++t) {
        const double frac = (T == 1) ? 0.0 : static_cast<double>(t) / (T - 1);
        s.betas[static_cast<size_t>(t)] = beta_start + (beta_end - beta_start) * frac;
        s.alphas[static_cast<size_t>(t)] = 1.0 - s.betas[static_cast<size_t>(t)];
        prod *= s.alphas[static_cast<size_t>(t)];
        s.alpha_bars[static_cast<size_t>(t)] = prod;
    }
    return s;
}

namespace {
void check_t(int t, const NoiseSchedule& sched) {
    if (t < 1 || t > sched.T) throw std::out_of_range("timestep out of [1,T]");
}
}  // namespace

Tensor forward_diffuse(const Tensor& z, int t, const Tensor& eps, const NoiseSchedule& sched) {
    check_t(t, sched);
    if (!z.same_shape(eps)) throw std::invalid_argument("forward_diffuse: shape mismatch");
    const double ab = sched.alpha_bar(t);
    const double a = std::sqrt(ab), b = std::sqrt(1.0 - ab);
    Tensor out(z.shape);
    for (int64_t i = 0; i < z.size(); ++i) out.data[i] = a * z.data[i] + b * eps.data[i];
    return out;
}

ad::Var forward_diffuse(ad::Var z, int t, ad::Var eps, const NoiseSchedule& sched) {
    check_t(t, sched);
    const double ab = sched.alpha_bar(t);
    const double a = std::sqrt(ab), b = std::sqrt(1.0 - ab);
    return ad::axpy(ad::affine(z, a, 0.0), eps, b);
}

Tensor recover_clean(const Tensor& z_t, const Tensor& eps_hat, int t, const NoiseSchedule& sched) {
    check_t(t, sched);
    if (!z_t.same_shape(eps_hat)) throw std::invalid_argument("recover_clean: shape mismatch");
    const double ab = sched.alpha_bar(t);
    if (ab <= 0.0) throw std::domain_error("recover_clean: alpha_bar must be positive");
    const double inv = 1.0 / std::sqrt(ab), b = std::sqrt(1.0 - ab);
    Tensor out(z_t.shape);
    for (int64_t i = 0; i < z_t.size(); ++i) out.data[i] = (z_t.data[i] - b * eps_hat.data[i]) * inv;
    return out;
}

ad::Var recover_clean(ad::Var z_t, ad::Var eps_hat, int t, const NoiseSchedule& sched) {
    check_t(t, sched);
    const double ab = sched.alpha_bar(t);
    if (ab <= 0.0) throw std::domain_error("recover_clean: alpha_bar must be positive");
    const double inv = 1.0 / std::sqrt(ab), b = std::sqrt(1.0 - ab);
    return ad::affine(ad::axpy(z_t, eps_hat, -b), inv, 0.0);
}

}  // namespace osd
