#pragma once

#include <vector>

#include "ldp/rng.hpp"
#include "ldp/tensor.hpp"

namespace ldp {

// DDPM forward-process coefficients. alpha_t[t] = sqrt(alpha_bar[t]),
// sigma_t[t] = sqrt(1 - alpha_bar[t]), so alpha_t^2 + sigma_t^2 = 1 and the
// forward perturbation z_t = alpha_t * v + sigma_t * eps is variance
// preserving. Immutable after construction.
struct NoiseSchedule {
    int num_steps = 0;
    std::vector<double> betas;
    std::vector<double> alpha_bar;
    std::vector<double> alpha_t;
    std::vector<double> sigma_t;
};

// Inclusive bounds for sampling t during optimization.
struct TimestepRange {
    int t_min = 0;
    int t_max = 0;
};

// Scaled-linear schedule: betas interpolated linearly in sqrt-space between
// beta_start and beta_end, the published default of the pretrained latent
// diffusion family (T=1000, 8.5e-4 .. 1.2e-2).
NoiseSchedule build_linear_schedule(int num_steps, double beta_start, double beta_end);

inline NoiseSchedule default_schedule() { return build_linear_schedule(1000, 0.00085, 0.012); }

constexpr int kDefaultTMin = 20;
constexpr int kDefaultTMax = 980;

// throws ConfigError unless 0 <= t_min <= t_max < num_steps
void validate_range(const TimestepRange& range, const NoiseSchedule& schedule);

// uniform draw over [t_min, t_max]
int sample_timestep(Rng& rng, const TimestepRange& range);

// z_t = alpha_t * v + sigma_t * eps
Tensor perturb(const Tensor& v, const Tensor& eps, int t, const NoiseSchedule& schedule);

}  // namespace ldp
