#include "ldp/noise_schedule.hpp"

#include <cmath>
#include <string>

#include "ldp/errors.hpp"

namespace ldp {

NoiseSchedule build_linear_schedule(int num_steps, double beta_start, double beta_end) {
    if (num_steps < 1) {
        throw ConfigError("schedule: num_steps must be >= 1, got " + std::to_string(num_steps));
    }
    if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0)) {
        throw ConfigError("schedule: need 0 < beta_start <= beta_end < 1, got beta_start=" +
                          std::to_string(beta_start) + " beta_end=" + std::to_string(beta_end));
    }

    NoiseSchedule s;
    s.num_steps = num_steps;
    s.betas.resize(num_steps);
    s.alpha_bar.resize(num_steps);
    s.alpha_t.resize(num_steps);
    s.sigma_t.resize(num_steps);

    const double sqrt_start = std::sqrt(beta_start);
    const double sqrt_end   = std::sqrt(beta_end);
    double product          = 1.0;
    for (int t = 0; t < num_steps; ++t) {
        const double frac = num_steps == 1 ? 0.0 : static_cast<double>(t) / (num_steps - 1);
        const double root = sqrt_start + (sqrt_end - sqrt_start) * frac;
        const double beta = root * root;
        product *= 1.0 - beta;
        s.betas[t]     = beta;
        s.alpha_bar[t] = product;
        s.alpha_t[t]   = std::sqrt(product);
        s.sigma_t[t]   = std::sqrt(1.0 - product);
    }
    return s;
}

void validate_range(const TimestepRange& range, const NoiseSchedule& schedule) {
    if (range.t_min < 0 || range.t_min > range.t_max || range.t_max >= schedule.num_steps) {
        throw ConfigError("timestep range [" + std::to_string(range.t_min) + ", " +
                          std::to_string(range.t_max) + "] invalid for schedule with T=" +
                          std::to_string(schedule.num_steps));
    }
}

int sample_timestep(Rng& rng, const TimestepRange& range) {
    return static_cast<int>(rng.uniform_int(range.t_min, range.t_max));
}

Tensor perturb(const Tensor& v, const Tensor& eps, int t, const NoiseSchedule& schedule) {
    require_same_shape(v, eps, "perturb");
    if (t < 0 || t >= schedule.num_steps) {
        throw ArgumentError("perturb: timestep " + std::to_string(t) +
                            " outside schedule with T=" + std::to_string(schedule.num_steps));
    }
    const double a = schedule.alpha_t[static_cast<size_t>(t)];
    const double s = schedule.sigma_t[static_cast<size_t>(t)];
    Tensor z(v.shape());
    for (int64_t i = 0; i < v.size(); ++i) z[i] = a * v[i] + s * eps[i];
    return z;
}

}  // namespace ldp
