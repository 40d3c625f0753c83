#include "ldp/adamw.hpp"

#include <cmath>

#include "ldp/errors.hpp"

namespace ldp {

AdamW::AdamW(AdamWConfig config) : config_(config) {
    if (!(config_.lr > 0.0)) throw ConfigError("optimizer: learning rate must be > 0");
    if (!(config_.beta1 >= 0.0 && config_.beta1 < 1.0) ||
        !(config_.beta2 >= 0.0 && config_.beta2 < 1.0)) {
        throw ConfigError("optimizer: betas must lie in [0, 1)");
    }
    if (!(config_.weight_decay >= 0.0)) throw ConfigError("optimizer: weight decay must be >= 0");
}

void AdamW::step(std::vector<ParamRef>& params) {
    ++step_count_;
    const double bc1 = 1.0 - std::pow(config_.beta1, step_count_);
    const double bc2 = 1.0 - std::pow(config_.beta2, step_count_);

    for (ParamRef& param : params) {
        State& state = state_[param.name];
        if (state.m.size() != param.value->size()) {
            state.m = Tensor(param.value->shape());
            state.v = Tensor(param.value->shape());
        }
        Tensor& theta      = *param.value;
        const Tensor& grad = *param.grad;
        for (int64_t i = 0; i < theta.size(); ++i) {
            const double g = grad[i];
            state.m[i] = config_.beta1 * state.m[i] + (1.0 - config_.beta1) * g;
            state.v[i] = config_.beta2 * state.v[i] + (1.0 - config_.beta2) * g * g;
            const double m_hat = state.m[i] / bc1;
            const double v_hat = state.v[i] / bc2;
            theta[i] -= config_.lr * (m_hat / (std::sqrt(v_hat) + config_.eps) +
                                      config_.weight_decay * theta[i]);
        }
    }
}

}  // namespace ldp
