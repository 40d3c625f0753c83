#pragma once

#include <map>
#include <string>

#include "ldp/edit_generator.hpp"  // ParamRef
#include "ldp/tensor.hpp"

namespace ldp {

struct AdamWConfig {
    double lr           = 0.1;
    double beta1        = 0.9;
    double beta2        = 0.999;
    double eps          = 1e-8;
    double weight_decay = 0.0;  // decoupled
};

// Adam with decoupled weight decay:
//   m = b1*m + (1-b1)*g;  v = b2*v + (1-b2)*g^2
//   theta -= lr * ( m_hat / (sqrt(v_hat) + eps) + wd * theta )
class AdamW {
public:
    explicit AdamW(AdamWConfig config);

    void step(std::vector<ParamRef>& params);
    int step_count() const { return step_count_; }
    const AdamWConfig& config() const { return config_; }

private:
    struct State {
        Tensor m;
        Tensor v;
    };

    AdamWConfig config_;
    int step_count_ = 0;
    std::map<std::string, State> state_;
};

}  // namespace ldp
