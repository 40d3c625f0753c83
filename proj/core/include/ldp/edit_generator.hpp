#pragma once

#include <string>
#include <vector>

#include "ldp/rng.hpp"
#include "ldp/tensor.hpp"

namespace ldp {

struct ParamRef {
    std::string name;
    Tensor* value = nullptr;
    Tensor* grad  = nullptr;
};

// Compact encoder-decoder convolutional generator with one skip connection
// and sigmoid heads for the RGB edit layer and the alpha map:
//
//   c1 = relu(conv3x3(3 -> F))              @ H
//   c2 = relu(conv3x3(F -> 2F, stride 2))   @ H/2
//   c3 = relu(conv3x3(2F -> 2F))            @ H/2
//   u  = upsample2x(c3); cat(u, c1)         @ H, 3F channels
//   c4 = relu(conv3x3(3F -> F))
//   edit  = sigmoid(conv3x3(F -> 3))
//   alpha = sigmoid(conv3x3(F -> 1))
//
// Hand-written forward/backward; spatial dims must be even.
class EditGenerator {
public:
    EditGenerator(int features, Rng& rng);

    struct Output {
        Tensor edit;   // {3, H, W} in [0,1]
        Tensor alpha;  // {1, H, W} in [0,1]
    };

    Output forward(const Tensor& image);  // caches activations for backward
    void backward(const Tensor& grad_edit, const Tensor& grad_alpha);

    std::vector<ParamRef> params();
    void zero_grad();
    int64_t param_count() const;

private:
    struct ConvLayer {
        std::string name;
        Tensor weight, bias;
        Tensor grad_weight, grad_bias;
        int stride = 1;
    };

    ConvLayer make_layer(const std::string& name, int c_in, int c_out, int stride, double gain,
                         Rng& rng);

    int features_;
    ConvLayer c1_, c2_, c3_, c4_, edit_head_, alpha_head_;

    // cached forward state
    Tensor input_, pre1_, act1_, pre2_, act2_, pre3_, act3_, cat_, pre4_, act4_;
    Tensor edit_out_, alpha_out_;
    bool has_forward_ = false;
};

}  // namespace ldp
