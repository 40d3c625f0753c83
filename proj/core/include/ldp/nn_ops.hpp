#pragma once

#include "ldp/tensor.hpp"

namespace ldp {

// 2D ops on CHW tensors, double precision, with explicit adjoints so the
// mock decoder and the edit generator stay exactly differentiable.

// weight shape {C_out, C_in, K, K}; bias {C_out} or empty; zero padding.
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride, int pad);

// gradient of conv2d wrt its input, given the output cotangent
Tensor conv2d_backward_input(const Tensor& grad_out, const Tensor& weight,
                             const std::vector<int>& input_shape, int stride, int pad);

// gradients wrt weight and bias; grad_bias left empty when bias was empty
void conv2d_backward_params(const Tensor& grad_out, const Tensor& input, const Tensor& weight,
                            int stride, int pad, Tensor& grad_weight, Tensor& grad_bias);

// nearest-neighbour upsampling by an integer factor and its adjoint (block sum)
Tensor upsample_nearest(const Tensor& input, int factor);
Tensor upsample_nearest_adjoint(const Tensor& grad_out, int factor);

// average pooling over non-overlapping factor x factor blocks and its adjoint
Tensor avg_pool(const Tensor& input, int factor);
Tensor avg_pool_adjoint(const Tensor& grad_out, int factor, const std::vector<int>& input_shape);

Tensor relu(const Tensor& input);
Tensor relu_backward(const Tensor& grad_out, const Tensor& input);

Tensor sigmoid(const Tensor& input);
// takes the *output* of sigmoid: grad_in = grad_out * y * (1 - y)
Tensor sigmoid_backward(const Tensor& grad_out, const Tensor& output);

// bilinear image resize (CHW), used to bring inputs to the backend's native size
Tensor resize_bilinear(const Tensor& input, int out_h, int out_w);

}  // namespace ldp
