#include "ldp/edit_generator.hpp"

#include <cmath>

#include "ldp/errors.hpp"
#include "ldp/nn_ops.hpp"

namespace ldp {

namespace {

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    Tensor out({a.dim(0) + b.dim(0), a.dim(1), a.dim(2)});
    std::copy(a.data(), a.data() + a.size(), out.data());
    std::copy(b.data(), b.data() + b.size(), out.data() + a.size());
    return out;
}

void split_channels(const Tensor& cat_grad, Tensor& grad_a, Tensor& grad_b, int channels_a) {
    const int64_t plane = static_cast<int64_t>(cat_grad.dim(1)) * cat_grad.dim(2);
    const int64_t na    = channels_a * plane;
    grad_a = Tensor({channels_a, cat_grad.dim(1), cat_grad.dim(2)});
    grad_b = Tensor({cat_grad.dim(0) - channels_a, cat_grad.dim(1), cat_grad.dim(2)});
    std::copy(cat_grad.data(), cat_grad.data() + na, grad_a.data());
    std::copy(cat_grad.data() + na, cat_grad.data() + cat_grad.size(), grad_b.data());
}

}  // namespace

EditGenerator::ConvLayer EditGenerator::make_layer(const std::string& name, int c_in, int c_out,
                                                   int stride, double gain, Rng& rng) {
    ConvLayer layer;
    layer.name   = name;
    layer.stride = stride;
    layer.weight = Tensor({c_out, c_in, 3, 3});
    layer.bias   = Tensor({c_out});
    const double std_dev = gain / std::sqrt(static_cast<double>(c_in * 9));
    for (int64_t i = 0; i < layer.weight.size(); ++i) layer.weight[i] = std_dev * rng.normal();
    layer.grad_weight = Tensor(layer.weight.shape());
    layer.grad_bias   = Tensor(layer.bias.shape());
    return layer;
}

EditGenerator::EditGenerator(int features, Rng& rng) : features_(features) {
    if (features < 1) throw ConfigError("generator features must be >= 1");
    const double relu_gain = std::sqrt(2.0);
    c1_         = make_layer("c1", 3, features, 1, relu_gain, rng);
    c2_         = make_layer("c2", features, 2 * features, 2, relu_gain, rng);
    c3_         = make_layer("c3", 2 * features, 2 * features, 1, relu_gain, rng);
    c4_         = make_layer("c4", 3 * features, features, 1, relu_gain, rng);
    edit_head_  = make_layer("edit_head", features, 3, 1, 1.0, rng);
    alpha_head_ = make_layer("alpha_head", features, 1, 1, 1.0, rng);
}

EditGenerator::Output EditGenerator::forward(const Tensor& image) {
    if (image.shape().size() != 3 || image.dim(0) != 3) {
        throw ArgumentError("generator: expected {3,H,W} input, got " + shape_str(image.shape()));
    }
    if (image.dim(1) % 2 != 0 || image.dim(2) % 2 != 0) {
        throw ArgumentError("generator: spatial dims must be even, got " + shape_str(image.shape()));
    }

    input_ = image;
    pre1_  = conv2d(input_, c1_.weight, c1_.bias, 1, 1);
    act1_  = relu(pre1_);
    pre2_  = conv2d(act1_, c2_.weight, c2_.bias, 2, 1);
    act2_  = relu(pre2_);
    pre3_  = conv2d(act2_, c3_.weight, c3_.bias, 1, 1);
    act3_  = relu(pre3_);
    cat_   = concat_channels(upsample_nearest(act3_, 2), act1_);
    pre4_  = conv2d(cat_, c4_.weight, c4_.bias, 1, 1);
    act4_  = relu(pre4_);

    edit_out_  = sigmoid(conv2d(act4_, edit_head_.weight, edit_head_.bias, 1, 1));
    alpha_out_ = sigmoid(conv2d(act4_, alpha_head_.weight, alpha_head_.bias, 1, 1));

    has_forward_ = true;
    return {edit_out_, alpha_out_};
}

void EditGenerator::backward(const Tensor& grad_edit, const Tensor& grad_alpha) {
    if (!has_forward_) throw ArgumentError("generator: backward before forward");

    const Tensor g_edit_pre  = sigmoid_backward(grad_edit, edit_out_);
    const Tensor g_alpha_pre = sigmoid_backward(grad_alpha, alpha_out_);

    conv2d_backward_params(g_edit_pre, act4_, edit_head_.weight, 1, 1, edit_head_.grad_weight,
                           edit_head_.grad_bias);
    conv2d_backward_params(g_alpha_pre, act4_, alpha_head_.weight, 1, 1, alpha_head_.grad_weight,
                           alpha_head_.grad_bias);

    Tensor g_act4 = conv2d_backward_input(g_edit_pre, edit_head_.weight, act4_.shape(), 1, 1);
    g_act4 += conv2d_backward_input(g_alpha_pre, alpha_head_.weight, act4_.shape(), 1, 1);

    const Tensor g_pre4 = relu_backward(g_act4, pre4_);
    conv2d_backward_params(g_pre4, cat_, c4_.weight, 1, 1, c4_.grad_weight, c4_.grad_bias);
    const Tensor g_cat = conv2d_backward_input(g_pre4, c4_.weight, cat_.shape(), 1, 1);

    Tensor g_up, g_act1_skip;
    split_channels(g_cat, g_up, g_act1_skip, 2 * features_);

    const Tensor g_act3 = upsample_nearest_adjoint(g_up, 2);
    const Tensor g_pre3 = relu_backward(g_act3, pre3_);
    conv2d_backward_params(g_pre3, act2_, c3_.weight, 1, 1, c3_.grad_weight, c3_.grad_bias);
    const Tensor g_act2 = conv2d_backward_input(g_pre3, c3_.weight, act2_.shape(), 1, 1);

    const Tensor g_pre2 = relu_backward(g_act2, pre2_);
    conv2d_backward_params(g_pre2, act1_, c2_.weight, 2, 1, c2_.grad_weight, c2_.grad_bias);
    Tensor g_act1 = conv2d_backward_input(g_pre2, c2_.weight, act1_.shape(), 2, 1);
    g_act1 += g_act1_skip;

    const Tensor g_pre1 = relu_backward(g_act1, pre1_);
    conv2d_backward_params(g_pre1, input_, c1_.weight, 1, 1, c1_.grad_weight, c1_.grad_bias);
}

std::vector<ParamRef> EditGenerator::params() {
    std::vector<ParamRef> refs;
    for (ConvLayer* layer : {&c1_, &c2_, &c3_, &c4_, &edit_head_, &alpha_head_}) {
        refs.push_back({"gen." + layer->name + ".weight", &layer->weight, &layer->grad_weight});
        refs.push_back({"gen." + layer->name + ".bias", &layer->bias, &layer->grad_bias});
    }
    return refs;
}

void EditGenerator::zero_grad() {
    for (ConvLayer* layer : {&c1_, &c2_, &c3_, &c4_, &edit_head_, &alpha_head_}) {
        layer->grad_weight.fill(0.0);
        layer->grad_bias.fill(0.0);
    }
}

int64_t EditGenerator::param_count() const {
    int64_t count = 0;
    for (const ConvLayer* layer : {&c1_, &c2_, &c3_, &c4_, &edit_head_, &alpha_head_}) {
        count += layer->weight.size() + layer->bias.size();
    }
    return count;
}

}  // namespace ldp
