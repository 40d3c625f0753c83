#include "ldp/nn_ops.hpp"

#include <algorithm>
#include <cmath>

#include "ldp/errors.hpp"

namespace ldp {

namespace {
void check_chw(const Tensor& t, const char* what) {
    if (t.shape().size() != 3) {
        throw ArgumentError(std::string(what) + ": expected CHW tensor, got " + shape_str(t.shape()));
    }
}

inline size_t widx(int co, int ci, int ky, int kx, int c_in, int k) {
    return ((static_cast<size_t>(co) * c_in + ci) * k + ky) * k + kx;
}
}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride, int pad) {
    check_chw(input, "conv2d");
    const int c_in = input.dim(0), h = input.dim(1), w = input.dim(2);
    const int c_out = weight.dim(0), k = weight.dim(2);
    if (weight.shape().size() != 4 || weight.dim(1) != c_in) {
        throw ArgumentError("conv2d: weight " + shape_str(weight.shape()) +
                            " incompatible with input " + shape_str(input.shape()));
    }
    const int out_h = (h + 2 * pad - k) / stride + 1;
    const int out_w = (w + 2 * pad - k) / stride + 1;
    const double* wp = weight.data();

    Tensor out({c_out, out_h, out_w});
    for (int co = 0; co < c_out; ++co) {
        const double b = bias.empty() ? 0.0 : bias[co];
        for (int oy = 0; oy < out_h; ++oy) {
            for (int ox = 0; ox < out_w; ++ox) {
                double acc = b;
                for (int ci = 0; ci < c_in; ++ci) {
                    for (int ky = 0; ky < k; ++ky) {
                        const int iy = oy * stride + ky - pad;
                        if (iy < 0 || iy >= h) continue;
                        for (int kx = 0; kx < k; ++kx) {
                            const int ix = ox * stride + kx - pad;
                            if (ix < 0 || ix >= w) continue;
                            acc += input.at(ci, iy, ix) * wp[widx(co, ci, ky, kx, c_in, k)];
                        }
                    }
                }
                out.at(co, oy, ox) = acc;
            }
        }
    }
    return out;
}

Tensor conv2d_backward_input(const Tensor& grad_out, const Tensor& weight,
                             const std::vector<int>& input_shape, int stride, int pad) {
    const int c_in = input_shape[0], h = input_shape[1], w = input_shape[2];
    const int c_out = weight.dim(0), k = weight.dim(2);
    const int out_h = grad_out.dim(1), out_w = grad_out.dim(2);
    const double* wp = weight.data();

    Tensor grad_in(input_shape);
    for (int co = 0; co < c_out; ++co) {
        for (int oy = 0; oy < out_h; ++oy) {
            for (int ox = 0; ox < out_w; ++ox) {
                const double g = grad_out.at(co, oy, ox);
                if (g == 0.0) continue;
                for (int ci = 0; ci < c_in; ++ci) {
                    for (int ky = 0; ky < k; ++ky) {
                        const int iy = oy * stride + ky - pad;
                        if (iy < 0 || iy >= h) continue;
                        for (int kx = 0; kx < k; ++kx) {
                            const int ix = ox * stride + kx - pad;
                            if (ix < 0 || ix >= w) continue;
                            grad_in.at(ci, iy, ix) += g * wp[widx(co, ci, ky, kx, c_in, k)];
                        }
                    }
                }
            }
        }
    }
    return grad_in;
}

void conv2d_backward_params(const Tensor& grad_out, const Tensor& input, const Tensor& weight,
                            int stride, int pad, Tensor& grad_weight, Tensor& grad_bias) {
    const int c_in = input.dim(0), h = input.dim(1), w = input.dim(2);
    const int c_out = weight.dim(0), k = weight.dim(2);
    const int out_h = grad_out.dim(1), out_w = grad_out.dim(2);

    if (!grad_weight.same_shape(weight)) grad_weight = Tensor(weight.shape());
    double* gw = grad_weight.data();
    const bool want_bias = !grad_bias.empty();

    for (int co = 0; co < c_out; ++co) {
        double bias_acc = 0.0;
        for (int oy = 0; oy < out_h; ++oy) {
            for (int ox = 0; ox < out_w; ++ox) {
                const double g = grad_out.at(co, oy, ox);
                bias_acc += g;
                if (g == 0.0) continue;
                for (int ci = 0; ci < c_in; ++ci) {
                    for (int ky = 0; ky < k; ++ky) {
                        const int iy = oy * stride + ky - pad;
                        if (iy < 0 || iy >= h) continue;
                        for (int kx = 0; kx < k; ++kx) {
                            const int ix = ox * stride + kx - pad;
                            if (ix < 0 || ix >= w) continue;
                            gw[widx(co, ci, ky, kx, c_in, k)] += g * input.at(ci, iy, ix);
                        }
                    }
                }
            }
        }
        if (want_bias) grad_bias[co] += bias_acc;
    }
}

Tensor upsample_nearest(const Tensor& input, int factor) {
    check_chw(input, "upsample_nearest");
    const int c = input.dim(0), h = input.dim(1), w = input.dim(2);
    Tensor out({c, h * factor, w * factor});
    for (int ci = 0; ci < c; ++ci) {
        for (int y = 0; y < h * factor; ++y) {
            const int sy = y / factor;
            for (int x = 0; x < w * factor; ++x) {
                out.at(ci, y, x) = input.at(ci, sy, x / factor);
            }
        }
    }
    return out;
}

Tensor upsample_nearest_adjoint(const Tensor& grad_out, int factor) {
    check_chw(grad_out, "upsample_nearest_adjoint");
    const int c = grad_out.dim(0), oh = grad_out.dim(1), ow = grad_out.dim(2);
    Tensor grad_in({c, oh / factor, ow / factor});
    for (int ci = 0; ci < c; ++ci) {
        for (int y = 0; y < oh; ++y) {
            for (int x = 0; x < ow; ++x) {
                grad_in.at(ci, y / factor, x / factor) += grad_out.at(ci, y, x);
            }
        }
    }
    return grad_in;
}

Tensor avg_pool(const Tensor& input, int factor) {
    check_chw(input, "avg_pool");
    const int c = input.dim(0), h = input.dim(1), w = input.dim(2);
    if (h % factor != 0 || w % factor != 0) {
        throw ArgumentError("avg_pool: spatial size " + shape_str(input.shape()) +
                            " not divisible by factor " + std::to_string(factor));
    }
    const double inv = 1.0 / (factor * factor);
    Tensor out({c, h / factor, w / factor});
    for (int ci = 0; ci < c; ++ci) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                out.at(ci, y / factor, x / factor) += input.at(ci, y, x) * inv;
            }
        }
    }
    return out;
}

Tensor avg_pool_adjoint(const Tensor& grad_out, int factor, const std::vector<int>& input_shape) {
    const int c = input_shape[0], h = input_shape[1], w = input_shape[2];
    const double inv = 1.0 / (factor * factor);
    Tensor grad_in(input_shape);
    for (int ci = 0; ci < c; ++ci) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                grad_in.at(ci, y, x) = grad_out.at(ci, y / factor, x / factor) * inv;
            }
        }
    }
    return grad_in;
}

Tensor relu(const Tensor& input) {
    Tensor out(input.shape());
    for (int64_t i = 0; i < input.size(); ++i) out[i] = input[i] > 0.0 ? input[i] : 0.0;
    return out;
}

Tensor relu_backward(const Tensor& grad_out, const Tensor& input) {
    Tensor grad_in(input.shape());
    for (int64_t i = 0; i < input.size(); ++i) grad_in[i] = input[i] > 0.0 ? grad_out[i] : 0.0;
    return grad_in;
}

Tensor sigmoid(const Tensor& input) {
    Tensor out(input.shape());
    for (int64_t i = 0; i < input.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-input[i]));
    return out;
}

Tensor sigmoid_backward(const Tensor& grad_out, const Tensor& output) {
    Tensor grad_in(output.shape());
    for (int64_t i = 0; i < output.size(); ++i) {
        grad_in[i] = grad_out[i] * output[i] * (1.0 - output[i]);
    }
    return grad_in;
}

Tensor resize_bilinear(const Tensor& input, int out_h, int out_w) {
    check_chw(input, "resize_bilinear");
    const int c = input.dim(0), h = input.dim(1), w = input.dim(2);
    if (h == out_h && w == out_w) return input;
    Tensor out({c, out_h, out_w});
    const double sy = out_h > 1 ? static_cast<double>(h - 1) / (out_h - 1) : 0.0;
    const double sx = out_w > 1 ? static_cast<double>(w - 1) / (out_w - 1) : 0.0;
    for (int ci = 0; ci < c; ++ci) {
        for (int y = 0; y < out_h; ++y) {
            const double fy = y * sy;
            const int y0    = static_cast<int>(fy);
            const int y1    = std::min(y0 + 1, h - 1);
            const double wy = fy - y0;
            for (int x = 0; x < out_w; ++x) {
                const double fx = x * sx;
                const int x0    = static_cast<int>(fx);
                const int x1    = std::min(x0 + 1, w - 1);
                const double wx = fx - x0;
                const double top = input.at(ci, y0, x0) * (1.0 - wx) + input.at(ci, y0, x1) * wx;
                const double bot = input.at(ci, y1, x0) * (1.0 - wx) + input.at(ci, y1, x1) * wx;
                out.at(ci, y, x) = top * (1.0 - wy) + bot * wy;
            }
        }
    }
    return out;
}

}  // namespace ldp
