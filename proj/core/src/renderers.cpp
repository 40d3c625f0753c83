#include "ldp/renderers.hpp"

#include <cmath>

#include "ldp/adamw.hpp"
#include "ldp/errors.hpp"

namespace ldp {

/* ----------------------------- blend & mask ---------------------------- */

namespace {

void check_alpha_shape(const Tensor& alpha, const Tensor& input) {
    const bool broadcast = alpha.shape().size() == 3 && alpha.dim(0) == 1 &&
                           alpha.dim(1) == input.dim(1) && alpha.dim(2) == input.dim(2);
    if (!broadcast && !alpha.same_shape(input)) {
        throw ArgumentError("blend: alpha " + shape_str(alpha.shape()) +
                            " incompatible with image " + shape_str(input.shape()));
    }
}

inline double l1_sign(double d) { return d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0); }

}  // namespace

Tensor blend(const Tensor& edit, const Tensor& alpha, const Tensor& input, BlendMode mode) {
    require_same_shape(edit, input, "blend");
    check_alpha_shape(alpha, input);

    const int64_t plane     = static_cast<int64_t>(input.dim(1)) * input.dim(2);
    const bool broadcast    = alpha.size() == plane;

    Tensor out(input.shape());
    for (int64_t i = 0; i < input.size(); ++i) {
        double a = broadcast ? alpha[i % plane] : alpha[i];
        if (a < 0.0 || a > 1.0) {
            if (mode == BlendMode::Strict) {
                throw ArgumentError("blend: alpha value " + std::to_string(a) + " outside [0,1]");
            }
            a = a < 0.0 ? 0.0 : 1.0;
        }
        out[i] = edit[i] * a + input[i] * (1.0 - a);
    }
    return out;
}

double mask_loss(const Tensor& alpha, const Tensor& mask, MaskReduction reduction) {
    require_same_shape(alpha, mask, "mask_loss");
    double sum = 0.0;
    for (int64_t i = 0; i < alpha.size(); ++i) sum += std::abs(alpha[i] - mask[i]);
    return reduction == MaskReduction::Mean ? sum / static_cast<double>(alpha.size()) : sum;
}

Tensor mask_loss_gradient(const Tensor& alpha, const Tensor& mask, MaskReduction reduction) {
    require_same_shape(alpha, mask, "mask_loss");
    const double scale =
        reduction == MaskReduction::Mean ? 1.0 / static_cast<double>(alpha.size()) : 1.0;
    Tensor grad(alpha.shape());
    for (int64_t i = 0; i < alpha.size(); ++i) grad[i] = scale * l1_sign(alpha[i] - mask[i]);
    return grad;
}

/* ------------------------------ renderers ------------------------------ */

void Renderer::zero_grad() {
    for (ParamRef& p : params()) p.grad->fill(0.0);
}

void Renderer::apply_update(AdamW& optimizer) {
    std::vector<ParamRef> refs = params();
    optimizer.step(refs);
}

LatentMapRenderer::LatentMapRenderer(Tensor theta)
    : theta_(std::move(theta)), grad_(theta_.shape()) {}

std::vector<ParamRef> LatentMapRenderer::params() {
    return {{"latent", &theta_, &grad_}};
}

BackwardResult LatentMapRenderer::backward(const Tensor& grad_v) {
    require_same_shape(grad_v, theta_, "LatentMapRenderer::backward");
    grad_ += grad_v;
    return {};
}

std::unique_ptr<LatentMapRenderer> init_latent_map(Rng& rng, std::vector<int> shape) {
    return std::make_unique<LatentMapRenderer>(Tensor::randn(std::move(shape), rng));
}

/* --------------------------- layered editing --------------------------- */

LayeredEditRenderer::LayeredEditRenderer(Tensor input_image, Tensor mask,
                                         std::shared_ptr<Encoder> encoder,
                                         std::shared_ptr<Decoder> decoder, int generator_features,
                                         LayeredEditOptions options, Rng& rng)
    : input_(std::move(input_image)),
      mask_(std::move(mask)),
      encoder_(std::move(encoder)),
      decoder_(std::move(decoder)),
      options_(options),
      generator_(generator_features, rng) {
    if (input_.shape().size() != 3 || input_.dim(0) != 3) {
        throw ArgumentError("layered edit: input image must be {3,H,W}, got " +
                            shape_str(input_.shape()));
    }
    if (mask_.shape().size() != 3 || mask_.dim(0) != 1 || mask_.dim(1) != input_.dim(1) ||
        mask_.dim(2) != input_.dim(2)) {
        throw ArgumentError("layered edit: mask " + shape_str(mask_.shape()) +
                            " must be {1,H,W} matching image " + shape_str(input_.shape()));
    }
    const int factor = encoder_->downsample_factor();
    if (input_.dim(1) % factor != 0 || input_.dim(2) % factor != 0) {
        throw ArgumentError("layered edit: image size " + shape_str(input_.shape()) +
                            " not divisible by encoder factor " + std::to_string(factor));
    }
    theta_latent_ = Tensor({encoder_->encode(input_).dim(0), input_.dim(1) / factor,
                            input_.dim(2) / factor});
    grad_latent_  = Tensor(theta_latent_.shape());
}

std::vector<ParamRef> LayeredEditRenderer::params() {
    std::vector<ParamRef> refs = generator_.params();
    refs.push_back({"theta_latent", &theta_latent_, &grad_latent_});
    return refs;
}

Tensor LayeredEditRenderer::render() {
    EditGenerator::Output out = generator_.forward(input_);
    edit_    = std::move(out.edit);
    alpha_   = std::move(out.alpha);
    blended_ = blend(edit_, alpha_, input_);
    has_forward_ = true;
    return encoder_->encode(blended_) + theta_latent_;
}

BackwardResult LayeredEditRenderer::backward(const Tensor& grad_v) {
    if (!has_forward_) throw ArgumentError("layered edit: backward before render");
    require_same_shape(grad_v, theta_latent_, "LayeredEditRenderer::backward");

    // v'' = encode(I') + theta_latent: identity into the residual latent
    grad_latent_ += grad_v;

    Tensor grad_edit(edit_.shape());
    Tensor grad_alpha(alpha_.shape());

    if (!options_.stop_grad_encoder) {
        const Tensor grad_blend = encoder_->encode_vjp(blended_, grad_v);
        // I' = edit*alpha + input*(1-alpha)
        const int64_t plane = static_cast<int64_t>(input_.dim(1)) * input_.dim(2);
        for (int64_t i = 0; i < grad_blend.size(); ++i) {
            const int64_t p = i % plane;
            grad_edit[i]  = grad_blend[i] * alpha_[p];
            grad_alpha[p] += grad_blend[i] * (edit_[i] - input_[i]);
        }
    }

    BackwardResult result;
    if (options_.mask_supervision) {
        result.extra_loss =
            options_.mask_weight * mask_loss(alpha_, mask_, options_.mask_reduction);
        axpy(options_.mask_weight, mask_loss_gradient(alpha_, mask_, options_.mask_reduction),
             grad_alpha);
    }

    generator_.backward(grad_edit, grad_alpha);
    return result;
}

LayeredForward LayeredEditRenderer::forward_full() {
    LayeredForward out;
    out.v2    = render();
    out.alpha = alpha_;
    out.edit  = edit_;
    out.image = blend(decoder_->decode(out.v2), alpha_, input_);
    return out;
}

}  // namespace ldp
