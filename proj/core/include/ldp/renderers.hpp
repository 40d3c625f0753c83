#pragma once

#include <memory>
#include <string>
#include <vector>

#include "ldp/backend.hpp"
#include "ldp/edit_generator.hpp"
#include "ldp/rng.hpp"
#include "ldp/tensor.hpp"

namespace ldp {

class AdamW;

enum class BlendMode { Strict, Clamp };
enum class MaskReduction { Mean, Sum };

// elementwise edit * alpha + input * (1 - alpha); alpha is {1,H,W} and is
// broadcast over channels (or same-shaped). Strict mode rejects alpha
// outside [0,1].
Tensor blend(const Tensor& edit, const Tensor& alpha, const Tensor& input,
             BlendMode mode = BlendMode::Strict);

// |alpha - mask|_1, mean reduction by default (sum in strict-paper mode)
double mask_loss(const Tensor& alpha, const Tensor& mask, MaskReduction reduction = MaskReduction::Mean);
// d(mask_loss)/d(alpha); sign(0) = 0
Tensor mask_loss_gradient(const Tensor& alpha, const Tensor& mask,
                          MaskReduction reduction = MaskReduction::Mean);

/* ------------------------------ renderers ------------------------------ */

struct BackwardResult {
    double extra_loss = 0.0;  // renderer-owned supervision terms (mask)
};

// Differentiable map theta -> latent v. render() caches whatever backward()
// needs; backward() accumulates into the parameter gradients and returns any
// renderer-owned extra loss. One optimization run owns its renderer.
class Renderer {
public:
    virtual ~Renderer() = default;
    virtual std::string kind() const = 0;
    virtual std::vector<ParamRef> params() = 0;
    virtual Tensor render() = 0;
    virtual BackwardResult backward(const Tensor& grad_v) = 0;
    virtual bool has_extra_loss() const { return false; }
    void zero_grad();
    // theta <- theta' using the accumulated gradients; must be externally
    // serialized (one run owns its renderer)
    void apply_update(AdamW& optimizer);
};

// theta is the latent itself; render is the identity and the gradient
// passes through unchanged.
class LatentMapRenderer : public Renderer {
public:
    explicit LatentMapRenderer(Tensor theta);

    std::string kind() const override { return "latent-map"; }
    std::vector<ParamRef> params() override;
    Tensor render() override { return theta_; }
    BackwardResult backward(const Tensor& grad_v) override;

    const Tensor& theta() const { return theta_; }

private:
    Tensor theta_;
    Tensor grad_;
};

// theta drawn elementwise from the standard normal
std::unique_ptr<LatentMapRenderer> init_latent_map(Rng& rng, std::vector<int> shape = {4, 64, 64});

/* --------------------------- layered editing --------------------------- */

struct LayeredEditOptions {
    bool stop_grad_encoder = false;  // cut the prior gradient at the encoder
    bool mask_supervision  = true;
    double mask_weight     = 1.0;    // the paper's mask term is unweighted
    MaskReduction mask_reduction = MaskReduction::Mean;
};

struct LayeredForward {
    Tensor v2;     // v'' = encode(blend(edit, alpha, input)) + theta_latent
    Tensor image;  // I'' = blend(decode(v''), alpha, input)
    Tensor alpha;
    Tensor edit;
};

// CNN edit layer + alpha blending + residual latent:
//   (edit, alpha) = generator(input); I' = blend(edit, alpha, input);
//   v'  = encode(I'); v'' = v' + theta_latent.
// Prior losses act on v''; gradients flow to both theta_cnn and theta_latent.
class LayeredEditRenderer : public Renderer {
public:
    LayeredEditRenderer(Tensor input_image, Tensor mask, std::shared_ptr<Encoder> encoder,
                        std::shared_ptr<Decoder> decoder, int generator_features,
                        LayeredEditOptions options, Rng& rng);

    std::string kind() const override { return "layered-edit"; }
    std::vector<ParamRef> params() override;
    Tensor render() override;
    BackwardResult backward(const Tensor& grad_v) override;
    bool has_extra_loss() const override { return options_.mask_supervision; }

    // full forward including decode and the final alpha blend
    LayeredForward forward_full();

    const Tensor& alpha() const { return alpha_; }
    const LayeredEditOptions& options() const { return options_; }

private:
    Tensor input_;
    Tensor mask_;
    std::shared_ptr<Encoder> encoder_;
    std::shared_ptr<Decoder> decoder_;
    LayeredEditOptions options_;

    EditGenerator generator_;
    Tensor theta_latent_;
    Tensor grad_latent_;

    // cached forward state
    Tensor edit_, alpha_, blended_;
    bool has_forward_ = false;
};

}  // namespace ldp
