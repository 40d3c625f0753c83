#pragma once

#include <functional>
#include <vector>

#include "ldp/backend.hpp"
#include "ldp/noise_schedule.hpp"
#include "ldp/tensor.hpp"

namespace ldp {

// Treatment of the denoiser Jacobian d(eps_hat)/d(z_t) inside the feature
// matching gradient. IdentityApprox keeps the (1 + alpha_t) factor on the
// perturbed branch; StopGradient treats the residual as a constant.
enum class JacobianMode { IdentityApprox, StopGradient };

enum class FmReduction {
    NormalizedMean,  // per-level element sum, mean over levels, divided by latent N
    RawSum,          // plain sum over levels and elements
};

struct PriorWeights {
    double lambda_fm  = 0.0;
    double lambda_kl  = 0.0;
    double lambda_lsd = 0.0;
    // score-distillation timestep weighting w(t); constant 1 by default
    std::function<double(int)> lsd_weight = [](int) { return 1.0; };
};

struct GradientReport {
    double loss_lsd   = 0.0;  // logged as 0.5 * ||eps_hat - eps||^2
    double loss_fm    = 0.0;
    double loss_kl    = 0.0;
    double loss_total = 0.0;  // lambda_fm*fm + lambda_kl*kl + lambda_lsd*lsd
    Tensor grad_v;
    int t_used = -1;
};

/* ------------------------- latent score distillation ------------------- */

// grad_v = w * (eps_hat - eps), injected directly at v
Tensor lsd_gradient(const Tensor& v, const Tensor& eps_hat, const Tensor& eps, double w);

/* ------------------------------ KL regularizer ------------------------- */

struct KlOptions {
    bool strict           = false;  // error instead of flooring a degenerate variance
    double variance_floor = 1e-8;
};

struct KlResult {
    double loss = 0.0;
    Tensor grad;
    double mean     = 0.0;
    double variance = 0.0;  // unfloored sample variance
};

// L = 0.5*(mu^2 + var - log(var) + 1) over the latent sample statistics.
// Reductions are permutation invariant (bit-identical under element
// reordering). Requires N >= 2.
KlResult kl_loss(const Tensor& v, const KlOptions& opts = {});

struct LatentMoments {
    double mean     = 0.0;
    double variance = 0.0;
};
LatentMoments latent_moments(const Tensor& v);

/* ---------------------------- feature matching ------------------------- */

struct FmOptions {
    std::vector<int> levels;  // decoder level indices; must be nonempty
    FmReduction reduction = FmReduction::NormalizedMean;
};

struct FmEval {
    double loss = 0.0;
    std::vector<Tensor> level_diffs;  // unscaled F_l(v) - F_l(v + residual)
};

// L = sum over levels of |F_l(v) - F_l(v + residual)|_1 under the reduction
FmEval fm_loss(const Tensor& v, const Tensor& residual, const Decoder& decoder,
               const FmOptions& opts);

struct FmBranchGradients {
    double loss = 0.0;
    Tensor grad_clean;  // d L / d(input of the clean branch)
    Tensor grad_pert;   // d L / d(input of the perturbed branch)
};

FmBranchGradients fm_branch_gradients(const Tensor& v, const Tensor& residual,
                                      const Decoder& decoder, const FmOptions& opts);

// IdentityApprox: (1 + alpha_t) * grad_pert + grad_clean
// StopGradient:   grad_pert + grad_clean
Tensor fm_gradient(const Tensor& v, const Tensor& residual, const Decoder& decoder,
                   const FmOptions& opts, JacobianMode mode, double alpha_t);

/* ------------------------------ combined step -------------------------- */

struct StepOptions {
    JacobianMode mode     = JacobianMode::IdentityApprox;
    double guidance_scale = 7.5;
    FmOptions fm;
    KlOptions kl;
};

// One optimization step worth of prior gradients: perturb v at t with eps,
// query the guided denoiser, assemble lambda-weighted LSD/FM/KL gradients.
// All three losses are reported; a component's gradient is computed only
// when its lambda is nonzero.
GradientReport combined_step(const Tensor& v, int t, const Tensor& eps,
                             const BackendBundle& backend, const NoiseSchedule& schedule,
                             const PriorWeights& weights, const StepOptions& opts,
                             const TextCondition& cond);

void validate_weights(const PriorWeights& weights);

}  // namespace ldp
