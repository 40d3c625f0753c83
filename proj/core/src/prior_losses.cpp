#include "ldp/prior_losses.hpp"

#include <cmath>

#include "ldp/errors.hpp"
#include "ldp/exact_sum.hpp"

namespace ldp {

/* ------------------------- latent score distillation ------------------- */

Tensor lsd_gradient(const Tensor& v, const Tensor& eps_hat, const Tensor& eps, double w) {
    require_same_shape(v, eps_hat, "lsd_gradient");
    require_same_shape(v, eps, "lsd_gradient");
    if (!(w >= 0.0) || !std::isfinite(w)) {
        throw ArgumentError("lsd_gradient: weight must be finite and >= 0, got " + std::to_string(w));
    }
    Tensor grad(v.shape());
    for (int64_t i = 0; i < v.size(); ++i) grad[i] = w * (eps_hat[i] - eps[i]);
    return grad;
}

/* ------------------------------ KL regularizer ------------------------- */

LatentMoments latent_moments(const Tensor& v) {
    const int64_t n = v.size();
    std::vector<double> scratch;
    const double mu = stable_sum({v.data(), static_cast<size_t>(n)}, scratch) / static_cast<double>(n);

    std::vector<double> sq(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
        const double d = v[i] - mu;
        sq[static_cast<size_t>(i)] = d * d;
    }
    const double var = stable_sum(sq, scratch) / static_cast<double>(n);
    return {mu, var};
}

KlResult kl_loss(const Tensor& v, const KlOptions& opts) {
    const int64_t n = v.size();
    if (n < 2) {
        throw ArgumentError("kl_loss: needs at least 2 elements, got " + std::to_string(n));
    }

    const LatentMoments m = latent_moments(v);
    const bool degenerate = m.variance < opts.variance_floor;
    if (degenerate && opts.strict) {
        throw NumericError("kl_loss: variance " + std::to_string(m.variance) +
                           " below floor in strict mode (degenerate latent)");
    }
    const double var_eff = degenerate ? opts.variance_floor : m.variance;

    KlResult result;
    result.mean     = m.mean;
    result.variance = m.variance;
    result.loss     = 0.5 * (m.mean * m.mean + var_eff - std::log(var_eff) + 1.0);

    // dL/dmu = mu, dL/dvar = 0.5*(1 - 1/var); dmu/dv_i = 1/N,
    // dvar/dv_i = 2*(v_i - mu)/N. The variance path is cut when floored.
    result.grad = Tensor(v.shape());
    const double inv_n    = 1.0 / static_cast<double>(n);
    const double var_coef = degenerate ? 0.0 : (1.0 - 1.0 / var_eff) * inv_n;
    for (int64_t i = 0; i < n; ++i) {
        result.grad[i] = m.mean * inv_n + var_coef * (v[i] - m.mean);
    }
    return result;
}

/* ---------------------------- feature matching ------------------------- */

namespace {

double reduction_scale(const FmOptions& opts, int64_t latent_elements) {
    if (opts.reduction == FmReduction::RawSum) return 1.0;
    return 1.0 / (static_cast<double>(opts.levels.size()) * static_cast<double>(latent_elements));
}

void check_fm_args(const Tensor& v, const Tensor& residual, const FmOptions& opts) {
    require_same_shape(v, residual, "fm_loss");
    if (opts.levels.empty()) throw ArgumentError("fm_loss: level set must be nonempty");
}

// L1 subgradient with sign(0) = 0, so residual = 0 is a true stationary point
inline double l1_sign(double d) { return d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0); }

}  // namespace

FmEval fm_loss(const Tensor& v, const Tensor& residual, const Decoder& decoder,
               const FmOptions& opts) {
    check_fm_args(v, residual, opts);
    const Tensor v_pert = v + residual;

    std::vector<Tensor> clean = decoder.decode_features(v, opts.levels);
    std::vector<Tensor> pert  = decoder.decode_features(v_pert, opts.levels);

    FmEval eval;
    eval.level_diffs.reserve(opts.levels.size());
    double raw = 0.0;
    for (size_t l = 0; l < opts.levels.size(); ++l) {
        Tensor diff = clean[l] - pert[l];
        for (int64_t i = 0; i < diff.size(); ++i) raw += std::abs(diff[i]);
        eval.level_diffs.push_back(std::move(diff));
    }
    eval.loss = raw * reduction_scale(opts, v.size());
    return eval;
}

FmBranchGradients fm_branch_gradients(const Tensor& v, const Tensor& residual,
                                      const Decoder& decoder, const FmOptions& opts) {
    check_fm_args(v, residual, opts);
    const Tensor v_pert = v + residual;
    const double scale  = reduction_scale(opts, v.size());

    std::vector<Tensor> clean = decoder.decode_features(v, opts.levels);
    std::vector<Tensor> pert  = decoder.decode_features(v_pert, opts.levels);

    FmBranchGradients out;
    std::vector<Tensor> cot_clean(opts.levels.size());
    std::vector<Tensor> cot_pert(opts.levels.size());
    double raw = 0.0;
    for (size_t l = 0; l < opts.levels.size(); ++l) {
        cot_clean[l] = Tensor(clean[l].shape());
        cot_pert[l]  = Tensor(pert[l].shape());
        for (int64_t i = 0; i < clean[l].size(); ++i) {
            const double d = clean[l][i] - pert[l][i];
            raw += std::abs(d);
            const double s  = l1_sign(d) * scale;
            cot_clean[l][i] = s;
            cot_pert[l][i]  = -s;
        }
    }
    out.loss       = raw * scale;
    out.grad_clean = decoder.decode_features_vjp(v, opts.levels, cot_clean);
    out.grad_pert  = decoder.decode_features_vjp(v_pert, opts.levels, cot_pert);
    return out;
}

Tensor fm_gradient(const Tensor& v, const Tensor& residual, const Decoder& decoder,
                   const FmOptions& opts, JacobianMode mode, double alpha_t) {
    FmBranchGradients branches = fm_branch_gradients(v, residual, decoder, opts);
    const double pert_factor = mode == JacobianMode::IdentityApprox ? 1.0 + alpha_t : 1.0;
    Tensor grad = branches.grad_clean;
    axpy(pert_factor, branches.grad_pert, grad);
    return grad;
}

/* ------------------------------ combined step -------------------------- */

void validate_weights(const PriorWeights& weights) {
    for (double lambda : {weights.lambda_fm, weights.lambda_kl, weights.lambda_lsd}) {
        if (!std::isfinite(lambda) || lambda < 0.0) {
            throw ArgumentError("prior weights must be finite and >= 0");
        }
    }
    if (!weights.lsd_weight) throw ArgumentError("lsd_weight function must be set");
}

GradientReport combined_step(const Tensor& v, int t, const Tensor& eps,
                             const BackendBundle& backend, const NoiseSchedule& schedule,
                             const PriorWeights& weights, const StepOptions& opts,
                             const TextCondition& cond) {
    validate_weights(weights);
    if (!v.all_finite()) throw ArgumentError("combined_step: latent contains NaN/Inf");
    if (t < 0 || t >= schedule.num_steps) {
        throw ArgumentError("combined_step: timestep " + std::to_string(t) + " outside schedule");
    }

    // errors keep their type but gain the component name
    auto component = [&](const char* name, auto&& fn) {
        const std::string prefix = std::string("combined_step[") + name + "]: ";
        try {
            return fn();
        } catch (const ArgumentError& e) {
            throw ArgumentError(prefix + e.what());
        } catch (const NumericError& e) {
            throw NumericError(prefix + e.what());
        } catch (const BackendError& e) {
            throw BackendError(prefix + e.what());
        } catch (const std::exception& e) {
            throw BackendError(prefix + e.what());
        }
    };

    const Tensor z_t = perturb(v, eps, t, schedule);
    const Tensor eps_hat =
        component("denoiser", [&] { return guided_noise(*backend.denoiser, z_t, t, cond,
                                                        opts.guidance_scale); });
    const Tensor residual = eps_hat - eps;

    GradientReport report;
    report.t_used = t;
    report.grad_v = Tensor(v.shape());

    // LSD: loss logged as 0.5*||residual||^2; the gradient is the injected
    // w(t)-weighted residual, not the gradient of that scalar.
    report.loss_lsd = 0.5 * dot(residual, residual);
    if (weights.lambda_lsd != 0.0) {
        const double w = weights.lsd_weight(t);
        axpy(weights.lambda_lsd, lsd_gradient(v, eps_hat, eps, w), report.grad_v);
    }

    if (weights.lambda_fm != 0.0) {
        FmBranchGradients fm = component(
            "feature-matching", [&] { return fm_branch_gradients(v, residual, *backend.decoder, opts.fm); });
        report.loss_fm = fm.loss;
        const double pert_factor =
            opts.mode == JacobianMode::IdentityApprox ? 1.0 + schedule.alpha_t[static_cast<size_t>(t)]
                                                      : 1.0;
        axpy(weights.lambda_fm, fm.grad_clean, report.grad_v);
        axpy(weights.lambda_fm * pert_factor, fm.grad_pert, report.grad_v);
    } else {
        report.loss_fm = component(
            "feature-matching", [&] { return fm_loss(v, residual, *backend.decoder, opts.fm).loss; });
    }

    {
        const KlResult kl = component("kl", [&] { return kl_loss(v, opts.kl); });
        report.loss_kl    = kl.loss;
        if (weights.lambda_kl != 0.0) axpy(weights.lambda_kl, kl.grad, report.grad_v);
    }

    report.loss_total = weights.lambda_fm * report.loss_fm + weights.lambda_kl * report.loss_kl +
                        weights.lambda_lsd * report.loss_lsd;
    return report;
}

}  // namespace ldp
