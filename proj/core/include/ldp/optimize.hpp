#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ldp/backend.hpp"
#include "ldp/prior_losses.hpp"

namespace ldp {

struct ScheduleSpec {
    int num_steps     = 1000;
    double beta_start = 0.00085;
    double beta_end   = 0.012;
    int t_min         = kDefaultTMin;
    int t_max         = kDefaultTMax;
};

struct RendererSpec {
    std::string kind   = "latent-map";  // latent-map | layered-edit
    int latent_channels = 4;
    int latent_height   = 64;
    int latent_width    = 64;
    std::string image_path;  // layered-edit input PNG
    std::string mask_path;   // layered-edit mask PNG (grayscale in [0,1])
    int image_size          = 512;  // inputs resized so latents are image_size/8
    bool stop_grad_encoder  = false;
    int generator_features  = 16;
};

struct LossSpec {
    double lambda_fm  = 0.0;
    double lambda_kl  = 0.0;
    double lambda_lsd = 1.0;
    std::string jacobian_mode = "identity-approx";  // identity-approx | stop-gradient
    std::string fm_reduction  = "normalized";       // normalized | raw-sum
    std::string fm_levels     = "all";              // "all" or comma-separated indices
    bool kl_strict            = false;
    std::string lsd_weight    = "uniform";  // uniform | sigma2
    bool mask_loss            = false;
    double mask_weight        = 1.0;
    std::string mask_reduction = "mean";  // mean | sum
};

struct OptimizerSpec {
    std::string method  = "adamw";
    double lr           = 0.1;
    double beta1        = 0.9;
    double beta2        = 0.999;
    double eps          = 1e-8;
    double weight_decay = 0.0;
};

struct RunConfig {
    RendererSpec renderer;
    BackendSpec backend;
    ScheduleSpec schedule;
    LossSpec loss;
    OptimizerSpec optimizer;
    int iterations = 1000;
    uint64_t seed  = 0;
    std::string prompt;
    std::string out_dir  = "out";
    int checkpoint_every = 100;
};

// throws ConfigError on any invalid field or missing referenced file
void validate_run_config(const RunConfig& cfg);

// Published hyperparameter presets:
//   image-synthesis    latent map, 1000 iters, lr 0.1, lambdas (3.0, 0.1, 1.0)
//   layered-edit       CNN edit layer, lambdas (1e-5, 1e-7, 1e-6) + mask term
//   lsd-only-baseline  image-synthesis with lambda_fm = lambda_kl = 0
RunConfig preset(const std::string& name);

/* -------------------------------- run log ------------------------------ */

struct IterationRecord {
    int iteration = 0;
    int t_used    = 0;
    double loss_lsd   = 0.0;
    double loss_fm    = 0.0;
    double loss_kl    = 0.0;
    double loss_extra = 0.0;
    double loss_total = 0.0;  // lambda-weighted priors + extra terms
    double grad_norm  = 0.0;
    double wall_ms    = 0.0;  // in-memory only; never serialized (determinism)
};

struct RunLog {
    std::map<std::string, std::string> header;  // resolved config, key -> value
    std::vector<IterationRecord> records;
    std::vector<std::string> artifacts;
};

// line-delimited JSON; byte-identical for matched config/seed on mock backends
std::string serialize_runlog(const RunLog& log);

/* ------------------------------ entry points --------------------------- */

// Runs the full loop, writing the final image(s), a rolling checkpoint
// (checkpoint.lda) and runlog.jsonl under cfg.out_dir. Aborts with RunAborted
// on any non-finite gradient.
RunLog run_optimization(const RunConfig& cfg);
RunLog run_optimization(const RunConfig& cfg, const BackendBundle& bundle);

/* ------------------------- spec <-> enum helpers ------------------------ */

JacobianMode parse_jacobian_mode(const std::string& name);
FmReduction parse_fm_reduction(const std::string& name);
// "all", comma-separated indices, or comma-separated decoder level names
std::vector<int> parse_fm_levels(const std::string& spec, const std::vector<std::string>& level_names);

}  // namespace ldp
