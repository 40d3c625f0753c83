#include "ldp/optimize.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>

#include <json.hpp>

#include "ldp/adamw.hpp"
#include "ldp/archive.hpp"
#include "ldp/config.hpp"
#include "ldp/errors.hpp"
#include "ldp/nn_ops.hpp"
#include "ldp/png_io.hpp"
#include "ldp/renderers.hpp"

namespace ldp {

namespace fs = std::filesystem;

/* ------------------------------- presets ------------------------------- */

RunConfig preset(const std::string& name) {
    RunConfig cfg;
    if (name == "image-synthesis") {
        cfg.renderer.kind   = "latent-map";
        cfg.loss.lambda_fm  = 3.0;
        cfg.loss.lambda_kl  = 0.1;
        cfg.loss.lambda_lsd = 1.0;
        cfg.optimizer.lr    = 0.1;
        cfg.iterations      = 1000;
    } else if (name == "layered-edit") {
        cfg.renderer.kind   = "layered-edit";
        cfg.loss.lambda_fm  = 1e-5;
        cfg.loss.lambda_kl  = 1e-7;
        cfg.loss.lambda_lsd = 1e-6;
        cfg.loss.mask_loss  = true;
        cfg.loss.mask_weight = 1.0;
        cfg.optimizer.lr    = 2e-3;
        cfg.iterations      = 1000;
    } else if (name == "lsd-only-baseline") {
        cfg.renderer.kind   = "latent-map";
        cfg.loss.lambda_fm  = 0.0;
        cfg.loss.lambda_kl  = 0.0;
        cfg.loss.lambda_lsd = 1.0;
        cfg.optimizer.lr    = 0.1;
        cfg.iterations      = 1000;
    } else {
        throw ConfigError("unknown preset '" + name +
                          "' (expected image-synthesis, layered-edit or lsd-only-baseline)");
    }
    return cfg;
}

/* ------------------------------ validation ----------------------------- */

JacobianMode parse_jacobian_mode(const std::string& name) {
    if (name == "identity-approx") return JacobianMode::IdentityApprox;
    if (name == "stop-gradient") return JacobianMode::StopGradient;
    throw ConfigError("loss.jacobian_mode must be 'identity-approx' or 'stop-gradient', got '" +
                      name + "'");
}

FmReduction parse_fm_reduction(const std::string& name) {
    if (name == "normalized") return FmReduction::NormalizedMean;
    if (name == "raw-sum") return FmReduction::RawSum;
    throw ConfigError("loss.fm_reduction must be 'normalized' or 'raw-sum', got '" + name + "'");
}

std::vector<int> parse_fm_levels(const std::string& spec,
                                 const std::vector<std::string>& level_names) {
    const int available = static_cast<int>(level_names.size());
    std::vector<int> levels;
    if (spec == "all") {
        for (int i = 0; i < available; ++i) levels.push_back(i);
        return levels;
    }
    size_t pos = 0;
    while (pos < spec.size()) {
        size_t comma = spec.find(',', pos);
        if (comma == std::string::npos) comma = spec.size();
        const std::string token = spec.substr(pos, comma - pos);
        pos = comma + 1;

        const auto named = std::find(level_names.begin(), level_names.end(), token);
        if (named != level_names.end()) {
            levels.push_back(static_cast<int>(named - level_names.begin()));
            continue;
        }
        int idx     = -1;
        size_t used = 0;
        try {
            idx = std::stoi(token, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != token.size()) {
            throw ConfigError("loss.fm_levels: '" + token + "' is neither a level name nor an index");
        }
        if (idx < 0 || idx >= available) {
            throw ConfigError("loss.fm_levels: index " + std::to_string(idx) +
                              " out of range [0, " + std::to_string(available) + ")");
        }
        levels.push_back(idx);
    }
    if (levels.empty()) throw ConfigError("loss.fm_levels must name at least one level");
    return levels;
}

namespace {

MaskReduction parse_mask_reduction(const std::string& name) {
    if (name == "mean") return MaskReduction::Mean;
    if (name == "sum") return MaskReduction::Sum;
    throw ConfigError("loss.mask_reduction must be 'mean' or 'sum', got '" + name + "'");
}

std::function<double(int)> make_lsd_weight(const std::string& name,
                                           std::shared_ptr<const NoiseSchedule> schedule) {
    if (name == "uniform") return [](int) { return 1.0; };
    if (name == "sigma2") {
        return [schedule](int t) {
            const double s = schedule->sigma_t[static_cast<size_t>(t)];
            return s * s;
        };
    }
    throw ConfigError("loss.lsd_weight must be 'uniform' or 'sigma2', got '" + name + "'");
}

}  // namespace

void validate_run_config(const RunConfig& cfg) {
    if (cfg.iterations < 1) throw ConfigError("run.iterations must be >= 1");
    if (cfg.checkpoint_every < 1) throw ConfigError("run.checkpoint_every must be >= 1");
    if (!(cfg.optimizer.lr > 0.0)) throw ConfigError("optimizer.lr must be > 0");
    if (cfg.optimizer.method != "adamw") {
        throw ConfigError("optimizer.method '" + cfg.optimizer.method + "' not supported (adamw)");
    }
    if (cfg.renderer.kind != "latent-map" && cfg.renderer.kind != "layered-edit") {
        throw ConfigError("renderer.kind must be 'latent-map' or 'layered-edit', got '" +
                          cfg.renderer.kind + "'");
    }
    if (cfg.renderer.latent_channels < 1 || cfg.renderer.latent_height < 1 ||
        cfg.renderer.latent_width < 1) {
        throw ConfigError("renderer latent dimensions must be >= 1");
    }
    for (double lambda : {cfg.loss.lambda_fm, cfg.loss.lambda_kl, cfg.loss.lambda_lsd}) {
        if (!std::isfinite(lambda) || lambda < 0.0) {
            throw ConfigError("loss lambdas must be finite and >= 0");
        }
    }
    if (!(cfg.loss.mask_weight >= 0.0)) throw ConfigError("loss.mask_weight must be >= 0");
    if (!(cfg.backend.guidance_scale >= 0.0)) {
        throw ConfigError("backend.guidance_scale must be >= 0");
    }
    if (!(cfg.backend.target_sigma > 0.0)) throw ConfigError("backend.target_sigma must be > 0");
    parse_jacobian_mode(cfg.loss.jacobian_mode);
    parse_fm_reduction(cfg.loss.fm_reduction);
    parse_mask_reduction(cfg.loss.mask_reduction);
    if (cfg.loss.lsd_weight != "uniform" && cfg.loss.lsd_weight != "sigma2") {
        throw ConfigError("loss.lsd_weight must be 'uniform' or 'sigma2'");
    }

    const NoiseSchedule schedule =
        build_linear_schedule(cfg.schedule.num_steps, cfg.schedule.beta_start, cfg.schedule.beta_end);
    validate_range({cfg.schedule.t_min, cfg.schedule.t_max}, schedule);

    if (cfg.renderer.kind == "layered-edit") {
        if (cfg.renderer.image_size < 16 || cfg.renderer.image_size % 16 != 0) {
            throw ConfigError("renderer.image_size must be a positive multiple of 16");
        }
        if (cfg.renderer.generator_features < 1) {
            throw ConfigError("renderer.generator_features must be >= 1");
        }
        for (const auto& [label, path] :
             {std::pair<const char*, const std::string&>{"renderer.image", cfg.renderer.image_path},
              std::pair<const char*, const std::string&>{"renderer.mask", cfg.renderer.mask_path}}) {
            if (path.empty()) throw ConfigError(std::string(label) + " is required for layered-edit");
            if (!fs::exists(path)) {
                throw ConfigError(std::string(label) + ": file '" + path + "' does not exist");
            }
        }
    }
}

/* -------------------------------- run log ------------------------------ */

std::string serialize_runlog(const RunLog& log) {
    std::string out;
    {
        nlohmann::json header;
        header["type"]    = "header";
        header["format"]  = "ldp-runlog";
        header["version"] = 1;
        header["config"]  = log.header;
        out += header.dump();
        out += "\n";
    }
    for (const IterationRecord& rec : log.records) {
        nlohmann::json line;
        line["type"]      = "iter";
        line["iteration"] = rec.iteration;
        line["t"]         = rec.t_used;
        line["loss_lsd"]  = rec.loss_lsd;
        line["loss_fm"]   = rec.loss_fm;
        line["loss_kl"]   = rec.loss_kl;
        line["loss_extra"] = rec.loss_extra;
        line["loss_total"] = rec.loss_total;
        line["grad_norm"]  = rec.grad_norm;
        out += line.dump();
        out += "\n";
    }
    {
        nlohmann::json final_line;
        final_line["type"]      = "final";
        final_line["artifacts"] = log.artifacts;
        out += final_line.dump();
        out += "\n";
    }
    return out;
}

/* ------------------------------- the loop ------------------------------ */

namespace {

std::unique_ptr<Renderer> build_renderer(const RunConfig& cfg, const BackendBundle& bundle,
                                         Rng& rng) {
    if (cfg.renderer.kind == "latent-map") {
        return init_latent_map(rng, {cfg.renderer.latent_channels, cfg.renderer.latent_height,
                                     cfg.renderer.latent_width});
    }

    Tensor image = read_png_rgb(cfg.renderer.image_path);
    Tensor mask  = read_png_gray(cfg.renderer.mask_path);
    if (image.dim(1) != mask.dim(1) || image.dim(2) != mask.dim(2)) {
        throw ConfigError("layered edit: image " + shape_str(image.shape()) + " and mask " +
                          shape_str(mask.shape()) + " sizes differ");
    }
    const int size = cfg.renderer.image_size;
    image          = resize_bilinear(image, size, size);
    mask           = resize_bilinear(mask, size, size);

    LayeredEditOptions options;
    options.stop_grad_encoder = cfg.renderer.stop_grad_encoder;
    options.mask_supervision  = cfg.loss.mask_loss;
    options.mask_weight       = cfg.loss.mask_weight;
    options.mask_reduction    = parse_mask_reduction(cfg.loss.mask_reduction);

    return std::make_unique<LayeredEditRenderer>(std::move(image), std::move(mask), bundle.encoder,
                                                 bundle.decoder, cfg.renderer.generator_features,
                                                 options, rng);
}

void write_checkpoint(const std::string& path, Renderer& renderer, int iteration) {
    std::vector<std::pair<std::string, Tensor>> arrays;
    for (const ParamRef& p : renderer.params()) arrays.emplace_back(p.name, *p.value);
    write_archive(path, arrays,
                  {{"iteration", std::to_string(iteration)}, {"renderer", renderer.kind()}});
}

std::vector<int> latent_shape_for(const RunConfig& cfg) {
    if (cfg.renderer.kind == "latent-map") {
        return {cfg.renderer.latent_channels, cfg.renderer.latent_height, cfg.renderer.latent_width};
    }
    const int side = cfg.renderer.image_size / 8;
    return {cfg.renderer.latent_channels, side, side};
}

}  // namespace

RunLog run_optimization(const RunConfig& cfg) {
    validate_run_config(cfg);
    auto schedule = std::make_shared<NoiseSchedule>(
        build_linear_schedule(cfg.schedule.num_steps, cfg.schedule.beta_start, cfg.schedule.beta_end));
    const BackendBundle bundle = make_backend(cfg.backend, latent_shape_for(cfg), schedule);
    return run_optimization(cfg, bundle);
}

RunLog run_optimization(const RunConfig& cfg, const BackendBundle& bundle) {
    validate_run_config(cfg);

    const NoiseSchedule schedule =
        build_linear_schedule(cfg.schedule.num_steps, cfg.schedule.beta_start, cfg.schedule.beta_end);
    auto schedule_ref = std::make_shared<const NoiseSchedule>(schedule);
    const TimestepRange range{cfg.schedule.t_min, cfg.schedule.t_max};
    validate_range(range, schedule);

    Rng rng(cfg.seed);
    std::unique_ptr<Renderer> renderer = build_renderer(cfg, bundle, rng);
    std::vector<ParamRef> params       = renderer->params();

    PriorWeights weights;
    weights.lambda_fm  = cfg.loss.lambda_fm;
    weights.lambda_kl  = cfg.loss.lambda_kl;
    weights.lambda_lsd = cfg.loss.lambda_lsd;
    weights.lsd_weight = make_lsd_weight(cfg.loss.lsd_weight, schedule_ref);

    StepOptions opts;
    opts.mode           = parse_jacobian_mode(cfg.loss.jacobian_mode);
    opts.guidance_scale = cfg.backend.guidance_scale;
    opts.fm.levels      = parse_fm_levels(cfg.loss.fm_levels, bundle.decoder->level_names());
    opts.fm.reduction   = parse_fm_reduction(cfg.loss.fm_reduction);
    opts.kl.strict      = cfg.loss.kl_strict;

    const TextCondition cond = bundle.embedder->condition(cfg.prompt);

    AdamWConfig adam_cfg;
    adam_cfg.lr           = cfg.optimizer.lr;
    adam_cfg.beta1        = cfg.optimizer.beta1;
    adam_cfg.beta2        = cfg.optimizer.beta2;
    adam_cfg.eps          = cfg.optimizer.eps;
    adam_cfg.weight_decay = cfg.optimizer.weight_decay;
    AdamW adam(adam_cfg);

    const bool learning_active = cfg.loss.lambda_fm != 0.0 || cfg.loss.lambda_kl != 0.0 ||
                                 cfg.loss.lambda_lsd != 0.0 ||
                                 (renderer->has_extra_loss() && cfg.loss.mask_weight != 0.0);

    fs::create_directories(cfg.out_dir);
    const std::string checkpoint_path = (fs::path(cfg.out_dir) / "checkpoint.lda").string();
    const std::string runlog_path     = (fs::path(cfg.out_dir) / "runlog.jsonl").string();

    RunLog log;
    log.header = config_kv(cfg);
    log.records.reserve(static_cast<size_t>(cfg.iterations));

    for (int iter = 1; iter <= cfg.iterations; ++iter) {
        const auto start = std::chrono::steady_clock::now();

        renderer->zero_grad();
        const Tensor v = renderer->render();
        const int t    = sample_timestep(rng, range);
        Tensor eps(v.shape());
        for (int64_t i = 0; i < eps.size(); ++i) eps[i] = rng.normal();

        const GradientReport report = combined_step(v, t, eps, bundle, schedule, weights, opts, cond);
        if (!report.grad_v.all_finite()) {
            throw RunAborted(iter, "non-finite latent gradient");
        }

        const BackwardResult extra = renderer->backward(report.grad_v);

        double grad_sq = 0.0;
        for (const ParamRef& p : params) {
            if (!p.grad->all_finite()) {
                throw RunAborted(iter, "non-finite gradient in parameter '" + p.name + "'");
            }
            grad_sq += dot(*p.grad, *p.grad);
        }

        if (learning_active) renderer->apply_update(adam);

        IterationRecord rec;
        rec.iteration  = iter;
        rec.t_used     = t;
        rec.loss_lsd   = report.loss_lsd;
        rec.loss_fm    = report.loss_fm;
        rec.loss_kl    = report.loss_kl;
        rec.loss_extra = extra.extra_loss;
        rec.loss_total = report.loss_total + extra.extra_loss;
        rec.grad_norm  = std::sqrt(grad_sq);
        rec.wall_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
                .count();
        log.records.push_back(rec);

        if (iter % cfg.checkpoint_every == 0 && iter != cfg.iterations) {
            write_checkpoint(checkpoint_path, *renderer, iter);
        }
    }

    write_checkpoint(checkpoint_path, *renderer, cfg.iterations);
    log.artifacts.push_back(checkpoint_path);

    if (auto* latent_map = dynamic_cast<LatentMapRenderer*>(renderer.get())) {
        const std::string image_path = (fs::path(cfg.out_dir) / "final.png").string();
        write_png_rgb(image_path, bundle.decoder->decode(latent_map->theta()));
        log.artifacts.push_back(image_path);
    } else if (auto* layered = dynamic_cast<LayeredEditRenderer*>(renderer.get())) {
        const LayeredForward out  = layered->forward_full();
        const std::string edited  = (fs::path(cfg.out_dir) / "edited.png").string();
        const std::string alpha   = (fs::path(cfg.out_dir) / "alpha.png").string();
        const std::string layer   = (fs::path(cfg.out_dir) / "edit_layer.png").string();
        write_png_rgb(edited, out.image);
        write_png_gray(alpha, out.alpha);
        write_png_rgb(layer, out.edit);
        log.artifacts.push_back(edited);
        log.artifacts.push_back(alpha);
        log.artifacts.push_back(layer);
    }

    log.artifacts.push_back(runlog_path);
    std::ofstream runlog_file(runlog_path, std::ios::binary | std::ios::trunc);
    runlog_file << serialize_runlog(log);

    return log;
}

}  // namespace ldp
