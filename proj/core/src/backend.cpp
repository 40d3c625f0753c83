#include "ldp/backend.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "ldp/archive.hpp"
#include "ldp/errors.hpp"
#include "ldp/nn_ops.hpp"

namespace ldp {

namespace fs = std::filesystem;

/* ------------------------------ guidance ------------------------------ */

Tensor guided_noise(const Denoiser& denoiser, const Tensor& z_t, int t, const TextCondition& cond,
                    double guidance_scale) {
    if (!(guidance_scale >= 0.0)) {
        throw ArgumentError("guided_noise: guidance scale must be >= 0, got " +
                            std::to_string(guidance_scale));
    }
    if ((cond.embedding_handle >> 48) != (cond.null_handle >> 48)) {
        throw ArgumentError("guided_noise: condition handles come from different backends");
    }
    Tensor eps_uncond, eps_cond;
    try {
        eps_uncond = denoiser.predict(z_t, t, cond.null_handle);
    } catch (const NumericError&) {
        throw;
    } catch (const ArgumentError&) {
        throw;
    } catch (const std::exception& e) {
        throw BackendError(std::string("guided_noise: unconditional denoiser call failed: ") + e.what());
    }
    try {
        eps_cond = denoiser.predict(z_t, t, cond.embedding_handle);
    } catch (const NumericError&) {
        throw;
    } catch (const ArgumentError&) {
        throw;
    } catch (const std::exception& e) {
        throw BackendError(std::string("guided_noise: conditional denoiser call failed: ") + e.what());
    }
    // eps_uncond + s * (eps_cond - eps_uncond)
    Tensor out(z_t.shape());
    for (int64_t i = 0; i < out.size(); ++i) {
        out[i] = eps_uncond[i] + guidance_scale * (eps_cond[i] - eps_uncond[i]);
    }
    return out;
}

Tensor Denoiser::predict_noise(const Tensor& z_t, int t, const TextCondition& cond,
                               double guidance_scale) const {
    return guided_noise(*this, z_t, t, cond, guidance_scale);
}

/* --------------------------- point-mass mock --------------------------- */

MockPointMassDenoiser::MockPointMassDenoiser(Tensor target,
                                             std::shared_ptr<const NoiseSchedule> schedule)
    : target_(std::move(target)), schedule_(std::move(schedule)) {}

Tensor MockPointMassDenoiser::predict(const Tensor& z_t, int t, EmbeddingHandle /*embedding*/) const {
    require_same_shape(z_t, target_, "MockPointMassDenoiser::predict");
    if (t < 0 || t >= schedule_->num_steps) {
        throw ArgumentError("MockPointMassDenoiser: timestep " + std::to_string(t) +
                            " outside schedule");
    }
    const double a = schedule_->alpha_t[static_cast<size_t>(t)];
    const double s = schedule_->sigma_t[static_cast<size_t>(t)];
    if (s == 0.0) {
        throw NumericError("MockPointMassDenoiser: sigma_t = 0 at t=" + std::to_string(t) +
                           " (degenerate timestep)");
    }
    Tensor out(z_t.shape());
    for (int64_t i = 0; i < out.size(); ++i) out[i] = (z_t[i] - a * target_[i]) / s;
    return out;
}

/* ----------------------------- linear mock ----------------------------- */

MockLinearDenoiser::MockLinearDenoiser(int channels, uint64_t seed) : channels_(channels) {
    Rng rng(seed ^ 0x6e5d1157u);
    weight_ = Tensor({channels, channels, 1, 1});
    for (int co = 0; co < channels; ++co) {
        for (int ci = 0; ci < channels; ++ci) {
            weight_[co * channels + ci] = (co == ci ? 1.0 : 0.0) + 0.1 * rng.normal();
        }
    }
}

Tensor MockLinearDenoiser::predict(const Tensor& z_t, int t, EmbeddingHandle embedding) const {
    (void)t;
    if (z_t.dim(0) != channels_) {
        throw ArgumentError("MockLinearDenoiser: latent has " + std::to_string(z_t.dim(0)) +
                            " channels, expected " + std::to_string(channels_));
    }
    Tensor out = conv2d(z_t, weight_, Tensor(), 1, 0);
    // deterministic per-embedding channel bias so cond != uncond
    Rng bias_rng(embedding * 0x9e3779b97f4a7c15ull + 1);
    for (int c = 0; c < channels_; ++c) {
        const double b = 0.05 * bias_rng.normal();
        const int64_t plane = static_cast<int64_t>(z_t.dim(1)) * z_t.dim(2);
        for (int64_t i = 0; i < plane; ++i) out[c * plane + i] += b;
    }
    return out;
}

/* ----------------------------- linear decoder -------------------------- */

LinearDecoder::LinearDecoder(std::vector<Level> levels, Tensor head_weight, int head_factor)
    : levels_(std::move(levels)), head_weight_(std::move(head_weight)), head_factor_(head_factor) {}

std::vector<std::string> LinearDecoder::level_names() const {
    std::vector<std::string> names;
    names.reserve(levels_.size());
    for (const auto& level : levels_) names.push_back(level.name);
    return names;
}

void LinearDecoder::check_levels(const std::vector<int>& levels) const {
    for (int idx : levels) {
        if (idx < 0 || idx >= num_levels()) {
            throw ArgumentError("decoder: level index " + std::to_string(idx) +
                                " out of range [0, " + std::to_string(num_levels()) + ")");
        }
    }
}

Tensor LinearDecoder::decode(const Tensor& v) const {
    Tensor up = head_factor_ == 1 ? v : upsample_nearest(v, head_factor_);
    return sigmoid(conv2d(up, head_weight_, Tensor(), 1, 1));
}

std::vector<Tensor> LinearDecoder::decode_features(const Tensor& v,
                                                   const std::vector<int>& levels) const {
    check_levels(levels);
    std::vector<Tensor> features;
    features.reserve(levels.size());
    for (int idx : levels) {
        const Level& level = levels_[static_cast<size_t>(idx)];
        Tensor up = level.factor == 1 ? v : upsample_nearest(v, level.factor);
        features.push_back(conv2d(up, level.weight, Tensor(), 1, 1));
    }
    return features;
}

Tensor LinearDecoder::decode_features_vjp(const Tensor& v, const std::vector<int>& levels,
                                          const std::vector<Tensor>& cotangents) const {
    check_levels(levels);
    if (cotangents.size() != levels.size()) {
        throw ArgumentError("decoder vjp: " + std::to_string(cotangents.size()) +
                            " cotangents for " + std::to_string(levels.size()) + " levels");
    }
    Tensor grad(v.shape());
    for (size_t i = 0; i < levels.size(); ++i) {
        const Level& level = levels_[static_cast<size_t>(levels[i])];
        const std::vector<int> up_shape = {v.dim(0), v.dim(1) * level.factor, v.dim(2) * level.factor};
        Tensor g_up = conv2d_backward_input(cotangents[i], level.weight, up_shape, 1, 1);
        grad += level.factor == 1 ? g_up : upsample_nearest_adjoint(g_up, level.factor);
    }
    return grad;
}

/* ----------------------------- linear encoder -------------------------- */

LinearEncoder::LinearEncoder(Tensor lift_weight, int factor)
    : lift_weight_(std::move(lift_weight)), factor_(factor) {}

Tensor LinearEncoder::encode(const Tensor& rgb) const {
    if (rgb.shape().size() != 3 || rgb.dim(0) != 3) {
        throw ArgumentError("encode: expected a {3,H,W} RGB tensor, got " + shape_str(rgb.shape()));
    }
    return conv2d(avg_pool(rgb, factor_), lift_weight_, Tensor(), 1, 0);
}

Tensor LinearEncoder::encode_vjp(const Tensor& rgb, const Tensor& grad_latent) const {
    const std::vector<int> pooled_shape = {3, rgb.dim(1) / factor_, rgb.dim(2) / factor_};
    Tensor g_pooled = conv2d_backward_input(grad_latent, lift_weight_, pooled_shape, 1, 0);
    return avg_pool_adjoint(g_pooled, factor_, rgb.shape());
}

/* ----------------------------- constructors ---------------------------- */

namespace {

Tensor seeded_conv_weight(Rng& rng, int c_out, int c_in, int k) {
    Tensor w({c_out, c_in, k, k});
    const double scale = 1.0 / std::sqrt(static_cast<double>(c_in * k * k));
    for (int64_t i = 0; i < w.size(); ++i) w[i] = scale * rng.normal();
    return w;
}

std::vector<LinearDecoder::Level> default_levels(Rng& rng, int latent_channels) {
    // taps at the three upsampling stages: 1x, 2x, 4x of the latent grid
    const int channels[3] = {8, 6, 3};
    const int factors[3]  = {1, 2, 4};
    const char* names[3]  = {"up1x", "up2x", "up4x"};
    std::vector<LinearDecoder::Level> levels;
    for (int l = 0; l < 3; ++l) {
        levels.push_back({names[l], factors[l], seeded_conv_weight(rng, channels[l], latent_channels, 3)});
    }
    return levels;
}

}  // namespace

std::shared_ptr<LinearDecoder> make_mock_linear_decoder(uint64_t seed, int latent_channels) {
    Rng rng(seed ^ 0xdecdecdeull);
    auto levels = default_levels(rng, latent_channels);
    Tensor head = seeded_conv_weight(rng, 3, latent_channels, 3);
    return std::make_shared<LinearDecoder>(std::move(levels), std::move(head), 8);
}

std::shared_ptr<LinearEncoder> make_mock_linear_encoder(uint64_t seed, int latent_channels,
                                                        int factor) {
    Rng rng(seed ^ 0xe2c0de2ull);
    return std::make_shared<LinearEncoder>(seeded_conv_weight(rng, latent_channels, 3, 1), factor);
}

/* ------------------------------ embedder ------------------------------- */

namespace {

class HashEmbedder : public TextEmbedder {
public:
    explicit HashEmbedder(uint64_t instance_tag) : tag_(instance_tag & 0xffff) {}

    TextCondition condition(const std::string& prompt) override {
        TextCondition cond;
        cond.prompt           = prompt;
        cond.embedding_handle = handle_for(prompt);
        cond.null_handle      = handle_for("");
        return cond;
    }

private:
    EmbeddingHandle handle_for(const std::string& text) {
        auto it = cache_.find(text);
        if (it != cache_.end()) return it->second;
        // FNV-1a, instance tag in the top 16 bits
        uint64_t h = 1469598103934665603ull;
        for (unsigned char c : text) {
            h ^= c;
            h *= 1099511628211ull;
        }
        const EmbeddingHandle handle = (tag_ << 48) | (h & 0xffffffffffffull);
        cache_.emplace(text, handle);
        return handle;
    }

    uint64_t tag_;
    std::unordered_map<std::string, EmbeddingHandle> cache_;
};

Tensor make_point_mass_target(const BackendSpec& spec, const std::vector<int>& latent_shape) {
    if (spec.target_init == "zeros") return Tensor::zeros(latent_shape);
    if (spec.target_init != "randn") {
        throw ConfigError("backend.target_init must be 'randn' or 'zeros', got '" +
                          spec.target_init + "'");
    }
    Rng rng(spec.seed ^ 0x7a26e7ull);
    Tensor target = Tensor::randn(latent_shape, rng);
    // standardize so the sample stats are exactly (0, target_sigma^2)
    const double mu = mean(target);
    double var      = 0.0;
    for (int64_t i = 0; i < target.size(); ++i) {
        const double d = target[i] - mu;
        var += d * d;
    }
    var /= static_cast<double>(target.size());
    const double scale = spec.target_sigma / std::sqrt(var);
    for (int64_t i = 0; i < target.size(); ++i) target[i] = (target[i] - mu) * scale;
    return target;
}

}  // namespace

/* ------------------------------- factory ------------------------------- */

BackendBundle make_backend(const BackendSpec& spec, const std::vector<int>& latent_shape,
                           std::shared_ptr<const NoiseSchedule> schedule) {
    if (latent_shape.size() != 3) {
        throw ConfigError("backend: latent shape must be CHW, got " + shape_str(latent_shape));
    }
    const int channels = latent_shape[0];

    BackendBundle bundle;
    if (spec.kind == "mock-pointmass") {
        bundle.denoiser = std::make_shared<MockPointMassDenoiser>(
            make_point_mass_target(spec, latent_shape), std::move(schedule));
    } else if (spec.kind == "mock-linear") {
        bundle.denoiser = std::make_shared<MockLinearDenoiser>(channels, spec.seed);
    } else if (spec.kind == "pretrained") {
        std::string path = spec.weights_path;
        if (path.empty()) {
            if (const char* env = std::getenv("LDP_WEIGHTS_DIR")) path = env;
        }
        if (path.empty()) {
            throw ConfigError("backend 'pretrained' needs backend.weights_path or LDP_WEIGHTS_DIR");
        }
        return load_real_backend(path, spec.device);
    } else {
        throw ConfigError("unknown backend kind '" + spec.kind +
                          "' (expected mock-pointmass, mock-linear or pretrained)");
    }

    bundle.decoder  = make_mock_linear_decoder(spec.seed, channels);
    bundle.encoder  = make_mock_linear_encoder(spec.seed, channels, 8);
    bundle.embedder = std::make_shared<HashEmbedder>(spec.seed);
    return bundle;
}

/* --------------------------- pretrained bundle -------------------------- */

namespace {
constexpr const char* kBundleFormat  = "ldp-backend";
constexpr const char* kBundleVersion = "linear-v1";
}  // namespace

BackendBundle load_real_backend(const std::string& weights_path, const std::string& device) {
    if (!device.empty() && device != "cpu") {
        throw ConfigError("backend device '" + device + "' not supported (use 'cpu')");
    }
    const fs::path dir(weights_path);
    if (!fs::exists(dir)) {
        throw LoadError("pretrained weights not found at '" + weights_path + "'");
    }
    const fs::path manifest_path = dir / "manifest.json";
    std::ifstream in(manifest_path);
    if (!in) {
        throw LoadError("pretrained bundle at '" + weights_path + "' is missing manifest.json");
    }
    nlohmann::json manifest;
    try {
        in >> manifest;
    } catch (const std::exception& e) {
        throw LoadError("pretrained bundle manifest '" + manifest_path.string() +
                        "' is corrupt: " + e.what());
    }
    if (manifest.value("format", "") != kBundleFormat) {
        throw LoadError("'" + manifest_path.string() + "' is not a backend bundle manifest");
    }
    const std::string version = manifest.value("version", "");
    if (version != kBundleVersion) {
        throw ConfigError("unsupported backend version '" + version + "' in '" + weights_path +
                          "' (this build supports '" + std::string(kBundleVersion) + "')");
    }

    const std::string weights_file = manifest.value("weights", "weights.lda");
    Archive archive = read_archive((dir / weights_file).string());

    auto take = [&](const std::string& name) -> Tensor {
        auto it = archive.arrays.find(name);
        if (it == archive.arrays.end()) {
            throw LoadError("pretrained bundle '" + weights_path + "' is missing array '" + name + "'");
        }
        return it->second;
    };

    const int downsample = manifest.value("downsample", 8);

    std::vector<LinearDecoder::Level> levels;
    for (const auto& entry : manifest.at("levels")) {
        LinearDecoder::Level level;
        level.name   = entry.at("name").get<std::string>();
        level.factor = entry.at("factor").get<int>();
        level.weight = take("decoder." + level.name + ".weight");
        levels.push_back(std::move(level));
    }
    if (levels.empty()) {
        throw LoadError("pretrained bundle '" + weights_path + "' declares no decoder levels");
    }

    BackendBundle bundle;
    bundle.decoder = std::make_shared<LinearDecoder>(std::move(levels), take("decoder.head.weight"),
                                                     downsample);
    bundle.encoder = std::make_shared<LinearEncoder>(take("encoder.weight"), downsample);

    struct LoadedDenoiser : Denoiser {
        Tensor weight;
        Tensor predict(const Tensor& z_t, int t, EmbeddingHandle embedding) const override {
            (void)t;
            (void)embedding;
            return conv2d(z_t, weight, Tensor(), 1, 0);
        }
    };
    auto loaded     = std::make_shared<LoadedDenoiser>();
    loaded->weight  = take("denoiser.weight");
    bundle.denoiser = loaded;

    bundle.embedder = std::make_shared<HashEmbedder>(0xbeef);
    return bundle;
}

void write_linear_backend_bundle(const std::string& dir, uint64_t seed, int latent_channels) {
    fs::create_directories(dir);
    Rng rng(seed ^ 0xb0d1e5ull);

    std::vector<std::pair<std::string, Tensor>> arrays;
    nlohmann::json levels = nlohmann::json::array();
    const int channels[3] = {8, 6, 3};
    const int factors[3]  = {1, 2, 4};
    const char* names[3]  = {"up1x", "up2x", "up4x"};
    for (int l = 0; l < 3; ++l) {
        levels.push_back({{"name", names[l]}, {"factor", factors[l]}});
        arrays.emplace_back(std::string("decoder.") + names[l] + ".weight",
                            seeded_conv_weight(rng, channels[l], latent_channels, 3));
    }
    arrays.emplace_back("decoder.head.weight", seeded_conv_weight(rng, 3, latent_channels, 3));
    arrays.emplace_back("encoder.weight", seeded_conv_weight(rng, latent_channels, 3, 1));
    arrays.emplace_back("denoiser.weight", seeded_conv_weight(rng, latent_channels, latent_channels, 1));

    write_archive((fs::path(dir) / "weights.lda").string(), arrays);

    nlohmann::json manifest = {
        {"format", kBundleFormat}, {"version", kBundleVersion},   {"downsample", 8},
        {"levels", levels},        {"weights", "weights.lda"},
    };
    std::ofstream out(fs::path(dir) / "manifest.json");
    out << manifest.dump(2) << "\n";
}

}  // namespace ldp
