#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "ldp/noise_schedule.hpp"
#include "ldp/tensor.hpp"

namespace ldp {

using EmbeddingHandle = uint64_t;

// Prompt plus the cached conditional / unconditional embedding handles.
// Both handles must come from the same backend instance.
struct TextCondition {
    std::string prompt;
    EmbeddingHandle embedding_handle = 0;
    EmbeddingHandle null_handle      = 0;
};

class Denoiser {
public:
    virtual ~Denoiser() = default;
    // single-conditioning noise prediction; output shape equals z_t's
    virtual Tensor predict(const Tensor& z_t, int t, EmbeddingHandle embedding) const = 0;
    // classifier-free-guided prediction (see guided_noise)
    Tensor predict_noise(const Tensor& z_t, int t, const TextCondition& cond,
                         double guidance_scale) const;
};

// eps = eps_uncond + s * (eps_cond - eps_uncond); two denoiser evaluations
Tensor guided_noise(const Denoiser& denoiser, const Tensor& z_t, int t, const TextCondition& cond,
                    double guidance_scale);

class Decoder {
public:
    virtual ~Decoder() = default;
    virtual int num_levels() const = 0;
    virtual std::vector<std::string> level_names() const = 0;
    virtual Tensor decode(const Tensor& v) const = 0;
    // ordered feature maps, one per requested level index (deepest first);
    // resolutions are nondecreasing from deepest to shallowest
    virtual std::vector<Tensor> decode_features(const Tensor& v,
                                                const std::vector<int>& levels) const = 0;
    // grad_v = sum_l J_l(v)^T cotangents[l]
    virtual Tensor decode_features_vjp(const Tensor& v, const std::vector<int>& levels,
                                       const std::vector<Tensor>& cotangents) const = 0;
};

class Encoder {
public:
    virtual ~Encoder() = default;
    virtual int downsample_factor() const = 0;
    virtual Tensor encode(const Tensor& rgb) const = 0;
    virtual Tensor encode_vjp(const Tensor& rgb, const Tensor& grad_latent) const = 0;
};

// Embeddings are computed once per prompt and cached for the run.
class TextEmbedder {
public:
    virtual ~TextEmbedder() = default;
    virtual TextCondition condition(const std::string& prompt) = 0;
};

struct BackendBundle {
    std::shared_ptr<Denoiser> denoiser;
    std::shared_ptr<Decoder> decoder;
    std::shared_ptr<Encoder> encoder;
    std::shared_ptr<TextEmbedder> embedder;
};

/* ------------------------------- mocks -------------------------------- */

// Optimal eps-predictor when the data distribution is a point mass at
// `target`: predict(z_t) = (z_t - alpha_t * target) / sigma_t, so for
// z_t = alpha_t v + sigma_t eps the residual is (alpha_t/sigma_t)(v - target).
class MockPointMassDenoiser : public Denoiser {
public:
    MockPointMassDenoiser(Tensor target, std::shared_ptr<const NoiseSchedule> schedule);
    Tensor predict(const Tensor& z_t, int t, EmbeddingHandle embedding) const override;
    const Tensor& target() const { return target_; }

private:
    Tensor target_;
    std::shared_ptr<const NoiseSchedule> schedule_;
};

// Seeded fixed linear map of z_t plus a small per-embedding bias, so the
// conditional and unconditional predictions differ (exercises guidance).
class MockLinearDenoiser : public Denoiser {
public:
    MockLinearDenoiser(int channels, uint64_t seed);
    Tensor predict(const Tensor& z_t, int t, EmbeddingHandle embedding) const override;

private:
    int channels_;
    Tensor weight_;  // {C, C, 1, 1}
};

// Exactly linear multi-level decoder: level l = conv3x3 of the 2^l-times
// nearest-upsampled latent, fixed weights. decode() squashes an 8x head
// through a sigmoid. Construction from a seed (mock) or explicit weights
// (pretrained linear-v1 bundle).
class LinearDecoder : public Decoder {
public:
    struct Level {
        std::string name;
        int factor = 1;
        Tensor weight;  // {C_l, C_latent, 3, 3}
    };

    LinearDecoder(std::vector<Level> levels, Tensor head_weight, int head_factor);

    int num_levels() const override { return static_cast<int>(levels_.size()); }
    std::vector<std::string> level_names() const override;
    Tensor decode(const Tensor& v) const override;
    std::vector<Tensor> decode_features(const Tensor& v,
                                        const std::vector<int>& levels) const override;
    Tensor decode_features_vjp(const Tensor& v, const std::vector<int>& levels,
                               const std::vector<Tensor>& cotangents) const override;

private:
    void check_levels(const std::vector<int>& levels) const;

    std::vector<Level> levels_;
    Tensor head_weight_;  // {3, C_latent, 3, 3}
    int head_factor_;
};

// avg-pool by `factor`, then a fixed 1x1 channel lift 3 -> latent channels
class LinearEncoder : public Encoder {
public:
    LinearEncoder(Tensor lift_weight, int factor);

    int downsample_factor() const override { return factor_; }
    Tensor encode(const Tensor& rgb) const override;
    Tensor encode_vjp(const Tensor& rgb, const Tensor& grad_latent) const override;

private:
    Tensor lift_weight_;  // {C_latent, 3, 1, 1}
    int factor_;
};

std::shared_ptr<LinearDecoder> make_mock_linear_decoder(uint64_t seed, int latent_channels = 4);
std::shared_ptr<LinearEncoder> make_mock_linear_encoder(uint64_t seed, int latent_channels = 4,
                                                        int factor = 8);

/* ------------------------------ factory ------------------------------- */

struct BackendSpec {
    std::string kind = "mock-pointmass";  // mock-pointmass | mock-linear | pretrained
    uint64_t seed    = 1234;              // mock weights / target seed
    std::string target_init = "randn";    // randn | zeros (point-mass target)
    double target_sigma     = 1.0;        // exact sample std of the point-mass target
    std::string weights_path;             // pretrained bundle dir (env LDP_WEIGHTS_DIR fallback)
    std::string device = "cpu";
    double guidance_scale = 7.5;
};

BackendBundle make_backend(const BackendSpec& spec, const std::vector<int>& latent_shape,
                           std::shared_ptr<const NoiseSchedule> schedule);

// Loads a pretrained weights bundle: a directory holding manifest.json and
// the named-array weights archive it references. Missing path -> LoadError
// naming the path; unrecognized/unsupported version -> ConfigError.
BackendBundle load_real_backend(const std::string& weights_path, const std::string& device);

// Writes a self-consistent "linear-v1" weights bundle (used by tests and as
// a format reference).
void write_linear_backend_bundle(const std::string& dir, uint64_t seed, int latent_channels = 4);

}  // namespace ldp
