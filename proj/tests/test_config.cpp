#include <gtest/gtest.h>

#include "ldp/config.hpp"
#include "ldp/errors.hpp"

using namespace ldp;

TEST(Config, RoundTripIsExact) {
    RunConfig cfg          = preset("image-synthesis");
    cfg.prompt             = "a photo of \"quoted\" things";
    cfg.seed               = 12345;
    cfg.schedule.beta_start = 0.0001234567890123;
    cfg.loss.lambda_kl     = 1e-7;

    const std::string text    = serialize_config(cfg);
    const ParsedConfig parsed = parse_config_text(text);
    EXPECT_TRUE(parsed.preset.empty());

    const RunConfig rebuilt = build_config("", parsed.entries, {});
    EXPECT_EQ(config_kv(cfg), config_kv(rebuilt));
}

TEST(Config, UnknownKeyRejected) {
    RunConfig cfg;
    EXPECT_THROW(apply_entry(cfg, "run.bogus", "1"), ConfigError);
    EXPECT_THROW(apply_entry(cfg, "nonsense.key", "1"), ConfigError);
}

TEST(Config, TypeCheckedValues) {
    RunConfig cfg;
    EXPECT_THROW(apply_entry(cfg, "run.iterations", "ten"), ConfigError);
    EXPECT_THROW(apply_entry(cfg, "loss.lambda_fm", "3.0x"), ConfigError);
    EXPECT_THROW(apply_entry(cfg, "loss.kl_strict", "yes"), ConfigError);
    apply_entry(cfg, "run.iterations", "42");
    EXPECT_EQ(cfg.iterations, 42);
    apply_entry(cfg, "loss.kl_strict", "true");
    EXPECT_TRUE(cfg.loss.kl_strict);
}

TEST(Config, PresetInheritanceAndOverridePrecedence) {
    const std::string text = R"(
preset = "image-synthesis"
[run]
iterations = 50
)";
    const ParsedConfig parsed = parse_config_text(text);
    EXPECT_EQ(parsed.preset, "image-synthesis");

    const RunConfig cfg = build_config(parsed.preset, parsed.entries, {{"run.seed", "9"}});
    EXPECT_EQ(cfg.iterations, 50);           // file overrides preset
    EXPECT_EQ(cfg.seed, 9u);                 // CLI overrides file
    EXPECT_EQ(cfg.loss.lambda_fm, 3.0);      // preset value survives
}

TEST(Config, ParserRejectsMalformedInput) {
    EXPECT_THROW(parse_config_text("[run\niterations = 1\n"), ConfigError);
    EXPECT_THROW(parse_config_text("iterations = 1\n"), ConfigError);  // key outside section
    EXPECT_THROW(parse_config_text("[run]\nno_equals_sign\n"), ConfigError);
    EXPECT_NO_THROW(parse_config_text("# comment\n; another\n\n[run]\niterations = 3\n"));
}

TEST(Config, MissingFileIsConfigError) {
    EXPECT_THROW(load_config_file("/nonexistent/config.ini"), ConfigError);
}

TEST(Config, EveryKeyHasSection) {
    for (const std::string& key : config_keys()) {
        EXPECT_NE(key.find('.'), std::string::npos) << key;
    }
    EXPECT_GE(config_keys().size(), 30u);
}

TEST(Config, FormatDoubleRoundTrips) {
    for (double v : {0.1, 1e-7, 0.00085, 3.0, 1.0 / 3.0, 499.5, 1e300}) {
        EXPECT_EQ(std::stod(format_double(v)), v);
    }
    EXPECT_EQ(format_double(0.1), "0.1");
    EXPECT_EQ(format_double(3.0), "3");
}
