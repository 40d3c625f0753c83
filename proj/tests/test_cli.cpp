#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ldp/config.hpp"
#include "ldp/nn_ops.hpp"
#include "ldp/png_io.hpp"
#include "ldp/rng.hpp"
#include "ldp/tensor.hpp"

using namespace ldp;
namespace fs = std::filesystem;

namespace {

const char* cli_path() { return LDP_CLI_BIN; }

int run_cli(const std::string& args) {
    const std::string command = std::string(cli_path()) + " " + args + " >/dev/null 2>&1";
    const int status          = std::system(command.c_str());
    return WEXITSTATUS(status);
}

fs::path temp_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("ldp-cli-" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

}  // namespace

TEST(Cli, SynthSmokeWritesThreeArtifacts) {
    const fs::path dir = temp_dir("synth-smoke");
    const int code     = run_cli(
        "synth --preset image-synthesis --backend mock-pointmass --iterations 10 --seed 7 --out " +
        dir.string());
    EXPECT_EQ(code, 0);
    EXPECT_TRUE(fs::exists(dir / "final.png"));
    EXPECT_TRUE(fs::exists(dir / "checkpoint.lda"));
    EXPECT_TRUE(fs::exists(dir / "runlog.jsonl"));
    fs::remove_all(dir);
}

TEST(Cli, MissingConfigExitsTwo) {
    EXPECT_EQ(run_cli("synth --config /definitely/not/here.ini"), 2);
}

TEST(Cli, UnknownPresetExitsTwo) {
    EXPECT_EQ(run_cli("synth --preset no-such-preset"), 2);
}

TEST(Cli, UnknownFlagExitsTwo) {
    EXPECT_EQ(run_cli("synth --does.not.exist 1"), 2);
}

TEST(Cli, SynthRejectsLayeredRenderer) {
    EXPECT_EQ(run_cli("synth --preset layered-edit"), 2);
}

TEST(Cli, ConfigFileDrivesRun) {
    const fs::path dir    = temp_dir("synth-config");
    const fs::path config = dir / "run.ini";
    {
        std::ofstream out(config);
        out << "preset = image-synthesis\n"
            << "[run]\n"
            << "iterations = 5\n"
            << "seed = 3\n"
            << "out_dir = " << (dir / "out").string() << "\n"
            << "[backend]\n"
            << "kind = mock-pointmass\n";
    }
    EXPECT_EQ(run_cli("synth --config " + config.string()), 0);
    EXPECT_TRUE(fs::exists(dir / "out" / "runlog.jsonl"));
    fs::remove_all(dir);
}

TEST(Cli, EditProducesLayeredArtifacts) {
    const fs::path dir = temp_dir("edit");
    Rng rng(5);
    write_png_rgb((dir / "input.png").string(), sigmoid(Tensor::randn({3, 32, 32}, rng)));
    write_png_gray((dir / "mask.png").string(), Tensor::zeros({1, 32, 32}));

    const int code = run_cli("edit --image " + (dir / "input.png").string() + " --mask " +
                             (dir / "mask.png").string() +
                             " --prompt \"a golden horse\" --backend mock-pointmass" +
                             " --renderer.image_size 32 --renderer.generator_features 4" +
                             " --iterations 5 --seed 2 --out " + (dir / "out").string());
    EXPECT_EQ(code, 0);
    EXPECT_TRUE(fs::exists(dir / "out" / "edited.png"));
    EXPECT_TRUE(fs::exists(dir / "out" / "alpha.png"));
    EXPECT_TRUE(fs::exists(dir / "out" / "edit_layer.png"));
    EXPECT_TRUE(fs::exists(dir / "out" / "checkpoint.lda"));
    EXPECT_TRUE(fs::exists(dir / "out" / "runlog.jsonl"));

    const Tensor alpha = read_png_gray((dir / "out" / "alpha.png").string());
    EXPECT_EQ(alpha.shape(), (std::vector<int>{1, 32, 32}));
    for (int64_t i = 0; i < alpha.size(); ++i) {
        EXPECT_GE(alpha[i], 0.0);
        EXPECT_LE(alpha[i], 1.0);
    }
    fs::remove_all(dir);
}

TEST(Cli, EditSizeMismatchExitsTwo) {
    const fs::path dir = temp_dir("edit-mismatch");
    Rng rng(6);
    write_png_rgb((dir / "input.png").string(), sigmoid(Tensor::randn({3, 32, 32}, rng)));
    write_png_gray((dir / "mask.png").string(), Tensor::zeros({1, 16, 16}));
    EXPECT_EQ(run_cli("edit --image " + (dir / "input.png").string() + " --mask " +
                      (dir / "mask.png").string() + " --backend mock-pointmass --iterations 1" +
                      " --renderer.image_size 32 --out " + (dir / "out").string()),
              2);
    fs::remove_all(dir);
}

TEST(Cli, EditPretrainedWithoutWeightsExitsTwo) {
    const fs::path dir = temp_dir("edit-pretrained");
    Rng rng(7);
    write_png_rgb((dir / "input.png").string(), sigmoid(Tensor::randn({3, 32, 32}, rng)));
    write_png_gray((dir / "mask.png").string(), Tensor::zeros({1, 32, 32}));
    EXPECT_EQ(run_cli("edit --image " + (dir / "input.png").string() + " --mask " +
                      (dir / "mask.png").string() +
                      " --backend pretrained --backend.weights_path /missing/weights" +
                      " --renderer.image_size 32 --iterations 1 --out " + (dir / "out").string()),
              2);
    fs::remove_all(dir);
}

TEST(Cli, StopGradEncoderRecordedInHeader) {
    const fs::path dir = temp_dir("edit-stopgrad");
    Rng rng(8);
    write_png_rgb((dir / "input.png").string(), sigmoid(Tensor::randn({3, 32, 32}, rng)));
    write_png_gray((dir / "mask.png").string(), Tensor::zeros({1, 32, 32}));

    const int code = run_cli("edit --image " + (dir / "input.png").string() + " --mask " +
                             (dir / "mask.png").string() +
                             " --backend mock-pointmass --renderer.stop_grad_encoder true" +
                             " --renderer.image_size 32 --renderer.generator_features 4" +
                             " --iterations 3 --out " + (dir / "out").string());
    EXPECT_EQ(code, 0);
    const std::string log = slurp(dir / "out" / "runlog.jsonl");
    EXPECT_NE(log.find("\"renderer.stop_grad_encoder\":\"true\""), std::string::npos);
    fs::remove_all(dir);
}

TEST(Cli, MaskZeroEditReproducesInput) {
    // all-zero mask supervision drives alpha to zero, so the edited image
    // converges back to the input within quantization tolerance
    const fs::path dir = temp_dir("edit-identity");
    Rng rng(9);
    const Tensor input = sigmoid(Tensor::randn({3, 32, 32}, rng));
    write_png_rgb((dir / "input.png").string(), input);
    write_png_gray((dir / "mask.png").string(), Tensor::zeros({1, 32, 32}));

    const int code = run_cli("edit --image " + (dir / "input.png").string() + " --mask " +
                             (dir / "mask.png").string() +
                             " --backend mock-pointmass --renderer.image_size 32" +
                             " --renderer.generator_features 4 --optimizer.lr 0.05" +
                             " --iterations 600 --seed 4 --out " + (dir / "out").string());
    ASSERT_EQ(code, 0);

    const Tensor original = read_png_rgb((dir / "input.png").string());
    const Tensor edited   = read_png_rgb((dir / "out" / "edited.png").string());
    EXPECT_LE(max_abs(edited - original), 1.0 / 255.0 + 1e-9);
    fs::remove_all(dir);
}

TEST(Cli, HelpEnumeratesEveryConfigKey) {
    const fs::path out = fs::temp_directory_path() / "ldp-cli-help.txt";
    const std::string command =
        std::string(cli_path()) + " synth --help >" + out.string() + " 2>&1";
    ASSERT_EQ(WEXITSTATUS(std::system(command.c_str())), 0);
    const std::string help = slurp(out);
    for (const std::string& key : config_keys()) {
        EXPECT_NE(help.find("--" + key), std::string::npos) << key;
    }
    fs::remove(out);
}

TEST(Cli, EditResizesMismatchedInputSize) {
    // 48x48 inputs are resized to the configured 32x32 working size
    const fs::path dir = temp_dir("edit-resize");
    Rng rng(10);
    write_png_rgb((dir / "input.png").string(), sigmoid(Tensor::randn({3, 48, 48}, rng)));
    write_png_gray((dir / "mask.png").string(), Tensor::zeros({1, 48, 48}));
    EXPECT_EQ(run_cli("edit --image " + (dir / "input.png").string() + " --mask " +
                      (dir / "mask.png").string() +
                      " --backend mock-pointmass --renderer.image_size 32" +
                      " --renderer.generator_features 4 --iterations 2 --out " +
                      (dir / "out").string()),
              0);
    const Tensor edited = read_png_rgb((dir / "out" / "edited.png").string());
    EXPECT_EQ(edited.shape(), (std::vector<int>{3, 32, 32}));
    fs::remove_all(dir);
}

TEST(Cli, CheckQuickPasses) { EXPECT_EQ(run_cli("check quick"), 0); }
