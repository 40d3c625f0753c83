#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "ldp/archive.hpp"
#include "ldp/errors.hpp"

using namespace ldp;
namespace fs = std::filesystem;

namespace {
fs::path temp_file(const std::string& name) {
    return fs::temp_directory_path() / ("ldp-archive-" + name);
}
}  // namespace

TEST(Archive, RoundTripExact) {
    Rng rng(1);
    const Tensor a = Tensor::randn({4, 8, 8}, rng);
    const Tensor b = Tensor::randn({3, 2, 2, 2}, rng);

    const fs::path path = temp_file("roundtrip.lda");
    write_archive(path.string(), {{"latent", a}, {"gen.weight", b}},
                  {{"iteration", "42"}, {"renderer", "latent-map"}});

    const Archive archive = read_archive(path.string());
    ASSERT_EQ(archive.arrays.size(), 2u);
    EXPECT_EQ(archive.meta.at("iteration"), "42");
    EXPECT_EQ(archive.arrays.at("latent").shape(), a.shape());
    EXPECT_EQ(max_abs(archive.arrays.at("latent") - a), 0.0);
    EXPECT_EQ(max_abs(archive.arrays.at("gen.weight") - b), 0.0);
    fs::remove(path);
}

TEST(Archive, MissingFileThrows) {
    EXPECT_THROW(read_archive("/nonexistent/file.lda"), LoadError);
}

TEST(Archive, BadMagicThrows) {
    const fs::path path = temp_file("badmagic.lda");
    std::ofstream(path) << "this is not an archive at all, definitely";
    EXPECT_THROW(read_archive(path.string()), LoadError);
    fs::remove(path);
}

TEST(Archive, TruncatedDataThrows) {
    const fs::path path = temp_file("truncated.lda");
    Rng rng(2);
    write_archive(path.string(), {{"latent", Tensor::randn({4, 16, 16}, rng)}});
    fs::resize_file(path, fs::file_size(path) / 2);
    EXPECT_THROW(read_archive(path.string()), LoadError);
    fs::remove(path);
}
