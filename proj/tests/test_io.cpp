#include <gtest/gtest.h>

#include <filesystem>

#include "vistra/io/config.hpp"
#include "vistra/io/pnm.hpp"
#include "vistra/setr/model.hpp"

using namespace vistra;

namespace {
std::string tmp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}
}  // namespace

TEST(Checkpoint, RoundtripBitExact) {
    SetrConfig cfg;
    cfg.layers = 1;
    cfg.hidden = 16;
    cfg.heads = 2;
    cfg.patch = 8;
    cfg.input = 16;
    cfg.num_classes = 3;
    cfg.pup_channels = 8;
    SetrModel<float> model(cfg, 5);
    const std::string path = tmp_path("vistra_ckpt_roundtrip.bin");
    save_checkpoint(path, model.params(), 0xabcdef);

    SetrModel<float> twin(cfg, 999);  // different init
    auto ck = load_checkpoint(path);
    EXPECT_EQ(ck.fingerprint, 0xabcdefu);
    restore_into(ck, twin.params(), 0xabcdef);
    for (size_t i = 0; i < model.params().entries().size(); ++i) {
        const auto& a = model.params().entries()[i];
        const auto& b = twin.params().entries()[i];
        ASSERT_EQ(a.name, b.name);
        for (int64_t j = 0; j < a.tensor.numel(); ++j)
            ASSERT_EQ((*a.tensor.data)[size_t(j)], (*b.tensor.data)[size_t(j)]) << a.name;
    }
}

TEST(Checkpoint, FingerprintMismatchAndOverride) {
    ParamStore<float> ps(1);
    ps.param("w", {2, 2});
    const std::string path = tmp_path("vistra_ckpt_fp.bin");
    save_checkpoint(path, ps, 111);
    auto ck = load_checkpoint(path);
    ParamStore<float> ps2(2);
    ps2.param("w", {2, 2});
    EXPECT_THROW(restore_into(ck, ps2, 222), IoError);
    EXPECT_NO_THROW(restore_into(ck, ps2, 222, /*allow_fingerprint_mismatch=*/true));
}

TEST(Checkpoint, MissingTensorAndShapeMismatchAndCorruption) {
    ParamStore<float> ps(3);
    ps.param("a", {2});
    const std::string path = tmp_path("vistra_ckpt_bad.bin");
    save_checkpoint(path, ps, 1);
    auto ck = load_checkpoint(path);

    ParamStore<float> extra(4);
    extra.param("a", {2});
    extra.param("b", {1});
    EXPECT_THROW(restore_into(ck, extra, 1), IoError);

    ParamStore<float> wrong(5);
    wrong.param("a", {3});
    EXPECT_THROW(restore_into(ck, wrong, 1), IoError);

    write_file_atomic(path, "NOTACKPT");
    EXPECT_THROW(load_checkpoint(path), IoError);
}

TEST(Checkpoint, MetaSurvives) {
    ParamStore<float> ps(6);
    ps.param("w", {1});
    const std::string path = tmp_path("vistra_ckpt_meta.bin");
    save_checkpoint(path, ps, 9, {{"step", 123}, {"rng0", 0xdeadbeefull}});
    auto ck = load_checkpoint(path);
    EXPECT_EQ(ck.meta.at("step"), 123u);
    EXPECT_EQ(ck.meta.at("rng0"), 0xdeadbeefull);
}

TEST(RunConfig, ParsesSectionsAndTypedValues) {
    auto cfg = RunConfig::parse_text(
        "# comment\n"
        "[model]\n"
        "preset = hlg-tiny\n"
        "num_classes = 10\n"
        "[recipe]\n"
        "optimizer = sgd-poly\n"
        "base_lr = 0.01\n"
        "iters = 100\n"
        "deterministic = true\n"
        "[data]\n"
        "kind = synth-seg\n",
        "test.cfg");
    EXPECT_EQ(cfg.get_str("model", "preset"), "hlg-tiny");
    EXPECT_EQ(cfg.get_int("model", "num_classes", 0), 10);
    EXPECT_DOUBLE_EQ(cfg.get_double("recipe", "base_lr", 0), 0.01);
    EXPECT_TRUE(cfg.get_bool("recipe", "deterministic", false));
    EXPECT_EQ(cfg.get_int("recipe", "batch", 2), 2);  // default
    EXPECT_EQ(cfg.line_of("model", "num_classes"), 4);
}

TEST(RunConfig, LinePreciseErrors) {
    try {
        RunConfig::parse_text("[model]\npreset = x\nbogus_key = 1\n", "bad.cfg");
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("bad.cfg:3"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("bogus_key"), std::string::npos);
    }
    EXPECT_THROW(RunConfig::parse_text("[nope]\n", "s.cfg"), ConfigError);
    EXPECT_THROW(RunConfig::parse_text("[model]\npreset = a\npreset = b\n", "s.cfg"), ConfigError);
    EXPECT_THROW(RunConfig::parse_text("key = 1\n", "s.cfg"), ConfigError);
    EXPECT_THROW(RunConfig::parse_text("[model]\nnum_classes = abc\n", "s.cfg").get_int("model", "num_classes", 0),
                 ConfigError);
}

TEST(RunConfig, EmptyFileListsRequiredFields) {
    try {
        RunConfig::parse_text("", "empty.cfg");
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("[model]"), std::string::npos);
        EXPECT_NE(msg.find("preset"), std::string::npos);
        EXPECT_NE(msg.find("optimizer"), std::string::npos);
    }
}

TEST(RunConfig, FingerprintTracksModelSectionOnly) {
    auto a = RunConfig::parse_text("[model]\npreset = hlg-tiny\n[recipe]\niters = 5\n");
    auto b = RunConfig::parse_text("[model]\npreset = hlg-tiny\n[recipe]\niters = 900\n");
    auto c = RunConfig::parse_text("[model]\npreset = hlg-small\n");
    EXPECT_EQ(a.model_fingerprint(), b.model_fingerprint());
    EXPECT_NE(a.model_fingerprint(), c.model_fingerprint());
}

TEST(RunConfig, IntLists) {
    auto cfg = RunConfig::parse_text("[model]\nkind = hlg\nchannels = 16, 32, 64, 128\n");
    EXPECT_EQ(cfg.get_int_list("model", "channels"), (std::vector<int64_t>{16, 32, 64, 128}));
}

TEST(Pnm, WriteReadRoundtrip) {
    const std::string gpath = tmp_path("vistra_test.pgm");
    std::vector<uint8_t> gray = {0, 64, 128, 255, 10, 20};
    write_pgm(gpath, 3, 2, gray);
    auto g = read_pnm(gpath);
    EXPECT_EQ(g.width, 3);
    EXPECT_EQ(g.height, 2);
    EXPECT_EQ(g.channels, 1);
    EXPECT_EQ(g.bytes, gray);

    const std::string cpath = tmp_path("vistra_test.ppm");
    std::vector<uint8_t> rgb(2 * 2 * 3);
    for (size_t i = 0; i < rgb.size(); ++i) rgb[i] = uint8_t(i * 20);
    write_ppm(cpath, 2, 2, rgb);
    auto c = read_pnm(cpath);
    EXPECT_EQ(c.channels, 3);
    EXPECT_EQ(c.bytes, rgb);
}

TEST(Pnm, NormalizationAndConstantMap) {
    std::vector<double> v = {1.0, 2.0, 3.0};
    auto bytes = normalize_to_bytes(v);
    EXPECT_EQ(bytes[0], 0);
    EXPECT_EQ(bytes[2], 255);
    std::vector<double> flat = {5.0, 5.0};
    auto mid = normalize_to_bytes(flat);
    EXPECT_EQ(mid[0], 128);
    EXPECT_EQ(mid[1], 128);
}
