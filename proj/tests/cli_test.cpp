#include "bgest/cli.hpp"
#include "bgest/error.hpp"
#include "bgest/evalkit.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <fstream>
#include <sstream>

namespace bgest {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using test::TempDir;

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome run_cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

json read_json(const fs::path& p) {
    std::ifstream in(p);
    return json::parse(in);
}

void write_frames(const fs::path& dir, const std::vector<GreyImage>& frames) {
    fs::create_directories(dir);
    for (std::size_t i = 0; i < frames.size(); ++i) write_image(frames[i], dir / ("f" + std::to_string(i + 1) + ".pgm"));
}

TEST(CliEstimate, CleanSequence) {
    TempDir dir;
    const auto bg = textured_background(64, 48, 4);
    write_frames(dir / "in", std::vector<GreyImage>(4, bg));
    const auto r = run_cli({"estimate", "--in", (dir / "in").string(), "--out", (dir / "bg.pgm").string(), "--report",
                            (dir / "r.json").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(read_image(dir / "bg.pgm"), bg);
    const auto j = read_json(dir / "r.json");
    EXPECT_EQ(j["schema_version"], 1);
    EXPECT_FALSE(j.contains("age"));
    EXPECT_EQ(j["grid"]["cols"], 4);
    EXPECT_EQ(j["config"]["block_size"], "16");
    EXPECT_TRUE(j.contains("peak_model_bytes"));
    EXPECT_TRUE(j.contains("frames_per_second"));
}

TEST(CliEstimate, FlagsOverrideAndTruth) {
    TempDir dir;
    const auto bg = textured_background(32, 32, 4);
    write_frames(dir / "in", std::vector<GreyImage>(3, bg));
    write_image(bg, dir / "truth.pgm");
    const auto r = run_cli({"estimate", "--in", (dir / "in").string(), "--out", (dir / "bg.png").string(),
                            "--block-size", "8", "--icm-iterations", "0", "--truth", (dir / "truth.pgm").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = json::parse(r.out);
    EXPECT_EQ(j["grid"]["cols"], 4);
    EXPECT_EQ(j["grid"]["rows"], 4);
    EXPECT_EQ(j["labelling"]["icm_iterations_run"], 0);
    EXPECT_EQ(j["age"], 0.0);
    EXPECT_EQ(j["ep"], 0);
    EXPECT_EQ(j["cep"], 0);
}

TEST(CliEstimate, ConfigFileWithFlagOverride) {
    TempDir dir;
    const auto bg = textured_background(32, 32, 4);
    write_frames(dir / "in", std::vector<GreyImage>(3, bg));
    std::ofstream(dir / "c.cfg") << "# test\nblock_size = 8\neta=2\nband = zigzag\n";
    const auto r = run_cli({"estimate", "--in", (dir / "in").string(), "--out", (dir / "bg.pgm").string(), "--config",
                            (dir / "c.cfg").string(), "--eta", "1"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = json::parse(r.out);
    EXPECT_EQ(j["config"]["block_size"], "8");
    EXPECT_EQ(j["config"]["eta"], "1");
    EXPECT_EQ(j["config"]["band"], "zigzag");

    std::ofstream(dir / "bad.cfg") << "colour = red\n";
    const auto bad = run_cli({"estimate", "--in", (dir / "in").string(), "--out", (dir / "bg.pgm").string(),
                              "--config", (dir / "bad.cfg").string()});
    EXPECT_EQ(bad.code, 1);
    EXPECT_NE(bad.err.find("config stage failed"), std::string::npos);
}

TEST(CliEstimate, Failures) {
    TempDir dir;
    auto r = run_cli({"estimate", "--in", (dir / "missing").string(), "--out", (dir / "bg.pgm").string()});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("ingest stage failed"), std::string::npos);

    write_frames(dir / "in", std::vector<GreyImage>(3, GreyImage(32, 32, 9)));
    r = run_cli({"estimate", "--in", (dir / "in").string(), "--out", "/nonexistent/x/bg.pgm"});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("write stage failed"), std::string::npos);

    r = run_cli({"estimate", "--in", (dir / "in").string()});
    EXPECT_EQ(r.code, 2);
    r = run_cli({"estimate", "--in", (dir / "in").string(), "--out", (dir / "bg.pgm").string(), "--block-size", "64"});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("geometry stage failed"), std::string::npos);
}

TEST(CliEstimate, SnapshotResume) {
    TempDir dir;
    const auto bg = textured_background(32, 32, 8);
    write_frames(dir / "a", std::vector<GreyImage>(3, bg));
    write_frames(dir / "b", std::vector<GreyImage>(3, bg));
    auto r = run_cli({"estimate", "--in", (dir / "a").string(), "--out", (dir / "bg1.pgm").string(), "--snapshot",
                      (dir / "m.bin").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    r = run_cli({"estimate", "--in", (dir / "b").string(), "--out", (dir / "bg2.pgm").string(), "--resume",
                 (dir / "m.bin").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(read_image(dir / "bg2.pgm"), bg);
    EXPECT_EQ(load_snapshot(dir / "m.bin").model.frames_ingested, 3u);
}

TEST(CliEvaluate, IdenticalImages) {
    TempDir dir;
    const auto img = textured_background(20, 20, 1);
    write_image(img, dir / "a.pgm");
    const auto r = run_cli({"evaluate", "--estimate", (dir / "a.pgm").string(), "--truth", (dir / "a.pgm").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = json::parse(r.out);
    EXPECT_EQ(j["age"], 0.0);
    EXPECT_EQ(j["ep"], 0);
    EXPECT_EQ(j["cep"], 0);

    write_image(GreyImage(10, 20), dir / "b.pgm");
    const auto bad = run_cli({"evaluate", "--estimate", (dir / "b.pgm").string(), "--truth", (dir / "a.pgm").string()});
    EXPECT_EQ(bad.code, 1);
    EXPECT_NE(bad.err.find("10x20"), std::string::npos);
}

TEST(CliEvaluate, SplitsReportFrameCounts) {
    TempDir dir;
    SynthSpec spec;
    spec.width = 32;
    spec.height = 32;
    spec.frame_count = 20;
    const auto data = synth_sequence(spec, 3);
    write_frames(dir / "in", data.frames.frames);
    write_image(data.truth, dir / "t.pgm");
    for (int s : {2, 4}) {
        const auto r = run_cli({"evaluate", "--in", (dir / "in").string(), "--truth", (dir / "t.pgm").string(),
                                "--splits", std::to_string(s)});
        ASSERT_EQ(r.code, 0) << r.err;
        const auto j = json::parse(r.out);
        ASSERT_EQ(j["runs"].size(), static_cast<std::size_t>(s));
        for (const auto& run : j["runs"]) EXPECT_EQ(run["frames"], 20 / s);
    }
    EXPECT_EQ(run_cli({"evaluate", "--in", (dir / "in").string(), "--truth", (dir / "t.pgm").string(), "--splits", "3"})
                  .code,
              2);
}

TEST(CliSynthAndSegment, EndToEnd) {
    TempDir dir;
    SynthSpec spec;
    spec.width = 64;
    spec.height = 48;
    spec.frame_count = 30;
    Occluder o;
    o.x = 8;
    o.y = 8;
    o.width = 12;
    o.height = 12;
    o.first_frame = 1;
    o.last_frame = 10;
    spec.occluders.push_back(o);
    std::ofstream(dir / "spec.json") << synth_spec_to_json(spec);

    auto r = run_cli({"synth", "--spec", (dir / "spec.json").string(), "--out", (dir / "s").string(), "--seed", "4"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(fs::exists(dir / "s" / "frames" / "frame_0030.pgm"));
    EXPECT_TRUE(fs::exists(dir / "s" / "masks" / "mask_0001.pgm"));
    EXPECT_TRUE(fs::exists(dir / "s" / "truth_background.pgm"));
    EXPECT_EQ(read_json(dir / "s" / "spec.json")["seed"], 4);

    r = run_cli({"synth", "--spec", (dir / "spec.json").string(), "--out", (dir / "s2").string(), "--seed", "4"});
    ASSERT_EQ(r.code, 0);
    for (const char* f : {"frames/frame_0005.pgm", "masks/mask_0005.pgm", "truth_background.pgm"}) {
        EXPECT_EQ(read_image(dir / "s" / f), read_image(dir / "s2" / f)) << f;
    }

    r = run_cli({"estimate", "--in", (dir / "s" / "frames").string(), "--out", (dir / "bg.pgm").string(),
                 "--snapshot", (dir / "m.bin").string()});
    ASSERT_EQ(r.code, 0) << r.err;

    r = run_cli({"segment", "--model", (dir / "m.bin").string(), "--in", (dir / "s" / "frames").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_FALSE(json::parse(r.out).contains("similarity"));

    r = run_cli({"segment", "--model", (dir / "m.bin").string(), "--in", (dir / "s" / "frames").string(),
                 "--truth-masks", (dir / "s" / "masks").string(), "--out-masks", (dir / "masks").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = json::parse(r.out);
    EXPECT_TRUE(j.contains("similarity"));
    EXPECT_TRUE(j["modes"].contains("direct"));
    EXPECT_TRUE(fs::exists(dir / "masks" / "mrf" / "mask_0030.pgm"));
    EXPECT_TRUE(fs::exists(dir / "masks" / "direct" / "mask_0030.pgm"));

    r = run_cli({"segment", "--model", (dir / "nope.bin").string(), "--in", (dir / "s" / "frames").string()});
    EXPECT_NE(r.code, 0);
    EXPECT_NE(r.err.find("snapshot stage failed"), std::string::npos);
}

TEST(CliSynth, RejectsOutOfFrameOccluder) {
    TempDir dir;
    std::ofstream(dir / "spec.json")
        << R"({"width": 32, "height": 32, "frame_count": 5, "occluders": [{"x": 30, "y": 0, "width": 8, "height": 8}]})";
    const auto r = run_cli({"synth", "--spec", (dir / "spec.json").string(), "--out", (dir / "s").string()});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("config stage failed"), std::string::npos);
}

TEST(CliConfig, EchoCoversEveryKey) {
    cli::RunConfig c;
    const auto echo = c.echo();
    for (const auto& [k, v] : echo) EXPECT_NO_THROW(c.set(k, v)) << k;
    EXPECT_EQ(c.echo(), echo);
    c.set("icm-iterations", "2");
    EXPECT_EQ(c.estimator.gibbs.icm_iterations, 2);
    EXPECT_THROW(c.set("eta", "two"), ConfigError);
    EXPECT_THROW(c.set("parallel", "maybe"), ConfigError);
}

}  // namespace
}  // namespace bgest
