#include "bgest/error.hpp"
#include "bgest/frame_io.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <fstream>

namespace bgest {
namespace {

using test::TempDir;

void write_bytes(const std::filesystem::path& p, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(p, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

TEST(Greyscale, Bt601Examples) {
    EXPECT_EQ(luma(255, 255, 255), 255);
    EXPECT_EQ(luma(0, 0, 0), 0);
    EXPECT_EQ(luma(255, 0, 0), 76);  // round(0.299 * 255) = round(76.245)
    EXPECT_EQ(luma(0, 255, 0), 150);
    EXPECT_EQ(luma(0, 0, 255), 29);
}

TEST(Greyscale, MatchesFormulaOnRandomPixels) {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> d(0, 255);
    for (int i = 0; i < 5000; ++i) {
        const int r = d(rng), g = d(rng), b = d(rng);
        const long expected = std::lround(0.299 * r + 0.587 * g + 0.114 * b);
        ASSERT_EQ(luma(r, g, b), expected);
        ASSERT_LE(expected, 255);
    }
}

TEST(LoadSequence, DirectoryOfIdenticalFrames) {
    TempDir dir;
    GreyImage img(32, 32, 90);
    for (int i = 1; i <= 3; ++i) write_image(img, dir / ("frame_" + std::to_string(i) + ".pgm"));
    const auto seq = load_sequence(dir.path());
    EXPECT_EQ(seq.width, 32);
    EXPECT_EQ(seq.height, 32);
    EXPECT_EQ(seq.frame_count(), 3u);
    EXPECT_DOUBLE_EQ(seq.fps, 25.0);
}

TEST(LoadSequence, NumericOrdering) {
    TempDir dir;
    write_image(GreyImage(16, 16, 1), dir / "0001.pgm");
    write_image(GreyImage(16, 16, 3), dir / "0003.pgm");
    write_image(GreyImage(16, 16, 2), dir / "0002.pgm");
    write_image(GreyImage(16, 16, 10), dir / "10.pgm");
    const auto seq = load_sequence(dir.path());
    ASSERT_EQ(seq.frame_count(), 4u);
    EXPECT_EQ(seq.frames[0].pixels[0], 1);
    EXPECT_EQ(seq.frames[1].pixels[0], 2);
    EXPECT_EQ(seq.frames[2].pixels[0], 3);
    EXPECT_EQ(seq.frames[3].pixels[0], 10);
}

TEST(LoadSequence, NumericTiesBrokenLexically) {
    TempDir dir;
    write_image(GreyImage(16, 16), dir / "b_5.pgm");
    write_image(GreyImage(16, 16), dir / "a_5.pgm");
    write_image(GreyImage(16, 16), dir / "c_2.pgm");
    const auto files = ordered_frame_files(dir.path());
    ASSERT_EQ(files.size(), 3u);
    EXPECT_EQ(files[0].filename(), "c_2.pgm");
    EXPECT_EQ(files[1].filename(), "a_5.pgm");
    EXPECT_EQ(files[2].filename(), "b_5.pgm");
}

TEST(LoadSequence, RawPlanarQvga) {
    TempDir dir;
    const int w = 320, h = 240, f = 175;
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(w) * h * f);
    for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = static_cast<std::uint8_t>(i / (w * h));
    write_bytes(dir / "seq.y", bytes);
    IngestOptions opts;
    opts.width = w;
    opts.height = h;
    opts.fps = 30;
    const auto seq = load_sequence(dir / "seq.y", opts);
    EXPECT_EQ(seq.frame_count(), 175u);
    EXPECT_EQ(seq.width, 320);
    EXPECT_EQ(seq.height, 240);
    EXPECT_DOUBLE_EQ(seq.fps, 30.0);
    EXPECT_EQ(seq.frames[174].pixels[0], 174);
}

TEST(LoadSequence, RawSizeMismatchIsGeometryError) {
    TempDir dir;
    write_bytes(dir / "seq.y", std::vector<std::uint8_t>(100));
    IngestOptions opts;
    opts.width = 16;
    opts.height = 4;
    EXPECT_THROW(load_sequence(dir / "seq.y", opts), GeometryError);
    opts.width = 0;
    EXPECT_THROW(load_sequence(dir / "seq.y", opts), GeometryError);
}

TEST(LoadSequence, InconsistentGeometry) {
    TempDir dir;
    write_image(GreyImage(16, 16), dir / "1.pgm");
    write_image(GreyImage(32, 16), dir / "2.pgm");
    EXPECT_THROW(load_sequence(dir.path()), GeometryError);
}

TEST(LoadSequence, CorruptFrameNamesTheFile) {
    TempDir dir;
    write_image(GreyImage(16, 16), dir / "1.pgm");
    write_bytes(dir / "2.pgm", {'P', '5', '\n', '1', '6'});
    try {
        load_sequence(dir.path());
        FAIL() << "expected IngestError";
    } catch (const IngestError& e) {
        EXPECT_NE(std::string(e.what()).find("2.pgm"), std::string::npos);
    }
}

TEST(LoadSequence, MissingSource) {
    EXPECT_THROW(load_sequence("/nonexistent/bgest/frames"), IngestError);
    EXPECT_THROW(read_image("/nonexistent/bgest/frame.pgm"), IngestError);
}

TEST(LoadSequence, ColourPpmConvertedWithLuma) {
    TempDir dir;
    std::string header = "P6\n# comment\n2 1\n255\n";
    std::vector<std::uint8_t> bytes(header.begin(), header.end());
    for (std::uint8_t v : {255, 0, 0, 255, 255, 255}) bytes.push_back(v);
    write_bytes(dir / "c.ppm", bytes);
    const auto img = read_image(dir / "c.ppm");
    ASSERT_EQ(img.width, 2);
    EXPECT_EQ(img.pixels[0], 76);
    EXPECT_EQ(img.pixels[1], 255);
}

TEST(LoadSequence, AsciiPgm) {
    TempDir dir;
    const std::string text = "P2\n2 2\n255\n0 255\n128 7\n";
    write_bytes(dir / "a.pgm", std::vector<std::uint8_t>(text.begin(), text.end()));
    const auto img = read_image(dir / "a.pgm");
    EXPECT_EQ(img.pixels, (std::vector<std::uint8_t>{0, 255, 128, 7}));
}

TEST(Tiling, GridGeometry) {
    const auto g = NodeGrid::for_frame(320, 240, 16);
    EXPECT_EQ(g.cols, 20);
    EXPECT_EQ(g.rows, 15);
    EXPECT_EQ(g.node_count(), 300);
    EXPECT_THROW(NodeGrid::for_frame(15, 40, 16), GeometryError);
}

TEST(Tiling, FourBlocksOf256) {
    std::mt19937_64 rng(1);
    const auto frame = test::random_image(32, 32, rng);
    const auto labels = tile_blocks(frame, NodeGrid::for_frame(32, 32, 16));
    ASSERT_EQ(labels.size(), 4u);
    for (const auto& l : labels) EXPECT_EQ(l.size(), 256u);
    // Row-major blocks, row-major pixels inside each block.
    EXPECT_EQ(labels[1][0], frame.at(16, 0));
    EXPECT_EQ(labels[2][17], frame.at(1, 17));
    EXPECT_EQ(labels[3][255], frame.at(31, 31));
}

TEST(Tiling, QvgaGives300Labels) {
    GreyImage frame(320, 240);
    EXPECT_EQ(tile_blocks(frame, NodeGrid::for_frame(320, 240, 16)).size(), 300u);
}

TEST(Tiling, CropsTrailingColumn) {
    GreyImage frame(33, 32, 5);
    for (int y = 0; y < 32; ++y) frame.at(32, y) = 250;
    const auto grid = NodeGrid::for_frame(33, 32, 16);
    const auto labels = tile_blocks(frame, grid);
    ASSERT_EQ(labels.size(), 4u);
    for (const auto& l : labels) {
        for (double v : l) EXPECT_EQ(v, 5.0);
    }
}

TEST(Tiling, PartitionReconstructsCroppedFrame) {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        std::uniform_int_distribution<int> dim(8, 70);
        std::uniform_int_distribution<int> bs(2, 8);
        const int w = dim(rng), h = dim(rng), n = bs(rng);
        const auto frame = test::random_image(w, h, rng);
        const auto grid = NodeGrid::for_frame(w, h, n);
        const auto labels = tile_blocks(frame, grid);
        GreyImage rebuilt(grid.cropped_width(), grid.cropped_height());
        std::vector<int> hits(rebuilt.pixels.size(), 0);
        for (int r = 0; r < grid.rows; ++r) {
            for (int c = 0; c < grid.cols; ++c) {
                const auto& l = labels[static_cast<std::size_t>(grid.index(c, r))];
                for (int y = 0; y < n; ++y) {
                    for (int x = 0; x < n; ++x) {
                        rebuilt.at(c * n + x, r * n + y) = static_cast<std::uint8_t>(l[y * n + x]);
                        ++hits[static_cast<std::size_t>((r * n + y) * rebuilt.width + c * n + x)];
                    }
                }
            }
        }
        for (int h2 : hits) ASSERT_EQ(h2, 1);
        for (int y = 0; y < rebuilt.height; ++y) {
            for (int x = 0; x < rebuilt.width; ++x) ASSERT_EQ(rebuilt.at(x, y), frame.at(x, y));
        }
    }
}

TEST(WriteImage, PgmIsBitExact) {
    GreyImage img(2, 2);
    img.pixels = {0, 255, 128, 7};
    const auto bytes = encode_pgm(img);
    const std::string header = "P5\n2 2\n255\n";
    ASSERT_EQ(bytes.size(), header.size() + 4);
    EXPECT_TRUE(std::equal(header.begin(), header.end(), bytes.begin()));
    EXPECT_EQ(std::vector<std::uint8_t>(bytes.end() - 4, bytes.end()), (std::vector<std::uint8_t>{0, 255, 128, 7}));

    TempDir dir;
    write_image(img, dir / "x.pgm");
    std::ifstream in(dir / "x.pgm", std::ios::binary);
    std::vector<std::uint8_t> on_disk((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    EXPECT_EQ(on_disk, bytes);
}

TEST(WriteImage, RoundTripPgmAndPng) {
    TempDir dir;
    std::mt19937_64 rng(3);
    for (int i = 0; i < 5; ++i) {
        const auto img = test::random_image(17 + i, 9 + 2 * i, rng);
        write_image(img, dir / "r.pgm");
        write_image(img, dir / "r.png");
        EXPECT_EQ(read_image(dir / "r.pgm"), img);
        EXPECT_EQ(read_image(dir / "r.png"), img);
    }
}

TEST(WriteImage, WriteThenLoadSequence) {
    TempDir dir;
    std::mt19937_64 rng(4);
    const auto img = test::random_image(32, 32, rng);
    write_image(img, dir / "0001.png");
    write_image(img, dir / "0002.pgm");
    const auto seq = load_sequence(dir.path());
    ASSERT_EQ(seq.frame_count(), 2u);
    EXPECT_EQ(seq.frames[0], img);
    EXPECT_EQ(seq.frames[1], img);
}

TEST(WriteImage, UnwritablePath) {
    GreyImage img(2, 2);
    EXPECT_THROW(write_image(img, "/nonexistent/dir/x.pgm"), WriteError);
    EXPECT_THROW(write_image(img, "/nonexistent/dir/x.png"), WriteError);
}

}  // namespace
}  // namespace bgest
