#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace bgest {

/// 8-bit greyscale raster, row-major.
struct GreyImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    GreyImage() = default;
    GreyImage(int w, int h, std::uint8_t fill = 0)
        : width(w), height(h), pixels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {}

    std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }

    bool operator==(const GreyImage&) const = default;
};

/// Interleaved 8-bit RGB raster, row-major.
struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // 3 bytes per pixel
};

struct FrameSequence {
    int width = 0;
    int height = 0;
    double fps = 25.0;
    std::vector<GreyImage> frames;

    std::size_t frame_count() const { return frames.size(); }
};

/// Block tiling of a W x H frame into N x N nodes; trailing pixels that do not
/// fill a whole block are cropped.
struct NodeGrid {
    int block_size = 16;
    int cols = 0;
    int rows = 0;

    static NodeGrid for_frame(int width, int height, int block_size);

    int node_count() const { return cols * rows; }
    int label_dim() const { return block_size * block_size; }
    int index(int col, int row) const { return row * cols + col; }
    int cropped_width() const { return cols * block_size; }
    int cropped_height() const { return rows * block_size; }

    bool operator==(const NodeGrid&) const = default;
};

/// Vectorised block (N*N intensities, row-major inside the block).
using LabelVector = std::vector<double>;

struct IngestOptions {
    // Only used for raw planar input.
    int width = 0;
    int height = 0;
    double fps = 25.0;
};

enum class ImageFormat { pgm, png };

std::uint8_t luma(std::uint8_t r, std::uint8_t g, std::uint8_t b);
GreyImage to_greyscale(const RgbImage& rgb);

/// Reads a single PGM/PPM/PNG file; colour input is converted with to_greyscale.
GreyImage read_image(const std::filesystem::path& path);

/// Loads a directory of numbered images, or a raw planar 8-bit Y file when
/// `source` is a regular file without a recognised image extension.
FrameSequence load_sequence(const std::filesystem::path& source, const IngestOptions& options = {});

/// Directory listing in frame order: numeric component of the stem, then lexical.
std::vector<std::filesystem::path> ordered_frame_files(const std::filesystem::path& dir);

std::vector<LabelVector> tile_blocks(const GreyImage& frame, const NodeGrid& grid);

/// Copies the block of node (col,row) into `out` (size N*N).
void extract_block(const GreyImage& frame, const NodeGrid& grid, int col, int row, std::span<double> out);

void write_image(const GreyImage& image, const std::filesystem::path& path, ImageFormat format);

/// Picks the format from the extension (.png -> PNG, anything else -> PGM).
void write_image(const GreyImage& image, const std::filesystem::path& path);

std::vector<std::uint8_t> encode_pgm(const GreyImage& image);

}  // namespace bgest
