#include "bgest/frame_io.hpp"

#include "bgest/error.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>

namespace bgest {

namespace fs = std::filesystem;

namespace {

std::string lower_ext(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext;
}

bool is_image_ext(const std::string& ext) {
    return ext == ".pgm" || ext == ".ppm" || ext == ".pnm" || ext == ".png";
}

std::vector<std::uint8_t> read_all(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestError("cannot open frame '" + path.string() + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Minimal netpbm header tokenizer: whitespace and '#' comments between tokens.
class PnmCursor {
public:
    PnmCursor(const std::vector<std::uint8_t>& bytes, const fs::path& path) : bytes_(bytes), path_(path) {}

    std::string token() {
        skip_space_and_comments();
        std::string out;
        while (pos_ < bytes_.size() && !std::isspace(bytes_[pos_]) && bytes_[pos_] != '#') {
            out.push_back(static_cast<char>(bytes_[pos_++]));
        }
        if (out.empty()) fail("truncated header");
        return out;
    }

    int integer() {
        const std::string t = token();
        int v = 0;
        for (char c : t) {
            if (!std::isdigit(static_cast<unsigned char>(c))) fail("non-numeric header field '" + t + "'");
            v = v * 10 + (c - '0');
            if (v > 1 << 24) fail("header field out of range");
        }
        return v;
    }

    // Binary payload starts after exactly one whitespace byte following maxval.
    std::size_t payload_start() {
        if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) fail("missing separator before raster");
        return pos_ + 1;
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw IngestError("corrupt netpbm frame '" + path_.string() + "': " + what);
    }

private:
    void skip_space_and_comments() {
        while (pos_ < bytes_.size()) {
            if (std::isspace(bytes_[pos_])) {
                ++pos_;
            } else if (bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else {
                break;
            }
        }
    }

    const std::vector<std::uint8_t>& bytes_;
    const fs::path& path_;
    std::size_t pos_ = 0;
};

GreyImage read_pnm(const fs::path& path) {
    const auto bytes = read_all(path);
    PnmCursor cur(bytes, path);
    const std::string magic = cur.token();
    if (magic != "P2" && magic != "P5" && magic != "P6") cur.fail("unsupported magic '" + magic + "'");
    const int w = cur.integer();
    const int h = cur.integer();
    const int maxval = cur.integer();
    if (w <= 0 || h <= 0) cur.fail("non-positive dimensions");
    if (maxval <= 0 || maxval > 255) cur.fail("only 8-bit maxval is supported");

    const std::size_t count = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    auto rescale = [maxval](int v) {
        return static_cast<std::uint8_t>(maxval == 255 ? v : std::lround(v * 255.0 / maxval));
    };

    if (magic == "P2") {
        GreyImage img(w, h);
        for (std::size_t i = 0; i < count; ++i) {
            const int v = cur.integer();
            if (v > maxval) cur.fail("sample exceeds maxval");
            img.pixels[i] = rescale(v);
        }
        return img;
    }

    const std::size_t start = cur.payload_start();
    const std::size_t channels = magic == "P6" ? 3 : 1;
    if (bytes.size() < start + count * channels) cur.fail("truncated raster");

    if (channels == 1) {
        GreyImage img(w, h);
        for (std::size_t i = 0; i < count; ++i) img.pixels[i] = rescale(bytes[start + i]);
        return img;
    }
    RgbImage rgb{w, h, std::vector<std::uint8_t>(count * 3)};
    for (std::size_t i = 0; i < count * 3; ++i) rgb.pixels[i] = rescale(bytes[start + i]);
    return to_greyscale(rgb);
}

GreyImage read_png(const fs::path& path) {
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.c_str())) {
        throw IngestError("corrupt png frame '" + path.string() + "': " + image.message);
    }
    const bool colour = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
    image.format = colour ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
        const std::string msg = image.message;
        png_image_free(&image);
        throw IngestError("corrupt png frame '" + path.string() + "': " + msg);
    }
    const int w = static_cast<int>(image.width);
    const int h = static_cast<int>(image.height);
    if (colour) return to_greyscale(RgbImage{w, h, std::move(buffer)});
    GreyImage img;
    img.width = w;
    img.height = h;
    img.pixels = std::move(buffer);
    return img;
}

std::optional<unsigned long long> numeric_component(const fs::path& p) {
    // Last run of digits in the stem, so "cam2_frame0010" orders by 10.
    const std::string stem = p.stem().string();
    auto end = stem.find_last_of("0123456789");
    if (end == std::string::npos) return std::nullopt;
    auto begin = end;
    while (begin > 0 && std::isdigit(static_cast<unsigned char>(stem[begin - 1]))) --begin;
    const std::string digits = stem.substr(begin, end - begin + 1).substr(0, 18);
    return std::stoull(digits);
}

FrameSequence load_raw(const fs::path& source, const IngestOptions& options) {
    if (options.width <= 0 || options.height <= 0) {
        throw GeometryError("raw input '" + source.string() + "' needs positive --width and --height");
    }
    const auto bytes = read_all(source);
    const std::size_t frame_bytes = static_cast<std::size_t>(options.width) * options.height;
    if (bytes.empty() || bytes.size() % frame_bytes != 0) {
        throw GeometryError("raw input '" + source.string() + "' has " + std::to_string(bytes.size()) +
                            " bytes, not a multiple of " + std::to_string(frame_bytes));
    }
    FrameSequence seq;
    seq.width = options.width;
    seq.height = options.height;
    seq.fps = options.fps;
    const std::size_t n = bytes.size() / frame_bytes;
    seq.frames.reserve(n);
    for (std::size_t f = 0; f < n; ++f) {
        GreyImage img(options.width, options.height);
        std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(f * frame_bytes), frame_bytes, img.pixels.begin());
        seq.frames.push_back(std::move(img));
    }
    return seq;
}

}  // namespace

NodeGrid NodeGrid::for_frame(int width, int height, int block_size) {
    if (block_size < 1) throw GeometryError("block size must be positive");
    NodeGrid g;
    g.block_size = block_size;
    g.cols = width / block_size;
    g.rows = height / block_size;
    if (g.cols < 1 || g.rows < 1) {
        throw GeometryError("frame " + std::to_string(width) + "x" + std::to_string(height) +
                            " is smaller than one " + std::to_string(block_size) + "px block");
    }
    return g;
}

std::uint8_t luma(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    const double y = 0.299 * r + 0.587 * g + 0.114 * b;
    return static_cast<std::uint8_t>(std::clamp(std::lround(y), 0L, 255L));
}

GreyImage to_greyscale(const RgbImage& rgb) {
    GreyImage out(rgb.width, rgb.height);
    for (std::size_t i = 0; i < out.pixels.size(); ++i) {
        out.pixels[i] = luma(rgb.pixels[3 * i], rgb.pixels[3 * i + 1], rgb.pixels[3 * i + 2]);
    }
    return out;
}

GreyImage read_image(const fs::path& path) {
    if (!fs::exists(path)) throw IngestError("missing frame '" + path.string() + "'");
    if (lower_ext(path) == ".png") return read_png(path);
    return read_pnm(path);
}

std::vector<fs::path> ordered_frame_files(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && is_image_ext(lower_ext(entry.path()))) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end(), [](const fs::path& a, const fs::path& b) {
        const auto na = numeric_component(a);
        const auto nb = numeric_component(b);
        if (na && nb && *na != *nb) return *na < *nb;
        if (na.has_value() != nb.has_value()) return na.has_value();
        return a.filename().string() < b.filename().string();
    });
    return files;
}

FrameSequence load_sequence(const fs::path& source, const IngestOptions& options) {
    if (!fs::exists(source)) throw IngestError("input '" + source.string() + "' does not exist");
    if (!(options.fps > 0.0)) throw IngestError("fps must be positive");

    if (!fs::is_directory(source)) {
        if (is_image_ext(lower_ext(source))) {
            FrameSequence seq;
            seq.frames.push_back(read_image(source));
            seq.width = seq.frames[0].width;
            seq.height = seq.frames[0].height;
            seq.fps = options.fps;
            return seq;
        }
        return load_raw(source, options);
    }

    const auto files = ordered_frame_files(source);
    if (files.empty()) throw IngestError("no image frames found in '" + source.string() + "'");
    FrameSequence seq;
    seq.fps = options.fps;
    seq.frames.reserve(files.size());
    for (const auto& f : files) {
        GreyImage img = read_image(f);
        if (seq.frames.empty()) {
            seq.width = img.width;
            seq.height = img.height;
        } else if (img.width != seq.width || img.height != seq.height) {
            throw GeometryError("frame '" + f.string() + "' is " + std::to_string(img.width) + "x" +
                                std::to_string(img.height) + ", expected " + std::to_string(seq.width) + "x" +
                                std::to_string(seq.height));
        }
        seq.frames.push_back(std::move(img));
    }
    return seq;
}

void extract_block(const GreyImage& frame, const NodeGrid& grid, int col, int row, std::span<double> out) {
    const int n = grid.block_size;
    const int x0 = col * n;
    const int y0 = row * n;
    std::size_t k = 0;
    for (int y = 0; y < n; ++y) {
        const std::uint8_t* src = &frame.pixels[static_cast<std::size_t>(y0 + y) * frame.width + x0];
        for (int x = 0; x < n; ++x) out[k++] = src[x];
    }
}

std::vector<LabelVector> tile_blocks(const GreyImage& frame, const NodeGrid& grid) {
    if (frame.width < grid.block_size || frame.height < grid.block_size) {
        throw GeometryError("frame smaller than one block");
    }
    if (grid.cropped_width() > frame.width || grid.cropped_height() > frame.height) {
        throw GeometryError("frame geometry does not match node grid");
    }
    std::vector<LabelVector> labels;
    labels.reserve(static_cast<std::size_t>(grid.node_count()));
    for (int row = 0; row < grid.rows; ++row) {
        for (int col = 0; col < grid.cols; ++col) {
            LabelVector v(static_cast<std::size_t>(grid.label_dim()));
            extract_block(frame, grid, col, row, v);
            labels.push_back(std::move(v));
        }
    }
    return labels;
}

std::vector<std::uint8_t> encode_pgm(const GreyImage& image) {
    std::ostringstream header;
    header << "P5\n" << image.width << ' ' << image.height << "\n255\n";
    const std::string h = header.str();
    std::vector<std::uint8_t> out(h.begin(), h.end());
    out.insert(out.end(), image.pixels.begin(), image.pixels.end());
    return out;
}

void write_image(const GreyImage& image, const fs::path& path, ImageFormat format) {
    if (format == ImageFormat::pgm) {
        const auto bytes = encode_pgm(image);
        std::ofstream out(path, std::ios::binary);
        if (!out) throw WriteError("cannot open '" + path.string() + "' for writing");
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw WriteError("failed writing '" + path.string() + "'");
        return;
    }
    png_image png;
    std::memset(&png, 0, sizeof(png));
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(image.width);
    png.height = static_cast<png_uint_32>(image.height);
    png.format = PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&png, path.c_str(), 0, image.pixels.data(), 0, nullptr)) {
        throw WriteError("cannot write png '" + path.string() + "': " + png.message);
    }
}

void write_image(const GreyImage& image, const fs::path& path) {
    write_image(image, path, lower_ext(path) == ".png" ? ImageFormat::png : ImageFormat::pgm);
}

}  // namespace bgest
