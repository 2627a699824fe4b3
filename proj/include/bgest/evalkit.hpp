#pragma once

#include "bgest/frame_io.hpp"
#include "bgest/mrf_estimator.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace bgest {

inline constexpr int kDefaultErrorThreshold = 20;

/// Row-major boolean mask stored as bytes (0 / 1).
struct Mask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> bits;

    Mask() = default;
    Mask(int w, int h) : width(w), height(h), bits(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0) {}

    bool at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
    void set(int x, int y, bool v) { bits[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }
    std::size_t count() const;

    GreyImage to_image() const;                 // 0 / 255
    static Mask from_image(const GreyImage& g);  // nonzero -> set

    bool operator==(const Mask&) const = default;
};

struct EvalReport {
    double age = 0.0;
    std::size_t ep_count = 0;
    std::size_t cep_count = 0;
    int ep_threshold = kDefaultErrorThreshold;
};

struct SegmentationScore {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    double similarity = 0.0;

    SegmentationScore& operator+=(const SegmentationScore& o);
    void recompute();
};

double age(const GreyImage& estimate, const GreyImage& truth);

struct ErrorPixels {
    std::size_t count = 0;
    Mask mask;
};

/// Pixel is an error pixel iff |estimate - truth| > threshold.
ErrorPixels error_pixels(const GreyImage& estimate, const GreyImage& truth, int threshold = kDefaultErrorThreshold);

/// Error pixels whose in-bounds 4-neighbours are all error pixels.
std::size_t clustered_error_pixels(const Mask& mask);

EvalReport evaluate(const GreyImage& estimate, const GreyImage& truth, int threshold = kDefaultErrorThreshold);

SegmentationScore similarity(const Mask& predicted, const Mask& truth);

/// Per-pixel Gaussian background: mean and variance per pixel.
struct GaussianBackground {
    int width = 0;
    int height = 0;
    std::vector<double> mean;
    std::vector<double> variance;
};

inline constexpr double kSegmentK = 2.5;
inline constexpr double kSegmentVarFloor = 4.0;

/// Foreground iff (x - mu)^2 > k^2 * max(var, var_floor).
Mask gaussian_segment(const GreyImage& frame, const GaussianBackground& background, double k = kSegmentK,
                      double var_floor = kSegmentVarFloor);

/// Gaussian parameters from the chosen representatives (block variance / N^2).
GaussianBackground gaussian_from_labels(const SceneModel& model, const BackgroundGrid& labels);

/// Gaussian parameters taken directly from the training frames (per-pixel
/// temporal mean and population variance), cropped to width x height.
GaussianBackground gaussian_from_frames(const FrameSequence& frames, int width, int height);

/// Per-pixel temporal median; even counts take the mean of the two central
/// values, rounded half up.
GreyImage median_oracle(const FrameSequence& frames);

/// Crops `image` to its top-left width x height corner.
GreyImage crop(const GreyImage& image, int width, int height);
Mask crop(const Mask& mask, int width, int height);

// ---------------------------------------------------------------------------
// Synthetic cluttered sequences with ground truth.

enum class OccluderTexture { flat, noise, stripes, checker };

struct Occluder {
    int x = 0;            // top-left at first_frame
    int y = 0;
    int width = 0;
    int height = 0;
    OccluderTexture texture = OccluderTexture::noise;
    int intensity = 200;  // flat level / texture centre
    int first_frame = 1;  // 1-based, inclusive
    int last_frame = 1;
    double vx = 0.0;      // pixels per frame while present
    double vy = 0.0;
    std::uint64_t texture_seed = 1;

    /// Top-left corner at a 1-based frame inside the dwell interval.
    std::pair<int, int> position(int frame) const;
};

struct SynthSpec {
    int width = 320;
    int height = 240;
    int frame_count = 450;
    double noise_sigma = 1.0;
    double fps = 25.0;
    std::optional<GreyImage> background;  // generated texture when absent
    std::uint64_t background_seed = 7;
    std::vector<Occluder> occluders;

    void validate() const;
};

struct SynthOutput {
    FrameSequence frames;
    GreyImage truth;
    std::vector<Mask> masks;
};

/// Smooth textured background: a few low-frequency sinusoids plus a gradient,
/// mapped into [40, 210].
GreyImage textured_background(int width, int height, std::uint64_t seed);

SynthOutput synth_sequence(const SynthSpec& spec, std::uint64_t seed);

/// JSON round trip for spec files used by the CLI.
SynthSpec synth_spec_from_json(const std::string& text);
std::string synth_spec_to_json(const SynthSpec& spec);

/// Fixture: textured background, one 64x96 noise-textured occluder static for
/// frames 1..350 of 450, sigma 1 noise, 320x240.
SynthSpec stationary_occluder_spec();

/// Fixture: background never fully visible in any frame; several occluders
/// drift across the scene for the whole sequence.
SynthSpec bootstrap_spec();

// ---------------------------------------------------------------------------
// Sub-sequence evaluation (100% / 50% / 25% protocol).

struct SplitEvaluation {
    std::vector<EvalReport> runs;
    std::vector<std::size_t> frames_per_run;
    double mean_age = 0.0;
    double mean_ep = 0.0;
    double mean_cep = 0.0;
};

/// Splits the sequence into `splits` equal consecutive parts (trailing frames
/// dropped), estimates each and averages the metrics against `truth`.
SplitEvaluation evaluate_splits(const FrameSequence& frames, const GreyImage& truth, const EstimatorConfig& config,
                                int splits, int threshold = kDefaultErrorThreshold);

}  // namespace bgest
