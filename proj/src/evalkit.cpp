#include "bgest/evalkit.hpp"

#include "bgest/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

namespace bgest {

namespace {

void require_same_geometry(int w1, int h1, int w2, int h2, const char* what) {
    if (w1 != w2 || h1 != h2) {
        throw ContractViolation(std::string(what) + ": geometry mismatch " + std::to_string(w1) + "x" +
                                std::to_string(h1) + " vs " + std::to_string(w2) + "x" + std::to_string(h2));
    }
}

}  // namespace

std::size_t Mask::count() const {
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

GreyImage Mask::to_image() const {
    GreyImage img(width, height);
    for (std::size_t i = 0; i < bits.size(); ++i) img.pixels[i] = bits[i] ? 255 : 0;
    return img;
}

Mask Mask::from_image(const GreyImage& g) {
    Mask m(g.width, g.height);
    for (std::size_t i = 0; i < g.pixels.size(); ++i) m.bits[i] = g.pixels[i] != 0 ? 1 : 0;
    return m;
}

SegmentationScore& SegmentationScore::operator+=(const SegmentationScore& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    recompute();
    return *this;
}

void SegmentationScore::recompute() {
    const std::size_t denom = tp + fp + fn;
    similarity = denom == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(denom);
}

double age(const GreyImage& estimate, const GreyImage& truth) {
    require_same_geometry(estimate.width, estimate.height, truth.width, truth.height, "age");
    if (estimate.pixels.empty()) return 0.0;
    std::uint64_t sum = 0;
    for (std::size_t i = 0; i < estimate.pixels.size(); ++i) {
        sum += static_cast<std::uint64_t>(std::abs(int(estimate.pixels[i]) - int(truth.pixels[i])));
    }
    return static_cast<double>(sum) / static_cast<double>(estimate.pixels.size());
}

ErrorPixels error_pixels(const GreyImage& estimate, const GreyImage& truth, int threshold) {
    require_same_geometry(estimate.width, estimate.height, truth.width, truth.height, "error_pixels");
    ErrorPixels out{0, Mask(estimate.width, estimate.height)};
    for (std::size_t i = 0; i < estimate.pixels.size(); ++i) {
        if (std::abs(int(estimate.pixels[i]) - int(truth.pixels[i])) > threshold) {
            out.mask.bits[i] = 1;
            ++out.count;
        }
    }
    return out;
}

std::size_t clustered_error_pixels(const Mask& mask) {
    std::size_t count = 0;
    auto ep_or_outside = [&](int x, int y) {
        if (x < 0 || y < 0 || x >= mask.width || y >= mask.height) return true;
        return mask.at(x, y);
    };
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            if (!mask.at(x, y)) continue;
            if (ep_or_outside(x - 1, y) && ep_or_outside(x + 1, y) && ep_or_outside(x, y - 1) &&
                ep_or_outside(x, y + 1)) {
                ++count;
            }
        }
    }
    return count;
}

EvalReport evaluate(const GreyImage& estimate, const GreyImage& truth, int threshold) {
    EvalReport r;
    r.ep_threshold = threshold;
    r.age = age(estimate, truth);
    const auto ep = error_pixels(estimate, truth, threshold);
    r.ep_count = ep.count;
    r.cep_count = clustered_error_pixels(ep.mask);
    return r;
}

SegmentationScore similarity(const Mask& predicted, const Mask& truth) {
    require_same_geometry(predicted.width, predicted.height, truth.width, truth.height, "similarity");
    SegmentationScore s;
    for (std::size_t i = 0; i < predicted.bits.size(); ++i) {
        const bool p = predicted.bits[i] != 0;
        const bool t = truth.bits[i] != 0;
        if (p && t) ++s.tp;
        else if (p) ++s.fp;
        else if (t) ++s.fn;
    }
    s.recompute();
    return s;
}

Mask gaussian_segment(const GreyImage& frame, const GaussianBackground& background, double k, double var_floor) {
    require_same_geometry(frame.width, frame.height, background.width, background.height, "gaussian_segment");
    Mask out(frame.width, frame.height);
    const double k2 = k * k;
    for (std::size_t i = 0; i < frame.pixels.size(); ++i) {
        const double d = frame.pixels[i] - background.mean[i];
        out.bits[i] = d * d > k2 * std::max(background.variance[i], var_floor) ? 1 : 0;
    }
    return out;
}

GaussianBackground gaussian_from_labels(const SceneModel& model, const BackgroundGrid& labels) {
    GaussianBackground g;
    g.width = model.grid.cropped_width();
    g.height = model.grid.cropped_height();
    g.variance = background_variance(model, labels);
    g.mean.resize(g.variance.size());
    const int n = model.grid.block_size;
    for (int row = 0; row < model.grid.rows; ++row) {
        for (int col = 0; col < model.grid.cols; ++col) {
            const auto& mean = model.at(col, row).reps[static_cast<std::size_t>(labels.label(col, row))].mean;
            for (int y = 0; y < n; ++y) {
                std::copy_n(mean.begin() + static_cast<std::ptrdiff_t>(y) * n, n,
                            &g.mean[static_cast<std::size_t>(row * n + y) * g.width + col * n]);
            }
        }
    }
    return g;
}

GaussianBackground gaussian_from_frames(const FrameSequence& frames, int width, int height) {
    if (frames.frames.empty()) throw ContractViolation("gaussian_from_frames: no frames");
    if (width > frames.width || height > frames.height) throw ContractViolation("gaussian_from_frames: crop too large");
    GaussianBackground g;
    g.width = width;
    g.height = height;
    const std::size_t n = static_cast<std::size_t>(width) * height;
    std::vector<double> sum(n, 0.0), sum_sq(n, 0.0);
    for (const auto& f : frames.frames) {
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                const double v = f.at(x, y);
                const std::size_t i = static_cast<std::size_t>(y) * width + x;
                sum[i] += v;
                sum_sq[i] += v * v;
            }
        }
    }
    const double count = static_cast<double>(frames.frames.size());
    g.mean.resize(n);
    g.variance.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        g.mean[i] = sum[i] / count;
        g.variance[i] = std::max(0.0, sum_sq[i] / count - g.mean[i] * g.mean[i]);
    }
    return g;
}

GreyImage median_oracle(const FrameSequence& frames) {
    if (frames.frames.empty()) throw ContractViolation("median_oracle: no frames");
    GreyImage out(frames.width, frames.height);
    const std::size_t count = frames.frames.size();
    std::vector<std::uint8_t> series(count);
    for (std::size_t i = 0; i < out.pixels.size(); ++i) {
        for (std::size_t f = 0; f < count; ++f) series[f] = frames.frames[f].pixels[i];
        const std::size_t mid = count / 2;
        std::nth_element(series.begin(), series.begin() + static_cast<std::ptrdiff_t>(mid), series.end());
        const int upper = series[mid];
        if (count % 2 == 1) {
            out.pixels[i] = static_cast<std::uint8_t>(upper);
        } else {
            const int lower = *std::max_element(series.begin(), series.begin() + static_cast<std::ptrdiff_t>(mid));
            out.pixels[i] = static_cast<std::uint8_t>((lower + upper + 1) / 2);
        }
    }
    return out;
}

GreyImage crop(const GreyImage& image, int width, int height) {
    if (width > image.width || height > image.height) throw ContractViolation("crop: target larger than image");
    if (width == image.width && height == image.height) return image;
    GreyImage out(width, height);
    for (int y = 0; y < height; ++y) {
        std::copy_n(&image.pixels[static_cast<std::size_t>(y) * image.width], width,
                    &out.pixels[static_cast<std::size_t>(y) * width]);
    }
    return out;
}

Mask crop(const Mask& mask, int width, int height) {
    if (width > mask.width || height > mask.height) throw ContractViolation("crop: target larger than mask");
    Mask out(width, height);
    for (int y = 0; y < height; ++y) {
        std::copy_n(&mask.bits[static_cast<std::size_t>(y) * mask.width], width,
                    &out.bits[static_cast<std::size_t>(y) * width]);
    }
    return out;
}

SplitEvaluation evaluate_splits(const FrameSequence& frames, const GreyImage& truth, const EstimatorConfig& config,
                                int splits, int threshold) {
    if (splits != 1 && splits != 2 && splits != 4) throw ConfigError("splits must be 1, 2 or 4");
    const std::size_t per = frames.frames.size() / static_cast<std::size_t>(splits);
    if (per < 2) throw EstimationError("each split needs at least 2 frames");

    SplitEvaluation out;
    for (int s = 0; s < splits; ++s) {
        FrameSequence part;
        part.width = frames.width;
        part.height = frames.height;
        part.fps = frames.fps;
        const auto first = frames.frames.begin() + static_cast<std::ptrdiff_t>(per * static_cast<std::size_t>(s));
        part.frames.assign(first, first + static_cast<std::ptrdiff_t>(per));
        const auto est = estimate_background(part, config);
        const auto t = crop(truth, est.background.width, est.background.height);
        out.runs.push_back(evaluate(est.background, t, threshold));
        out.frames_per_run.push_back(per);
    }
    for (const auto& r : out.runs) {
        out.mean_age += r.age;
        out.mean_ep += static_cast<double>(r.ep_count);
        out.mean_cep += static_cast<double>(r.cep_count);
    }
    out.mean_age /= splits;
    out.mean_ep /= splits;
    out.mean_cep /= splits;
    return out;
}

}  // namespace bgest
