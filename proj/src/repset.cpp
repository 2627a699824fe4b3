#include "bgest/repset.hpp"

#include "bgest/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

namespace bgest {

namespace {

void require_same_dim(std::span<const double> a, std::span<const double> b, const char* what) {
    if (a.size() != b.size() || a.empty()) {
        throw ContractViolation(std::string(what) + ": label dimensions differ (" + std::to_string(a.size()) +
                                " vs " + std::to_string(b.size()) + ")");
    }
}

}  // namespace

std::uint64_t RepresentativeSet::total_weight() const {
    std::uint64_t total = 0;
    for (const auto& r : reps) total += r.weight;
    return total;
}

std::size_t RepresentativeSet::heaviest() const {
    std::size_t best = 0;
    for (std::size_t k = 1; k < reps.size(); ++k) {
        if (reps[k].weight > reps[best].weight) best = k;
    }
    return best;
}

SceneModel SceneModel::create(int frame_width, int frame_height, int block_size, double fps,
                              const NoiseThresholds& thresholds) {
    SceneModel m;
    m.grid = NodeGrid::for_frame(frame_width, frame_height, block_size);
    m.frame_width = frame_width;
    m.frame_height = frame_height;
    m.fps = fps;
    m.thresholds = thresholds;
    m.sets.resize(static_cast<std::size_t>(m.grid.node_count()));
    return m;
}

std::size_t SceneModel::model_bytes() const {
    std::size_t reps = 0;
    for (const auto& s : sets) reps += s.size();
    const std::size_t scalars_per_rep = static_cast<std::size_t>(grid.label_dim()) + 2;
    return reps * scalars_per_rep * sizeof(double);
}

double correlation(std::span<const double> a, std::span<const double> b) {
    require_same_dim(a, b, "correlation");
    const double n = static_cast<double>(a.size());
    const double mean_a = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mean_b = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double saa = 0.0, sbb = 0.0, sab = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - mean_a;
        const double db = b[i] - mean_b;
        saa += da * da;
        sbb += db * db;
        sab += da * db;
    }
    const double sigma_a = std::sqrt(saa / n);
    const double sigma_b = std::sqrt(sbb / n);
    const bool flat_a = sigma_a < kFlatSigma;
    const bool flat_b = sigma_b < kFlatSigma;
    if (flat_a && flat_b) return 1.0;
    if (flat_a || flat_b) return 0.0;
    return std::clamp(sab / (n * sigma_a * sigma_b), -1.0, 1.0);
}

double mad(std::span<const double> a, std::span<const double> b) {
    require_same_dim(a, b, "mad");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += std::abs(a[i] - b[i]);
    return sum / static_cast<double>(a.size());
}

NoiseThresholds noise_threshold_from_points(std::vector<double> points, double t1) {
    if (points.empty()) throw EstimationError("noise threshold: no MAD points");
    std::sort(points.begin(), points.end());
    const std::size_t n = points.size();
    const std::size_t lo = n / 4;
    const std::size_t hi = std::min(n - 1, (3 * n) / 4);

    double sum = 0.0;
    for (std::size_t i = lo; i <= hi; ++i) sum += points[i];
    const double count = static_cast<double>(hi - lo + 1);
    const double mean = sum / count;
    double ss = 0.0;
    for (std::size_t i = lo; i <= hi; ++i) ss += (points[i] - mean) * (points[i] - mean);
    const double stddev = std::sqrt(ss / count);

    NoiseThresholds th;
    th.t1 = t1;
    th.q31_mean = mean;
    th.q31_std = stddev;
    th.t2 = std::max(2.0 * (mean + 2.0 * stddev), kMinNoiseThreshold);
    return th;
}

NoiseThresholds estimate_noise_threshold(std::span<const GreyImage> frames, const NodeGrid& grid, double t1,
                                         std::size_t training_frames) {
    if (frames.size() < 2) throw EstimationError("noise threshold needs at least 2 frames");
    const std::size_t used = std::min(frames.size(), std::max<std::size_t>(training_frames, 2));
    const std::size_t dim = static_cast<std::size_t>(grid.label_dim());

    std::vector<double> points;
    points.reserve((used - 1) * static_cast<std::size_t>(grid.node_count()));
    LabelVector prev(dim), cur(dim);
    for (std::size_t f = 1; f < used; ++f) {
        for (int row = 0; row < grid.rows; ++row) {
            for (int col = 0; col < grid.cols; ++col) {
                extract_block(frames[f - 1], grid, col, row, prev);
                extract_block(frames[f], grid, col, row, cur);
                points.push_back(mad(prev, cur));
            }
        }
    }
    return noise_threshold_from_points(std::move(points), t1);
}

std::optional<std::size_t> match_representative(const RepresentativeSet& set, std::span<const double> label,
                                                 const NoiseThresholds& thresholds) {
    std::optional<std::size_t> best;
    double best_corr = 0.0;
    for (std::size_t k = 0; k < set.reps.size(); ++k) {
        const auto& mean = set.reps[k].mean;
        // MAD first: it is cheaper and rejects most dissimilar blocks.
        if (!(mad(mean, label) < thresholds.t2)) continue;
        const double c = correlation(mean, label);
        if (!(c > thresholds.t1)) continue;
        if (!best || c > best_corr) {
            best = k;
            best_corr = c;
        }
    }
    return best;
}

void update_representative(Representative& rep, std::span<const double> label) {
    require_same_dim(rep.mean, label, "update_representative");
    const double w = static_cast<double>(rep.weight);
    double quad = 0.0;
    for (std::size_t i = 0; i < label.size(); ++i) {
        const double d = label[i] - rep.mean[i];
        quad += d * d;
        rep.mean[i] += d / (w + 1.0);
    }
    rep.variance = ((w - 1.0) / w) * rep.variance + quad / (w + 1.0);
    rep.weight += 1;
}

void ingest_label(RepresentativeSet& set, std::span<const double> label, const NoiseThresholds& thresholds) {
    if (auto m = match_representative(set, label, thresholds)) {
        update_representative(set.reps[*m], label);
        return;
    }
    set.reps.push_back(Representative{LabelVector(label.begin(), label.end()), 0.0, 1});
}

void ingest_frame(SceneModel& model, const GreyImage& frame, bool parallel) {
    if (frame.width != model.frame_width || frame.height != model.frame_height) {
        throw ContractViolation("ingest_frame: frame is " + std::to_string(frame.width) + "x" +
                                std::to_string(frame.height) + ", model expects " +
                                std::to_string(model.frame_width) + "x" + std::to_string(model.frame_height));
    }
    const NodeGrid& grid = model.grid;
    const auto dim = static_cast<std::size_t>(grid.label_dim());

    auto work = [&](int first_node, int last_node) {
        LabelVector label(dim);
        for (int node = first_node; node < last_node; ++node) {
            const int col = node % grid.cols;
            const int row = node / grid.cols;
            extract_block(frame, grid, col, row, label);
            ingest_label(model.sets[static_cast<std::size_t>(node)], label, model.thresholds);
        }
    };

    const int nodes = grid.node_count();
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    if (!parallel || hw == 1 || nodes < 2) {
        work(0, nodes);
    } else {
        const int workers = static_cast<int>(std::min<unsigned>(hw, static_cast<unsigned>(nodes)));
        std::vector<std::jthread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) {
            const int first = nodes * w / workers;
            const int last = nodes * (w + 1) / workers;
            pool.emplace_back(work, first, last);
        }
    }
    model.frames_ingested += 1;
}

}  // namespace bgest
