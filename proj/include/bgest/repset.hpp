#pragma once

#include "bgest/frame_io.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace bgest {

/// One cluster of visually identical block observations at a node.
///
/// `variance` is the scalar quadratic-form variance of the cluster (sum over
/// the N*N elements), updated with the recursive rule in update_representative.
struct Representative {
    LabelVector mean;
    double variance = 0.0;
    std::uint64_t weight = 1;
};

/// Per-node state space, in first-creation order.
struct RepresentativeSet {
    std::vector<Representative> reps;

    std::size_t size() const { return reps.size(); }
    bool empty() const { return reps.empty(); }
    std::uint64_t total_weight() const;
    /// Index of the heaviest representative (first on ties).
    std::size_t heaviest() const;
};

struct NoiseThresholds {
    double t1 = 0.8;   // correlation threshold
    double t2 = 0.5;   // MAD threshold, intensity units
    double q31_mean = 0.0;
    double q31_std = 0.0;
};

struct SceneModel {
    NodeGrid grid;
    int frame_width = 0;
    int frame_height = 0;
    double fps = 25.0;
    NoiseThresholds thresholds;
    std::vector<RepresentativeSet> sets;  // row-major, grid.node_count() entries
    std::uint64_t frames_ingested = 0;

    static SceneModel create(int frame_width, int frame_height, int block_size, double fps,
                             const NoiseThresholds& thresholds);

    RepresentativeSet& at(int col, int row) { return sets[static_cast<std::size_t>(grid.index(col, row))]; }
    const RepresentativeSet& at(int col, int row) const {
        return sets[static_cast<std::size_t>(grid.index(col, row))];
    }

    /// Bytes held by representative statistics: S * (N*N + 2) scalars per node.
    std::size_t model_bytes() const;
};

// Sigma below this is treated as a flat block in correlation().
inline constexpr double kFlatSigma = 1e-9;

/// Pearson correlation of two equally sized vectors. Flat blocks: both flat -> 1,
/// exactly one flat -> 0.
double correlation(std::span<const double> a, std::span<const double> b);

/// Mean of absolute differences.
double mad(std::span<const double> a, std::span<const double> b);

/// T2 from a multiset of MAD points: keep the sorted interquartile slice
/// [floor(n/4), floor(3n/4)], then t2 = 2 * (mean + 2 * stddev), floored at 0.5.
NoiseThresholds noise_threshold_from_points(std::vector<double> points, double t1);

inline constexpr std::size_t kDefaultTrainingFrames = 100;
inline constexpr double kMinNoiseThreshold = 0.5;

/// Estimates T2 from MADs of co-located blocks in successive frames over the
/// first min(F, training_frames) frames.
NoiseThresholds estimate_noise_threshold(std::span<const GreyImage> frames, const NodeGrid& grid, double t1,
                                         std::size_t training_frames = kDefaultTrainingFrames);

/// Best-correlated representative that satisfies both similarity constraints.
std::optional<std::size_t> match_representative(const RepresentativeSet& set, std::span<const double> label,
                                                 const NoiseThresholds& thresholds);

/// Recursive mean/variance update; uses the pre-update mean and weight.
void update_representative(Representative& rep, std::span<const double> label);

/// Stage 1 for one node: update the matched representative or append a new one.
void ingest_label(RepresentativeSet& set, std::span<const double> label, const NoiseThresholds& thresholds);

/// Stage 1 for a whole frame. With `parallel`, nodes are split across worker
/// threads; each node is still owned by a single worker.
void ingest_frame(SceneModel& model, const GreyImage& frame, bool parallel = false);

/// Versioned binary snapshot (see docs/snapshot_format.md). The optional
/// background labels (one index per node, -1 for empty) ride along so a
/// finished estimate can be reused for segmentation.
struct ModelSnapshot {
    SceneModel model;
    std::optional<std::vector<int>> background;
};

void save_snapshot(const ModelSnapshot& snapshot, const std::filesystem::path& path);
ModelSnapshot load_snapshot(const std::filesystem::path& path);

}  // namespace bgest
