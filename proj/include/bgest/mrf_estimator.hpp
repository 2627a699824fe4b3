#pragma once

#include "bgest/frame_io.hpp"
#include "bgest/repset.hpp"
#include "bgest/spectral.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace bgest {

struct GibbsParams {
    int eta = 3;                      // cap on the prior weight (neighbours used)
    double w_max_seconds = 5.0;       // likelihood weight cap, in seconds of video
    int icm_iterations = 5;
    double temperature_divisor = 10.0;

    void validate() const;
};

struct EstimatorConfig {
    int block_size = 16;
    double t1 = 0.8;
    double fps = 25.0;
    std::size_t training_frames = kDefaultTrainingFrames;
    GibbsParams gibbs;
    BandShape band = BandShape::square;
    bool parallel = false;

    void validate() const;
};

struct Eligibility {
    std::vector<CliqueKind> cliques;
    bool fallback = false;  // cliques are 2-node pairs

    bool empty() const { return cliques.empty(); }
};

/// Usable cliques for `node` given the labelled neighbours: every fully
/// labelled 2x2 clique, or, if there is none, one pair per labelled 4-neighbour.
Eligibility eligible(const BackgroundGrid& background, NodeIndex node);

/// Number of distinct neighbour nodes touched by the cliques.
int neighbour_count(const Eligibility& elig);

/// Normalised weights min(W_max, W_k) with W_max = w_max_seconds * fps.
std::vector<double> label_likelihood(const RepresentativeSet& set, const GibbsParams& params, double fps);

struct NodeEnergy {
    double energy = 0.0;
    int clique_count = 0;
};

/// Mean over the usable cliques of the per-pixel clique energy.
NodeEnergy node_energy(const SceneModel& model, const BackgroundGrid& background, NodeIndex node,
                       std::span<const double> candidate, const Eligibility& elig,
                       BandShape band = BandShape::square);

/// Convenience overload that computes eligibility itself.
NodeEnergy node_energy(const SceneModel& model, const BackgroundGrid& background, NodeIndex node,
                       std::span<const double> candidate, BandShape band = BandShape::square);

/// Gibbs prior over a node's candidates with an adaptive temperature
/// T = max(eps, (mean(U) - min(U)) / tau + eps).
std::vector<double> label_prior(std::span<const double> energies, const GibbsParams& params);
std::vector<double> label_log_prior(std::span<const double> energies, const GibbsParams& params);

struct CandidateScore {
    double likelihood = 0.0;
    double prior = 0.0;
    double log_likelihood = 0.0;
    double log_prior = 0.0;
    double log_posterior = 0.0;
    double energy = 0.0;
    int clique_count = 0;
};

struct PosteriorBreakdown {
    std::vector<CandidateScore> candidates;
    int eta_effective = 0;
    std::size_t chosen = 0;
};

/// MAP candidate at `node`: argmax of log l + eta_eff * log p. Ties go to the
/// larger raw weight, then the lower index.
PosteriorBreakdown select_label(const SceneModel& model, const BackgroundGrid& background, NodeIndex node,
                                const GibbsParams& params, BandShape band = BandShape::square);

/// Stage 2: nodes with a single representative take it.
BackgroundGrid initialize_partial(const SceneModel& model);

/// If the grid is empty, seeds the heaviest representative among the four
/// corner nodes. Returns whether a seed was placed.
bool seed_corners(const SceneModel& model, BackgroundGrid& background);

struct FillStats {
    int passes = 0;
    int fallback_passes = 0;
    int assigned = 0;
    int valve_assignments = 0;
};

/// Stage 3 step 1: raster passes until every node is labelled.
FillStats fill_background(const SceneModel& model, BackgroundGrid& background, const GibbsParams& params,
                          BandShape band = BandShape::square);

struct IcmStats {
    int iterations = 0;
    std::vector<int> changes;  // per iteration
    int total_changes() const;
};

/// Stage 3 step 2. Sequential mode updates in place (raster order); parallel
/// mode evaluates all visited nodes against the previous iteration's grid and
/// applies the changes at the iteration boundary.
IcmStats icm_refine(const SceneModel& model, BackgroundGrid& background, const GibbsParams& params,
                    BandShape band = BandShape::square, bool parallel = false);

/// Writes each chosen mean (rounded, clamped) into its block.
GreyImage render_background(const SceneModel& model, const BackgroundGrid& background);

/// Per-pixel variance of the chosen representatives: the scalar quadratic-form
/// variance divided by N*N, shared by every pixel of the block.
std::vector<double> background_variance(const SceneModel& model, const BackgroundGrid& background);

/// Stage 1 over a whole sequence, including T2 estimation.
SceneModel build_scene_model(const FrameSequence& frames, const EstimatorConfig& config);

struct LabellingStats {
    bool seeded = false;
    int partial_nodes = 0;
    FillStats fill;
    IcmStats icm;
};

/// Stages 2 and 3 on an existing model.
BackgroundGrid label_scene(const SceneModel& model, const EstimatorConfig& config, LabellingStats* stats = nullptr);

struct EstimateReport {
    NodeGrid grid;
    NoiseThresholds thresholds;
    std::vector<std::size_t> set_size_histogram;  // [S] -> node count
    LabellingStats labelling;
    std::size_t peak_model_bytes = 0;
    std::size_t frames = 0;
    double runtime_ms = 0.0;
    double frames_per_second = 0.0;
};

struct EstimateResult {
    GreyImage background;
    BackgroundGrid labels;
    SceneModel model;
    EstimateReport report;
};

std::vector<std::size_t> set_size_histogram(const SceneModel& model);

/// End to end: T2, Stage 1, Stages 2 and 3, render.
EstimateResult estimate_background(const FrameSequence& frames, const EstimatorConfig& config);

}  // namespace bgest
