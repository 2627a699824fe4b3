#include "bgest/mrf_estimator.hpp"

#include "bgest/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <thread>
#include <utility>

namespace bgest {

namespace {

constexpr double kTempEpsilon = 1e-12;

// Relative tolerance under which two log-posteriors count as tied.
bool nearly_equal(double a, double b) {
    return std::abs(a - b) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)});
}

// True if candidate i beats candidate j.
bool beats(const PosteriorBreakdown& pb, const RepresentativeSet& set, std::size_t i, std::size_t j) {
    const double a = pb.candidates[i].log_posterior;
    const double b = pb.candidates[j].log_posterior;
    if (!nearly_equal(a, b)) return a > b;
    if (set.reps[i].weight != set.reps[j].weight) return set.reps[i].weight > set.reps[j].weight;
    return i < j;
}

template <typename Fn>
void for_each_node_parallel(int nodes, bool parallel, Fn&& fn) {
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    if (!parallel || hw == 1 || nodes < 2) {
        for (int i = 0; i < nodes; ++i) fn(i);
        return;
    }
    const int workers = static_cast<int>(std::min<unsigned>(hw, static_cast<unsigned>(nodes)));
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (int i = nodes * w / workers; i < nodes * (w + 1) / workers; ++i) fn(i);
        });
    }
}

}  // namespace

void GibbsParams::validate() const {
    if (eta < 1) throw ConfigError("eta must be >= 1");
    if (icm_iterations < 0) throw ConfigError("icm_iterations must be >= 0");
    if (!(w_max_seconds > 0.0)) throw ConfigError("w_max_seconds must be > 0");
    if (!(temperature_divisor > 0.0)) throw ConfigError("temperature_divisor must be > 0");
}

void EstimatorConfig::validate() const {
    if (block_size < 1) throw ConfigError("block_size must be >= 1");
    if (!(t1 > 0.0 && t1 <= 1.0)) throw ConfigError("t1 must lie in (0, 1]");
    if (!(fps > 0.0)) throw ConfigError("fps must be > 0");
    if (training_frames < 2) throw ConfigError("training_frames must be >= 2");
    gibbs.validate();
}

Eligibility eligible(const BackgroundGrid& background, NodeIndex node) {
    Eligibility out;
    for (CliqueKind kind : kFullCliques) {
        const auto nb = clique_neighbours(kind);
        const bool all = std::all_of(nb.begin(), nb.end(), [&](const Offset& o) {
            return background.labelled(node.col + o.dc, node.row + o.dr);
        });
        if (all) out.cliques.push_back(kind);
    }
    if (!out.cliques.empty()) return out;
    for (CliqueKind kind : kPairCliques) {
        const Offset o = clique_neighbours(kind)[0];
        if (background.labelled(node.col + o.dc, node.row + o.dr)) out.cliques.push_back(kind);
    }
    out.fallback = !out.cliques.empty();
    return out;
}

int neighbour_count(const Eligibility& elig) {
    std::set<std::pair<int, int>> seen;
    for (CliqueKind kind : elig.cliques) {
        for (const auto& o : clique_neighbours(kind)) seen.emplace(o.dc, o.dr);
    }
    return static_cast<int>(seen.size());
}

std::vector<double> label_likelihood(const RepresentativeSet& set, const GibbsParams& params, double fps) {
    if (set.empty()) throw ContractViolation("label_likelihood: empty representative set");
    const double w_max = params.w_max_seconds * fps;
    std::vector<double> out(set.size());
    double total = 0.0;
    for (std::size_t k = 0; k < set.size(); ++k) {
        out[k] = std::min(w_max, static_cast<double>(set.reps[k].weight));
        total += out[k];
    }
    for (auto& v : out) v /= total;
    return out;
}

NodeEnergy node_energy(const SceneModel& model, const BackgroundGrid& background, NodeIndex node,
                       std::span<const double> candidate, const Eligibility& elig, BandShape band) {
    if (elig.empty()) throw ContractViolation("node_energy: node has no usable clique");
    NodeEnergy out;
    double sum = 0.0;
    for (CliqueKind kind : elig.cliques) {
        auto tile = assemble_clique(model, background, node, kind, candidate);
        if (!tile) throw ContractViolation("node_energy: clique neighbour not labelled");
        sum += clique_energy(*tile, band) / static_cast<double>(tile->pixel_count());
        ++out.clique_count;
    }
    out.energy = sum / out.clique_count;
    return out;
}

NodeEnergy node_energy(const SceneModel& model, const BackgroundGrid& background, NodeIndex node,
                       std::span<const double> candidate, BandShape band) {
    return node_energy(model, background, node, candidate, eligible(background, node), band);
}

std::vector<double> label_log_prior(std::span<const double> energies, const GibbsParams& params) {
    if (energies.empty()) throw ContractViolation("label_prior: no candidates");
    const double u_min = *std::min_element(energies.begin(), energies.end());
    const double u_mean = std::accumulate(energies.begin(), energies.end(), 0.0) / static_cast<double>(energies.size());
    const double temperature = std::max(kTempEpsilon, (u_mean - u_min) / params.temperature_divisor + kTempEpsilon);

    std::vector<double> out(energies.size());
    double z = 0.0;
    for (std::size_t k = 0; k < energies.size(); ++k) {
        out[k] = -(energies[k] - u_min) / temperature;
        z += std::exp(out[k]);
    }
    const double log_z = std::log(z);
    for (auto& v : out) v -= log_z;
    return out;
}

std::vector<double> label_prior(std::span<const double> energies, const GibbsParams& params) {
    auto out = label_log_prior(energies, params);
    for (auto& v : out) v = std::exp(v);
    return out;
}

PosteriorBreakdown select_label(const SceneModel& model, const BackgroundGrid& background, NodeIndex node,
                                const GibbsParams& params, BandShape band) {
    const auto elig = eligible(background, node);
    if (elig.empty()) throw ContractViolation("select_label: node has no labelled neighbours");
    const auto& set = model.at(node.col, node.row);
    if (set.empty()) throw ContractViolation("select_label: empty representative set");

    PosteriorBreakdown pb;
    pb.eta_effective = std::min(params.eta, neighbour_count(elig));
    pb.candidates.resize(set.size());

    const auto likelihood = label_likelihood(set, params, model.fps);
    std::vector<double> energies(set.size());
    for (std::size_t k = 0; k < set.size(); ++k) {
        const auto e = node_energy(model, background, node, set.reps[k].mean, elig, band);
        energies[k] = e.energy;
        pb.candidates[k].energy = e.energy;
        pb.candidates[k].clique_count = e.clique_count;
    }
    const auto log_prior = label_log_prior(energies, params);
    for (std::size_t k = 0; k < set.size(); ++k) {
        auto& c = pb.candidates[k];
        c.likelihood = likelihood[k];
        c.log_likelihood = std::log(likelihood[k]);
        c.log_prior = log_prior[k];
        c.prior = std::exp(log_prior[k]);
        c.log_posterior = c.log_likelihood + pb.eta_effective * c.log_prior;
    }
    for (std::size_t k = 1; k < set.size(); ++k) {
        if (beats(pb, set, k, pb.chosen)) pb.chosen = k;
    }
    return pb;
}

BackgroundGrid initialize_partial(const SceneModel& model) {
    auto bg = BackgroundGrid::empty_for(model.grid);
    for (std::size_t i = 0; i < model.sets.size(); ++i) {
        if (model.sets[i].size() == 1) bg.labels[i] = 0;
    }
    return bg;
}

bool seed_corners(const SceneModel& model, BackgroundGrid& background) {
    if (background.empty_count() != background.grid.node_count()) return false;
    const NodeGrid& g = model.grid;
    // Row-major corner order; duplicates collapse on 1-wide grids.
    std::vector<NodeIndex> corners = {{0, 0}, {g.cols - 1, 0}, {0, g.rows - 1}, {g.cols - 1, g.rows - 1}};
    corners.erase(std::unique(corners.begin(), corners.end()), corners.end());

    std::optional<NodeIndex> best_node;
    std::size_t best_rep = 0;
    std::uint64_t best_weight = 0;
    for (const auto& c : corners) {
        const auto& set = model.at(c.col, c.row);
        for (std::size_t k = 0; k < set.size(); ++k) {
            if (!best_node || set.reps[k].weight > best_weight) {
                best_node = c;
                best_rep = k;
                best_weight = set.reps[k].weight;
            }
        }
    }
    if (!best_node) return false;
    background.set(best_node->col, best_node->row, static_cast<int>(best_rep));
    return true;
}

FillStats fill_background(const SceneModel& model, BackgroundGrid& background, const GibbsParams& params,
                          BandShape band) {
    FillStats stats;
    const NodeGrid& g = model.grid;

    auto run_pass = [&](bool allow_fallback) {
        int assigned = 0;
        for (int row = 0; row < g.rows; ++row) {
            for (int col = 0; col < g.cols; ++col) {
                if (background.labelled(col, row)) continue;
                const auto elig = eligible(background, {col, row});
                if (elig.empty() || (elig.fallback && !allow_fallback)) continue;
                const auto pb = select_label(model, background, {col, row}, params, band);
                background.set(col, row, static_cast<int>(pb.chosen));
                ++assigned;
            }
        }
        return assigned;
    };

    while (!background.complete()) {
        ++stats.passes;
        int assigned = run_pass(false);
        if (assigned == 0) {
            ++stats.passes;
            ++stats.fallback_passes;
            assigned = run_pass(true);
        }
        if (assigned == 0) {
            for (int row = 0; row < g.rows; ++row) {
                for (int col = 0; col < g.cols; ++col) {
                    if (background.labelled(col, row)) continue;
                    background.set(col, row, static_cast<int>(model.at(col, row).heaviest()));
                    ++stats.valve_assignments;
                    ++assigned;
                }
            }
        }
        stats.assigned += assigned;
    }
    return stats;
}

int IcmStats::total_changes() const { return std::accumulate(changes.begin(), changes.end(), 0); }

IcmStats icm_refine(const SceneModel& model, BackgroundGrid& background, const GibbsParams& params, BandShape band,
                    bool parallel) {
    if (!background.complete()) throw ContractViolation("icm_refine: background grid is incomplete");
    IcmStats stats;
    const NodeGrid& g = model.grid;
    const int nodes = g.node_count();

    std::vector<char> visit(static_cast<std::size_t>(nodes), 1);
    for (int it = 0; it < params.icm_iterations; ++it) {
        std::vector<char> changed(static_cast<std::size_t>(nodes), 0);
        int changes = 0;

        auto proposal = [&](const BackgroundGrid& view, int i) -> int {
            if (!visit[static_cast<std::size_t>(i)]) return -1;
            const NodeIndex node{i % g.cols, i / g.cols};
            if (model.sets[static_cast<std::size_t>(i)].size() < 2) return -1;
            if (eligible(view, node).empty()) return -1;
            const auto pb = select_label(model, view, node, params, band);
            const auto current = static_cast<std::size_t>(view.labels[static_cast<std::size_t>(i)]);
            if (pb.chosen == current) return -1;
            if (!(pb.candidates[pb.chosen].log_posterior > pb.candidates[current].log_posterior)) return -1;
            return static_cast<int>(pb.chosen);
        };

        if (parallel) {
            const BackgroundGrid frozen = background;
            std::vector<int> next(static_cast<std::size_t>(nodes), -1);
            for_each_node_parallel(nodes, true, [&](int i) { next[static_cast<std::size_t>(i)] = proposal(frozen, i); });
            for (int i = 0; i < nodes; ++i) {
                if (next[static_cast<std::size_t>(i)] < 0) continue;
                background.labels[static_cast<std::size_t>(i)] = next[static_cast<std::size_t>(i)];
                changed[static_cast<std::size_t>(i)] = 1;
                ++changes;
            }
        } else {
            for (int i = 0; i < nodes; ++i) {
                const int p = proposal(background, i);
                if (p < 0) continue;
                background.labels[static_cast<std::size_t>(i)] = p;
                changed[static_cast<std::size_t>(i)] = 1;
                ++changes;
            }
        }

        ++stats.iterations;
        stats.changes.push_back(changes);
        if (changes == 0) break;

        // Next iteration: only nodes with a changed 8-neighbour.
        std::fill(visit.begin(), visit.end(), 0);
        for (int i = 0; i < nodes; ++i) {
            if (!changed[static_cast<std::size_t>(i)]) continue;
            const int c = i % g.cols;
            const int r = i / g.cols;
            for (int dr = -1; dr <= 1; ++dr) {
                for (int dc = -1; dc <= 1; ++dc) {
                    if ((dr == 0 && dc == 0) || !background.in_bounds(c + dc, r + dr)) continue;
                    visit[static_cast<std::size_t>(g.index(c + dc, r + dr))] = 1;
                }
            }
        }
    }
    return stats;
}

GreyImage render_background(const SceneModel& model, const BackgroundGrid& background) {
    if (!background.complete()) throw ContractViolation("render_background: background grid is incomplete");
    const NodeGrid& g = model.grid;
    const int n = g.block_size;
    GreyImage out(g.cropped_width(), g.cropped_height());
    for (int row = 0; row < g.rows; ++row) {
        for (int col = 0; col < g.cols; ++col) {
            const auto& mean = model.at(col, row).reps[static_cast<std::size_t>(background.label(col, row))].mean;
            for (int y = 0; y < n; ++y) {
                for (int x = 0; x < n; ++x) {
                    const double v = std::round(mean[static_cast<std::size_t>(y) * n + x]);
                    out.at(col * n + x, row * n + y) = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
                }
            }
        }
    }
    return out;
}

std::vector<double> background_variance(const SceneModel& model, const BackgroundGrid& background) {
    if (!background.complete()) throw ContractViolation("background_variance: background grid is incomplete");
    const NodeGrid& g = model.grid;
    const int n = g.block_size;
    const int w = g.cropped_width();
    std::vector<double> out(static_cast<std::size_t>(w) * g.cropped_height());
    for (int row = 0; row < g.rows; ++row) {
        for (int col = 0; col < g.cols; ++col) {
            const auto& rep = model.at(col, row).reps[static_cast<std::size_t>(background.label(col, row))];
            const double per_pixel = rep.variance / static_cast<double>(g.label_dim());
            for (int y = 0; y < n; ++y) {
                std::fill_n(&out[static_cast<std::size_t>(row * n + y) * w + col * n], n, per_pixel);
            }
        }
    }
    return out;
}

std::vector<std::size_t> set_size_histogram(const SceneModel& model) {
    std::vector<std::size_t> hist;
    for (const auto& s : model.sets) {
        if (hist.size() <= s.size()) hist.resize(s.size() + 1, 0);
        ++hist[s.size()];
    }
    return hist;
}

SceneModel build_scene_model(const FrameSequence& frames, const EstimatorConfig& config) {
    config.validate();
    if (frames.frames.size() < 2) throw EstimationError("at least 2 frames are required");
    const NodeGrid grid = NodeGrid::for_frame(frames.width, frames.height, config.block_size);
    const auto thresholds = estimate_noise_threshold(frames.frames, grid, config.t1, config.training_frames);
    SceneModel model = SceneModel::create(frames.width, frames.height, config.block_size, config.fps, thresholds);
    for (const auto& frame : frames.frames) ingest_frame(model, frame, config.parallel);
    return model;
}

BackgroundGrid label_scene(const SceneModel& model, const EstimatorConfig& config, LabellingStats* stats) {
    config.gibbs.validate();
    LabellingStats local;
    BackgroundGrid bg = initialize_partial(model);
    local.partial_nodes = model.grid.node_count() - bg.empty_count();
    if (local.partial_nodes == 0) local.seeded = seed_corners(model, bg);
    local.fill = fill_background(model, bg, config.gibbs, config.band);
    local.icm = icm_refine(model, bg, config.gibbs, config.band, config.parallel);
    if (stats) *stats = std::move(local);
    return bg;
}

EstimateResult estimate_background(const FrameSequence& frames, const EstimatorConfig& config) {
    const auto start = std::chrono::steady_clock::now();
    EstimateResult result;
    result.model = build_scene_model(frames, config);
    result.labels = label_scene(result.model, config, &result.report.labelling);
    result.background = render_background(result.model, result.labels);
    const auto stop = std::chrono::steady_clock::now();

    auto& rep = result.report;
    rep.grid = result.model.grid;
    rep.thresholds = result.model.thresholds;
    rep.set_size_histogram = set_size_histogram(result.model);
    // Representative sets only grow, so the final footprint is the peak.
    rep.peak_model_bytes = result.model.model_bytes();
    rep.frames = frames.frames.size();
    rep.runtime_ms = std::chrono::duration<double, std::milli>(stop - start).count();
    rep.frames_per_second = rep.runtime_ms > 0.0 ? 1000.0 * static_cast<double>(rep.frames) / rep.runtime_ms : 0.0;
    return result;
}

}  // namespace bgest
