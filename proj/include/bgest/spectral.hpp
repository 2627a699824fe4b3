#pragma once

#include "bgest/repset.hpp"

#include <array>
#include <optional>
#include <span>
#include <vector>

namespace bgest {

/// Real-valued raster used for clique tiles and DCT coefficients (row-major).
struct Tile {
    int rows = 0;
    int cols = 0;
    std::vector<double> values;

    Tile() = default;
    Tile(int r, int c, double fill = 0.0)
        : rows(r), cols(c), values(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), fill) {}

    double& at(int row, int col) { return values[static_cast<std::size_t>(row) * cols + col]; }
    double at(int row, int col) const { return values[static_cast<std::size_t>(row) * cols + col]; }
    std::size_t pixel_count() const { return values.size(); }
};

/// Chosen representative per node; -1 marks an empty slot.
struct BackgroundGrid {
    NodeGrid grid;
    std::vector<int> labels;

    static BackgroundGrid empty_for(const NodeGrid& g) {
        return {g, std::vector<int>(static_cast<std::size_t>(g.node_count()), -1)};
    }

    bool in_bounds(int col, int row) const { return col >= 0 && row >= 0 && col < grid.cols && row < grid.rows; }
    int label(int col, int row) const { return labels[static_cast<std::size_t>(grid.index(col, row))]; }
    void set(int col, int row, int idx) { labels[static_cast<std::size_t>(grid.index(col, row))] = idx; }
    bool labelled(int col, int row) const { return in_bounds(col, row) && label(col, row) >= 0; }
    bool complete() const;
    int empty_count() const;

    bool operator==(const BackgroundGrid&) const = default;
};

struct NodeIndex {
    int col = 0;
    int row = 0;
    bool operator==(const NodeIndex&) const = default;
};

/// The four 2x2 cliques around a node (named by where the clique sits
/// relative to the node) and the 2-node fallback pairs.
enum class CliqueKind { top_left, top_right, bottom_left, bottom_right, pair_left, pair_right, pair_up, pair_down };

inline constexpr std::array<CliqueKind, 4> kFullCliques = {CliqueKind::top_left, CliqueKind::top_right,
                                                           CliqueKind::bottom_left, CliqueKind::bottom_right};
inline constexpr std::array<CliqueKind, 4> kPairCliques = {CliqueKind::pair_left, CliqueKind::pair_right,
                                                           CliqueKind::pair_up, CliqueKind::pair_down};

struct Offset {
    int dc = 0;
    int dr = 0;
};

/// Neighbour offsets (excluding the node itself) that make up a clique.
std::span<const Offset> clique_neighbours(CliqueKind kind);

/// How much of the spectrum enters the clique energy.
enum class BandShape {
    square,  // P x P low-frequency corner, P = ceil(sqrt(0.75) * M) per axis
    zigzag,  // first ceil(0.75 * rows * cols) coefficients in zig-zag order
};

/// Retained extent along one axis of length m: ceil(sqrt(m^2 * 0.75)).
int retained_extent(int m);

/// Orthonormal 2D DCT-II of a square tile (M >= 2).
Tile dct2(const Tile& tile);

/// Orthonormal 2D DCT-II of an arbitrary rows x cols tile.
Tile dct2_rect(const Tile& tile);

/// Sum of |C(v,u)| over the retained low band with the DC term removed.
double clique_energy(const Tile& tile, BandShape band = BandShape::square);

/// Builds the clique tile with `candidate` at `node` and the chosen means of
/// the clique's neighbours around it. Empty if any neighbour is out of bounds
/// or unlabelled.
std::optional<Tile> assemble_clique(const SceneModel& model, const BackgroundGrid& background, NodeIndex node,
                                    CliqueKind kind, std::span<const double> candidate);

}  // namespace bgest
