#include "bgest/spectral.hpp"

#include "bgest/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

namespace bgest {

namespace {

// basis[k * m + n] = alpha(k) * cos(pi * (2n + 1) * k / (2m))
const std::vector<double>& dct_basis(int m) {
    thread_local std::map<int, std::vector<double>> cache;
    auto it = cache.find(m);
    if (it != cache.end()) return it->second;
    std::vector<double> basis(static_cast<std::size_t>(m) * m);
    const double a0 = std::sqrt(1.0 / m);
    const double ak = std::sqrt(2.0 / m);
    for (int k = 0; k < m; ++k) {
        const double alpha = k == 0 ? a0 : ak;
        for (int n = 0; n < m; ++n) {
            basis[static_cast<std::size_t>(k) * m + n] =
                alpha * std::cos(std::numbers::pi * (2.0 * n + 1.0) * k / (2.0 * m));
        }
    }
    return cache.emplace(m, std::move(basis)).first->second;
}

constexpr Offset kTopLeft[] = {{-1, -1}, {0, -1}, {-1, 0}};
constexpr Offset kTopRight[] = {{0, -1}, {1, -1}, {1, 0}};
constexpr Offset kBottomLeft[] = {{-1, 0}, {-1, 1}, {0, 1}};
constexpr Offset kBottomRight[] = {{1, 0}, {0, 1}, {1, 1}};
constexpr Offset kLeft[] = {{-1, 0}};
constexpr Offset kRight[] = {{1, 0}};
constexpr Offset kUp[] = {{0, -1}};
constexpr Offset kDown[] = {{0, 1}};

}  // namespace

bool BackgroundGrid::complete() const {
    return std::none_of(labels.begin(), labels.end(), [](int v) { return v < 0; });
}

int BackgroundGrid::empty_count() const {
    return static_cast<int>(std::count_if(labels.begin(), labels.end(), [](int v) { return v < 0; }));
}

std::span<const Offset> clique_neighbours(CliqueKind kind) {
    switch (kind) {
        case CliqueKind::top_left: return kTopLeft;
        case CliqueKind::top_right: return kTopRight;
        case CliqueKind::bottom_left: return kBottomLeft;
        case CliqueKind::bottom_right: return kBottomRight;
        case CliqueKind::pair_left: return kLeft;
        case CliqueKind::pair_right: return kRight;
        case CliqueKind::pair_up: return kUp;
        case CliqueKind::pair_down: return kDown;
    }
    return {};
}

int retained_extent(int m) { return static_cast<int>(std::ceil(std::sqrt(static_cast<double>(m) * m * 0.75))); }

Tile dct2_rect(const Tile& tile) {
    if (tile.rows < 1 || tile.cols < 1 || tile.values.size() != static_cast<std::size_t>(tile.rows) * tile.cols) {
        throw ContractViolation("dct2: malformed tile");
    }
    const int rows = tile.rows;
    const int cols = tile.cols;
    const auto& brow = dct_basis(cols);
    const auto& bcol = dct_basis(rows);

    // Rows first: tmp(r, u) = sum_x tile(r, x) * basis_cols(u, x)
    Tile tmp(rows, cols);
    for (int r = 0; r < rows; ++r) {
        const double* src = &tile.values[static_cast<std::size_t>(r) * cols];
        for (int u = 0; u < cols; ++u) {
            const double* b = &brow[static_cast<std::size_t>(u) * cols];
            double acc = 0.0;
            for (int x = 0; x < cols; ++x) acc += src[x] * b[x];
            tmp.at(r, u) = acc;
        }
    }
    Tile out(rows, cols);
    for (int v = 0; v < rows; ++v) {
        const double* b = &bcol[static_cast<std::size_t>(v) * rows];
        double* dst = &out.values[static_cast<std::size_t>(v) * cols];
        for (int y = 0; y < rows; ++y) {
            const double w = b[y];
            const double* src = &tmp.values[static_cast<std::size_t>(y) * cols];
            for (int u = 0; u < cols; ++u) dst[u] += w * src[u];
        }
    }
    return out;
}

Tile dct2(const Tile& tile) {
    if (tile.rows != tile.cols) throw ContractViolation("dct2: tile must be square");
    if (tile.rows < 2) throw ContractViolation("dct2: tile must be at least 2x2");
    return dct2_rect(tile);
}

double clique_energy(const Tile& tile, BandShape band) {
    Tile coeffs = dct2_rect(tile);
    coeffs.at(0, 0) = 0.0;

    double energy = 0.0;
    if (band == BandShape::square) {
        const int pv = std::min(coeffs.rows, retained_extent(coeffs.rows));
        const int pu = std::min(coeffs.cols, retained_extent(coeffs.cols));
        for (int v = 0; v < pv; ++v) {
            for (int u = 0; u < pu; ++u) energy += std::abs(coeffs.at(v, u));
        }
        return energy;
    }

    const std::size_t keep = static_cast<std::size_t>(std::ceil(0.75 * coeffs.rows * coeffs.cols));
    std::size_t taken = 0;
    for (int s = 0; s <= coeffs.rows + coeffs.cols - 2 && taken < keep; ++s) {
        const int r_lo = std::max(0, s - (coeffs.cols - 1));
        const int r_hi = std::min(s, coeffs.rows - 1);
        for (int i = 0; i <= r_hi - r_lo && taken < keep; ++i) {
            // Even diagonals run bottom-left to top-right, odd ones the other way.
            const int r = (s % 2 == 0) ? r_hi - i : r_lo + i;
            energy += std::abs(coeffs.at(r, s - r));
            ++taken;
        }
    }
    return energy;
}

std::optional<Tile> assemble_clique(const SceneModel& model, const BackgroundGrid& background, NodeIndex node,
                                    CliqueKind kind, std::span<const double> candidate) {
    const NodeGrid& grid = model.grid;
    const int n = grid.block_size;
    if (candidate.size() != static_cast<std::size_t>(grid.label_dim())) {
        throw ContractViolation("assemble_clique: candidate dimension mismatch");
    }
    const auto neighbours = clique_neighbours(kind);
    int min_dc = 0, max_dc = 0, min_dr = 0, max_dr = 0;
    for (const auto& o : neighbours) {
        if (!background.labelled(node.col + o.dc, node.row + o.dr)) return std::nullopt;
        min_dc = std::min(min_dc, o.dc);
        max_dc = std::max(max_dc, o.dc);
        min_dr = std::min(min_dr, o.dr);
        max_dr = std::max(max_dr, o.dr);
    }

    Tile tile((max_dr - min_dr + 1) * n, (max_dc - min_dc + 1) * n);
    auto place = [&](int dc, int dr, std::span<const double> block) {
        const int y0 = (dr - min_dr) * n;
        const int x0 = (dc - min_dc) * n;
        for (int y = 0; y < n; ++y) {
            std::copy_n(block.begin() + static_cast<std::ptrdiff_t>(y) * n, n, &tile.at(y0 + y, x0));
        }
    };
    place(0, 0, candidate);
    for (const auto& o : neighbours) {
        const int c = node.col + o.dc;
        const int r = node.row + o.dr;
        const auto& set = model.at(c, r);
        place(o.dc, o.dr, set.reps[static_cast<std::size_t>(background.label(c, r))].mean);
    }
    return tile;
}

}  // namespace bgest
