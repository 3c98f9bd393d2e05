#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "tsseg/matrix.hpp"

namespace tsseg {

enum class EdgeMode { binary, weighted };

/// Frames as nodes, edges between frames at most (window - 1) / 2 apart.
/// Immutable once built; safe to share read-only.
struct TemporalGraph {
  std::size_t num_nodes = 0;
  std::size_t window = 1;
  EdgeMode edge_mode = EdgeMode::binary;
  Matrix adj_tilde;             // A + I
  std::vector<Real> degree;     // row sums of adj_tilde
  Matrix norm_adj;              // D^-1/2 (A + I) D^-1/2

  std::size_t half_width() const noexcept { return (window - 1) / 2; }
};

/// Undirected pairs (i, j), i < j, 0-based, with j - i <= (window - 1) / 2.
/// Throws ConfigError for an even or zero window.
std::vector<std::pair<std::size_t, std::size_t>> build_temporal_edges(std::size_t num_frames,
                                                                      std::size_t window);

/// Cosine similarity clamped to [0, 1]; 0 when either norm is below 1e-12.
Real cosine_weight(std::span<const Real> x, std::span<const Real> y);

/// Builds the normalized adjacency of a feature sequence (rows are frames).
TemporalGraph build_graph(const Matrix& features, std::size_t window, EdgeMode mode);

/// norm_adj * m, exploiting the band structure.
Matrix propagate(const TemporalGraph& graph, const Matrix& m);

}  // namespace tsseg
