#include "tsseg/graph.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tsseg/kernels.hpp"

namespace tsseg {
namespace {

void check_window(std::size_t window) {
  if (window == 0 || window % 2 == 0)
    throw ConfigError("temporal window must be odd and >= 1, got " + std::to_string(window));
}

}  // namespace

std::vector<std::pair<std::size_t, std::size_t>> build_temporal_edges(std::size_t num_frames,
                                                                      std::size_t window) {
  check_window(window);
  const std::size_t half = (window - 1) / 2;
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i < num_frames; ++i)
    for (std::size_t j = i + 1; j < num_frames && j - i <= half; ++j) edges.emplace_back(i, j);
  return edges;
}

Real cosine_weight(std::span<const Real> x, std::span<const Real> y) {
  if (x.size() != y.size())
    throw ShapeError("cosine_weight: vector lengths " + std::to_string(x.size()) + " and " +
                     std::to_string(y.size()));
  double dot = 0, nx = 0, ny = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    dot += static_cast<double>(x[i]) * y[i];
    nx += static_cast<double>(x[i]) * x[i];
    ny += static_cast<double>(y[i]) * y[i];
  }
  if (nx < 1e-24 || ny < 1e-24) return 0;
  // sqrt(nx * ny) rather than sqrt(nx) * sqrt(ny): identical vectors then
  // give exactly 1.
  return static_cast<Real>(std::clamp(dot / std::sqrt(nx * ny), 0.0, 1.0));
}

TemporalGraph build_graph(const Matrix& features, std::size_t window, EdgeMode mode) {
  check_window(window);
  const std::size_t t = features.rows();
  if (t == 0) throw ShapeError("build_graph: feature sequence has no frames");

  TemporalGraph g;
  g.num_nodes = t;
  g.window = window;
  g.edge_mode = mode;
  g.adj_tilde = Matrix::identity(t);
  for (const auto& [i, j] : build_temporal_edges(t, window)) {
    const Real w = mode == EdgeMode::binary ? Real(1) : cosine_weight(features.row(i), features.row(j));
    g.adj_tilde(i, j) = w;
    g.adj_tilde(j, i) = w;
  }

  const std::size_t half = g.half_width();
  g.degree.assign(t, 0);
  for (std::size_t i = 0; i < t; ++i) {
    const std::size_t lo = i > half ? i - half : 0;
    const std::size_t hi = std::min(t - 1, i + half);
    Real s = 0;
    for (std::size_t j = lo; j <= hi; ++j) s += g.adj_tilde(i, j);
    g.degree[i] = s;
  }

  std::vector<Real> inv_sqrt(t);
  for (std::size_t i = 0; i < t; ++i) inv_sqrt[i] = Real(1) / std::sqrt(g.degree[i]);
  g.norm_adj = Matrix(t, t);
  for (std::size_t i = 0; i < t; ++i) {
    const std::size_t lo = i > half ? i - half : 0;
    const std::size_t hi = std::min(t - 1, i + half);
    for (std::size_t j = lo; j <= hi; ++j) g.norm_adj(i, j) = (inv_sqrt[i] * inv_sqrt[j]) * g.adj_tilde(i, j);
  }
  return g;
}

Matrix propagate(const TemporalGraph& graph, const Matrix& m) {
  return kernels::banded_matmul(graph.norm_adj, graph.half_width(), m);
}

}  // namespace tsseg
