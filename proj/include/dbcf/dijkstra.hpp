#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dbcf/errors.hpp"

namespace dbcf {

/// A point in the reconstruction space: a flattened filter treated as a
/// plain real vector.
using PointVector = std::vector<double>;

/// Finite equal-dimension point collection.
class PointSet {
 public:
  explicit PointSet(std::vector<PointVector> points)
      : points_(std::move(points)) {
    if (points_.empty()) throw ArgumentError("PointSet: no points");
    for (const PointVector& p : points_) {
      if (p.size() != points_[0].size())
        throw DimensionError("PointSet: dimension mismatch");
      for (double v : p)
        if (!std::isfinite(v)) throw NumericError("PointSet: non-finite value");
    }
  }

  std::size_t size() const { return points_.size(); }
  std::size_t dim() const { return points_[0].size(); }
  const PointVector& operator[](std::size_t i) const { return points_[i]; }
  const std::vector<PointVector>& points() const { return points_; }

 private:
  std::vector<PointVector> points_;
};

/// Unsquared Euclidean distance.
inline double euclidean_distance(std::span<const double> a,
                                 std::span<const double> b) {
  if (a.size() != b.size())
    throw DimensionError("euclidean_distance: dimension mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return std::sqrt(sum);
}

/// Weighted undirected adjacency: per node, (neighbor index, edge length).
using Adjacency = std::vector<std::vector<std::pair<std::size_t, double>>>;

/// Symmetric M-nearest-neighbor graph. p-q is an edge iff q is among p's M
/// nearest points or vice versa; edge weight is the Euclidean distance.
/// Equidistant candidates tie-break to the lower point index.
inline Adjacency knn_graph(const PointSet& points, std::size_t neighbors) {
  const std::size_t n = points.size();
  if (neighbors < 1 || neighbors > n)
    throw ArgumentError("knn_graph: neighbor count " +
                        std::to_string(neighbors) + " out of range [1, " +
                        std::to_string(n) + "]");
  const std::size_t m = std::min(neighbors, n - 1);
  Adjacency adj(n);
  std::vector<std::pair<double, std::size_t>> order;
  for (std::size_t i = 0; i < n; ++i) {
    order.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      order.emplace_back(euclidean_distance(points[i], points[j]), j);
    }
    std::sort(order.begin(), order.end());
    for (std::size_t r = 0; r < m && r < order.size(); ++r) {
      const auto [d, j] = order[r];
      // Insert the undirected edge once.
      auto& edges = adj[std::min(i, j)];
      const std::size_t other = std::max(i, j);
      if (std::none_of(edges.begin(), edges.end(),
                       [&](const auto& e) { return e.first == other; }))
        edges.emplace_back(other, d);
    }
  }
  // Mirror edges and order them for deterministic traversal.
  Adjacency full(n);
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& [j, d] : adj[i]) {
      full[i].emplace_back(j, d);
      full[j].emplace_back(i, d);
    }
  for (auto& edges : full) std::sort(edges.begin(), edges.end());
  return full;
}

/// Shortest-path distances from a dedicated source node.
struct DistanceField {
  std::size_t source = 0;          // node index of the source
  std::vector<double> distances;   // per node; +inf where unreachable
  std::size_t neighbors = 0;       // M used to build the graph
};

/// Dijkstra-distance from `source` to every point, over the M-nearest-
/// neighbor graph of points + source. With M equal to the point count the
/// graph is complete and the result collapses to plain Euclidean distance.
inline DistanceField dijkstra_distance(const PointVector& source,
                                       const PointSet& points,
                                       std::size_t neighbors) {
  if (source.size() != points.dim())
    throw DimensionError("dijkstra_distance: source dimension mismatch");
  std::vector<PointVector> all = points.points();
  all.push_back(source);
  const std::size_t n = all.size();
  const std::size_t src = n - 1;
  const Adjacency adj = knn_graph(PointSet(std::move(all)), neighbors);

  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(n, kInf);
  std::vector<bool> done(n, false);
  dist[src] = 0.0;
  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
  heap.emplace(0.0, src);
  while (!heap.empty()) {
    const auto [d, u] = heap.top();
    heap.pop();
    if (done[u]) continue;
    done[u] = true;
    for (const auto& [v, w] : adj[u]) {
      if (dist[u] + w < dist[v]) {
        dist[v] = dist[u] + w;
        heap.emplace(dist[v], v);
      }
    }
  }
  return DistanceField{src, std::move(dist), neighbors};
}

}  // namespace dbcf
