#pragma once

#include <string>
#include <utility>
#include <vector>

#include "sdfa/errors.hpp"

namespace sdfa {

// How the self-loop adjacency is normalized. `row` is D^-1 A (row-stochastic);
// `symmetric` is D^-1/2 A D^-1/2.
enum class AdjacencyNorm { row, symmetric };

// Skeleton connectivity plus its binary and normalized adjacency matrices.
// Immutable after construction; safe to share across threads.
struct SkeletonGraph {
  int num_joints = 0;
  std::vector<std::pair<int, int>> edges;  // undirected bone list, i < j
  std::vector<double> adjacency;           // V*V row-major, 0/1, diag = 1
  std::vector<double> normalized;          // V*V row-major

  double a(int i, int j) const { return adjacency[i * num_joints + j]; }
  double ahat(int i, int j) const { return normalized[i * num_joints + j]; }

  // One "i,j" line per bone, for docs and tests.
  std::string edge_table() const;
};

// Normalizes a symmetric 0/1 adjacency with self-loops. A zero-degree row is
// impossible once self-loops are present; hitting one is an internal error.
std::vector<double> normalize_adjacency(const std::vector<double>& a, int num_joints,
                                        AdjacencyNorm norm = AdjacencyNorm::row);

// Builds a graph from an explicit bone list (self-loops added here).
SkeletonGraph build_graph(int num_joints, std::vector<std::pair<int, int>> edges,
                          AdjacencyNorm norm = AdjacencyNorm::row);

// The OpenPose BODY_25 kinematic tree.
SkeletonGraph build_body25_graph(AdjacencyNorm norm = AdjacencyNorm::row);

// Entrywise product Ahat (x) M. The model performs this inside the joint
// aggregation op so the gradient reaches M; this standalone form backs tests
// and tooling. Zeros of Ahat stay zero, so M behaves like a masked gain.
template <class S>
std::vector<S> effective_adjacency(const std::vector<S>& ahat,
                                   const std::vector<S>& m, int num_joints) {
  const std::size_t want = static_cast<std::size_t>(num_joints) * num_joints;
  if (ahat.size() != want || m.size() != want) {
    throw ShapeError("effective_adjacency: expected two " +
                     std::to_string(num_joints) + "x" + std::to_string(num_joints) +
                     " matrices");
  }
  std::vector<S> out(want);
  for (std::size_t i = 0; i < want; ++i) out[i] = ahat[i] * m[i];
  return out;
}

}  // namespace sdfa
