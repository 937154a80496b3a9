#include "sdfa/graph.hpp"

#include <cmath>
#include <sstream>

namespace sdfa {

std::string SkeletonGraph::edge_table() const {
  std::ostringstream os;
  for (const auto& [i, j] : edges) os << i << "," << j << "\n";
  return os.str();
}

std::vector<double> normalize_adjacency(const std::vector<double>& a, int v,
                                        AdjacencyNorm norm) {
  if (a.size() != static_cast<std::size_t>(v) * v) {
    throw ShapeError("normalize_adjacency: matrix is not " + std::to_string(v) +
                     "x" + std::to_string(v));
  }
  std::vector<double> degree(v, 0.0);
  for (int i = 0; i < v; ++i) {
    for (int j = 0; j < v; ++j) degree[i] += a[i * v + j];
    if (degree[i] <= 0.0) {
      throw InternalError("normalize_adjacency: zero-degree row " + std::to_string(i));
    }
  }
  std::vector<double> out(a.size());
  if (norm == AdjacencyNorm::row) {
    for (int i = 0; i < v; ++i)
      for (int j = 0; j < v; ++j) out[i * v + j] = a[i * v + j] / degree[i];
  } else {
    for (int i = 0; i < v; ++i)
      for (int j = 0; j < v; ++j)
        out[i * v + j] = a[i * v + j] / std::sqrt(degree[i] * degree[j]);
  }
  return out;
}

SkeletonGraph build_graph(int num_joints, std::vector<std::pair<int, int>> edges,
                          AdjacencyNorm norm) {
  SkeletonGraph g;
  g.num_joints = num_joints;
  g.edges = std::move(edges);
  g.adjacency.assign(static_cast<std::size_t>(num_joints) * num_joints, 0.0);
  for (int i = 0; i < num_joints; ++i) g.adjacency[i * num_joints + i] = 1.0;
  for (auto& [i, j] : g.edges) {
    if (i < 0 || j < 0 || i >= num_joints || j >= num_joints) {
      throw ConfigError("build_graph: edge (" + std::to_string(i) + "," +
                        std::to_string(j) + ") out of range");
    }
    if (i > j) std::swap(i, j);
    g.adjacency[i * num_joints + j] = 1.0;
    g.adjacency[j * num_joints + i] = 1.0;
  }
  g.normalized = normalize_adjacency(g.adjacency, num_joints, norm);
  return g;
}

SkeletonGraph build_body25_graph(AdjacencyNorm norm) {
  // OpenPose BODY_25 joint order:
  //  0 nose, 1 neck, 2/3/4 right shoulder/elbow/wrist,
  //  5/6/7 left shoulder/elbow/wrist, 8 mid-hip, 9/10/11 right hip/knee/ankle,
  //  12/13/14 left hip/knee/ankle, 15/16 eyes, 17/18 ears,
  //  19/20/21 left toes/heel, 22/23/24 right toes/heel.
  std::vector<std::pair<int, int>> bones = {
      {0, 1},                      // nose-neck
      {1, 2},   {2, 3},   {3, 4},  // right arm
      {1, 5},   {5, 6},   {6, 7},  // left arm
      {1, 8},                      // neck-midhip
      {8, 9},   {9, 10},  {10, 11},   // right leg
      {8, 12},  {12, 13}, {13, 14},   // left leg
      {0, 15},  {15, 17},              // right eye/ear
      {0, 16},  {16, 18},              // left eye/ear
      {14, 19}, {19, 20}, {14, 21},    // left foot
      {11, 22}, {22, 23}, {11, 24},    // right foot
  };
  return build_graph(25, std::move(bones), norm);
}

}  // namespace sdfa
