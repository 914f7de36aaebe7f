#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cgcn/linalg.hpp"

namespace cgcn {

/// Directed joint/bone topology. Edges point from the joint nearer the
/// skeleton gravity point (source) to the joint farther from it (target).
struct SkeletonGraph {
  int joint_count = 0;
  int dims = 3;
  std::vector<std::pair<int, int>> edges;
  std::vector<std::string> names;  // empty or joint_count entries

  /// True when the edge set, with directions dropped, forms a forest.
  /// Diagnostic only; arbitrary graphs are allowed.
  bool undirected_forest = false;
};

/// Joint coordinates for one frame, N x dims.
struct FramePose {
  Mat coords;
  std::optional<Vec> confidence;  // per joint, in [0,1]
};

struct WeightedAdjacency {
  Mat matrix;
  bool symmetric = true;
};

enum class PropagationKind { adjacency_normalized, centrality_augmented };

/// Symmetrically normalized propagation matrix D̂^{-1/2}(A+I)D̂^{-1/2}.
struct PropagationMatrix {
  Mat matrix;
  PropagationKind kind = PropagationKind::adjacency_normalized;
};

enum class WeightMode { unit, bone_length };

/// What to do when two connected joints coincide in bone_length mode.
enum class ZeroBonePolicy { substitute_epsilon, error };

inline constexpr double kZeroBoneEpsilon = 1e-6;

/// Validates topology: index range, self-loops, duplicates, directed acyclicity.
SkeletonGraph build_graph(const std::vector<std::pair<int, int>>& edges, int joint_count,
                          int dims);

/// Euclidean length of one bone in the given pose.
double bone_length(const FramePose& pose, std::pair<int, int> edge);

WeightedAdjacency weighted_adjacency(const SkeletonGraph& graph, const FramePose& pose,
                                     WeightMode mode,
                                     ZeroBonePolicy policy = ZeroBonePolicy::substitute_epsilon,
                                     std::vector<std::string>* warnings = nullptr);

/// Adjacency from explicit per-edge weights, ordered as graph.edges.
WeightedAdjacency adjacency_from_edge_weights(const SkeletonGraph& graph,
                                              const std::vector<double>& edge_weights);

PropagationMatrix normalized_propagation(const WeightedAdjacency& adj);

/// Per-edge lengths averaged over frames; zero-length bones are
/// epsilon-substituted under the given policy.
std::vector<double> mean_bone_lengths(const SkeletonGraph& graph,
                                      const std::vector<FramePose>& poses,
                                      ZeroBonePolicy policy = ZeroBonePolicy::substitute_epsilon,
                                      std::vector<std::string>* warnings = nullptr);

// --- skeleton templates -----------------------------------------------------

bool is_builtin_template(const std::string& id);

/// "ntu25" (25 joints, 3-D) or "openpose18" (18 joints, 2-D).
SkeletonGraph builtin_template(const std::string& id);

SkeletonGraph load_template_file(const std::string& path);

/// Builtin id, else treated as a path to a template JSON file.
SkeletonGraph resolve_template(const std::string& id_or_path);

std::string template_to_json_text(const SkeletonGraph& graph);

}  // namespace cgcn
