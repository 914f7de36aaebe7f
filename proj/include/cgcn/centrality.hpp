#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cgcn/graph.hpp"
#include "cgcn/linalg.hpp"

namespace cgcn {

/// All-pairs shortest distances and shortest-path counts.
/// dist uses +inf for disconnected pairs; sigma(i,i) == 1.
struct ShortestPathTable {
  Mat dist;
  Mat sigma;
};

/// Relative tie tolerance for equal-length path detection.
inline constexpr double kPathTieTol = 1e-9;

/// Label-setting (Dijkstra) single-source runs from every source, with
/// shortest-path counting across ties.
ShortestPathTable shortest_paths(const WeightedAdjacency& adj);

/// Closeness per node: (N-1) / sum_j d(i,j). Throws DisconnectedGraph if any
/// distance is infinite. A single-node graph yields 1.0.
Vec joint_closeness(const ShortestPathTable& table);

/// Symmetric outer product of the closeness vector, peak-normalized to 1.
Mat closeness_matrix(const Vec& closeness);

/// Raw edge betweenness: for each edge, the sum over unordered node pairs
/// {l,q} != {i,j} of the fraction of shortest l-q paths crossing the edge
/// (Brandes accumulation; the endpoint pair itself is excluded).
Mat edge_betweenness_raw(const WeightedAdjacency& adj, const ShortestPathTable& table);

/// Peak-normalized edge betweenness; zero off the edge support.
Mat edge_betweenness(const WeightedAdjacency& adj, const ShortestPathTable& table);

/// Raw triplet co-membership: entry (i,j), i != j, counts connected induced
/// 3-node subgraphs containing both i and j; the diagonal counts subgraphs
/// containing i. Connectivity pattern only; weights are ignored.
Mat triplet_comembership_raw(const WeightedAdjacency& adj);

/// Peak-normalized triplet co-membership.
Mat triplet_comembership(const WeightedAdjacency& adj);

enum class CentralityMode { sequence_mean, per_frame };

enum class StreamKind { joint, bone, subgraph, adjacency };

const char* stream_name(StreamKind s);          // "J", "B", "W", "A"
StreamKind stream_from_name(const std::string& name);

/// The three normalized centrality matrices plus the propagation matrix for
/// one sequence (or one frame in per_frame mode).
struct CentralitySet {
  Mat J;
  Mat B;
  Mat W;
  PropagationMatrix A_tilde;
  CentralityMode mode = CentralityMode::sequence_mean;
  std::optional<int> frame_index;

  /// Ĉ = J + B + W + Ã.
  Mat combined() const;

  /// Ĉ_s = Ã + one of {J, B, W, 0}.
  Mat stream_matrix(StreamKind s) const;
};

/// Core computation from per-edge lengths on the template topology.
CentralitySet centrality_from_edge_lengths(const SkeletonGraph& graph,
                                           const std::vector<double>& edge_lengths);

/// sequence_mean: one set from frame-averaged bone lengths (result size 1);
/// per_frame: one set per frame.
std::vector<CentralitySet> assemble_centrality_sets(const SkeletonGraph& graph,
                                                    const std::vector<FramePose>& poses,
                                                    CentralityMode mode,
                                                    std::vector<std::string>* warnings = nullptr);

}  // namespace cgcn
