#include "cgcn/centrality.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include "cgcn/error.hpp"

namespace cgcn {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool tied(double a, double b) {
  return std::abs(a - b) <= kPathTieTol * std::max(a, b);
}

struct SourceRun {
  std::vector<double> dist;
  std::vector<double> sigma;
  std::vector<std::vector<int>> preds;  // shortest-path predecessors
  std::vector<int> order;               // settle order, nondecreasing distance
};

// Label-setting shortest paths with path counting from one source.
SourceRun dijkstra_counted(const Mat& adj, int source) {
  const int n = static_cast<int>(adj.rows());
  SourceRun run;
  run.dist.assign(static_cast<std::size_t>(n), kInf);
  run.sigma.assign(static_cast<std::size_t>(n), 0.0);
  run.preds.assign(static_cast<std::size_t>(n), {});
  std::vector<char> settled(static_cast<std::size_t>(n), 0);

  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  run.dist[static_cast<std::size_t>(source)] = 0.0;
  run.sigma[static_cast<std::size_t>(source)] = 1.0;
  pq.push({0.0, source});

  while (!pq.empty()) {
    const auto [d, u] = pq.top();
    pq.pop();
    if (settled[static_cast<std::size_t>(u)]) continue;
    settled[static_cast<std::size_t>(u)] = 1;
    run.order.push_back(u);
    for (int v = 0; v < n; ++v) {
      const double w = adj(u, v);
      if (w <= 0.0 || settled[static_cast<std::size_t>(v)]) continue;
      const double cand = d + w;
      auto& dv = run.dist[static_cast<std::size_t>(v)];
      if (std::isfinite(dv) && tied(cand, dv)) {
        run.sigma[static_cast<std::size_t>(v)] += run.sigma[static_cast<std::size_t>(u)];
        run.preds[static_cast<std::size_t>(v)].push_back(u);
      } else if (cand < dv) {
        dv = cand;
        run.sigma[static_cast<std::size_t>(v)] = run.sigma[static_cast<std::size_t>(u)];
        run.preds[static_cast<std::size_t>(v)] = {u};
        pq.push({cand, v});
      }
    }
  }
  return run;
}

void check_weighted(const Mat& adj) {
  require(adj.rows() == adj.cols(), Errc::DimensionMismatch, "adjacency must be square");
  require(adj.minCoeff() >= 0.0, Errc::NegativeWeight, "negative edge weight");
}

}  // namespace

ShortestPathTable shortest_paths(const WeightedAdjacency& adj) {
  check_weighted(adj.matrix);
  const int n = static_cast<int>(adj.matrix.rows());
  ShortestPathTable table;
  table.dist = Mat::Constant(n, n, kInf);
  table.sigma = Mat::Zero(n, n);
  for (int s = 0; s < n; ++s) {
    const SourceRun run = dijkstra_counted(adj.matrix, s);
    for (int v = 0; v < n; ++v) {
      table.dist(s, v) = run.dist[static_cast<std::size_t>(v)];
      table.sigma(s, v) = run.sigma[static_cast<std::size_t>(v)];
    }
  }
  return table;
}

Vec joint_closeness(const ShortestPathTable& table) {
  const auto n = table.dist.rows();
  Vec closeness(n);
  if (n == 1) {
    closeness(0) = 1.0;  // a lone node is trivially maximally central
    return closeness;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    double sum = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      require(std::isfinite(table.dist(i, j)), Errc::DisconnectedGraph,
              "closeness undefined on a disconnected graph");
      sum += table.dist(i, j);
    }
    closeness(i) = static_cast<double>(n - 1) / sum;
  }
  return closeness;
}

Mat closeness_matrix(const Vec& closeness) {
  const auto n = closeness.size();
  for (Eigen::Index i = 0; i < n; ++i)
    require(std::isfinite(closeness(i)) && closeness(i) > 0.0, Errc::NonFiniteCoordinate,
            "closeness values must be positive and finite");
  Mat j(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    j(a, a) = closeness(a) * closeness(a);
    for (Eigen::Index b = a + 1; b < n; ++b) {
      const double v = closeness(a) * closeness(b);
      j(a, b) = v;
      j(b, a) = v;
    }
  }
  return max_normalized(j);
}

Mat edge_betweenness_raw(const WeightedAdjacency& adj, const ShortestPathTable& table) {
  check_weighted(adj.matrix);
  const int n = static_cast<int>(adj.matrix.rows());
  Mat acc = Mat::Zero(n, n);  // upper triangle holds ordered-pair sums

  for (int s = 0; s < n; ++s) {
    const SourceRun run = dijkstra_counted(adj.matrix, s);
    std::vector<double> delta(static_cast<std::size_t>(n), 0.0);
    for (auto it = run.order.rbegin(); it != run.order.rend(); ++it) {
      const int w = *it;
      for (int v : run.preds[static_cast<std::size_t>(w)]) {
        const double c = run.sigma[static_cast<std::size_t>(v)] /
                         run.sigma[static_cast<std::size_t>(w)] *
                         (1.0 + delta[static_cast<std::size_t>(w)]);
        acc(std::min(v, w), std::max(v, w)) += c;
        delta[static_cast<std::size_t>(v)] += c;
      }
    }
  }

  Mat raw = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (adj.matrix(i, j) <= 0.0) continue;
      double v = acc(i, j) / 2.0;  // both directions counted once per unordered pair
      // Eq. 8 excludes the endpoint pair itself; the direct edge is the only
      // shortest i-j path that can cross e_ij.
      if (tied(table.dist(i, j), adj.matrix(i, j))) v -= 1.0 / table.sigma(i, j);
      v = std::max(v, 0.0);
      raw(i, j) = v;
      raw(j, i) = v;
    }
  }
  return raw;
}

Mat edge_betweenness(const WeightedAdjacency& adj, const ShortestPathTable& table) {
  return max_normalized(edge_betweenness_raw(adj, table));
}

Mat triplet_comembership_raw(const WeightedAdjacency& adj) {
  check_weighted(adj.matrix);
  const int n = static_cast<int>(adj.matrix.rows());
  std::vector<std::vector<int>> nbrs(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j && adj.matrix(i, j) > 0.0) nbrs[static_cast<std::size_t>(i)].push_back(j);

  Mat w = Mat::Zero(n, n);
  std::vector<char> mark(static_cast<std::size_t>(n), 0);

  for (int i = 0; i < n; ++i) {
    for (int v : nbrs[static_cast<std::size_t>(i)]) mark[static_cast<std::size_t>(v)] = 1;

    // Diagonal: pairs of i's neighbors, plus 2-paths i - j - k with k outside N(i).
    const auto deg_i = static_cast<double>(nbrs[static_cast<std::size_t>(i)].size());
    double diag = deg_i * (deg_i - 1.0) / 2.0;
    for (int j : nbrs[static_cast<std::size_t>(i)])
      for (int k : nbrs[static_cast<std::size_t>(j)])
        if (k != i && !mark[static_cast<std::size_t>(k)]) diag += 1.0;
    w(i, i) = diag;

    for (int j = i + 1; j < n; ++j) {
      double count = 0.0;
      if (adj.matrix(i, j) > 0.0) {
        // Edge pair: any third node adjacent to either endpoint completes a
        // connected triple.
        for (int k = 0; k < n; ++k)
          if (k != i && k != j &&
              (mark[static_cast<std::size_t>(k)] || adj.matrix(j, k) > 0.0))
            count += 1.0;
      } else {
        for (int k : nbrs[static_cast<std::size_t>(j)])
          if (mark[static_cast<std::size_t>(k)]) count += 1.0;
      }
      w(i, j) = count;
      w(j, i) = count;
    }

    for (int v : nbrs[static_cast<std::size_t>(i)]) mark[static_cast<std::size_t>(v)] = 0;
  }
  return w;
}

Mat triplet_comembership(const WeightedAdjacency& adj) {
  return max_normalized(triplet_comembership_raw(adj));
}

const char* stream_name(StreamKind s) {
  switch (s) {
    case StreamKind::joint: return "J";
    case StreamKind::bone: return "B";
    case StreamKind::subgraph: return "W";
    case StreamKind::adjacency: return "A";
  }
  return "?";
}

StreamKind stream_from_name(const std::string& name) {
  if (name == "J") return StreamKind::joint;
  if (name == "B") return StreamKind::bone;
  if (name == "W") return StreamKind::subgraph;
  if (name == "A") return StreamKind::adjacency;
  fail(Errc::InvalidConfig, "unknown stream '" + name + "' (expected J, B, W or A)");
}

Mat CentralitySet::combined() const { return J + B + W + A_tilde.matrix; }

Mat CentralitySet::stream_matrix(StreamKind s) const {
  switch (s) {
    case StreamKind::joint: return A_tilde.matrix + J;
    case StreamKind::bone: return A_tilde.matrix + B;
    case StreamKind::subgraph: return A_tilde.matrix + W;
    case StreamKind::adjacency: return A_tilde.matrix;
  }
  fail(Errc::InvalidConfig, "bad stream kind");
}

CentralitySet centrality_from_edge_lengths(const SkeletonGraph& graph,
                                           const std::vector<double>& edge_lengths) {
  for (double w : edge_lengths)
    require(w > 0.0 && std::isfinite(w), Errc::ZeroLengthBone,
            "edge lengths must be positive (substitute epsilon upstream)");
  const WeightedAdjacency weighted = adjacency_from_edge_weights(graph, edge_lengths);
  const ShortestPathTable table = shortest_paths(weighted);

  CentralitySet set;
  set.J = closeness_matrix(joint_closeness(table));
  set.B = edge_betweenness(weighted, table);
  set.W = triplet_comembership(weighted);
  set.A_tilde = normalized_propagation(
      adjacency_from_edge_weights(graph, std::vector<double>(graph.edges.size(), 1.0)));
  return set;
}

std::vector<CentralitySet> assemble_centrality_sets(const SkeletonGraph& graph,
                                                    const std::vector<FramePose>& poses,
                                                    CentralityMode mode,
                                                    std::vector<std::string>* warnings) {
  require(!poses.empty(), Errc::EmptyDataset, "at least one frame required");
  std::vector<CentralitySet> sets;
  if (mode == CentralityMode::sequence_mean) {
    const auto lengths =
        mean_bone_lengths(graph, poses, ZeroBonePolicy::substitute_epsilon, warnings);
    CentralitySet set = centrality_from_edge_lengths(graph, lengths);
    set.mode = CentralityMode::sequence_mean;
    sets.push_back(std::move(set));
  } else {
    for (std::size_t t = 0; t < poses.size(); ++t) {
      const auto lengths = mean_bone_lengths(graph, {poses[t]},
                                             ZeroBonePolicy::substitute_epsilon, warnings);
      CentralitySet set = centrality_from_edge_lengths(graph, lengths);
      set.mode = CentralityMode::per_frame;
      set.frame_index = static_cast<int>(t);
      sets.push_back(std::move(set));
    }
  }
  return sets;
}

}  // namespace cgcn
