#include "cgcn/graph.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cgcn/error.hpp"

namespace cgcn {

namespace {

// Union-find for the undirected-forest diagnostic.
struct Dsu {
  std::vector<int> parent;
  explicit Dsu(int n) : parent(n) {
    for (int i = 0; i < n; ++i) parent[i] = i;
  }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  bool merge(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[a] = b;
    return true;
  }
};

bool has_directed_cycle(int n, const std::vector<std::pair<int, int>>& edges) {
  std::vector<std::vector<int>> out(static_cast<std::size_t>(n));
  std::vector<int> indeg(static_cast<std::size_t>(n), 0);
  for (const auto& [s, t] : edges) {
    out[static_cast<std::size_t>(s)].push_back(t);
    ++indeg[static_cast<std::size_t>(t)];
  }
  // Kahn's algorithm: a cycle exists iff not all nodes drain.
  std::vector<int> queue;
  for (int i = 0; i < n; ++i)
    if (indeg[static_cast<std::size_t>(i)] == 0) queue.push_back(i);
  int drained = 0;
  while (!queue.empty()) {
    const int u = queue.back();
    queue.pop_back();
    ++drained;
    for (int v : out[static_cast<std::size_t>(u)])
      if (--indeg[static_cast<std::size_t>(v)] == 0) queue.push_back(v);
  }
  return drained != n;
}

void check_pose(const FramePose& pose, const SkeletonGraph& graph) {
  require(pose.coords.rows() == graph.joint_count && pose.coords.cols() == graph.dims,
          Errc::DimensionMismatch,
          "pose shape does not match graph (" + std::to_string(pose.coords.rows()) + "x" +
              std::to_string(pose.coords.cols()) + " vs " + std::to_string(graph.joint_count) +
              "x" + std::to_string(graph.dims) + ")");
  require(all_finite(pose.coords), Errc::NonFiniteCoordinate, "pose contains non-finite values");
}

}  // namespace

SkeletonGraph build_graph(const std::vector<std::pair<int, int>>& edges, int joint_count,
                          int dims) {
  require(joint_count >= 1, Errc::IndexOutOfRange, "joint_count must be >= 1");
  require(dims == 2 || dims == 3, Errc::DimensionMismatch, "dims must be 2 or 3");

  std::set<std::pair<int, int>> seen;
  for (const auto& [s, t] : edges) {
    require(s >= 0 && s < joint_count && t >= 0 && t < joint_count, Errc::IndexOutOfRange,
            "edge (" + std::to_string(s) + "," + std::to_string(t) + ") out of range");
    require(s != t, Errc::SelfLoop, "self-loop at joint " + std::to_string(s));
    require(seen.insert({s, t}).second, Errc::DuplicateEdge,
            "duplicate edge (" + std::to_string(s) + "," + std::to_string(t) + ")");
  }
  require(!has_directed_cycle(joint_count, edges), Errc::DirectedCycle,
          "directed edge set contains a cycle");

  SkeletonGraph g;
  g.joint_count = joint_count;
  g.dims = dims;
  g.edges = edges;

  Dsu dsu(joint_count);
  g.undirected_forest = true;
  for (const auto& [s, t] : edges)
    if (!dsu.merge(s, t)) g.undirected_forest = false;
  return g;
}

double bone_length(const FramePose& pose, std::pair<int, int> edge) {
  const auto [s, t] = edge;
  require(s >= 0 && t >= 0 && s < pose.coords.rows() && t < pose.coords.rows(),
          Errc::IndexOutOfRange, "bone endpoints out of range");
  double sq = 0.0;
  for (Eigen::Index d = 0; d < pose.coords.cols(); ++d) {
    const double a = pose.coords(s, d);
    const double b = pose.coords(t, d);
    require(std::isfinite(a) && std::isfinite(b), Errc::NonFiniteCoordinate,
            "non-finite coordinate on bone endpoint");
    const double diff = b - a;
    sq += diff * diff;
  }
  return std::sqrt(sq);
}

WeightedAdjacency weighted_adjacency(const SkeletonGraph& graph, const FramePose& pose,
                                     WeightMode mode, ZeroBonePolicy policy,
                                     std::vector<std::string>* warnings) {
  check_pose(pose, graph);
  Mat m = Mat::Zero(graph.joint_count, graph.joint_count);
  for (const auto& e : graph.edges) {
    double w = 1.0;
    if (mode == WeightMode::bone_length) {
      w = bone_length(pose, e);
      if (w == 0.0) {
        if (policy == ZeroBonePolicy::error)
          fail(Errc::ZeroLengthBone, "bone (" + std::to_string(e.first) + "," +
                                         std::to_string(e.second) + ") has zero length");
        if (warnings)
          warnings->push_back("zero-length bone (" + std::to_string(e.first) + "," +
                              std::to_string(e.second) + ") substituted with epsilon");
        w = kZeroBoneEpsilon;
      }
    }
    m(e.first, e.second) = w;
    m(e.second, e.first) = w;
  }
  return WeightedAdjacency{std::move(m), true};
}

WeightedAdjacency adjacency_from_edge_weights(const SkeletonGraph& graph,
                                              const std::vector<double>& edge_weights) {
  require(edge_weights.size() == graph.edges.size(), Errc::ShapeMismatch,
          "one weight per edge expected");
  Mat m = Mat::Zero(graph.joint_count, graph.joint_count);
  for (std::size_t i = 0; i < graph.edges.size(); ++i) {
    const auto& [s, t] = graph.edges[i];
    require(std::isfinite(edge_weights[i]) && edge_weights[i] >= 0.0, Errc::NegativeWeight,
            "edge weights must be finite and nonnegative");
    m(s, t) = edge_weights[i];
    m(t, s) = edge_weights[i];
  }
  return WeightedAdjacency{std::move(m), true};
}

PropagationMatrix normalized_propagation(const WeightedAdjacency& adj) {
  const auto n = adj.matrix.rows();
  require(adj.matrix.cols() == n, Errc::DimensionMismatch, "adjacency must be square");
  require(symmetry_gap(adj.matrix) == 0.0, Errc::ShapeMismatch, "adjacency must be symmetric");
  require(adj.matrix.minCoeff() >= 0.0, Errc::NegativeWeight, "adjacency must be nonnegative");

  Mat a_hat = adj.matrix;
  a_hat.diagonal().array() += 1.0;  // self-loops guarantee positive degree
  Vec inv_sqrt_deg(n);
  for (Eigen::Index i = 0; i < n; ++i) inv_sqrt_deg(i) = 1.0 / std::sqrt(a_hat.row(i).sum());

  // Fill the upper triangle and mirror so the result is symmetric bit-for-bit.
  Mat out(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out(i, i) = a_hat(i, i) * inv_sqrt_deg(i) * inv_sqrt_deg(i);
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = a_hat(i, j) * inv_sqrt_deg(i) * inv_sqrt_deg(j);
      out(i, j) = v;
      out(j, i) = v;
    }
  }
  return PropagationMatrix{std::move(out), PropagationKind::adjacency_normalized};
}

std::vector<double> mean_bone_lengths(const SkeletonGraph& graph,
                                      const std::vector<FramePose>& poses, ZeroBonePolicy policy,
                                      std::vector<std::string>* warnings) {
  require(!poses.empty(), Errc::EmptyDataset, "at least one frame required");
  std::vector<double> mean(graph.edges.size(), 0.0);
  for (const auto& pose : poses) {
    check_pose(pose, graph);
    for (std::size_t e = 0; e < graph.edges.size(); ++e)
      mean[e] += bone_length(pose, graph.edges[e]);
  }
  for (std::size_t e = 0; e < graph.edges.size(); ++e) {
    mean[e] /= static_cast<double>(poses.size());
    if (mean[e] == 0.0) {
      if (policy == ZeroBonePolicy::error)
        fail(Errc::ZeroLengthBone, "bone " + std::to_string(e) + " has zero mean length");
      if (warnings)
        warnings->push_back("zero mean length on bone " + std::to_string(e) +
                            " substituted with epsilon");
      mean[e] = kZeroBoneEpsilon;
    }
  }
  return mean;
}

// --- templates ---------------------------------------------------------------

namespace {

SkeletonGraph make_ntu25() {
  const std::vector<std::pair<int, int>> edges = {
      {1, 0},   {20, 1},  {20, 2},  {2, 3},   {20, 4},  {4, 5},   {5, 6},   {6, 7},
      {20, 8},  {8, 9},   {9, 10},  {10, 11}, {0, 12},  {12, 13}, {13, 14}, {14, 15},
      {0, 16},  {16, 17}, {17, 18}, {18, 19}, {22, 21}, {7, 22},  {24, 23}, {11, 24}};
  SkeletonGraph g = build_graph(edges, 25, 3);
  g.names = {"spine_base",    "spine_mid",     "neck",        "head",
             "shoulder_left", "elbow_left",    "wrist_left",  "hand_left",
             "shoulder_right","elbow_right",   "wrist_right", "hand_right",
             "hip_left",      "knee_left",     "ankle_left",  "foot_left",
             "hip_right",     "knee_right",    "ankle_right", "foot_right",
             "spine_shoulder","hand_tip_left", "thumb_left",  "hand_tip_right",
             "thumb_right"};
  return g;
}

SkeletonGraph make_openpose18() {
  const std::vector<std::pair<int, int>> edges = {
      {1, 0},  {1, 2},   {1, 5},   {2, 3},   {3, 4},   {5, 6},   {6, 7},   {2, 8}, {8, 9},
      {9, 10}, {5, 11},  {11, 12}, {12, 13}, {0, 14},  {0, 15},  {14, 16}, {15, 17}};
  SkeletonGraph g = build_graph(edges, 18, 2);
  g.names = {"nose",        "neck",       "shoulder_right", "elbow_right", "wrist_right",
             "shoulder_left","elbow_left", "wrist_left",     "hip_right",   "knee_right",
             "ankle_right", "hip_left",   "knee_left",      "ankle_left",  "eye_right",
             "eye_left",    "ear_right",  "ear_left"};
  return g;
}

}  // namespace

bool is_builtin_template(const std::string& id) { return id == "ntu25" || id == "openpose18"; }

SkeletonGraph builtin_template(const std::string& id) {
  if (id == "ntu25") return make_ntu25();
  if (id == "openpose18") return make_openpose18();
  fail(Errc::UnknownTemplate, "no builtin template named '" + id + "'");
}

SkeletonGraph load_template_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), Errc::IoError, "cannot open template file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::SchemaViolation, std::string("template JSON parse error: ") + e.what());
  }
  require(j.is_object() && j.contains("joint_count") && j.contains("dims") && j.contains("edges"),
          Errc::SchemaViolation, "template requires joint_count, dims, edges");
  std::vector<std::pair<int, int>> edges;
  for (const auto& e : j["edges"]) {
    require(e.is_array() && e.size() == 2, Errc::SchemaViolation, "edges must be [src,tgt] pairs");
    edges.emplace_back(e[0].get<int>(), e[1].get<int>());
  }
  SkeletonGraph g = build_graph(edges, j["joint_count"].get<int>(), j["dims"].get<int>());
  if (j.contains("names")) {
    require(j["names"].is_array() &&
                static_cast<int>(j["names"].size()) == g.joint_count,
            Errc::SchemaViolation, "names must list one string per joint");
    for (const auto& s : j["names"]) g.names.push_back(s.get<std::string>());
  }
  return g;
}

SkeletonGraph resolve_template(const std::string& id_or_path) {
  if (is_builtin_template(id_or_path)) return builtin_template(id_or_path);
  return load_template_file(id_or_path);
}

std::string template_to_json_text(const SkeletonGraph& graph) {
  nlohmann::json j;
  j["joint_count"] = graph.joint_count;
  j["dims"] = graph.dims;
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& [s, t] : graph.edges) edges.push_back({s, t});
  j["edges"] = std::move(edges);
  if (!graph.names.empty()) j["names"] = graph.names;
  return j.dump(2) + "\n";
}

}  // namespace cgcn
