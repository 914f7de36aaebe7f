#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "cgcn/centrality.hpp"
#include "cgcn/dataio.hpp"
#include "cgcn/net.hpp"
#include "cgcn/training.hpp"

namespace cgcn {

enum class NetMode { four_stream, single };

/// Run configuration; serialized (with every field) into each output artifact.
struct RunConfig {
  std::string template_ref = "ntu25";  // builtin id or template file path
  std::vector<StreamKind> streams = {StreamKind::joint, StreamKind::bone,
                                     StreamKind::subgraph, StreamKind::adjacency};
  NetMode net_mode = NetMode::four_stream;
  std::string channel_plan = "desk";  // desk | paper
  int temporal_kernel = 9;
  int epochs = 200;
  int batch_size = 32;
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::uint64_t seed = 1;
  CentralityMode centrality_mode = CentralityMode::sequence_mean;
  int target_frames = 64;
  LengthMode length_mode = LengthMode::repeat;
  AugmentConfig augment;
  double dropout = 0.5;
  std::string lr_schedule = "none";  // none | step (x0.1 at epochs 30 and 50)
  int eval_every = 0;                // 0 = never
  double target_top1 = 0.0;          // early stop threshold when eval_every > 0
  int checkpoint_every = 0;          // 0 = final checkpoint only
  int num_classes = 0;               // 0 = inferred from the manifest
  int jobs = 1;                      // parallel stream training (capped by CGCN_THREADS)
};

/// Strict parse: unknown keys are rejected.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);
nlohmann::json run_config_to_json(const RunConfig& config);
std::string config_hash(const RunConfig& config);

/// Sequences are length-normalized on load; augmentation is applied per epoch.
struct PreparedDataset {
  SkeletonGraph graph;
  std::string template_id;
  int subjects = 1;
  std::vector<SkeletonSequence> sequences;
  TensorDataset tensors;  // unaugmented features
};

PreparedDataset prepare_dataset(const RunConfig& config, const std::string& manifest_path);

/// Dataset-level reference centrality (see the training pipeline docs):
/// sequence_mean averages bone lengths over every frame and subject slot;
/// per_frame averages the per-frame normalized matrices and re-normalizes.
CentralitySet reference_centrality(const PreparedDataset& data, CentralityMode mode,
                                   std::vector<std::string>* warnings = nullptr);

/// Block-diagonal tiling for multi-subject tensors.
Mat tile_block_diagonal(const Mat& m, int copies);

struct StreamSetup {
  std::string id;   // "J", "B", "W", "A" or "sum"
  Mat propagation;  // tiled to the dataset's joint rows
};

std::vector<StreamSetup> stream_setups(const RunConfig& config, const CentralitySet& reference,
                                       int subjects);

// --- training / evaluation ----------------------------------------------------

struct TrainOutputs {
  TrainReport report;
  std::string checkpoint_path;
  std::string report_json_path;
  std::string report_csv_path;
};

/// Full training pipeline: prepares data, trains every stream, writes
/// report.csv / report.json / checkpoint.json into out_dir.
TrainOutputs train_run(const RunConfig& config, const std::string& manifest_path,
                       const std::string& out_dir, std::ostream* log = nullptr);

struct Checkpoint {
  RunConfig config;
  int num_classes = 0;
  int joint_rows = 0;
  int in_channels = 0;
  int subjects = 1;
  std::vector<CgcnModel> models;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

/// Evaluates a checkpoint against a manifest; returns top-k accuracies.
std::map<int, double> eval_run(const std::string& checkpoint_path,
                               const std::string& manifest_path, const std::vector<int>& ks);

// --- ablation ------------------------------------------------------------------

struct AblationRow {
  std::string method;
  std::vector<StreamKind> streams;
  double top1 = 0.0;
  std::string checkpoint_path;
};

/// Retrains the five stream subsets (all, without J, without B, without W,
/// adjacency only) and writes ablation.csv / ablation.md / ablation.json.
std::vector<AblationRow> ablate_run(const RunConfig& config, const std::string& manifest_path,
                                    const std::string& out_dir, std::ostream* log = nullptr);

// --- centrality export ----------------------------------------------------------

nlohmann::json centrality_sets_to_json(const std::vector<CentralitySet>& sets);

/// Top-k joints / bones / pairs per matrix from one centrality set.
nlohmann::json centrality_highlights(const CentralitySet& set, const SkeletonGraph& graph, int k);

void write_matrix_csv(const Mat& m, const std::string& path);

/// Effective parallelism: min(requested, CGCN_THREADS when set, stream count).
int effective_jobs(int requested, int streams);

}  // namespace cgcn
