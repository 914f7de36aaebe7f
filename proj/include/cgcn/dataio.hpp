#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cgcn/graph.hpp"
#include "cgcn/rng.hpp"
#include "cgcn/tensor.hpp"

namespace cgcn {

/// A labeled skeleton sequence bound to a graph template. Frames hold
/// subject_count * joint_count rows each; an absent second subject is
/// zero-filled.
struct SkeletonSequence {
  std::string template_id = "ntu25";
  std::vector<Mat> frames;  // T entries, (subject_count * N) x dims
  std::optional<std::vector<Vec>> confidence;
  std::optional<int> label;
  int subject_count = 1;
  std::string name;

  int frame_count() const { return static_cast<int>(frames.size()); }
};

SkeletonSequence parse_sequence_json(const std::string& json_text, const SkeletonGraph& graph,
                                     const std::string& template_id);

/// Resolves the file's template field against the builtins; pass a custom
/// graph + id for non-builtin templates.
SkeletonSequence parse_sequence_file(const std::string& path,
                                     const SkeletonGraph* custom_graph = nullptr,
                                     const std::string& custom_id = "");

std::string sequence_to_json_text(const SkeletonSequence& seq);
void write_sequence_file(const SkeletonSequence& seq, const std::string& path);

/// Positions, first differences and second differences stacked on the
/// channel axis: [3*dims, T, rows]. Frame 0 of each difference order is zero.
Tensor3 diff_features(const SkeletonSequence& seq, int dims);

enum class LengthMode { repeat, random_crop };

/// repeat: frame t of the output is input frame t mod T. random_crop: a
/// seeded sorted sample of target_frames indices when T > target, else repeat.
SkeletonSequence normalize_length(const SkeletonSequence& seq, int target_frames, LengthMode mode,
                                  Rng& rng);

struct AugmentConfig {
  double max_translation = 0.0;
  double max_rotation_deg = 0.0;
  double per_joint_jitter = 0.0;  // off by default; not a rigid motion
};

/// One random rigid translation + rotation (about the vertical z axis in 3-D,
/// in-plane in 2-D) applied to every frame and joint.
SkeletonSequence augment(const SkeletonSequence& seq, Rng& rng, const AugmentConfig& config);

struct ManifestEntry {
  std::string path;  // resolved relative to the manifest location
  int label = 0;
};

std::vector<ManifestEntry> read_manifest(const std::string& path);

// --- synthetic generator -----------------------------------------------------

struct SynthSpec {
  std::vector<std::string> classes = {"walk", "bow", "wave", "stand"};
  int per_class = 20;
  int frames = 32;
  std::uint64_t seed = 1;
  std::string template_id = "ntu25";
};

struct SynthResult {
  std::vector<std::string> files;
  std::string manifest_path;
};

/// Known archetypes for the ntu25 template: walk, bow, wave, stand.
SynthResult synth_generate(const SynthSpec& spec, const std::string& out_dir);

}  // namespace cgcn
