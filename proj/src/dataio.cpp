#include "cgcn/dataio.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cgcn/error.hpp"

namespace cgcn {

namespace {

constexpr double kPi = 3.14159265358979323846;

void validate_sequence(const SkeletonSequence& seq, const SkeletonGraph& graph) {
  require(!seq.frames.empty(), Errc::SchemaViolation, "sequence needs at least one frame");
  require(seq.subject_count == 1 || seq.subject_count == 2, Errc::SchemaViolation,
          "subject_count must be 1 or 2");
  const int rows = graph.joint_count * seq.subject_count;
  for (const Mat& f : seq.frames) {
    require(static_cast<int>(f.rows()) == rows, Errc::UnknownTemplate,
            "sequence does not match template '" + seq.template_id + "': expected " +
                std::to_string(rows) + " joint rows, got " + std::to_string(f.rows()));
    require(static_cast<int>(f.cols()) == graph.dims, Errc::SchemaViolation,
            "coordinate dimensionality mismatch");
    require(all_finite(f), Errc::NonFiniteCoordinate, "non-finite coordinate in sequence");
  }
  if (seq.confidence) {
    require(seq.confidence->size() == seq.frames.size(), Errc::SchemaViolation,
            "confidence must cover every frame");
    for (const Vec& c : *seq.confidence) {
      require(static_cast<int>(c.size()) == rows, Errc::SchemaViolation,
              "confidence must cover every joint");
      for (Eigen::Index i = 0; i < c.size(); ++i)
        require(std::isfinite(c(i)) && c(i) >= 0.0 && c(i) <= 1.0, Errc::SchemaViolation,
                "confidence values must lie in [0,1]");
    }
  }
  if (seq.label) require(*seq.label >= 0, Errc::InvalidLabel, "label must be nonnegative");
}

}  // namespace

SkeletonSequence parse_sequence_json(const std::string& json_text, const SkeletonGraph& graph,
                                     const std::string& template_id) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::SchemaViolation, std::string("sequence JSON parse error: ") + e.what());
  }
  require(j.is_object(), Errc::SchemaViolation, "sequence file must hold a JSON object");
  for (const auto& [key, _] : j.items())
    require(key == "template" || key == "frames" || key == "confidence" || key == "label" ||
                key == "name" || key == "subject_count",
            Errc::SchemaViolation, "unknown key '" + key + "' in sequence file");
  require(j.contains("template") && j["template"].is_string(), Errc::SchemaViolation,
          "sequence needs a template id");
  require(j["template"].get<std::string>() == template_id, Errc::UnknownTemplate,
          "sequence references template '" + j["template"].get<std::string>() + "'");
  require(j.contains("frames") && j["frames"].is_array() && !j["frames"].empty(),
          Errc::SchemaViolation, "sequence needs a non-empty frames array");

  SkeletonSequence seq;
  seq.template_id = template_id;
  if (j.contains("subject_count")) seq.subject_count = j["subject_count"].get<int>();
  if (j.contains("label")) seq.label = j["label"].get<int>();
  if (j.contains("name")) seq.name = j["name"].get<std::string>();

  for (const auto& frame : j["frames"]) {
    require(frame.is_array() && !frame.empty(), Errc::SchemaViolation,
            "each frame must list joint coordinates");
    Mat m(static_cast<Eigen::Index>(frame.size()), graph.dims);
    for (std::size_t r = 0; r < frame.size(); ++r) {
      const auto& joint = frame[r];
      require(joint.is_array() && static_cast<int>(joint.size()) == graph.dims,
              Errc::SchemaViolation, "each joint must list dims coordinates");
      for (int d = 0; d < graph.dims; ++d) {
        require(joint[static_cast<std::size_t>(d)].is_number(), Errc::SchemaViolation,
                "coordinates must be numbers");
        m(static_cast<Eigen::Index>(r), d) = joint[static_cast<std::size_t>(d)].get<double>();
      }
    }
    seq.frames.push_back(std::move(m));
  }
  if (j.contains("confidence")) {
    std::vector<Vec> conf;
    for (const auto& frame : j["confidence"]) {
      require(frame.is_array(), Errc::SchemaViolation, "confidence rows must be arrays");
      Vec c(static_cast<Eigen::Index>(frame.size()));
      for (std::size_t r = 0; r < frame.size(); ++r) c(static_cast<Eigen::Index>(r)) = frame[r].get<double>();
      conf.push_back(std::move(c));
    }
    seq.confidence = std::move(conf);
  }
  validate_sequence(seq, graph);
  return seq;
}

SkeletonSequence parse_sequence_file(const std::string& path, const SkeletonGraph* custom_graph,
                                     const std::string& custom_id) {
  std::ifstream in(path);
  require(in.good(), Errc::IoError, "cannot open sequence file " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();

  // Peek at the template id to pick the graph.
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(buffer.str());
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::SchemaViolation, std::string("sequence JSON parse error: ") + e.what());
  }
  require(j.is_object() && j.contains("template") && j["template"].is_string(),
          Errc::SchemaViolation, "sequence needs a template id");
  const std::string id = j["template"].get<std::string>();
  if (is_builtin_template(id)) {
    const SkeletonGraph graph = builtin_template(id);
    return parse_sequence_json(buffer.str(), graph, id);
  }
  require(custom_graph != nullptr && id == custom_id, Errc::UnknownTemplate,
          "unknown template '" + id + "' (not builtin, no matching custom template)");
  return parse_sequence_json(buffer.str(), *custom_graph, id);
}

std::string sequence_to_json_text(const SkeletonSequence& seq) {
  nlohmann::json j;
  j["template"] = seq.template_id;
  j["subject_count"] = seq.subject_count;
  if (seq.label) j["label"] = *seq.label;
  if (!seq.name.empty()) j["name"] = seq.name;
  nlohmann::json frames = nlohmann::json::array();
  for (const Mat& f : seq.frames) {
    nlohmann::json frame = nlohmann::json::array();
    for (Eigen::Index r = 0; r < f.rows(); ++r) {
      nlohmann::json joint = nlohmann::json::array();
      for (Eigen::Index d = 0; d < f.cols(); ++d) joint.push_back(f(r, d));
      frame.push_back(std::move(joint));
    }
    frames.push_back(std::move(frame));
  }
  j["frames"] = std::move(frames);
  if (seq.confidence) {
    nlohmann::json conf = nlohmann::json::array();
    for (const Vec& c : *seq.confidence) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index i = 0; i < c.size(); ++i) row.push_back(c(i));
      conf.push_back(std::move(row));
    }
    j["confidence"] = std::move(conf);
  }
  return j.dump() + "\n";
}

void write_sequence_file(const SkeletonSequence& seq, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), Errc::IoError, "cannot write sequence file " + path);
  out << sequence_to_json_text(seq);
  require(out.good(), Errc::IoError, "write failed for " + path);
}

Tensor3 diff_features(const SkeletonSequence& seq, int dims) {
  require(!seq.frames.empty(), Errc::EmptyDataset, "sequence has no frames");
  const int t_count = seq.frame_count();
  const int rows = static_cast<int>(seq.frames[0].rows());
  require(static_cast<int>(seq.frames[0].cols()) == dims, Errc::DimensionMismatch,
          "dims does not match sequence");

  Tensor3 out(3 * dims, t_count, rows);
  // positions
  for (int t = 0; t < t_count; ++t)
    for (int r = 0; r < rows; ++r)
      for (int d = 0; d < dims; ++d) out.at(d, t, r) = seq.frames[static_cast<std::size_t>(t)](r, d);
  // velocities: first difference, frame 0 zero-filled
  for (int t = 1; t < t_count; ++t)
    for (int r = 0; r < rows; ++r)
      for (int d = 0; d < dims; ++d)
        out.at(dims + d, t, r) = out.at(d, t, r) - out.at(d, t - 1, r);
  // accelerations: first difference of the velocities
  for (int t = 1; t < t_count; ++t)
    for (int r = 0; r < rows; ++r)
      for (int d = 0; d < dims; ++d)
        out.at(2 * dims + d, t, r) = out.at(dims + d, t, r) - out.at(dims + d, t - 1, r);
  return out;
}

SkeletonSequence normalize_length(const SkeletonSequence& seq, int target_frames, LengthMode mode,
                                  Rng& rng) {
  require(target_frames >= 1, Errc::InvalidConfig, "target frame count must be >= 1");
  require(!seq.frames.empty(), Errc::EmptyDataset, "sequence has no frames");
  const int t_count = seq.frame_count();

  std::vector<std::size_t> pick;
  if (mode == LengthMode::random_crop && t_count > target_frames) {
    pick = rng.sample_sorted(static_cast<std::size_t>(t_count),
                             static_cast<std::size_t>(target_frames));
  } else {
    pick.resize(static_cast<std::size_t>(target_frames));
    for (int t = 0; t < target_frames; ++t)
      pick[static_cast<std::size_t>(t)] = static_cast<std::size_t>(t % t_count);
  }

  SkeletonSequence out = seq;
  out.frames.clear();
  for (std::size_t idx : pick) out.frames.push_back(seq.frames[idx]);
  if (seq.confidence) {
    std::vector<Vec> conf;
    for (std::size_t idx : pick) conf.push_back((*seq.confidence)[idx]);
    out.confidence = std::move(conf);
  }
  return out;
}

SkeletonSequence augment(const SkeletonSequence& seq, Rng& rng, const AugmentConfig& config) {
  require(!seq.frames.empty(), Errc::EmptyDataset, "sequence has no frames");
  const int dims = static_cast<int>(seq.frames[0].cols());
  require(dims == 2 || dims == 3, Errc::DimensionMismatch, "dims must be 2 or 3");

  const double angle =
      rng.uniform(-config.max_rotation_deg, config.max_rotation_deg) * kPi / 180.0;
  Vec shift(dims);
  for (int d = 0; d < dims; ++d)
    shift(d) = rng.uniform(-config.max_translation, config.max_translation);

  const double c = std::cos(angle), s = std::sin(angle);
  SkeletonSequence out = seq;
  for (Mat& f : out.frames) {
    for (Eigen::Index r = 0; r < f.rows(); ++r) {
      const double x = f(r, 0), y = f(r, 1);
      f(r, 0) = c * x - s * y + shift(0);
      f(r, 1) = s * x + c * y + shift(1);
      if (dims == 3) f(r, 2) += shift(2);
    }
  }
  if (config.per_joint_jitter > 0.0) {
    for (Mat& f : out.frames)
      for (Eigen::Index r = 0; r < f.rows(); ++r)
        for (int d = 0; d < dims; ++d)
          f(r, d) += rng.uniform(-config.per_joint_jitter, config.per_joint_jitter);
  }
  return out;
}

std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), Errc::IoError, "cannot open manifest " + path);
  const std::filesystem::path base = std::filesystem::path(path).parent_path();

  std::vector<ManifestEntry> entries;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (first && line == "path,label") {
      first = false;
      continue;
    }
    first = false;
    const auto comma = line.find_last_of(',');
    require(comma != std::string::npos && comma > 0 && comma + 1 < line.size(),
            Errc::SchemaViolation, "manifest rows must be 'path,label'");
    ManifestEntry e;
    e.path = (base / line.substr(0, comma)).string();
    try {
      e.label = std::stoi(line.substr(comma + 1));
    } catch (const std::exception&) {
      fail(Errc::SchemaViolation, "manifest label must be an integer: " + line);
    }
    require(e.label >= 0, Errc::InvalidLabel, "manifest labels must be nonnegative");
    entries.push_back(std::move(e));
  }
  require(!entries.empty(), Errc::EmptyDataset, "manifest lists no samples");
  return entries;
}

// --- synthetic generator -------------------------------------------------------

namespace {

Mat ntu25_rest_pose() {
  Mat p(25, 3);
  auto set = [&](int i, double x, double y, double z) {
    p(i, 0) = x;
    p(i, 1) = y;
    p(i, 2) = z;
  };
  set(0, 0.00, 0.00, 1.00);   // spine_base
  set(1, 0.00, 0.00, 1.25);   // spine_mid
  set(2, 0.00, 0.00, 1.55);   // neck
  set(3, 0.00, 0.00, 1.70);   // head
  set(4, 0.22, 0.00, 1.45);   // shoulder_left
  set(5, 0.50, 0.00, 1.45);   // elbow_left
  set(6, 0.75, 0.00, 1.45);   // wrist_left
  set(7, 0.85, 0.00, 1.45);   // hand_left
  set(8, -0.22, 0.00, 1.45);  // shoulder_right
  set(9, -0.50, 0.00, 1.45);  // elbow_right
  set(10, -0.75, 0.00, 1.45); // wrist_right
  set(11, -0.85, 0.00, 1.45); // hand_right
  set(12, 0.12, 0.00, 0.95);  // hip_left
  set(13, 0.12, 0.00, 0.50);  // knee_left
  set(14, 0.12, 0.00, 0.08);  // ankle_left
  set(15, 0.12, 0.12, 0.02);  // foot_left
  set(16, -0.12, 0.00, 0.95); // hip_right
  set(17, -0.12, 0.00, 0.50); // knee_right
  set(18, -0.12, 0.00, 0.08); // ankle_right
  set(19, -0.12, 0.12, 0.02); // foot_right
  set(20, 0.00, 0.00, 1.45);  // spine_shoulder
  set(21, 0.95, 0.00, 1.45);  // hand_tip_left
  set(22, 0.88, 0.05, 1.45);  // thumb_left
  set(23, -0.95, 0.00, 1.45); // hand_tip_right
  set(24, -0.88, 0.05, 1.45); // thumb_right
  return p;
}

struct MotionParams {
  double freq;       // cycles per frame
  double phase;
  double amplitude;  // archetype-specific scale factor
  double scale;      // whole-skeleton size multiplier
};

Mat archetype_frame(const std::string& cls, const Mat& rest, int t, const MotionParams& mp) {
  Mat f = rest * mp.scale;
  const double phi = 2.0 * kPi * mp.freq * static_cast<double>(t) + mp.phase;

  if (cls == "stand") {
    return f;  // noise is added by the caller
  }
  if (cls == "walk") {
    const double swing = mp.amplitude * std::sin(phi);
    const double counter = mp.amplitude * std::sin(phi + kPi);
    // left leg: knee 13, ankle 14, foot 15; right leg: 17, 18, 19
    f(13, 1) += 0.5 * swing;
    f(14, 1) += swing;
    f(15, 1) += swing;
    f(17, 1) += 0.5 * counter;
    f(18, 1) += counter;
    f(19, 1) += counter;
    // arms counter-swing at a third of the leg amplitude
    for (int j : {5, 6, 7, 21, 22}) f(j, 1) += 0.33 * counter;
    for (int j : {9, 10, 11, 23, 24}) f(j, 1) += 0.33 * swing;
    return f;
  }
  if (cls == "wave") {
    // right arm rises and oscillates; lever grows along the chain
    const double lift = mp.amplitude * (0.6 + 0.4 * std::sin(phi));
    const std::pair<int, double> chain[] = {{9, 0.4}, {10, 0.8}, {11, 1.0}, {23, 1.1}, {24, 1.0}};
    for (const auto& [j, lever] : chain) {
      f(j, 2) += lever * lift;
      f(j, 0) += 0.25 * lever * lift;  // pulls inward as the arm rises
    }
    return f;
  }
  if (cls == "bow") {
    // pitch the upper body about the lateral axis through the spine base
    const double alpha = 1.6 * mp.amplitude * (1.0 - std::cos(phi)) / 2.0;
    const double ca = std::cos(alpha), sa = std::sin(alpha);
    const double pivot_z = f(0, 2);
    for (int j : {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 20, 21, 22, 23, 24}) {
      const double y = f(j, 1);
      const double z = f(j, 2) - pivot_z;
      f(j, 1) = ca * y + sa * z;
      f(j, 2) = -sa * y + ca * z + pivot_z;
    }
    return f;
  }
  fail(Errc::InvalidConfig, "unknown archetype '" + cls + "' (walk, bow, wave, stand)");
}

}  // namespace

SynthResult synth_generate(const SynthSpec& spec, const std::string& out_dir) {
  require(spec.per_class >= 1, Errc::InvalidConfig, "per_class must be >= 1");
  require(spec.frames >= 1, Errc::InvalidConfig, "frames must be >= 1");
  require(spec.template_id == "ntu25", Errc::InvalidConfig,
          "synthetic archetypes are defined on the ntu25 template");
  require(!spec.classes.empty(), Errc::InvalidConfig, "at least one class required");

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  require(!ec, Errc::IoError, "cannot create output directory " + out_dir);

  const Mat rest = ntu25_rest_pose();
  const Rng base(spec.seed);

  SynthResult result;
  std::ostringstream manifest;
  manifest << "path,label\n";

  for (std::size_t ci = 0; ci < spec.classes.size(); ++ci) {
    const std::string& cls = spec.classes[ci];
    for (int i = 0; i < spec.per_class; ++i) {
      Rng rng = base.fork(ci * 100003ULL + static_cast<std::uint64_t>(i));
      MotionParams mp;
      mp.freq = (1.0 / 16.0) * rng.uniform(0.85, 1.15);
      mp.phase = rng.uniform(0.0, 2.0 * kPi);
      mp.amplitude = 0.30 * rng.uniform(0.9, 1.1);
      mp.scale = rng.uniform(0.95, 1.05);

      SkeletonSequence seq;
      seq.template_id = spec.template_id;
      seq.label = static_cast<int>(ci);
      char tag[32];
      std::snprintf(tag, sizeof(tag), "%s_%03d", cls.c_str(), i);
      seq.name = tag;
      for (int t = 0; t < spec.frames; ++t) {
        Mat f = archetype_frame(cls, rest, t, mp);
        for (Eigen::Index r = 0; r < f.rows(); ++r)
          for (Eigen::Index d = 0; d < f.cols(); ++d) f(r, d) += rng.uniform(-0.004, 0.004);
        seq.frames.push_back(std::move(f));
      }

      const std::string filename = std::string(tag) + ".json";
      const std::string path = (std::filesystem::path(out_dir) / filename).string();
      write_sequence_file(seq, path);
      result.files.push_back(path);
      manifest << filename << "," << ci << "\n";
    }
  }

  result.manifest_path = (std::filesystem::path(out_dir) / "manifest.csv").string();
  std::ofstream mf(result.manifest_path, std::ios::binary);
  require(mf.good(), Errc::IoError, "cannot write manifest");
  mf << manifest.str();
  require(mf.good(), Errc::IoError, "manifest write failed");
  return result;
}

}  // namespace cgcn
