#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cgcn/centrality.hpp"
#include "cgcn/dataio.hpp"
#include "cgcn/error.hpp"
#include "cgcn/gradcheck.hpp"
#include "cgcn/graph.hpp"
#include "cgcn/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<cgcn::StreamKind> parse_streams(const std::string& csv) {
  std::vector<cgcn::StreamKind> streams;
  std::string token;
  for (char ch : csv + ",") {
    if (ch == ',') {
      if (!token.empty()) streams.push_back(cgcn::stream_from_name(token));
      token.clear();
    } else {
      token += ch;
    }
  }
  cgcn::require(!streams.empty(), cgcn::Errc::InvalidConfig, "empty stream list");
  return streams;
}

void emit(const json& j, bool as_json, const std::string& text) {
  if (as_json)
    std::cout << j.dump(2) << "\n";
  else
    std::cout << text;
}

struct CommonTrainFlags {
  std::string config_path;
  std::string manifest;
  std::string out_dir = "out";
  std::string template_ref;
  std::string streams;
  std::string mode;
  std::string channels;
  std::string centrality_mode;
  std::string length_mode;
  std::string lr_schedule;
  int epochs = -1;
  int batch = -1;
  int temporal_kernel = -1;
  int target_frames = -1;
  int eval_every = -1;
  int checkpoint_every = -1;
  int jobs = -1;
  int num_classes = -1;
  double lr = -1.0;
  double momentum = -1.0;
  double weight_decay = -1.0;
  double dropout = -1.0;
  double target_top1 = -1.0;
  double aug_translation = -1.0;
  double aug_rotation = -1.0;
  double aug_jitter = -1.0;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

void add_train_flags(CLI::App* cmd, CommonTrainFlags& f) {
  cmd->add_option("--data", f.manifest, "dataset manifest CSV (path,label)")->required();
  cmd->add_option("--config", f.config_path, "run config JSON file");
  cmd->add_option("--out", f.out_dir, "output directory");
  cmd->add_option("--template", f.template_ref, "template id or file");
  cmd->add_option("--streams", f.streams, "comma list from J,B,W,A");
  cmd->add_option("--mode", f.mode, "four_stream or single");
  cmd->add_option("--channels", f.channels, "channel plan: desk or paper");
  cmd->add_option("--centrality-mode", f.centrality_mode, "sequence_mean or per_frame");
  cmd->add_option("--length-mode", f.length_mode, "repeat or random_crop");
  cmd->add_option("--lr-schedule", f.lr_schedule, "none or step");
  cmd->add_option("--epochs", f.epochs, "training epochs");
  cmd->add_option("--batch", f.batch, "batch size");
  cmd->add_option("--temporal-kernel", f.temporal_kernel, "temporal kernel size (odd)");
  cmd->add_option("--target-frames", f.target_frames, "frames after length normalization");
  cmd->add_option("--eval-every", f.eval_every, "evaluate on the training set every k epochs");
  cmd->add_option("--checkpoint-every", f.checkpoint_every, "write a checkpoint every k epochs");
  cmd->add_option("--jobs", f.jobs, "parallel stream training (capped by CGCN_THREADS)");
  cmd->add_option("--num-classes", f.num_classes, "class count override");
  cmd->add_option("--lr", f.lr, "learning rate");
  cmd->add_option("--momentum", f.momentum, "Nesterov momentum");
  cmd->add_option("--weight-decay", f.weight_decay, "L2 weight decay");
  cmd->add_option("--dropout", f.dropout, "block dropout rate");
  cmd->add_option("--target-top1", f.target_top1, "early-stop threshold (with --eval-every)");
  cmd->add_option("--augment-translation", f.aug_translation, "max random translation");
  cmd->add_option("--augment-rotation", f.aug_rotation, "max random rotation (degrees)");
  cmd->add_option("--augment-jitter", f.aug_jitter, "per-joint jitter (not rigid)");
  cmd->add_option("--seed", f.seed, "RNG seed")->each([&f](const std::string&) { f.seed_set = true; });
}

cgcn::RunConfig resolve_config(const CommonTrainFlags& f) {
  cgcn::RunConfig c;
  if (!f.config_path.empty()) c = cgcn::load_run_config(f.config_path);
  if (!f.template_ref.empty()) c.template_ref = f.template_ref;
  if (!f.streams.empty()) c.streams = parse_streams(f.streams);
  if (!f.mode.empty()) {
    cgcn::require(f.mode == "four_stream" || f.mode == "single", cgcn::Errc::InvalidConfig,
                  "--mode must be four_stream or single");
    c.net_mode = f.mode == "single" ? cgcn::NetMode::single : cgcn::NetMode::four_stream;
  }
  if (!f.channels.empty()) c.channel_plan = f.channels;
  if (!f.centrality_mode.empty()) {
    cgcn::require(f.centrality_mode == "sequence_mean" || f.centrality_mode == "per_frame",
                  cgcn::Errc::InvalidConfig, "--centrality-mode must be sequence_mean or per_frame");
    c.centrality_mode = f.centrality_mode == "per_frame" ? cgcn::CentralityMode::per_frame
                                                         : cgcn::CentralityMode::sequence_mean;
  }
  if (!f.length_mode.empty()) {
    cgcn::require(f.length_mode == "repeat" || f.length_mode == "random_crop",
                  cgcn::Errc::InvalidConfig, "--length-mode must be repeat or random_crop");
    c.length_mode = f.length_mode == "random_crop" ? cgcn::LengthMode::random_crop
                                                   : cgcn::LengthMode::repeat;
  }
  if (!f.lr_schedule.empty()) c.lr_schedule = f.lr_schedule;
  if (f.epochs >= 0) c.epochs = f.epochs;
  if (f.batch >= 0) c.batch_size = f.batch;
  if (f.temporal_kernel >= 0) c.temporal_kernel = f.temporal_kernel;
  if (f.target_frames >= 0) c.target_frames = f.target_frames;
  if (f.eval_every >= 0) c.eval_every = f.eval_every;
  if (f.checkpoint_every >= 0) c.checkpoint_every = f.checkpoint_every;
  if (f.jobs >= 0) c.jobs = f.jobs;
  if (f.num_classes >= 0) c.num_classes = f.num_classes;
  if (f.lr >= 0.0) c.lr = f.lr;
  if (f.momentum >= 0.0) c.momentum = f.momentum;
  if (f.weight_decay >= 0.0) c.weight_decay = f.weight_decay;
  if (f.dropout >= 0.0) c.dropout = f.dropout;
  if (f.target_top1 >= 0.0) c.target_top1 = f.target_top1;
  if (f.aug_translation >= 0.0) c.augment.max_translation = f.aug_translation;
  if (f.aug_rotation >= 0.0) c.augment.max_rotation_deg = f.aug_rotation;
  if (f.aug_jitter >= 0.0) c.augment.per_joint_jitter = f.aug_jitter;
  if (f.seed_set) c.seed = f.seed;
  // Re-validate the merged configuration through the strict parser.
  return cgcn::run_config_from_json(cgcn::run_config_to_json(c));
}

int cmd_graph_validate(const std::string& template_ref, bool as_json) {
  const cgcn::SkeletonGraph g = cgcn::resolve_template(template_ref);
  json j;
  j["template"] = template_ref;
  j["joint_count"] = g.joint_count;
  j["dims"] = g.dims;
  j["edge_count"] = g.edges.size();
  j["acyclic"] = true;  // build_graph rejects directed cycles
  j["undirected_forest"] = g.undirected_forest;
  std::vector<int> roots;
  std::vector<bool> has_incoming(static_cast<std::size_t>(g.joint_count), false);
  for (const auto& [s, t] : g.edges) has_incoming[static_cast<std::size_t>(t)] = true;
  for (int i = 0; i < g.joint_count; ++i)
    if (!has_incoming[static_cast<std::size_t>(i)]) roots.push_back(i);
  j["roots"] = roots;

  std::string text = "template '" + template_ref + "': " + std::to_string(g.joint_count) +
                     " joints, " + std::to_string(g.edges.size()) + " edges, dims " +
                     std::to_string(g.dims) + "\n";
  text += std::string("directed-acyclic: yes; undirected forest: ") +
          (g.undirected_forest ? "yes" : "no") + "\n";
  emit(j, as_json, text);
  return 0;
}

int cmd_centrality_compute(const std::string& input, const std::string& template_ref,
                           const std::string& mode, const std::string& out_path,
                           const std::string& csv_dir, int highlight, bool as_json) {
  cgcn::SkeletonGraph graph;
  cgcn::SkeletonSequence seq;
  if (!template_ref.empty() && !cgcn::is_builtin_template(template_ref)) {
    graph = cgcn::resolve_template(template_ref);
    const std::string id = fs::path(template_ref).stem().string();
    seq = cgcn::parse_sequence_file(input, &graph, id);
  } else {
    seq = cgcn::parse_sequence_file(input);
    graph = cgcn::builtin_template(seq.template_id);
  }
  const auto cmode = mode == "per_frame" ? cgcn::CentralityMode::per_frame
                                         : cgcn::CentralityMode::sequence_mean;
  cgcn::require(mode == "per_frame" || mode == "sequence_mean", cgcn::Errc::InvalidConfig,
                "--mode must be sequence_mean or per_frame");

  // Centralities are defined on one body; use the first subject's rows.
  std::vector<cgcn::FramePose> poses;
  for (const auto& f : seq.frames)
    poses.push_back(cgcn::FramePose{f.topRows(graph.joint_count), std::nullopt});

  std::vector<std::string> warnings;
  const auto sets = cgcn::assemble_centrality_sets(graph, poses, cmode, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";

  json out = cgcn::centrality_sets_to_json(sets);
  out["input"] = input;
  out["template"] = seq.template_id;
  if (highlight > 0) out["highlights"] = cgcn::centrality_highlights(sets[0], graph, highlight);

  if (!out_path.empty()) {
    std::ofstream f(out_path, std::ios::binary);
    cgcn::require(f.good(), cgcn::Errc::IoError, "cannot write " + out_path);
    f << out.dump(2) << "\n";
  }
  if (!csv_dir.empty()) {
    fs::create_directories(csv_dir);
    cgcn::write_matrix_csv(sets[0].J, (fs::path(csv_dir) / "J.csv").string());
    cgcn::write_matrix_csv(sets[0].B, (fs::path(csv_dir) / "B.csv").string());
    cgcn::write_matrix_csv(sets[0].W, (fs::path(csv_dir) / "W.csv").string());
    cgcn::write_matrix_csv(sets[0].A_tilde.matrix, (fs::path(csv_dir) / "A_tilde.csv").string());
  }

  std::string text = "centrality sets: " + std::to_string(sets.size()) + "\n";
  if (highlight > 0 && out.contains("highlights")) {
    text += "top joints (J): ";
    for (const auto& h : out["highlights"]["J_joints"])
      text += h["name"].get<std::string>() + " ";
    text += "\n";
  }
  if (out_path.empty() && as_json)
    emit(out, true, "");
  else
    emit(json{{"sets", sets.size()}, {"output", out_path}}, as_json && !out_path.empty(), text);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"centrality graph convolution toolkit"};
  app.require_subcommand(1);
  bool as_json = false;
  app.add_flag("--json", as_json, "machine-readable output");

  // graph validate
  auto* graph_cmd = app.add_subcommand("graph", "skeleton graph utilities");
  graph_cmd->require_subcommand(1);
  auto* validate_cmd = graph_cmd->add_subcommand("validate", "validate a skeleton template");
  std::string template_ref = "ntu25";
  validate_cmd->add_option("--template", template_ref, "template id or file")->required();

  // centrality compute
  auto* centrality_cmd = app.add_subcommand("centrality", "centrality matrices");
  centrality_cmd->require_subcommand(1);
  auto* compute_cmd = centrality_cmd->add_subcommand("compute", "compute J/B/W/A~ for a sequence");
  std::string input, out_path, csv_dir, cmode = "sequence_mean", ctemplate;
  int highlight = 0;
  compute_cmd->add_option("--input", input, "sequence JSON file")->required();
  compute_cmd->add_option("--template", ctemplate, "custom template file (non-builtin)");
  compute_cmd->add_option("--mode", cmode, "sequence_mean or per_frame");
  compute_cmd->add_option("--out", out_path, "output JSON path");
  compute_cmd->add_option("--csv", csv_dir, "directory for per-matrix CSV heatmaps");
  compute_cmd->add_option("--highlight", highlight, "list the top-k joints/bones/pairs");

  // synth generate
  auto* synth_cmd = app.add_subcommand("synth", "synthetic data");
  synth_cmd->require_subcommand(1);
  auto* generate_cmd = synth_cmd->add_subcommand("generate", "generate a labeled dataset");
  cgcn::SynthSpec spec;
  std::string synth_out = "synth";
  std::string classes_csv;
  generate_cmd->add_option("--out", synth_out, "output directory")->required();
  generate_cmd->add_option("--classes", classes_csv, "comma list of archetypes");
  generate_cmd->add_option("--per-class", spec.per_class, "sequences per class");
  generate_cmd->add_option("--frames", spec.frames, "frames per sequence");
  generate_cmd->add_option("--seed", spec.seed, "RNG seed");
  generate_cmd->add_option("--template", spec.template_id, "skeleton template id");

  // train
  auto* train_cmd = app.add_subcommand("train", "train stream models");
  CommonTrainFlags train_flags;
  add_train_flags(train_cmd, train_flags);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string ckpt_path, eval_manifest, topk_csv = "1,5";
  eval_cmd->add_option("--checkpoint", ckpt_path, "checkpoint JSON")->required();
  eval_cmd->add_option("--data", eval_manifest, "dataset manifest CSV")->required();
  eval_cmd->add_option("--topk", topk_csv, "comma list of k values");

  // ablate
  auto* ablate_cmd = app.add_subcommand("ablate", "stream-subset ablation table");
  CommonTrainFlags ablate_flags;
  add_train_flags(ablate_cmd, ablate_flags);

  // gradcheck
  auto* gradcheck_cmd = app.add_subcommand("gradcheck", "finite-difference gradient checks");
  std::string layers_csv;
  std::uint64_t gc_seed = 1;
  bool inject = false;
  gradcheck_cmd->add_option("--layers", layers_csv, "comma list of layer names");
  gradcheck_cmd->add_option("--seed", gc_seed, "RNG seed");
  gradcheck_cmd
      ->add_flag("--inject-wrong-sign", inject, "corrupt one gradient entry (negative control)")
      ->group("");  // hidden; test hook

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_name() == "CallForHelp" || e.get_name() == "CallForAllHelp")
      return app.exit(e);
    app.exit(e);
    return 2;
  }

  try {
    if (*validate_cmd) return cmd_graph_validate(template_ref, as_json);

    if (*compute_cmd)
      return cmd_centrality_compute(input, ctemplate, cmode, out_path, csv_dir, highlight,
                                    as_json);

    if (*generate_cmd) {
      if (!classes_csv.empty()) {
        spec.classes.clear();
        std::string token;
        for (char ch : classes_csv + ",") {
          if (ch == ',') {
            if (!token.empty()) spec.classes.push_back(token);
            token.clear();
          } else {
            token += ch;
          }
        }
      }
      const auto result = cgcn::synth_generate(spec, synth_out);
      json j;
      j["files"] = result.files.size();
      j["manifest"] = result.manifest_path;
      j["seed"] = spec.seed;
      emit(j, as_json,
           "wrote " + std::to_string(result.files.size()) + " sequences + manifest to " +
               synth_out + "\n");
      return 0;
    }

    if (*train_cmd) {
      const cgcn::RunConfig config = resolve_config(train_flags);
      const auto out =
          cgcn::train_run(config, train_flags.manifest, train_flags.out_dir,
                          as_json ? nullptr : &std::cerr);
      json j;
      j["checkpoint"] = out.checkpoint_path;
      j["report_json"] = out.report_json_path;
      j["report_csv"] = out.report_csv_path;
      j["epochs_run"] = out.report.epochs.size();
      j["final_top1"] = out.report.final_metrics.at(1);
      j["reached_target"] = out.report.reached_target;
      emit(j, as_json,
           "trained " + std::to_string(out.report.epochs.size()) + " epochs, final top-1 " +
               std::to_string(out.report.final_metrics.at(1)) + "\n");
      return 0;
    }

    if (*eval_cmd) {
      std::vector<int> ks;
      std::string token;
      for (char ch : topk_csv + ",") {
        if (ch == ',') {
          if (!token.empty()) ks.push_back(std::stoi(token));
          token.clear();
        } else {
          token += ch;
        }
      }
      const auto metrics = cgcn::eval_run(ckpt_path, eval_manifest, ks);
      json j;
      std::string text;
      for (const auto& [k, v] : metrics) {
        j["top" + std::to_string(k)] = v;
        text += "top-" + std::to_string(k) + ": " + std::to_string(v) + "\n";
      }
      emit(j, as_json, text);
      return 0;
    }

    if (*ablate_cmd) {
      const cgcn::RunConfig config = resolve_config(ablate_flags);
      const auto rows = cgcn::ablate_run(config, ablate_flags.manifest, ablate_flags.out_dir,
                                         as_json ? nullptr : &std::cerr);
      json j = json::array();
      std::string text = "method,top1\n";
      for (const auto& r : rows) {
        j.push_back({{"method", r.method}, {"top1", r.top1}});
        text += r.method + "," + std::to_string(r.top1) + "\n";
      }
      emit(j, as_json, text);
      return 0;
    }

    if (*gradcheck_cmd) {
      std::vector<std::string> layers;
      if (!layers_csv.empty()) {
        std::string token;
        for (char ch : layers_csv + ",") {
          if (ch == ',') {
            if (!token.empty()) layers.push_back(token);
            token.clear();
          } else {
            token += ch;
          }
        }
      }
      const auto results = cgcn::run_gradcheck(gc_seed, layers, inject);
      bool all_pass = true;
      json j = json::array();
      for (const auto& r : results) {
        all_pass = all_pass && r.pass;
        j.push_back({{"layer", r.layer}, {"max_rel_err", r.max_rel_err}, {"pass", r.pass}});
        if (!as_json) {
          char line[128];
          std::snprintf(line, sizeof(line), "%-16s max rel err %.3e  %s\n", r.layer.c_str(),
                        r.max_rel_err, r.pass ? "PASS" : "FAIL");
          std::cout << line;
        }
      }
      if (as_json) std::cout << j.dump(2) << "\n";
      return all_pass ? 0 : 1;
    }
  } catch (const cgcn::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
