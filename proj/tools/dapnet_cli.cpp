// SPDX-License-Identifier: Apache-2.0
//
// dapnet: file-driven front end for the proposal toolkit.

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dapnet/dapnet.hpp"

namespace {

using dapnet::Json;

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kParse = 2,
  kInvariant = 3,
  kPlacement = 4,
};

struct CliError {
  int code;
  std::string message;
};

bool has_suffix(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

bool is_ndjson(const std::string& path) { return has_suffix(path, ".jsonl") || has_suffix(path, ".ndjson"); }

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CliError{kUsage, path + ": cannot open for reading"};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Runs `fn` on a parsed file, attaching the file name to any parse error.
template <typename Fn>
auto parse_text_file(const std::string& path, Fn&& fn) {
  const std::string text = read_text(path);
  try {
    return fn(text);
  } catch (const Json::parse_error& e) {
    throw CliError{kParse, path + ": <root>: " + e.what()};
  } catch (const dapnet::ParseError& e) {
    throw CliError{kParse, path + ": " + e.what()};
  }
}

template <typename Fn>
auto parse_file(const std::string& path, Fn&& fn) {
  return parse_text_file(path, [&](const std::string& text) { return fn(Json::parse(text)); });
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CliError{kUsage, path + ": cannot open for writing"};
  out << text;
}

void write_json(const std::string& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::vector<int> levels;
  std::optional<double> cpn_threshold, alpha, beta, pos_iou, neg_iou, nms_iou, eval_iou, pos_factor;
  std::optional<std::size_t> base_budget;
  std::optional<std::string> interpolation;
  bool match_best_anchor = false;
  bool no_nms = false;
};

dapnet::RunConfig load_config(const Overrides& o) {
  dapnet::RunConfig cfg;
  std::string path = o.config_path;
  if (path.empty()) {
    if (const char* env = std::getenv("DAPNET_CONFIG")) path = env;
  }
  if (!path.empty()) cfg = parse_file(path, [](const Json& j) { return dapnet::config_from_json(j); });

  if (o.seed) cfg.seed = o.seed;
  if (!o.levels.empty()) cfg.levels.values = o.levels;
  if (o.cpn_threshold) cfg.cpn_score_threshold = *o.cpn_threshold;
  if (o.alpha) cfg.alpha = *o.alpha;
  if (o.beta) cfg.beta = *o.beta;
  if (o.pos_iou) cfg.anchor_labels.pos_iou = *o.pos_iou;
  if (o.neg_iou) cfg.anchor_labels.neg_iou = *o.neg_iou;
  if (o.nms_iou) cfg.nms.default_threshold = *o.nms_iou;
  if (o.eval_iou) cfg.eval_iou = *o.eval_iou;
  if (o.pos_factor) cfg.pos_factor = *o.pos_factor;
  if (o.base_budget) cfg.base_budget = *o.base_budget;
  if (o.interpolation) {
    try {
      cfg.interpolation = dapnet::interpolation_from_string(*o.interpolation, "--interpolation");
    } catch (const dapnet::ParseError& e) {
      throw CliError{kUsage, e.what()};
    }
  }
  if (o.match_best_anchor) cfg.anchor_labels.match_best_anchor = true;
  if (o.no_nms) cfg.apply_nms = false;
  cfg.validate();
  return cfg;
}

std::vector<dapnet::ScoredDetection> read_detections(const std::string& path, const dapnet::CategoryTable& table) {
  if (is_ndjson(path))
    return parse_text_file(path, [&](const std::string& text) { return dapnet::detections_from_ndjson(text, table); });
  return parse_file(path, [&](const Json& j) { return dapnet::detections_from_json(j, table); });
}

void write_detections(const std::string& path, const std::vector<dapnet::ScoredDetection>& dets,
                      const dapnet::CategoryTable& table) {
  if (is_ndjson(path))
    write_text(path, dapnet::detections_to_ndjson(dets, table));
  else
    write_json(path, dapnet::detections_to_json(dets, table));
}

dapnet::Scene read_scene(const std::string& path, const dapnet::CategoryTable& table) {
  return parse_file(path, [&](const Json& j) { return dapnet::scene_from_json(j, table); });
}

std::string sanitize(std::string name) {
  for (char& ch : name)
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '_' && ch != '-') ch = '_';
  return name;
}

void write_prc(const std::string& dir, const dapnet::EvalReport& report, const dapnet::CategoryTable& table) {
  std::filesystem::create_directories(dir);
  for (const auto& c : report.categories)
    write_text((std::filesystem::path(dir) / (sanitize(table.name(c.category)) + ".csv")).string(), dapnet::prc_csv(c));
}

Json report_json(const dapnet::EvalReport& report, const dapnet::RunConfig& cfg, const dapnet::CategoryTable& table) {
  Json j = dapnet::report_to_json(report, table);
  j["iou_threshold"] = cfg.eval_iou;
  j["interpolation"] = dapnet::to_string(cfg.interpolation);
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive proposal toolkit: count priors, anchor labels, category NMS, budgets, evaluation"};
  app.require_subcommand(1);
  app.fallthrough();

  Overrides o;
  std::string output;
  app.add_option("-c,--config", o.config_path, "Run configuration JSON (default: $DAPNET_CONFIG)");
  app.add_option("-o,--output", output, "Output path (default: stdout)");
  app.add_option("--levels", o.levels, "Base count levels");
  app.add_option("--cpn-threshold", o.cpn_threshold, "Object-probability threshold for count decoding");
  app.add_option("--alpha", o.alpha, "Count regression weight");
  app.add_option("--beta", o.beta, "Inverse box regression weight");
  app.add_option("--pos-iou", o.pos_iou, "Anchor positive IoU threshold");
  app.add_option("--neg-iou", o.neg_iou, "Anchor negative IoU threshold");
  app.add_option("--nms-iou", o.nms_iou, "Default category NMS threshold");
  app.add_option("--eval-iou", o.eval_iou, "Evaluation match threshold");
  app.add_option("--pos-factor", o.pos_factor, "Proposals per predicted object");
  app.add_option("--base-budget", o.base_budget, "Per-category proposal floor");
  app.add_option("--interpolation", o.interpolation, "AP interpolation: all_point or eleven_point");
  app.add_flag("--match-best-anchor", o.match_best_anchor, "Also label each ground truth's best anchor positive");
  app.add_flag("--no-nms", o.no_nms, "Skip category NMS in the pipeline");

  std::uint64_t seed = 0;

  auto* config_cmd = app.add_subcommand("config", "Print the effective configuration");

  auto* simulate = app.add_subcommand("simulate", "Sample a synthetic scene");
  simulate->add_option("--seed", seed, "Sampling seed")->required();

  std::string scene_path, counts_path, prediction_path;
  auto* assign = app.add_subcommand("assign-counts", "Label (category, level) cells for count regression");
  assign->add_option("--seed", seed, "Negative sampling seed")->required();
  auto* assign_src = assign->add_option_group("source");
  assign_src->add_option("--scene", scene_path, "Scene file");
  assign_src->add_option("--counts", counts_path, "Count file");
  assign_src->require_option(1);

  auto* predict = app.add_subcommand("predict-counts", "Decode per-category counts from prior-network outputs");
  auto* predict_src = predict->add_option_group("source");
  predict_src->add_option("--prediction", prediction_path, "Prediction file");
  predict_src->add_option("--scene", scene_path, "Scene file (uses the perfect prior for it)");
  predict_src->require_option(1);
  bool emit_prediction = false;
  predict->add_flag("--emit-prediction", emit_prediction, "Write the prediction tensor instead of counts");

  std::size_t grid_w = 0, grid_h = 0;
  auto* label = app.add_subcommand("label-anchors", "Multi-class anchor labeling against a scene");
  label->add_option("--scene", scene_path, "Scene file")->required();
  label->add_option("--seed", seed, "Negative sampling seed")->required();
  label->add_option("--grid-w", grid_w, "Feature grid width (default: ceil(image_w / stride))");
  label->add_option("--grid-h", grid_h, "Feature grid height (default: ceil(image_h / stride))");

  std::string detections_path;
  auto* nms = app.add_subcommand("nms", "Category NMS over a detection file");
  nms->add_option("--detections", detections_path, "Detection file (.json or .jsonl)")->required();

  std::optional<std::size_t> fixed_budget;
  auto* select = app.add_subcommand("select", "Keep the top proposals per category under a budget");
  select->add_option("--detections", detections_path, "Detection file (.json or .jsonl)")->required();
  auto* select_src = select->add_option_group("budget");
  select_src->add_option("--counts", counts_path, "Count file");
  select_src->add_option("--scene", scene_path, "Scene file (uses its true counts)");
  select_src->add_option("--fixed-budget", fixed_budget, "Same cap for every category");
  select_src->require_option(1);

  std::vector<std::string> eval_detections, eval_scenes;
  std::string prc_dir;
  auto* evaluate = app.add_subcommand("evaluate", "Precision/recall, AP, and mAP");
  evaluate->add_option("--detections", eval_detections, "Detection file per image")->required();
  evaluate->add_option("--scene", eval_scenes, "Scene file per image, paired with --detections")->required();
  evaluate->add_option("--prc-dir", prc_dir, "Write one recall,precision CSV per category here");

  std::size_t num_images = 1;
  std::size_t threads = 0;
  auto* pipeline = app.add_subcommand("pipeline", "Simulate, budget, select, and evaluate end to end");
  pipeline->add_option("--seed", seed, "Master seed")->required();
  pipeline->add_option("--images", num_images, "Number of synthetic images")->check(CLI::PositiveNumber);
  pipeline->add_option("--threads", threads, "Worker threads (0 = hardware)");
  pipeline->add_option("--prc-dir", prc_dir, "Write one recall,precision CSV per category here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }

  try {
    for (auto* sub : {simulate, assign, label, pipeline})
      if (sub->parsed()) o.seed = seed;
    const dapnet::RunConfig cfg = load_config(o);
    const dapnet::CategoryTable table(cfg.scene);

    if (config_cmd->parsed()) {
      write_json(output, dapnet::config_to_json(cfg));
    } else if (simulate->parsed()) {
      write_json(output, dapnet::scene_to_json(dapnet::sample_scene(cfg.scene, seed), table));
    } else if (assign->parsed()) {
      dapnet::CategoryCounts counts;
      if (!scene_path.empty())
        counts = read_scene(scene_path, table).counts;
      else
        counts = parse_file(counts_path, [&](const Json& j) { return dapnet::counts_from_json(j, table); });
      const auto a = dapnet::assign_count_levels(counts, cfg.levels, seed, cfg.cpn_neg_ratio);
      Json j = dapnet::assignment_to_json(a, cfg.levels, table);
      j["seed"] = seed;
      write_json(output, j);
    } else if (predict->parsed()) {
      dapnet::CpnPrediction pred;
      if (!scene_path.empty())
        pred = dapnet::oracle_cpn_prediction(read_scene(scene_path, table).counts, cfg.levels);
      else
        pred = parse_file(prediction_path,
                          [&](const Json& j) { return dapnet::prediction_from_json(j, cfg.levels, table); });
      if (emit_prediction)
        write_json(output, dapnet::prediction_to_json(pred, cfg.levels, table));
      else
        write_json(output, dapnet::counts_to_json(dapnet::predict_counts(pred, cfg.levels, cfg.cpn_score_threshold), table));
    } else if (label->parsed()) {
      const dapnet::Scene scene = read_scene(scene_path, table);
      if (grid_w == 0) grid_w = static_cast<std::size_t>(std::ceil(scene.image_w / cfg.anchors.stride));
      if (grid_h == 0) grid_h = static_cast<std::size_t>(std::ceil(scene.image_h / cfg.anchors.stride));
      const auto anchors = dapnet::generate_anchors(grid_w, grid_h, cfg.anchors);
      const auto labels = dapnet::label_anchors(anchors, scene.objects, cfg.anchor_labels, seed);
      write_json(output, dapnet::anchor_labels_to_json(labels, table));
    } else if (nms->parsed()) {
      write_detections(output, dapnet::category_nms(read_detections(detections_path, table), cfg.nms), table);
    } else if (select->parsed()) {
      dapnet::CategoryBudget budget;
      if (fixed_budget) {
        budget = dapnet::CategoryBudget::fixed(table.size(), *fixed_budget);
      } else {
        const dapnet::CategoryCounts counts =
            !scene_path.empty()
                ? read_scene(scene_path, table).counts
                : parse_file(counts_path, [&](const Json& j) { return dapnet::counts_from_json(j, table); });
        budget = dapnet::adaptive_budget(counts, cfg.pos_factor, cfg.base_budget);
      }
      write_detections(output, dapnet::select_proposals(read_detections(detections_path, table), budget), table);
    } else if (evaluate->parsed()) {
      if (eval_detections.size() != eval_scenes.size())
        throw CliError{kUsage, "evaluate: --detections and --scene must be given the same number of times"};
      std::vector<dapnet::EvalImage> images;
      for (std::size_t i = 0; i < eval_scenes.size(); ++i)
        images.push_back({read_detections(eval_detections[i], table), read_scene(eval_scenes[i], table).objects});
      const auto report = dapnet::evaluate(images, cfg.eval_iou, cfg.interpolation);
      if (!prc_dir.empty()) write_prc(prc_dir, report, table);
      write_json(output, report_json(report, cfg, table));
    } else if (pipeline->parsed()) {
      const auto result = dapnet::run_pipeline(cfg, seed, num_images, threads);
      Json j = report_json(result.report, cfg, table);
      j["seed"] = seed;
      j["images"] = num_images;
      std::size_t candidates = 0, kept = 0;
      for (const auto& im : result.images) {
        candidates += im.num_candidates;
        kept += im.selected.size();
      }
      j["candidates"] = candidates;
      j["selected"] = kept;
      if (!prc_dir.empty()) write_prc(prc_dir, result.report, table);
      write_json(output, j);
    }
  } catch (const CliError& e) {
    std::cerr << "dapnet: " << e.message << "\n";
    return e.code;
  } catch (const dapnet::InvariantError& e) {
    std::cerr << "dapnet: invariant violation: " << e.what() << "\n";
    return kInvariant;
  } catch (const dapnet::PlacementError& e) {
    std::cerr << "dapnet: " << e.what() << "\n";
    return kPlacement;
  } catch (const std::exception& e) {
    std::cerr << "dapnet: " << e.what() << "\n";
    return kUsage;
  }
  return kOk;
}
