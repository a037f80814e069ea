// SPDX-License-Identifier: Apache-2.0
#pragma once

// JSON interchange for scenes, detections, counts, CPN assignments and
// predictions, anchor labels, evaluation reports, and run configuration.
// Boxes are [x_min, y_min, x_max, y_max]; categories are written by name and
// accepted either by name or by 1-based index.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dapnet/config.hpp"
#include "dapnet/cpn_prior.hpp"
#include "dapnet/detection.hpp"
#include "dapnet/eval_metrics.hpp"
#include "dapnet/frpn_assign.hpp"
#include "dapnet/geometry.hpp"
#include "dapnet/proposal_select.hpp"
#include "dapnet/scene_sim.hpp"
#include "json.hpp"

namespace dapnet {

using Json = nlohmann::ordered_json;

/// Malformed input; `field` is a path such as "objects[2].box".
class ParseError : public std::runtime_error {
 public:
  ParseError(std::string field, const std::string& message)
      : std::runtime_error(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

namespace io {

inline std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }
inline std::string index(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

inline const Json& member(const Json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) throw ParseError(path.empty() ? "<root>" : path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(join(path, key), "missing field");
  return *it;
}

inline double number(const Json& j, const std::string& path) {
  if (!j.is_number()) throw ParseError(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ParseError(path, "expected a finite number");
  return v;
}

inline double number_field(const Json& j, const std::string& key, const std::string& path) {
  return number(member(j, key, path), join(path, key));
}

inline std::int64_t integer(const Json& j, const std::string& path) {
  if (!j.is_number_integer()) {
    if (j.is_number_float()) {
      const double v = j.get<double>();
      if (std::isfinite(v) && v == std::floor(v)) return static_cast<std::int64_t>(v);
    }
    throw ParseError(path, "expected an integer");
  }
  return j.get<std::int64_t>();
}

inline bool boolean(const Json& j, const std::string& path) {
  if (!j.is_boolean()) throw ParseError(path, "expected a boolean");
  return j.get<bool>();
}

inline const Json& array(const Json& j, const std::string& path) {
  if (!j.is_array()) throw ParseError(path, "expected an array");
  return j;
}

}  // namespace io

/// Maps category names to 1-based ids and back.
class CategoryTable {
 public:
  CategoryTable() = default;
  explicit CategoryTable(std::vector<std::string> names) : names_(std::move(names)) {}
  explicit CategoryTable(const SceneSpec& spec) {
    for (const auto& c : spec.categories) names_.push_back(c.name);
  }

  std::size_t size() const { return names_.size(); }

  std::string name(Category c) const {
    if (c >= 1 && static_cast<std::size_t>(c) <= names_.size()) return names_[c - 1];
    return std::to_string(c);
  }

  Category resolve(const Json& j, const std::string& path) const {
    if (j.is_string()) {
      const auto& s = j.get_ref<const std::string&>();
      for (std::size_t k = 0; k < names_.size(); ++k)
        if (names_[k] == s) return static_cast<Category>(k + 1);
      throw ParseError(path, "unknown category '" + s + "'");
    }
    const auto id = io::integer(j, path);
    if (id < 1 || static_cast<std::size_t>(id) > names_.size())
      throw ParseError(path, "category index " + std::to_string(id) + " out of range");
    return static_cast<Category>(id);
  }

 private:
  std::vector<std::string> names_;
};

// ---- boxes -----------------------------------------------------------------

inline Json to_json(const Box& b) { return Json::array({b.x_min, b.y_min, b.x_max, b.y_max}); }

inline Box box_from_json(const Json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 4) throw ParseError(path, "expected [x_min, y_min, x_max, y_max]");
  Box b{io::number(j[0], io::index(path, 0)), io::number(j[1], io::index(path, 1)),
        io::number(j[2], io::index(path, 2)), io::number(j[3], io::index(path, 3))};
  if (!b.valid()) throw ParseError(path, "box must satisfy x_min <= x_max and y_min <= y_max");
  return b;
}

// ---- scenes ----------------------------------------------------------------

inline Json scene_to_json(const Scene& scene, const CategoryTable& table) {
  Json objects = Json::array();
  for (const auto& g : scene.objects) objects.push_back({{"category", table.name(g.category)}, {"box", to_json(g.box)}});
  return {{"image", {{"w", scene.image_w}, {"h", scene.image_h}}}, {"objects", std::move(objects)}};
}

inline Scene scene_from_json(const Json& j, const CategoryTable& table) {
  Scene scene;
  const Json& image = io::member(j, "image", "");
  scene.image_w = io::number_field(image, "w", "image");
  scene.image_h = io::number_field(image, "h", "image");
  if (!(scene.image_w > 0.0 && scene.image_h > 0.0)) throw ParseError("image", "dimensions must be > 0");
  scene.counts = CategoryCounts(table.size());
  const Json& objects = io::array(io::member(j, "objects", ""), "objects");
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const std::string path = io::index("objects", i);
    GroundTruth g;
    g.category = table.resolve(io::member(objects[i], "category", path), io::join(path, "category"));
    g.box = box_from_json(io::member(objects[i], "box", path), io::join(path, "box"));
    scene.counts[static_cast<std::size_t>(g.category - 1)] += 1.0;
    scene.objects.push_back(g);
  }
  return scene;
}

// ---- detections ------------------------------------------------------------

inline Json to_json(const ScoredDetection& d, const CategoryTable& table) {
  return {{"category", table.name(d.category)}, {"score", d.score}, {"box", to_json(d.box)}};
}

inline Json detections_to_json(const std::vector<ScoredDetection>& dets, const CategoryTable& table) {
  Json out = Json::array();
  for (const auto& d : dets) out.push_back(to_json(d, table));
  return out;
}

inline ScoredDetection detection_from_json(const Json& j, const CategoryTable& table, const std::string& path) {
  ScoredDetection d;
  d.category = table.resolve(io::member(j, "category", path), io::join(path, "category"));
  d.score = io::number_field(j, "score", path);
  if (d.score < 0.0 || d.score > 1.0) throw ParseError(io::join(path, "score"), "score must lie in [0, 1]");
  d.box = box_from_json(io::member(j, "box", path), io::join(path, "box"));
  return d;
}

inline std::vector<ScoredDetection> detections_from_json(const Json& j, const CategoryTable& table) {
  std::vector<ScoredDetection> out;
  io::array(j, "<root>");
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(detection_from_json(j[i], table, io::index("", i)));
  return out;
}

/// Newline-delimited records, one detection object per non-empty line.
inline std::vector<ScoredDetection> detections_from_ndjson(const std::string& text, const CategoryTable& table) {
  std::vector<ScoredDetection> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string path = "line " + std::to_string(lineno);
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::parse_error& e) {
      throw ParseError(path, e.what());
    }
    out.push_back(detection_from_json(j, table, path));
  }
  return out;
}

inline std::string detections_to_ndjson(const std::vector<ScoredDetection>& dets, const CategoryTable& table) {
  std::string out;
  for (const auto& d : dets) out += to_json(d, table).dump() + "\n";
  return out;
}

// ---- counts ----------------------------------------------------------------

inline Json counts_to_json(const CategoryCounts& counts, const CategoryTable& table) {
  Json out = Json::object();
  for (std::size_t c = 0; c < counts.size(); ++c) out[table.name(static_cast<Category>(c + 1))] = counts[c];
  return out;
}

/// Categories missing from the file count as zero.
inline CategoryCounts counts_from_json(const Json& j, const CategoryTable& table) {
  if (!j.is_object()) throw ParseError("<root>", "expected an object of category counts");
  CategoryCounts counts(table.size());
  for (const auto& [key, value] : j.items()) {
    const Category c = table.resolve(Json(key), key);
    const double v = io::number(value, key);
    if (v < 0.0) throw ParseError(key, "count must be >= 0");
    counts[static_cast<std::size_t>(c - 1)] = v;
  }
  return counts;
}

// ---- CPN assignment and prediction ------------------------------------------

inline Json assignment_to_json(const CountLevelAssignment& a, const BaseLevels& levels, const CategoryTable& table) {
  Json categories = Json::object();
  for (std::size_t c = 0; c < a.num_categories; ++c) {
    Json per_level = Json::object();
    for (std::size_t e = 0; e < a.num_levels; ++e) {
      const LevelLabel& cell = a.at(c, e);
      Json entry = {{"status", to_string(cell.status)}, {"diff", cell.diff}};
      entry["target"] = cell.status == LevelStatus::kPositive ? Json(cell.target) : Json(nullptr);
      per_level[std::to_string(levels[e])] = std::move(entry);
    }
    categories[table.name(static_cast<Category>(c + 1))] = std::move(per_level);
  }
  return {{"num_positive", a.num_positive()}, {"num_negative", a.num_negative()}, {"categories", std::move(categories)}};
}

inline Json prediction_to_json(const CpnPrediction& p, const BaseLevels& levels, const CategoryTable& table) {
  Json out = Json::object();
  for (std::size_t c = 0; c < p.num_categories; ++c) {
    Json per_level = Json::object();
    for (std::size_t e = 0; e < p.num_levels; ++e)
      per_level[std::to_string(levels[e])] = {{"object_score", p.object_score(c, e)},
                                              {"background_score", p.background_score(c, e)},
                                              {"regression", p.regression(c, e)}};
    out[table.name(static_cast<Category>(c + 1))] = std::move(per_level);
  }
  return out;
}

/// Cells absent from the file get scores that keep them below any threshold.
inline CpnPrediction prediction_from_json(const Json& j, const BaseLevels& levels, const CategoryTable& table) {
  if (!j.is_object()) throw ParseError("<root>", "expected an object keyed by category");
  CpnPrediction p(table.size(), levels.size());
  for (std::size_t c = 0; c < p.num_categories; ++c)
    for (std::size_t e = 0; e < p.num_levels; ++e) p.background_score(c, e) = 40.0, p.object_score(c, e) = -40.0;
  for (const auto& [key, per_level] : j.items()) {
    const auto c = static_cast<std::size_t>(table.resolve(Json(key), key) - 1);
    if (!per_level.is_object()) throw ParseError(key, "expected an object keyed by base level");
    for (const auto& [level_key, cell] : per_level.items()) {
      const std::string path = key + "." + level_key;
      std::size_t e = levels.size();
      for (std::size_t k = 0; k < levels.size(); ++k)
        if (std::to_string(levels[k]) == level_key) e = k;
      if (e == levels.size()) throw ParseError(path, "not one of the configured base levels");
      p.object_score(c, e) = io::number_field(cell, "object_score", path);
      p.background_score(c, e) = io::number_field(cell, "background_score", path);
      p.regression(c, e) = io::number_field(cell, "regression", path);
    }
  }
  return p;
}

// ---- anchor labels ---------------------------------------------------------

inline Json anchor_labels_to_json(const std::vector<AnchorLabel>& labels, const CategoryTable& table) {
  Json out = Json::array();
  for (std::size_t a = 0; a < labels.size(); ++a) {
    const AnchorLabel& l = labels[a];
    Json rec = {{"anchor_index", a}};
    rec["category"] = l.positive() ? Json(table.name(l.category)) : Json("background");
    rec["gt_index"] = l.matched_gt ? Json(*l.matched_gt) : Json(nullptr);
    rec["offsets"] = l.positive() ? Json::array({l.offsets.dx, l.offsets.dy, l.offsets.dw, l.offsets.dh}) : Json(nullptr);
    rec["sampled"] = l.sampled;
    out.push_back(std::move(rec));
  }
  return out;
}

// ---- evaluation report -----------------------------------------------------

inline const char* to_string(ApInterpolation m) { return m == ApInterpolation::kAllPoint ? "all_point" : "eleven_point"; }

inline ApInterpolation interpolation_from_string(const std::string& s, const std::string& path) {
  if (s == "all_point") return ApInterpolation::kAllPoint;
  if (s == "eleven_point") return ApInterpolation::kElevenPoint;
  throw ParseError(path, "expected \"all_point\" or \"eleven_point\"");
}

inline Json report_to_json(const EvalReport& r, const CategoryTable& table) {
  Json cats = Json::array();
  for (const auto& c : r.categories) {
    Json curve = Json::array();
    for (const auto& p : c.curve) curve.push_back(Json::array({p.recall, p.precision}));
    cats.push_back({{"category", table.name(c.category)},
                    {"num_gt", c.num_gt},
                    {"tp", c.tp},
                    {"fp", c.fp},
                    {"fn", c.fn},
                    {"ap", c.ap},
                    {"curve", std::move(curve)}});
  }
  return {{"map", r.map}, {"categories", std::move(cats)}};
}

inline std::string prc_csv(const CategoryReport& c) {
  std::string out = "recall,precision\n";
  for (const auto& p : c.curve) out += Json(p.recall).dump() + "," + Json(p.precision).dump() + "\n";
  return out;
}

// ---- run configuration -----------------------------------------------------

inline Json config_to_json(const RunConfig& cfg) {
  Json cats = Json::array();
  for (const auto& c : cfg.scene.categories)
    cats.push_back({{"name", c.name},
                    {"min_count", c.min_count},
                    {"max_count", c.max_count},
                    {"min_size", c.min_size},
                    {"max_size", c.max_size}});
  const CategoryTable table(cfg.scene);
  Json per_cat = Json::object();
  for (const auto& [c, t] : cfg.nms.per_category) per_cat[table.name(c)] = t;

  Json out;
  out["scene"] = {{"image_w", cfg.scene.image_w},
                  {"image_h", cfg.scene.image_h},
                  {"max_overlap_iou", cfg.scene.max_overlap_iou},
                  {"max_retries", cfg.scene.max_retries},
                  {"categories", std::move(cats)}};
  out["noise"] = {{"jitter_stddev", cfg.noise.jitter_stddev},
                  {"true_score", {cfg.noise.true_score.lo, cfg.noise.true_score.hi}},
                  {"spurious_score", {cfg.noise.spurious_score.lo, cfg.noise.spurious_score.hi}},
                  {"false_positive_rate", cfg.noise.false_positive_rate},
                  {"miss_rate", cfg.noise.miss_rate},
                  {"candidates_per_object", cfg.noise.candidates_per_object},
                  {"extra_spurious", cfg.noise.extra_spurious}};
  out["levels"] = cfg.levels.values;
  out["cpn_score_threshold"] = cfg.cpn_score_threshold;
  out["cpn_neg_ratio"] = cfg.cpn_neg_ratio;
  out["alpha"] = cfg.alpha;
  out["anchors"] = {{"scales", cfg.anchors.scales}, {"ratios", cfg.anchors.ratios}, {"stride", cfg.anchors.stride}};
  out["pos_iou"] = cfg.anchor_labels.pos_iou;
  out["neg_iou"] = cfg.anchor_labels.neg_iou;
  out["neg_ratio"] = cfg.anchor_labels.neg_ratio;
  out["match_best_anchor"] = cfg.anchor_labels.match_best_anchor;
  out["beta"] = cfg.beta;
  out["nms"] = {{"default", cfg.nms.default_threshold}, {"per_category", std::move(per_cat)}};
  out["apply_nms"] = cfg.apply_nms;
  out["pos_factor"] = cfg.pos_factor;
  out["base_budget"] = cfg.base_budget;
  out["eval_iou"] = cfg.eval_iou;
  out["interpolation"] = to_string(cfg.interpolation);
  out["seed"] = cfg.seed ? Json(*cfg.seed) : Json(nullptr);
  return out;
}

namespace io {

inline std::vector<double> number_list(const Json& j, const std::string& path) {
  array(j, path);
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], index(path, i)));
  return out;
}

inline std::size_t unsigned_integer(const Json& j, const std::string& path) {
  const auto v = integer(j, path);
  if (v < 0) throw ParseError(path, "expected a nonnegative integer");
  return static_cast<std::size_t>(v);
}

inline ScoreRange score_range(const Json& j, const std::string& path) {
  const auto v = number_list(j, path);
  if (v.size() != 2) throw ParseError(path, "expected [lo, hi]");
  return {v[0], v[1]};
}

inline void reject_unknown(const Json& j, std::initializer_list<const char*> known, const std::string& path) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ParseError(join(path, key), "unknown field");
  }
}

}  // namespace io

/// Overlays the fields present in `j` onto `base`. Unknown keys are errors.
inline RunConfig config_from_json(const Json& j, RunConfig base = {}) {
  using namespace io;
  if (!j.is_object()) throw ParseError("<root>", "expected a configuration object");
  reject_unknown(j,
                 {"scene", "noise", "levels", "cpn_score_threshold", "cpn_neg_ratio", "alpha", "anchors", "pos_iou",
                  "neg_iou", "neg_ratio", "match_best_anchor", "beta", "nms", "apply_nms", "pos_factor",
                  "base_budget", "eval_iou", "interpolation", "seed"},
                 "");
  RunConfig cfg = std::move(base);
  auto has = [](const Json& o, const char* k) { return o.contains(k); };

  if (has(j, "scene")) {
    const Json& s = j["scene"];
    if (!s.is_object()) throw ParseError("scene", "expected an object");
    reject_unknown(s, {"image_w", "image_h", "max_overlap_iou", "max_retries", "categories"}, "scene");
    if (has(s, "image_w")) cfg.scene.image_w = number(s["image_w"], "scene.image_w");
    if (has(s, "image_h")) cfg.scene.image_h = number(s["image_h"], "scene.image_h");
    if (has(s, "max_overlap_iou")) cfg.scene.max_overlap_iou = number(s["max_overlap_iou"], "scene.max_overlap_iou");
    if (has(s, "max_retries")) cfg.scene.max_retries = unsigned_integer(s["max_retries"], "scene.max_retries");
    if (has(s, "categories")) {
      const Json& cats = array(s["categories"], "scene.categories");
      cfg.scene.categories.clear();
      for (std::size_t i = 0; i < cats.size(); ++i) {
        const std::string path = index("scene.categories", i);
        const Json& name = member(cats[i], "name", path);
        if (!name.is_string()) throw ParseError(join(path, "name"), "expected a string");
        CategorySpec c;
        c.name = name.get<std::string>();
        c.min_count = static_cast<int>(integer(member(cats[i], "min_count", path), join(path, "min_count")));
        c.max_count = static_cast<int>(integer(member(cats[i], "max_count", path), join(path, "max_count")));
        c.min_size = number_field(cats[i], "min_size", path);
        c.max_size = number_field(cats[i], "max_size", path);
        cfg.scene.categories.push_back(std::move(c));
      }
    }
  }
  if (has(j, "noise")) {
    const Json& n = j["noise"];
    if (!n.is_object()) throw ParseError("noise", "expected an object");
    reject_unknown(n,
                   {"jitter_stddev", "true_score", "spurious_score", "false_positive_rate", "miss_rate",
                    "candidates_per_object", "extra_spurious"},
                   "noise");
    if (has(n, "jitter_stddev")) cfg.noise.jitter_stddev = number(n["jitter_stddev"], "noise.jitter_stddev");
    if (has(n, "true_score")) cfg.noise.true_score = score_range(n["true_score"], "noise.true_score");
    if (has(n, "spurious_score")) cfg.noise.spurious_score = score_range(n["spurious_score"], "noise.spurious_score");
    if (has(n, "false_positive_rate"))
      cfg.noise.false_positive_rate = number(n["false_positive_rate"], "noise.false_positive_rate");
    if (has(n, "miss_rate")) cfg.noise.miss_rate = number(n["miss_rate"], "noise.miss_rate");
    if (has(n, "candidates_per_object"))
      cfg.noise.candidates_per_object = unsigned_integer(n["candidates_per_object"], "noise.candidates_per_object");
    if (has(n, "extra_spurious")) cfg.noise.extra_spurious = unsigned_integer(n["extra_spurious"], "noise.extra_spurious");
  }
  if (has(j, "levels")) {
    const Json& l = array(j["levels"], "levels");
    cfg.levels.values.clear();
    for (std::size_t i = 0; i < l.size(); ++i)
      cfg.levels.values.push_back(static_cast<int>(integer(l[i], index("levels", i))));
  }
  if (has(j, "cpn_score_threshold")) cfg.cpn_score_threshold = number(j["cpn_score_threshold"], "cpn_score_threshold");
  if (has(j, "cpn_neg_ratio")) cfg.cpn_neg_ratio = unsigned_integer(j["cpn_neg_ratio"], "cpn_neg_ratio");
  if (has(j, "alpha")) cfg.alpha = number(j["alpha"], "alpha");
  if (has(j, "anchors")) {
    const Json& a = j["anchors"];
    if (!a.is_object()) throw ParseError("anchors", "expected an object");
    reject_unknown(a, {"scales", "ratios", "stride"}, "anchors");
    if (has(a, "scales")) cfg.anchors.scales = number_list(a["scales"], "anchors.scales");
    if (has(a, "ratios")) cfg.anchors.ratios = number_list(a["ratios"], "anchors.ratios");
    if (has(a, "stride")) cfg.anchors.stride = number(a["stride"], "anchors.stride");
  }
  if (has(j, "pos_iou")) cfg.anchor_labels.pos_iou = number(j["pos_iou"], "pos_iou");
  if (has(j, "neg_iou")) cfg.anchor_labels.neg_iou = number(j["neg_iou"], "neg_iou");
  if (has(j, "neg_ratio")) cfg.anchor_labels.neg_ratio = unsigned_integer(j["neg_ratio"], "neg_ratio");
  if (has(j, "match_best_anchor")) cfg.anchor_labels.match_best_anchor = boolean(j["match_best_anchor"], "match_best_anchor");
  if (has(j, "beta")) cfg.beta = number(j["beta"], "beta");
  if (has(j, "nms")) {
    const Json& n = j["nms"];
    if (!n.is_object()) throw ParseError("nms", "expected an object");
    reject_unknown(n, {"default", "per_category"}, "nms");
    if (has(n, "default")) cfg.nms.default_threshold = number(n["default"], "nms.default");
    if (has(n, "per_category")) {
      const Json& pc = n["per_category"];
      if (!pc.is_object()) throw ParseError("nms.per_category", "expected an object keyed by category");
      const CategoryTable table(cfg.scene);
      cfg.nms.per_category.clear();
      for (const auto& [key, value] : pc.items()) {
        const std::string path = "nms.per_category." + key;
        cfg.nms.per_category[table.resolve(Json(key), path)] = number(value, path);
      }
    }
  }
  if (has(j, "apply_nms")) cfg.apply_nms = boolean(j["apply_nms"], "apply_nms");
  if (has(j, "pos_factor")) cfg.pos_factor = number(j["pos_factor"], "pos_factor");
  if (has(j, "base_budget")) cfg.base_budget = unsigned_integer(j["base_budget"], "base_budget");
  if (has(j, "eval_iou")) cfg.eval_iou = number(j["eval_iou"], "eval_iou");
  if (has(j, "interpolation")) {
    if (!j["interpolation"].is_string()) throw ParseError("interpolation", "expected a string");
    cfg.interpolation = interpolation_from_string(j["interpolation"].get<std::string>(), "interpolation");
  }
  if (has(j, "seed")) {
    if (j["seed"].is_null()) {
      cfg.seed.reset();
    } else {
      if (!j["seed"].is_number_unsigned()) throw ParseError("seed", "expected a nonnegative integer");
      cfg.seed = j["seed"].get<std::uint64_t>();
    }
  }
  return cfg;
}

}  // namespace dapnet
