#ifndef CHAOSEVAL_JSON_HPP
#define CHAOSEVAL_JSON_HPP

// JSON forms of reports, sweep results and scenario specs.

#include <string>

#include <nlohmann/json.hpp>

#include "chaoseval/error.hpp"
#include "chaoseval/fusion.hpp"
#include "chaoseval/metrics.hpp"
#include "chaoseval/pruning.hpp"
#include "chaoseval/sweep.hpp"
#include "chaoseval/synth.hpp"

namespace chaoseval {

using json = nlohmann::ordered_json;

inline json to_json(const EvalReport& r) {
  json per_class = json::array();
  for (const auto& c : r.per_class) {
    per_class.push_back({{"action_id", c.action_id},
                         {"ap", c.ap ? json(*c.ap) : json(nullptr)},
                         {"m", c.m},
                         {"tp", c.tp},
                         {"fp", c.fp}});
  }
  return {{"map", r.map}, {"iou_threshold", r.iou_threshold}, {"n_classes", r.n_classes}, {"per_class", per_class}};
}

inline EvalReport eval_report_from_json(const json& j) {
  try {
    EvalReport r;
    r.map = j.at("map").get<double>();
    r.iou_threshold = j.at("iou_threshold").get<double>();
    r.n_classes = j.at("n_classes").get<std::size_t>();
    for (const auto& c : j.at("per_class")) {
      ClassReport cls;
      cls.action_id = c.at("action_id").get<int>();
      if (!c.at("ap").is_null()) cls.ap = c.at("ap").get<double>();
      cls.m = c.at("m").get<std::size_t>();
      cls.tp = c.at("tp").get<std::size_t>();
      cls.fp = c.at("fp").get<std::size_t>();
      r.per_class.push_back(cls);
    }
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed report JSON: ") + e.what());
  }
}

inline json to_json(const SweepResult& s, const CapacityRange& range, PruneMode mode, double iou_threshold) {
  json points = json::array();
  for (const auto& p : s.points) {
    json per_class = json::array();
    for (const auto& c : p.report.per_class) {
      if (c.ap) per_class.push_back({{"action_id", c.action_id}, {"ap", *c.ap}});
    }
    points.push_back({{"capacity", p.capacity}, {"map", p.map()}, {"ap_std", p.ap_std()}, {"per_class", per_class}});
  }
  return {{"range", {{"lo", range.lo}, {"hi", range.hi}, {"step", range.step}}},
          {"mode", std::string(to_string(mode))},
          {"iou_threshold", iou_threshold},
          {"best", {{"capacity", s.best_capacity}, {"map", s.best_map}}},
          {"points", points}};
}

inline json to_json(const std::vector<ApDelta>& rows) {
  json out = json::array();
  for (const auto& r : rows) {
    out.push_back({{"action_id", r.action_id}, {"ap_a", r.ap_a}, {"ap_b", r.ap_b}, {"delta", r.delta}, {"top5", r.top}});
  }
  return out;
}

// --- scenario spec ---------------------------------------------------------

inline json to_json(const ScenarioSpec& s) {
  auto range = [](const IntRange& r) { return json{{"lo", r.lo}, {"hi", r.hi}}; };
  auto dist = [](const ScoreDist& d) { return json{{"lo", d.lo}, {"hi", d.hi}}; };
  return {{"seed", s.seed},
          {"n_videos", s.n_videos},
          {"frames_per_video", s.frames_per_video},
          {"n_classes", s.n_classes},
          {"actors_per_frame", range(s.actors_per_frame)},
          {"labels_per_actor", range(s.labels_per_actor)},
          {"tp_score_dist", dist(s.tp_score)},
          {"fp_score_dist", dist(s.fp_score)},
          {"fp_per_frame", range(s.fp_per_frame)},
          {"jitter", s.jitter},
          {"frame_scale", dist(s.frame_scale)},
          {"decoy_mode", s.decoy_mode == DecoyMode::Easy ? "easy" : "hard_negative"},
          {"min_box", s.min_box},
          {"max_box", s.max_box}};
}

/// Fields absent from `j` keep their defaults. An optional "preset" key
/// (reference | noiseless | adversarial) selects the base spec.
inline ScenarioSpec scenario_from_json(const json& j) {
  try {
    ScenarioSpec s;
    if (j.contains("preset")) {
      auto preset = j.at("preset").get<std::string>();
      std::uint64_t seed = j.value("seed", preset == "adversarial" ? std::uint64_t{7} : std::uint64_t{42});
      if (preset == "reference") s = reference_scenario(seed);
      else if (preset == "noiseless") s = noiseless_scenario(seed);
      else if (preset == "adversarial") s = adversarial_scenario(seed);
      else throw UsageError("unknown scenario preset '" + preset + "'");
    }
    auto range = [&](const char* key, IntRange& r) {
      if (!j.contains(key)) return;
      const auto& v = j.at(key);
      if (v.is_number_integer()) {
        r.lo = r.hi = v.get<std::int64_t>();
      } else {
        r.lo = v.at("lo").get<std::int64_t>();
        r.hi = v.at("hi").get<std::int64_t>();
      }
    };
    auto dist = [&](const char* key, ScoreDist& d) {
      if (!j.contains(key)) return;
      const auto& v = j.at(key);
      if (v.is_number()) {
        d.lo = d.hi = v.get<double>();
      } else {
        d.lo = v.at("lo").get<double>();
        d.hi = v.at("hi").get<double>();
      }
    };
    if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("n_videos")) s.n_videos = j.at("n_videos").get<std::size_t>();
    if (j.contains("frames_per_video")) s.frames_per_video = j.at("frames_per_video").get<std::size_t>();
    if (j.contains("n_classes")) s.n_classes = j.at("n_classes").get<std::size_t>();
    range("actors_per_frame", s.actors_per_frame);
    range("labels_per_actor", s.labels_per_actor);
    range("fp_per_frame", s.fp_per_frame);
    dist("tp_score_dist", s.tp_score);
    dist("fp_score_dist", s.fp_score);
    dist("frame_scale", s.frame_scale);
    if (j.contains("jitter")) s.jitter = j.at("jitter").get<double>();
    if (j.contains("min_box")) s.min_box = j.at("min_box").get<double>();
    if (j.contains("max_box")) s.max_box = j.at("max_box").get<double>();
    if (j.contains("decoy_mode")) {
      auto m = j.at("decoy_mode").get<std::string>();
      if (m == "easy") s.decoy_mode = DecoyMode::Easy;
      else if (m == "hard_negative") s.decoy_mode = DecoyMode::HardNegative;
      else throw UsageError("unknown decoy_mode '" + m + "' (expected easy|hard_negative)");
    }
    s.validate();
    return s;
  } catch (const json::exception& e) {
    throw UsageError(std::string("malformed scenario spec: ") + e.what());
  }
}

inline json to_json(const FusionDemo& demo) {
  const auto& d = demo.dims;
  json blocks = json::array();
  for (const auto& b : demo.blocks) {
    char hex[24];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(b.checksum));
    blocks.push_back({{"name", b.name}, {"begin", b.begin}, {"end", b.end}, {"checksum", hex}});
  }
  json actors = json::array();
  for (std::size_t i = 0; i < demo.anchors.size(); ++i) {
    const auto& a = demo.anchors[i];
    actors.push_back({{"box", {a.x1, a.y1, a.x2, a.y2}}, {"feature", demo.actor_features[i]}});
  }
  char hex[24];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(checksum(demo.fused.data())));
  return {{"dims",
           {{"cvin", d.vit_in_channels}, {"cv", d.vit_channels}, {"cs", d.slow_channels}, {"cf", d.fast_channels},
            {"h", d.height}, {"w", d.width}, {"ts", d.slow_t}, {"tf", d.fast_t}, {"tv", d.vit_t}, {"hv", d.vit_h},
            {"wv", d.vit_w}}},
          {"fused", {{"channels", demo.fused.channels()}, {"height", demo.fused.height()},
                     {"width", demo.fused.width()}, {"checksum", hex}}},
          {"blocks", blocks},
          {"actors", actors}};
}

} // namespace chaoseval

#endif // CHAOSEVAL_JSON_HPP
