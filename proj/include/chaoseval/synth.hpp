#ifndef CHAOSEVAL_SYNTH_HPP
#define CHAOSEVAL_SYNTH_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "chaoseval/data_model.hpp"
#include "chaoseval/error.hpp"
#include "chaoseval/metrics.hpp"
#include "chaoseval/rng.hpp"

namespace chaoseval {

struct IntRange {
  std::int64_t lo = 0;
  std::int64_t hi = 0;
  friend bool operator==(const IntRange&, const IntRange&) = default;
};

/// Uniform on [lo, hi]; a point mass when lo == hi.
struct ScoreDist {
  double lo = 0.0;
  double hi = 1.0;
  friend bool operator==(const ScoreDist&, const ScoreDist&) = default;
};

enum class DecoyMode {
  Easy,         ///< IoU <= 0.3 with every ground-truth box
  HardNegative  ///< IoU in (0.3, 0.5) with some ground-truth box, <= 0.5 with all
};

/// Pairwise IoU ceiling between ground-truth boxes of one frame.
inline constexpr double kGtOverlapTolerance = 0.1;
inline constexpr double kEasyDecoyMaxIou = 0.3;
inline constexpr double kHardDecoyMaxIou = 0.5;

struct ScenarioSpec {
  std::uint64_t seed = 42;
  std::size_t n_videos = 2;
  std::size_t frames_per_video = 10;
  std::size_t n_classes = 3;
  IntRange actors_per_frame{1, 4};
  IntRange labels_per_actor{1, 1};
  ScoreDist tp_score{0.5, 1.0};
  ScoreDist fp_score{0.0, 0.8};
  IntRange fp_per_frame{0, 6};
  double jitter = 0.02;
  /// Per-frame multiplier applied to every score in the frame.
  ScoreDist frame_scale{1.0, 1.0};
  DecoyMode decoy_mode = DecoyMode::Easy;
  /// Side lengths of ground-truth boxes.
  double min_box = 0.15;
  double max_box = 0.3;

  void validate() const {
    auto fail = [](const std::string& what) { throw UsageError("scenario: " + what); };
    if (n_videos < 1 || frames_per_video < 1 || n_classes < 1) fail("counts must be >= 1");
    auto check_range = [&](const IntRange& r, std::int64_t min, const char* name) {
      if (r.lo < min || r.lo > r.hi) fail(std::string(name) + " must satisfy " + std::to_string(min) + " <= lo <= hi");
    };
    check_range(actors_per_frame, 1, "actors_per_frame");
    check_range(labels_per_actor, 1, "labels_per_actor");
    check_range(fp_per_frame, 0, "fp_per_frame");
    if (labels_per_actor.hi > static_cast<std::int64_t>(n_classes)) fail("labels_per_actor.hi exceeds n_classes");
    auto check_dist = [&](const ScoreDist& d, const char* name) {
      if (!(d.lo >= 0.0 && d.lo <= d.hi && d.hi <= 1.0)) fail(std::string(name) + " must satisfy 0 <= lo <= hi <= 1");
    };
    check_dist(tp_score, "tp_score");
    check_dist(fp_score, "fp_score");
    check_dist(frame_scale, "frame_scale");
    if (!(jitter >= 0.0 && jitter < 0.5)) fail("jitter must lie in [0, 0.5)");
    if (!(min_box > 0.0 && min_box <= max_box && max_box <= 1.0)) fail("box sizes must satisfy 0 < min_box <= max_box <= 1");
  }

  friend bool operator==(const ScenarioSpec&, const ScenarioSpec&) = default;
};

struct SyntheticData {
  DetectionStore detections;
  GroundTruthStore ground_truth;
};

namespace detail {

/// Rounds to six decimals; n / 1e6 is the correctly rounded double for the
/// decimal, so the value survives a text round trip unchanged.
inline double quantize6(double v) { return std::round(v * 1e6) / 1e6; }

inline BoundingBox quantize(const BoundingBox& b) {
  return {quantize6(b.x1), quantize6(b.y1), quantize6(b.x2), quantize6(b.y2)};
}

inline double draw_score(Rng& rng, const ScoreDist& d, double scale) {
  double s = d.lo == d.hi ? d.lo : rng.uniform(d.lo, d.hi);
  return std::clamp(quantize6(s * scale), 0.0, 1.0);
}

inline BoundingBox random_box(Rng& rng, double min_side, double max_side) {
  double w = rng.uniform(min_side, max_side);
  double h = rng.uniform(min_side, max_side);
  double x = rng.uniform(0.0, 1.0 - w);
  double y = rng.uniform(0.0, 1.0 - h);
  return quantize({x, y, x + w, y + h});
}

inline constexpr int kMaxAttempts = 2000;

} // namespace detail

/// Generates paired stores. Each (video, frame) draws from its own PRNG
/// stream, so changing n_videos or frames_per_video leaves existing frames
/// untouched. Row order within a frame: one detection row per ground-truth
/// label (jittered box, tp score), then decoys (fp score).
inline SyntheticData generate(const ScenarioSpec& spec) {
  spec.validate();
  std::vector<Detection> dets;
  std::vector<GroundTruth> gts;
  const auto n_classes = static_cast<std::int64_t>(spec.n_classes);

  for (std::size_t v = 0; v < spec.n_videos; ++v) {
    char vid[32];
    std::snprintf(vid, sizeof vid, "vid%03zu", v);
    for (std::size_t f = 0; f < spec.frames_per_video; ++f) {
      FrameKey key{vid, static_cast<std::int64_t>(f)};
      Rng rng(stream_seed(spec.seed, {v, f}));
      double scale = spec.frame_scale.lo == spec.frame_scale.hi
                         ? spec.frame_scale.lo
                         : rng.uniform(spec.frame_scale.lo, spec.frame_scale.hi);

      auto n_actors = rng.uniform_int(spec.actors_per_frame.lo, spec.actors_per_frame.hi);
      std::vector<BoundingBox> actors;
      for (std::int64_t a = 0; a < n_actors; ++a) {
        bool placed = false;
        for (int attempt = 0; attempt < detail::kMaxAttempts && !placed; ++attempt) {
          auto box = detail::random_box(rng, spec.min_box, spec.max_box);
          bool clear = std::all_of(actors.begin(), actors.end(),
                                   [&](const BoundingBox& o) { return iou(box, o) <= kGtOverlapTolerance; });
          if (clear) {
            actors.push_back(box);
            placed = true;
          }
        }
        if (!placed) {
          throw DataError("scenario infeasible: frame " + key.video_id + "@" + std::to_string(key.timestamp) +
                          " could not place actor " + std::to_string(a + 1) + " of " + std::to_string(n_actors) +
                          " within overlap tolerance");
        }
      }

      for (const auto& box : actors) {
        auto n_labels = rng.uniform_int(spec.labels_per_actor.lo, spec.labels_per_actor.hi);
        std::vector<int> labels;
        while (static_cast<std::int64_t>(labels.size()) < n_labels) {
          int c = static_cast<int>(rng.uniform_int(1, n_classes));
          if (std::find(labels.begin(), labels.end(), c) == labels.end()) labels.push_back(c);
        }
        BoundingBox seen = box;
        if (spec.jitter > 0.0) {
          for (int attempt = 0; attempt < detail::kMaxAttempts; ++attempt) {
            BoundingBox j{std::clamp(box.x1 + rng.uniform(-spec.jitter, spec.jitter), 0.0, 1.0),
                          std::clamp(box.y1 + rng.uniform(-spec.jitter, spec.jitter), 0.0, 1.0),
                          std::clamp(box.x2 + rng.uniform(-spec.jitter, spec.jitter), 0.0, 1.0),
                          std::clamp(box.y2 + rng.uniform(-spec.jitter, spec.jitter), 0.0, 1.0)};
            j = detail::quantize(j);
            if (j.width() >= 0.01 && j.height() >= 0.01) {
              seen = j;
              break;
            }
          }
        }
        for (int c : labels) {
          gts.push_back(GroundTruth{key, box, c, gts.size()});
          dets.push_back(Detection{key, seen, c, detail::draw_score(rng, spec.tp_score, scale), dets.size()});
        }
      }

      auto n_decoys = rng.uniform_int(spec.fp_per_frame.lo, spec.fp_per_frame.hi);
      for (std::int64_t d = 0; d < n_decoys; ++d) {
        bool placed = false;
        for (int attempt = 0; attempt < detail::kMaxAttempts && !placed; ++attempt) {
          BoundingBox box;
          if (spec.decoy_mode == DecoyMode::HardNegative && !actors.empty()) {
            const auto& anchor = actors[static_cast<std::size_t>(
                rng.uniform_int(0, static_cast<std::int64_t>(actors.size()) - 1))];
            double dx = rng.uniform(-0.5, 0.5) * anchor.width();
            double dy = rng.uniform(-0.5, 0.5) * anchor.height();
            box = detail::quantize({std::clamp(anchor.x1 + dx, 0.0, 1.0), std::clamp(anchor.y1 + dy, 0.0, 1.0),
                                    std::clamp(anchor.x2 + dx, 0.0, 1.0), std::clamp(anchor.y2 + dy, 0.0, 1.0)});
            if (!box.valid()) continue;
          } else {
            box = detail::random_box(rng, spec.min_box, spec.max_box);
          }
          double worst = 0.0;
          for (const auto& a : actors) worst = std::max(worst, iou(box, a));
          bool ok = spec.decoy_mode == DecoyMode::HardNegative && !actors.empty()
                        ? worst > kEasyDecoyMaxIou && worst < kHardDecoyMaxIou
                        : worst <= kEasyDecoyMaxIou;
          if (!ok) continue;
          int c = static_cast<int>(rng.uniform_int(1, n_classes));
          dets.push_back(Detection{key, box, c, detail::draw_score(rng, spec.fp_score, scale), dets.size()});
          placed = true;
        }
        if (!placed) {
          throw DataError("scenario infeasible: frame " + key.video_id + "@" + std::to_string(key.timestamp) +
                          " could not place decoy " + std::to_string(d + 1));
        }
      }
    }
  }
  return {DetectionStore(std::move(dets)), GroundTruthStore(std::move(gts))};
}

// --- named scenarios -------------------------------------------------------

/// Mixed-noise scenario: 2 videos x 10 frames, 3 classes.
inline ScenarioSpec reference_scenario(std::uint64_t seed = 42) {
  ScenarioSpec s;
  s.seed = seed;
  return s;
}

/// Exact boxes, no decoys, every score 1.
inline ScenarioSpec noiseless_scenario(std::uint64_t seed = 42) {
  ScenarioSpec s;
  s.seed = seed;
  s.jitter = 0.0;
  s.fp_per_frame = {0, 0};
  s.tp_score = {1.0, 1.0};
  return s;
}

/// Three actors per frame whose scores beat every decoy in the same frame,
/// while per-frame score scales let decoys of confident frames outrank true
/// positives of timid frames. Keeping three anchors per frame is optimal.
inline ScenarioSpec adversarial_scenario(std::uint64_t seed = 7) {
  ScenarioSpec s;
  s.seed = seed;
  s.n_videos = 4;
  s.frames_per_video = 25;
  s.n_classes = 3;
  s.actors_per_frame = {3, 3};
  s.tp_score = {0.9, 1.0};
  s.fp_score = {0.5, 0.85};
  s.fp_per_frame = {4, 8};
  s.jitter = 0.01;
  s.frame_scale = {0.4, 1.0};
  return s;
}

} // namespace chaoseval

#endif // CHAOSEVAL_SYNTH_HPP
