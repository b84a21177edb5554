#ifndef CHAOSEVAL_METRICS_HPP
#define CHAOSEVAL_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "chaoseval/data_model.hpp"
#include "chaoseval/error.hpp"

namespace chaoseval {

inline constexpr double kDefaultIouThreshold = 0.5;

/// Intersection over union of two valid boxes.
inline double iou(const BoundingBox& a, const BoundingBox& b) {
  double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  double inter = iw * ih;
  double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? std::min(1.0, inter / uni) : 0.0;
}

/// Evaluation rank order: score descending, then input row ascending.
inline bool ranks_before(const Detection& a, const Detection& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.row < b.row;
}

inline void validate_iou_threshold(double t) {
  if (!(t > 0.0 && t <= 1.0)) throw UsageError("iou threshold must lie in (0,1], got " + std::to_string(t));
}

struct MatchEntry {
  std::size_t detection = 0;           ///< index into the ranked detections
  bool true_positive = false;
  std::optional<std::size_t> gt;       ///< index into the class's ground truth
};

struct MatchResult {
  std::vector<MatchEntry> entries;     ///< in rank order
  std::size_t positives = 0;           ///< M: ground-truth count for the class

  std::size_t tp() const {
    return static_cast<std::size_t>(
        std::count_if(entries.begin(), entries.end(), [](const MatchEntry& e) { return e.true_positive; }));
  }
  std::size_t fp() const { return entries.size() - tp(); }
};

/// Ground truth of one class keyed by frame.
class GroundTruthIndex {
public:
  explicit GroundTruthIndex(std::span<const GroundTruth> gts) : size_(gts.size()) {
    for (std::size_t i = 0; i < gts.size(); ++i) {
      by_frame_[gts[i].key].push_back(i);
      boxes_.push_back(gts[i].box);
    }
  }

  std::size_t size() const { return size_; }
  const BoundingBox& box(std::size_t i) const { return boxes_[i]; }

  /// Indices of the ground truth in `key`'s frame (empty when none).
  std::span<const std::size_t> in_frame(const FrameKey& key) const {
    auto it = by_frame_.find(key);
    if (it == by_frame_.end()) return {};
    return it->second;
  }

private:
  std::map<FrameKey, std::vector<std::size_t>> by_frame_;
  std::vector<BoundingBox> boxes_;
  std::size_t size_;
};

/// Greedy matching in rank order: each detection claims the unmatched
/// same-frame ground truth of highest IoU (lowest index on ties) when that
/// IoU reaches the threshold.
inline MatchResult match_class(std::span<const Detection> ranked, const GroundTruthIndex& gts,
                               double iou_threshold) {
  MatchResult result;
  result.positives = gts.size();
  result.entries.reserve(ranked.size());
  std::vector<char> taken(gts.size(), 0);
  for (std::size_t d = 0; d < ranked.size(); ++d) {
    MatchEntry entry{d, false, std::nullopt};
    double best = -1.0;
    for (auto g : gts.in_frame(ranked[d].key)) {
      if (taken[g]) continue;
      double v = iou(ranked[d].box, gts.box(g));
      if (v >= iou_threshold && v > best) {
        best = v;
        entry.gt = g;
      }
    }
    if (entry.gt) {
      taken[*entry.gt] = 1;
      entry.true_positive = true;
    }
    result.entries.push_back(entry);
  }
  return result;
}

inline MatchResult match_class(std::span<const Detection> ranked, std::span<const GroundTruth> gts,
                               double iou_threshold) {
  return match_class(ranked, GroundTruthIndex(gts), iou_threshold);
}

/// Non-interpolated AP over a ranked TP/FP sequence: the sum of precision at
/// each true-positive rank, divided by the positive count. Returns nullopt
/// when there are no positives (the class is excluded from the mean).
inline std::optional<double> average_precision(const std::vector<bool>& flags, std::size_t positives) {
  if (positives == 0) return std::nullopt;
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t k = 0; k < flags.size(); ++k) {
    if (!flags[k]) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(k + 1);
  }
  return sum / static_cast<double>(positives);
}

inline std::optional<double> average_precision(const MatchResult& match) {
  std::vector<bool> flags;
  flags.reserve(match.entries.size());
  for (const auto& e : match.entries) flags.push_back(e.true_positive);
  return average_precision(flags, match.positives);
}

struct ClassReport {
  int action_id = 0;
  std::optional<double> ap;  ///< nullopt when the class has no ground truth
  std::size_t m = 0;
  std::size_t tp = 0;
  std::size_t fp = 0;

  friend bool operator==(const ClassReport&, const ClassReport&) = default;
};

struct EvalReport {
  double iou_threshold = kDefaultIouThreshold;
  double map = 0.0;
  std::size_t n_classes = 0;         ///< classes averaged into map
  std::vector<ClassReport> per_class;  ///< ascending action_id

  std::optional<double> ap_of(int action_id) const {
    for (const auto& c : per_class) {
      if (c.action_id == action_id) return c.ap;
    }
    return std::nullopt;
  }

  /// Population standard deviation of the included per-class APs.
  double ap_std() const {
    if (n_classes == 0) return 0.0;
    double sq = 0.0;
    for (const auto& c : per_class) {
      if (c.ap) sq += (*c.ap - map) * (*c.ap - map);
    }
    return std::sqrt(sq / static_cast<double>(n_classes));
  }

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

/// Frame-mAP evaluator bound to one ground-truth store. The ground truth is
/// indexed once, so many detection stores (e.g. one per capacity) can be
/// scored against it. Thread-safe for concurrent evaluate() calls.
class Evaluator {
public:
  Evaluator(const GroundTruthStore& gts, double iou_threshold = kDefaultIouThreshold)
      : iou_threshold_(iou_threshold) {
    validate_iou_threshold(iou_threshold);
    if (gts.empty()) throw DataError("ground truth store is empty: nothing to evaluate");
    std::map<int, std::vector<GroundTruth>> grouped;
    for (const auto& frame : gts.frames()) {
      for (const auto& g : frame.records) grouped[g.action_id].push_back(g);
    }
    for (auto& [id, rows] : grouped) {
      classes_.push_back(id);
      indices_.emplace_back(rows);
    }
  }

  double iou_threshold() const { return iou_threshold_; }
  const std::vector<int>& classes() const { return classes_; }

  EvalReport evaluate(const DetectionStore& dets) const {
    std::map<int, std::vector<Detection>> by_class;
    for (int id : classes_) by_class[id];
    for (const auto& frame : dets.frames()) {
      for (const auto& d : frame.records) by_class[d.action_id].push_back(d);
    }

    EvalReport report;
    report.iou_threshold = iou_threshold_;
    double sum = 0.0;
    for (auto& [id, ranked] : by_class) {
      std::sort(ranked.begin(), ranked.end(), ranks_before);
      ClassReport cls;
      cls.action_id = id;
      auto pos = std::lower_bound(classes_.begin(), classes_.end(), id);
      if (pos == classes_.end() || *pos != id) {
        cls.fp = ranked.size();
      } else {
        const auto& index = indices_[static_cast<std::size_t>(pos - classes_.begin())];
        auto match = match_class(ranked, index, iou_threshold_);
        cls.ap = average_precision(match);
        cls.m = match.positives;
        cls.tp = match.tp();
        cls.fp = match.fp();
        sum += *cls.ap;
        ++report.n_classes;
      }
      report.per_class.push_back(cls);
    }
    report.map = sum / static_cast<double>(report.n_classes);
    return report;
  }

private:
  double iou_threshold_;
  std::vector<int> classes_;
  std::vector<GroundTruthIndex> indices_;
};

/// Per-class AP pooled over all frames, averaged over ground-truth classes.
inline EvalReport mean_average_precision(const DetectionStore& dets, const GroundTruthStore& gts,
                                         double iou_threshold = kDefaultIouThreshold) {
  return Evaluator(gts, iou_threshold).evaluate(dets);
}

} // namespace chaoseval

#endif // CHAOSEVAL_METRICS_HPP
