#ifndef CHAOSEVAL_PRUNING_HPP
#define CHAOSEVAL_PRUNING_HPP

#include <algorithm>
#include <cassert>
#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "chaoseval/data_model.hpp"
#include "chaoseval/error.hpp"

namespace chaoseval {

/// Keeps the `capacity` best elements of a stream, where "best" is given by
/// the strict order `Outranks`. Internally a heap whose front is the weakest
/// retained element, so the eviction candidate is available in O(1) and each
/// push costs O(log capacity).
template <typename T, typename Outranks = std::greater<T>>
class BoundedTopK {
public:
  explicit BoundedTopK(std::size_t capacity, Outranks outranks = {})
      : capacity_(capacity), outranks_(std::move(outranks)) {
    entries_.reserve(capacity_);
  }

  /// Offers `value`. Returns true when it is retained.
  bool push(T value) {
    if (capacity_ == 0) return false;
    if (entries_.size() < capacity_) {
      entries_.push_back(std::move(value));
      std::push_heap(entries_.begin(), entries_.end(), outranks_);
      return true;
    }
    if (!outranks_(value, entries_.front())) return false;
    std::pop_heap(entries_.begin(), entries_.end(), outranks_);
    entries_.back() = std::move(value);
    std::push_heap(entries_.begin(), entries_.end(), outranks_);
    return true;
  }

  /// Weakest retained element. Requires !empty().
  const T& least() const {
    assert(!entries_.empty());
    return entries_.front();
  }

  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return entries_.empty(); }
  bool full() const { return entries_.size() == capacity_; }

  /// Retained elements, best first.
  std::vector<T> sorted() const {
    std::vector<T> out = entries_;
    std::sort(out.begin(), out.end(), outranks_);
    return out;
  }

  /// Retained elements in heap order.
  const std::vector<T>& entries() const { return entries_; }

private:
  std::size_t capacity_;
  Outranks outranks_;
  std::vector<T> entries_;
};

enum class PruneMode { BoxLevel, RowLevel };

inline std::string_view to_string(PruneMode mode) {
  return mode == PruneMode::BoxLevel ? "box" : "row";
}

inline PruneMode parse_prune_mode(std::string_view text) {
  if (text == "box") return PruneMode::BoxLevel;
  if (text == "row") return PruneMode::RowLevel;
  throw UsageError("unknown prune mode '" + std::string(text) + "' (expected box|row)");
}

/// A pruning unit within one frame. `rows` index into the frame's records.
struct Anchor {
  BoundingBox box;
  double score = 0.0;
  std::size_t tie = 0;
  std::vector<std::size_t> rows;
};

/// (score desc, tie asc).
struct AnchorOutranks {
  bool operator()(const Anchor& a, const Anchor& b) const {
    if (a.score != b.score) return a.score > b.score;
    return a.tie < b.tie;
  }
};

using BoundedConfidenceHeap = BoundedTopK<Anchor, AnchorOutranks>;

/// Anchors of a frame in first-appearance order. In box mode rows sharing
/// bit-identical coordinates form one anchor scored by its best row and
/// tied by its earliest row; in row mode every row is an anchor.
inline std::vector<Anchor> build_anchors(const Frame<Detection>& frame, PruneMode mode) {
  std::vector<Anchor> anchors;
  const auto& recs = frame.records;
  if (mode == PruneMode::RowLevel) {
    anchors.reserve(recs.size());
    for (std::size_t i = 0; i < recs.size(); ++i) {
      anchors.push_back(Anchor{recs[i].box, recs[i].score, recs[i].row, {i}});
    }
    return anchors;
  }
  std::map<BoundingBox, std::size_t> by_box;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    auto [it, inserted] = by_box.emplace(recs[i].box, anchors.size());
    if (inserted) {
      anchors.push_back(Anchor{recs[i].box, recs[i].score, recs[i].row, {i}});
    } else {
      auto& a = anchors[it->second];
      a.score = std::max(a.score, recs[i].score);
      a.tie = std::min(a.tie, recs[i].row);
      a.rows.push_back(i);
    }
  }
  return anchors;
}

/// Retains, per frame, the rows of the `capacity` highest-confidence anchors.
inline DetectionStore prune(const DetectionStore& detections, std::size_t capacity, PruneMode mode) {
  if (capacity == 0) throw UsageError("capacity must be >= 1 (0 would drop all anchors)");
  std::vector<Detection> kept;
  kept.reserve(detections.size());
  std::vector<std::size_t> survivors;
  for (const auto& frame : detections.frames()) {
    auto anchors = build_anchors(frame, mode);
    if (anchors.size() <= capacity) {
      kept.insert(kept.end(), frame.records.begin(), frame.records.end());
      continue;
    }
    BoundedConfidenceHeap heap(capacity);
    for (auto& a : anchors) heap.push(std::move(a));
    survivors.clear();
    for (const auto& a : heap.entries()) survivors.insert(survivors.end(), a.rows.begin(), a.rows.end());
    std::sort(survivors.begin(), survivors.end());
    for (auto i : survivors) kept.push_back(frame.records[i]);
  }
  return DetectionStore(std::move(kept));
}

} // namespace chaoseval

#endif // CHAOSEVAL_PRUNING_HPP
