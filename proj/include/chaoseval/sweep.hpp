#ifndef CHAOSEVAL_SWEEP_HPP
#define CHAOSEVAL_SWEEP_HPP

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <exception>
#include <filesystem>
#include <mutex>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "chaoseval/data_model.hpp"
#include "chaoseval/error.hpp"
#include "chaoseval/io.hpp"
#include "chaoseval/metrics.hpp"
#include "chaoseval/pruning.hpp"

namespace chaoseval {

/// Inclusive arithmetic range {lo, lo+step, ...} capped at hi.
struct CapacityRange {
  std::size_t lo = 50;
  std::size_t hi = 2200;
  std::size_t step = 1;

  void validate() const {
    if (lo < 1) throw UsageError("capacity range: lo must be >= 1");
    if (lo > hi) throw UsageError("capacity range is empty: lo " + std::to_string(lo) + " > hi " + std::to_string(hi));
    if (step < 1) throw UsageError("capacity range: step must be >= 1");
  }

  std::vector<std::size_t> values() const {
    validate();
    std::vector<std::size_t> out;
    for (std::size_t c = lo; c <= hi; c += step) {
      out.push_back(c);
      if (hi - c < step) break;
    }
    return out;
  }

  std::string to_string() const {
    return std::to_string(lo) + ":" + std::to_string(hi) + ":" + std::to_string(step);
  }

  /// Parses "lo:hi[:step]".
  static CapacityRange parse(std::string_view text) {
    std::vector<std::size_t> parts;
    std::size_t start = 0;
    while (true) {
      auto pos = text.find(':', start);
      auto piece = text.substr(start, pos == std::string_view::npos ? pos : pos - start);
      std::size_t v = 0;
      auto [ptr, ec] = std::from_chars(piece.data(), piece.data() + piece.size(), v);
      if (piece.empty() || ec != std::errc{} || ptr != piece.data() + piece.size()) {
        throw UsageError("bad capacity range '" + std::string(text) + "' (expected lo:hi[:step])");
      }
      parts.push_back(v);
      if (pos == std::string_view::npos) break;
      start = pos + 1;
    }
    if (parts.size() != 2 && parts.size() != 3) {
      throw UsageError("bad capacity range '" + std::string(text) + "' (expected lo:hi[:step])");
    }
    CapacityRange r{parts[0], parts[1], parts.size() == 3 ? parts[2] : 1};
    r.validate();
    return r;
  }

  friend bool operator==(const CapacityRange&, const CapacityRange&) = default;
};

struct SweepPoint {
  std::size_t capacity = 0;
  EvalReport report;

  double map() const { return report.map; }
  double ap_std() const { return report.ap_std(); }

  friend bool operator==(const SweepPoint&, const SweepPoint&) = default;
};

struct SweepResult {
  std::vector<SweepPoint> points;  ///< ascending capacity
  std::size_t best_capacity = 0;
  double best_map = 0.0;

  const SweepPoint* find(std::size_t capacity) const {
    auto it = std::lower_bound(points.begin(), points.end(), capacity,
                               [](const SweepPoint& p, std::size_t c) { return p.capacity < c; });
    return it != points.end() && it->capacity == capacity ? &*it : nullptr;
  }

  friend bool operator==(const SweepResult&, const SweepResult&) = default;
};

namespace detail {

inline void select_best(SweepResult& result) {
  // points ascend, so the first maximum is the smallest capacity attaining it
  bool first = true;
  for (const auto& p : result.points) {
    if (first || p.map() > result.best_map) {
      result.best_map = p.map();
      result.best_capacity = p.capacity;
      first = false;
    }
  }
}

} // namespace detail

/// Prunes and evaluates every capacity in `capacities`. Workers pull
/// capacities from a shared counter and write into fixed slots, so the
/// result does not depend on `workers` or on completion order.
inline std::vector<SweepPoint> evaluate_capacities(const DetectionStore& dets, const Evaluator& evaluator,
                                                   const std::vector<std::size_t>& capacities,
                                                   PruneMode mode, std::size_t workers) {
  if (workers == 0) throw UsageError("worker count must be >= 1");
  std::vector<SweepPoint> points(capacities.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;

  auto work = [&] {
    try {
      for (std::size_t i = next++; i < capacities.size(); i = next++) {
        points[i].capacity = capacities[i];
        points[i].report = evaluator.evaluate(prune(dets, capacities[i], mode));
      }
    } catch (...) {
      std::lock_guard lock(failure_mu);
      if (!failure) failure = std::current_exception();
      next = capacities.size();
    }
  };

  std::size_t n = std::min(workers, capacities.size());
  if (n <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(n);
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);
  return points;
}

/// Exhaustive sweep over `range`.
inline SweepResult sweep(const DetectionStore& dets, const GroundTruthStore& gts, const CapacityRange& range,
                         PruneMode mode = PruneMode::BoxLevel, double iou_threshold = kDefaultIouThreshold,
                         std::size_t workers = 1) {
  if (workers == 0) throw UsageError("worker count must be >= 1");
  auto capacities = range.values();
  Evaluator evaluator(gts, iou_threshold);
  SweepResult result;
  result.points = evaluate_capacities(dets, evaluator, capacities, mode, workers);
  detail::select_best(result);
  return result;
}

/// Coarse pass with stride `coarse_step`, then a pass at `range.step` over
/// the open neighbourhood (argmax - coarse_step, argmax + coarse_step).
/// Points from both passes are merged.
inline SweepResult sweep_two_pass(const DetectionStore& dets, const GroundTruthStore& gts,
                                  const CapacityRange& range, std::size_t coarse_step,
                                  PruneMode mode = PruneMode::BoxLevel,
                                  double iou_threshold = kDefaultIouThreshold, std::size_t workers = 1) {
  if (workers == 0) throw UsageError("worker count must be >= 1");
  if (coarse_step < range.step) throw UsageError("coarse step must be >= the fine step");
  range.validate();
  Evaluator evaluator(gts, iou_threshold);

  CapacityRange coarse{range.lo, range.hi, coarse_step};
  SweepResult coarse_result;
  coarse_result.points = evaluate_capacities(dets, evaluator, coarse.values(), mode, workers);
  detail::select_best(coarse_result);

  std::size_t center = coarse_result.best_capacity;
  std::size_t lo = center > range.lo + coarse_step - 1 ? center - coarse_step + 1 : range.lo;
  std::size_t hi = std::min(range.hi, center + coarse_step - 1);
  std::vector<std::size_t> fine;
  for (auto c : CapacityRange{range.lo, range.hi, range.step}.values()) {
    if (c >= lo && c <= hi && !coarse_result.find(c)) fine.push_back(c);
  }

  SweepResult result;
  result.points = std::move(coarse_result.points);
  auto fine_points = evaluate_capacities(dets, evaluator, fine, mode, workers);
  result.points.insert(result.points.end(), fine_points.begin(), fine_points.end());
  std::sort(result.points.begin(), result.points.end(),
            [](const SweepPoint& a, const SweepPoint& b) { return a.capacity < b.capacity; });
  detail::select_best(result);
  return result;
}

/// Plot-ready curve: header `capacity,map,ap_std`, six decimals.
inline std::string curve_csv(const SweepResult& result) {
  std::string out = "capacity,map,ap_std\n";
  for (const auto& p : result.points) {
    out += std::to_string(p.capacity) + "," + fixed6(p.map()) + "," + fixed6(p.ap_std()) + "\n";
  }
  return out;
}

inline void emit_curve(const SweepResult& result, const std::filesystem::path& path) {
  if (result.points.empty()) throw UsageError("cannot emit an empty sweep curve");
  write_file_atomic(path, curve_csv(result));
}

// --- run comparison --------------------------------------------------------

struct ApDelta {
  int action_id = 0;
  double ap_a = 0.0;
  double ap_b = 0.0;
  double delta = 0.0;  ///< ap_a - ap_b
  bool top = false;    ///< among the largest |delta|

  friend bool operator==(const ApDelta&, const ApDelta&) = default;
};

inline constexpr std::size_t kTopDeltas = 5;

/// Per-class AP differences over the classes scored in both reports, sorted
/// by |delta| descending (action_id ascending on ties); the first five are
/// flagged.
inline std::vector<ApDelta> compare_runs(const EvalReport& a, const EvalReport& b) {
  std::vector<ApDelta> rows;
  for (const auto& ca : a.per_class) {
    if (!ca.ap) continue;
    auto bp = b.ap_of(ca.action_id);
    if (!bp) continue;
    rows.push_back(ApDelta{ca.action_id, *ca.ap, *bp, *ca.ap - *bp, false});
  }
  if (rows.empty()) throw DataError("reports share no scored classes");
  std::sort(rows.begin(), rows.end(), [](const ApDelta& x, const ApDelta& y) {
    double ax = std::abs(x.delta), ay = std::abs(y.delta);
    if (ax != ay) return ax > ay;
    return x.action_id < y.action_id;
  });
  for (std::size_t i = 0; i < rows.size() && i < kTopDeltas; ++i) rows[i].top = true;
  return rows;
}

inline std::string deltas_csv(const std::vector<ApDelta>& rows) {
  std::string out = "action_id,ap_a,ap_b,delta,top5\n";
  for (const auto& r : rows) {
    out += std::to_string(r.action_id) + "," + fixed6(r.ap_a) + "," + fixed6(r.ap_b) + "," + fixed6(r.delta) +
           "," + (r.top ? "1" : "0") + "\n";
  }
  return out;
}

} // namespace chaoseval

#endif // CHAOSEVAL_SWEEP_HPP
