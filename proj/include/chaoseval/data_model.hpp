#ifndef CHAOSEVAL_DATA_MODEL_HPP
#define CHAOSEVAL_DATA_MODEL_HPP

#include <algorithm>
#include <charconv>
#include <cmath>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <tuple>
#include <vector>

#include "chaoseval/error.hpp"

namespace chaoseval {

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

/// Axis-aligned box in normalized frame coordinates.
struct BoundingBox {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }

  /// Describes the first violated invariant, or nullopt for a valid box.
  std::optional<std::string> violation() const {
    auto in_unit = [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; };
    if (!in_unit(x1)) return "x1 out of [0,1]";
    if (!in_unit(y1)) return "y1 out of [0,1]";
    if (!in_unit(x2)) return "x2 out of [0,1]";
    if (!in_unit(y2)) return "y2 out of [0,1]";
    if (!(x1 < x2)) return "x1 < x2 violated";
    if (!(y1 < y2)) return "y1 < y2 violated";
    if (!(area() > 0.0)) return "zero-area box";
    return std::nullopt;
  }
  bool valid() const { return !violation().has_value(); }

  friend auto operator<=>(const BoundingBox&, const BoundingBox&) = default;
};

/// A keyframe: one timestamp (integer seconds) of one video.
struct FrameKey {
  std::string video_id;
  std::int64_t timestamp = 0;

  friend auto operator<=>(const FrameKey&, const FrameKey&) = default;
};

/// One detector output row. `row` is the input row index; it is ordering
/// provenance (the tie key) rather than part of the record's value.
struct Detection {
  FrameKey key;
  BoundingBox box;
  int action_id = 1;
  double score = 0.0;
  std::size_t row = 0;

  friend bool operator==(const Detection& a, const Detection& b) {
    return a.key == b.key && a.box == b.box && a.action_id == b.action_id &&
           a.score == b.score;
  }
};

struct GroundTruth {
  FrameKey key;
  BoundingBox box;
  int action_id = 1;
  std::size_t row = 0;

  friend bool operator==(const GroundTruth& a, const GroundTruth& b) {
    return a.key == b.key && a.box == b.box && a.action_id == b.action_id;
  }
};

// ---------------------------------------------------------------------------
// Stores
// ---------------------------------------------------------------------------

template <typename Record>
struct Frame {
  FrameKey key;
  std::vector<Record> records;

  friend bool operator==(const Frame&, const Frame&) = default;
};

/// Immutable collection of records grouped by FrameKey. Frames are sorted by
/// (video_id, timestamp); records inside a frame by input row index.
template <typename Record>
class FrameStore {
public:
  using record_type = Record;
  using frame_type = Frame<Record>;

  FrameStore() = default;

  explicit FrameStore(std::vector<Record> records) : size_(records.size()) {
    std::stable_sort(records.begin(), records.end(), [](const Record& a, const Record& b) {
      return std::tie(a.key, a.row) < std::tie(b.key, b.row);
    });
    std::map<int, std::size_t> counts;
    for (auto& r : records) {
      if (frames_.empty() || frames_.back().key != r.key) {
        frames_.push_back(frame_type{r.key, {}});
      }
      ++counts[r.action_id];
      frames_.back().records.push_back(std::move(r));
    }
    for (const auto& [id, n] : counts) {
      classes_.push_back(id);
      class_counts_.push_back(n);
    }
  }

  std::span<const frame_type> frames() const { return frames_; }
  /// Sorted distinct action ids.
  const std::vector<int>& classes() const { return classes_; }
  std::size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }

  /// Number of rows carrying `action_id`.
  std::size_t count(int action_id) const {
    auto it = std::lower_bound(classes_.begin(), classes_.end(), action_id);
    if (it == classes_.end() || *it != action_id) return 0;
    return class_counts_[static_cast<std::size_t>(it - classes_.begin())];
  }

  /// Largest number of rows in any one frame.
  std::size_t max_frame_size() const {
    std::size_t best = 0;
    for (const auto& f : frames_) best = std::max(best, f.records.size());
    return best;
  }

  /// All records in iteration order.
  std::vector<Record> records() const {
    std::vector<Record> out;
    out.reserve(size_);
    for (const auto& f : frames_) out.insert(out.end(), f.records.begin(), f.records.end());
    return out;
  }

  friend bool operator==(const FrameStore& a, const FrameStore& b) {
    return a.frames_ == b.frames_;
  }

private:
  std::vector<frame_type> frames_;
  std::vector<int> classes_;
  std::vector<std::size_t> class_counts_;
  std::size_t size_ = 0;
};

using DetectionStore = FrameStore<Detection>;
using GroundTruthStore = FrameStore<GroundTruth>;

// ---------------------------------------------------------------------------
// AVA CSV dialect
//   video_id,timestamp,x1,y1,x2,y2,action_id[,score]
// ---------------------------------------------------------------------------

struct LoadOptions {
  /// Clamp out-of-range coordinates into [0,1] instead of failing.
  bool lenient = false;
  /// Ground truth only: accept and ignore columns after action_id.
  bool ignore_extra_columns = false;
  /// Receives one message per clamped value when lenient.
  std::vector<std::string>* warnings = nullptr;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    fields.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return fields;
}

class RowError {
public:
  RowError(std::string_view source, std::size_t line) : source_(source), line_(line) {}

  [[noreturn]] void fail(std::string_view field, std::string_view what) const {
    std::ostringstream os;
    os << source_ << ":" << line_ << ": field '" << field << "': " << what;
    throw DataError(os.str());
  }

  std::string where() const { return std::string(source_) + ":" + std::to_string(line_); }

private:
  std::string_view source_;
  std::size_t line_;
};

inline std::int64_t parse_int(std::string_view text, std::string_view field, const RowError& err) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
    err.fail(field, "expected an integer, got '" + std::string(text) + "'");
  }
  return v;
}

inline double parse_real(std::string_view text, std::string_view field, const RowError& err) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty() || !std::isfinite(v)) {
    err.fail(field, "expected a real number, got '" + std::string(text) + "'");
  }
  return v;
}

struct ParsedRow {
  FrameKey key;
  BoundingBox box;
  int action_id = 1;
  std::optional<double> score;
};

inline ParsedRow parse_row(const std::vector<std::string_view>& f, bool with_score,
                           const RowError& err, const LoadOptions& opts) {
  ParsedRow row;
  if (f[0].empty()) err.fail("video_id", "must be non-empty");
  row.key.video_id = std::string(f[0]);
  row.key.timestamp = parse_int(f[1], "timestamp", err);
  if (row.key.timestamp < 0) err.fail("timestamp", "must be >= 0");

  static constexpr const char* kCoordNames[4] = {"x1", "y1", "x2", "y2"};
  double c[4];
  for (int i = 0; i < 4; ++i) {
    c[i] = parse_real(f[2 + i], kCoordNames[i], err);
    if (c[i] < 0.0 || c[i] > 1.0) {
      if (!opts.lenient) err.fail(kCoordNames[i], "coordinate out of [0,1]");
      double clamped = std::clamp(c[i], 0.0, 1.0);
      if (opts.warnings) {
        opts.warnings->push_back(err.where() + ": clamped " + kCoordNames[i] + " " +
                                 std::string(f[2 + i]) + " to " + std::to_string(clamped));
      }
      c[i] = clamped;
    }
  }
  row.box = BoundingBox{c[0], c[1], c[2], c[3]};
  if (!(row.box.x1 < row.box.x2)) err.fail("x2", "x1 < x2 violated");
  if (!(row.box.y1 < row.box.y2)) err.fail("y2", "y1 < y2 violated");

  auto action = parse_int(f[6], "action_id", err);
  if (action < 1 || action > std::numeric_limits<int>::max()) err.fail("action_id", "must be >= 1");
  row.action_id = static_cast<int>(action);

  if (with_score) {
    double s = parse_real(f[7], "score", err);
    if (s < 0.0 || s > 1.0) err.fail("score", "score out of [0,1]");
    row.score = s;
  }
  return row;
}

/// Calls `on_row(fields, line_number)` for every non-blank line.
template <typename OnRow>
void for_each_row(std::istream& in, OnRow&& on_row) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    on_row(split_fields(line), line_no);
  }
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path + ": cannot open file");
  return in;
}

} // namespace detail

inline DetectionStore parse_detections(std::istream& in, std::string_view source,
                                       const LoadOptions& opts = {}) {
  std::vector<Detection> rows;
  detail::for_each_row(in, [&](const std::vector<std::string_view>& f, std::size_t line) {
    detail::RowError err(source, line);
    if (f.size() < 8) {
      err.fail("row", "wrong column count: expected 8, got " + std::to_string(f.size()));
    }
    auto p = detail::parse_row(f, true, err, opts);
    rows.push_back(Detection{std::move(p.key), p.box, p.action_id, *p.score, rows.size()});
  });
  return DetectionStore(std::move(rows));
}

inline GroundTruthStore parse_ground_truth(std::istream& in, std::string_view source,
                                           const LoadOptions& opts = {}) {
  std::vector<GroundTruth> rows;
  std::map<std::tuple<FrameKey, BoundingBox, int>, std::size_t> seen;
  detail::for_each_row(in, [&](const std::vector<std::string_view>& f, std::size_t line) {
    detail::RowError err(source, line);
    bool ok = f.size() == 7 || (opts.ignore_extra_columns && f.size() > 7);
    if (!ok) {
      err.fail("row", "wrong column count: expected 7, got " + std::to_string(f.size()) +
                          (f.size() > 7 ? " (pass ignore-extra-columns to drop trailing columns)" : ""));
    }
    auto p = detail::parse_row(f, false, err, opts);
    auto [it, inserted] = seen.emplace(std::make_tuple(p.key, p.box, p.action_id), line);
    if (!inserted) {
      throw DataError(std::string(source) + ":" + std::to_string(line) +
                      ": duplicate ground-truth row (first seen at line " +
                      std::to_string(it->second) + ")");
    }
    rows.push_back(GroundTruth{std::move(p.key), p.box, p.action_id, rows.size()});
  });
  return GroundTruthStore(std::move(rows));
}

inline DetectionStore load_detections(const std::string& path, const LoadOptions& opts = {}) {
  auto in = detail::open_input(path);
  return parse_detections(in, path, opts);
}

inline GroundTruthStore load_ground_truth(const std::string& path, const LoadOptions& opts = {}) {
  auto in = detail::open_input(path);
  return parse_ground_truth(in, path, opts);
}

// --- serialization ---------------------------------------------------------

/// Fixed six decimals with trailing zeros removed ("0.5", "1", "0.123457").
inline std::string format_coord(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  std::string s(buf);
  while (!s.empty() && s.back() == '0') s.pop_back();
  if (!s.empty() && s.back() == '.') s.pop_back();
  if (s == "-0") s = "0";
  return s;
}

/// Shortest text that parses back to exactly `v`.
inline std::string format_exact(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

namespace detail {
inline void write_prefix(std::ostream& os, const FrameKey& key, const BoundingBox& b, int action) {
  os << key.video_id << ',' << key.timestamp << ',' << format_coord(b.x1) << ','
     << format_coord(b.y1) << ',' << format_coord(b.x2) << ',' << format_coord(b.y2) << ','
     << action;
}
} // namespace detail

inline void write_csv(std::ostream& os, const DetectionStore& store) {
  for (const auto& frame : store.frames()) {
    for (const auto& d : frame.records) {
      detail::write_prefix(os, d.key, d.box, d.action_id);
      os << ',' << format_exact(d.score) << '\n';
    }
  }
}

inline void write_csv(std::ostream& os, const GroundTruthStore& store) {
  for (const auto& frame : store.frames()) {
    for (const auto& g : frame.records) {
      detail::write_prefix(os, g.key, g.box, g.action_id);
      os << '\n';
    }
  }
}

template <typename Record>
std::string to_csv(const FrameStore<Record>& store) {
  std::ostringstream os;
  write_csv(os, store);
  return os.str();
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Content checksum of a store's canonical CSV form.
template <typename Record>
std::uint64_t checksum(const FrameStore<Record>& store) {
  return fnv1a64(to_csv(store));
}

} // namespace chaoseval

#endif // CHAOSEVAL_DATA_MODEL_HPP
