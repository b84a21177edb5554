#ifndef CHAOSEVAL_FUSION_HPP
#define CHAOSEVAL_FUSION_HPP

// Toy-scale dual-stream feature fusion: ViT features are spatially aligned by
// a fixed 3D convolution and pooled over time, Slow/Fast pathway features are
// pooled over time, and the three maps are concatenated along channels in
// [ViT, Slow, Fast] order. Actor features are read out of the fused map
// under each anchor box.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "chaoseval/data_model.hpp"
#include "chaoseval/error.hpp"
#include "chaoseval/rng.hpp"

namespace chaoseval {

/// Dense C x T x H x W volume, row-major with W fastest.
class FeatureVolume {
public:
  FeatureVolume() = default;
  FeatureVolume(std::size_t c, std::size_t t, std::size_t h, std::size_t w, double fill = 0.0)
      : c_(c), t_(t), h_(h), w_(w), data_(c * t * h * w, fill) {
    if (c == 0 || t == 0 || h == 0 || w == 0) throw DataError("feature volume dims must be positive");
  }
  FeatureVolume(std::size_t c, std::size_t t, std::size_t h, std::size_t w, std::vector<double> data)
      : c_(c), t_(t), h_(h), w_(w), data_(std::move(data)) {
    if (c == 0 || t == 0 || h == 0 || w == 0) throw DataError("feature volume dims must be positive");
    if (data_.size() != c * t * h * w) {
      throw DataError("feature volume data length " + std::to_string(data_.size()) + " != C*T*H*W = " +
                      std::to_string(c * t * h * w));
    }
    for (double v : data_) {
      if (!std::isfinite(v)) throw DataError("feature volume contains a non-finite value");
    }
  }

  std::size_t channels() const { return c_; }
  std::size_t time() const { return t_; }
  std::size_t height() const { return h_; }
  std::size_t width() const { return w_; }

  std::size_t index(std::size_t c, std::size_t t, std::size_t h, std::size_t w) const {
    return ((c * t_ + t) * h_ + h) * w_ + w;
  }
  double& at(std::size_t c, std::size_t t, std::size_t h, std::size_t w) { return data_[index(c, t, h, w)]; }
  double at(std::size_t c, std::size_t t, std::size_t h, std::size_t w) const { return data_[index(c, t, h, w)]; }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  friend bool operator==(const FeatureVolume&, const FeatureVolume&) = default;

private:
  std::size_t c_ = 0, t_ = 0, h_ = 0, w_ = 0;
  std::vector<double> data_;
};

/// Dense C x H x W map.
class FusedMap {
public:
  FusedMap() = default;
  FusedMap(std::size_t c, std::size_t h, std::size_t w, double fill = 0.0)
      : c_(c), h_(h), w_(w), data_(c * h * w, fill) {
    if (c == 0 || h == 0 || w == 0) throw DataError("feature map dims must be positive");
  }

  std::size_t channels() const { return c_; }
  std::size_t height() const { return h_; }
  std::size_t width() const { return w_; }

  std::size_t index(std::size_t c, std::size_t h, std::size_t w) const { return (c * h_ + h) * w_ + w; }
  double& at(std::size_t c, std::size_t h, std::size_t w) { return data_[index(c, h, w)]; }
  double at(std::size_t c, std::size_t h, std::size_t w) const { return data_[index(c, h, w)]; }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  friend bool operator==(const FusedMap&, const FusedMap&) = default;

private:
  std::size_t c_ = 0, h_ = 0, w_ = 0;
  std::vector<double> data_;
};

struct Extent3 {
  std::size_t t = 1, h = 1, w = 1;
  friend bool operator==(const Extent3&, const Extent3&) = default;
};

/// Fixed-weight 3D convolution (cross-correlation, zero padding) that maps a
/// volume onto a target spatial size. Weights are laid out
/// [out_channel][in_channel][kt][kh][kw]. The output time extent follows the
/// usual formula floor((T + 2*pad.t - kernel.t) / stride.t) + 1.
struct SpatialMatcher {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  Extent3 kernel;
  Extent3 stride;
  Extent3 padding{0, 0, 0};
  std::size_t target_height = 1;
  std::size_t target_width = 1;
  std::vector<double> weights;

  std::size_t weight_index(std::size_t o, std::size_t i, std::size_t kt, std::size_t kh, std::size_t kw) const {
    return (((o * in_channels + i) * kernel.t + kt) * kernel.h + kh) * kernel.w + kw;
  }
  double weight(std::size_t o, std::size_t i, std::size_t kt, std::size_t kh, std::size_t kw) const {
    return weights[weight_index(o, i, kt, kh, kw)];
  }

  /// 1x1x1 channel-preserving identity.
  static SpatialMatcher identity(std::size_t channels, std::size_t height, std::size_t width) {
    SpatialMatcher m{channels, channels, {1, 1, 1}, {1, 1, 1}, {0, 0, 0}, height, width, {}};
    m.weights.assign(channels * channels, 0.0);
    for (std::size_t c = 0; c < channels; ++c) m.weights[m.weight_index(c, c, 0, 0, 0)] = 1.0;
    return m;
  }

  /// Per-channel box filter whose weights sum to one.
  static SpatialMatcher averaging(std::size_t channels, Extent3 kernel, Extent3 stride,
                                  std::size_t target_height, std::size_t target_width) {
    SpatialMatcher m{channels, channels, kernel, stride, {0, 0, 0}, target_height, target_width, {}};
    m.weights.assign(channels * channels * kernel.t * kernel.h * kernel.w, 0.0);
    double w = 1.0 / static_cast<double>(kernel.t * kernel.h * kernel.w);
    for (std::size_t c = 0; c < channels; ++c)
      for (std::size_t a = 0; a < kernel.t; ++a)
        for (std::size_t b = 0; b < kernel.h; ++b)
          for (std::size_t d = 0; d < kernel.w; ++d) m.weights[m.weight_index(c, c, a, b, d)] = w;
    return m;
  }

  /// Dense kernel with weights drawn from `seed`. When `normalized`, weights
  /// are positive and each output channel's weights sum to one; otherwise
  /// they are uniform in [-1, 1).
  static SpatialMatcher seeded(std::size_t in_channels, std::size_t out_channels, Extent3 kernel, Extent3 stride,
                               Extent3 padding, std::size_t target_height, std::size_t target_width,
                               std::uint64_t seed, bool normalized = true) {
    SpatialMatcher m{in_channels, out_channels, kernel, stride, padding, target_height, target_width, {}};
    std::size_t per_out = in_channels * kernel.t * kernel.h * kernel.w;
    m.weights.resize(out_channels * per_out);
    Rng rng(stream_seed(seed, {0x6b65726eULL}));
    for (auto& w : m.weights) w = normalized ? rng.uniform(0.05, 1.0) : rng.uniform(-1.0, 1.0);
    if (normalized) {
      for (std::size_t o = 0; o < out_channels; ++o) {
        double sum = 0.0;
        for (std::size_t k = 0; k < per_out; ++k) sum += m.weights[o * per_out + k];
        for (std::size_t k = 0; k < per_out; ++k) m.weights[o * per_out + k] /= sum;
      }
    }
    return m;
  }
};

namespace detail {

inline std::size_t conv_extent(std::size_t n, std::size_t k, std::size_t s, std::size_t p, const char* axis) {
  if (s == 0) throw DataError(std::string("spatial matcher: zero stride on axis ") + axis);
  if (n + 2 * p < k) {
    throw DataError(std::string("spatial matcher: axis ") + axis + " input " + std::to_string(n) + " + 2*pad " +
                    std::to_string(p) + " < kernel " + std::to_string(k));
  }
  return (n + 2 * p - k) / s + 1;
}

} // namespace detail

/// Output (T', H', W') of applying `m` to a T x H x W input.
inline Extent3 matched_extent(const SpatialMatcher& m, std::size_t t, std::size_t h, std::size_t w) {
  return {detail::conv_extent(t, m.kernel.t, m.stride.t, m.padding.t, "T"),
          detail::conv_extent(h, m.kernel.h, m.stride.h, m.padding.h, "H"),
          detail::conv_extent(w, m.kernel.w, m.stride.w, m.padding.w, "W")};
}

inline FeatureVolume spatial_match(const FeatureVolume& v, const SpatialMatcher& m) {
  if (v.channels() != m.in_channels) {
    throw DataError("spatial matcher expects " + std::to_string(m.in_channels) + " input channels, got " +
                    std::to_string(v.channels()));
  }
  if (m.weights.size() != m.out_channels * m.in_channels * m.kernel.t * m.kernel.h * m.kernel.w) {
    throw DataError("spatial matcher weight count does not match its kernel shape");
  }
  auto out_ext = matched_extent(m, v.time(), v.height(), v.width());
  if (out_ext.h != m.target_height || out_ext.w != m.target_width) {
    throw DataError("spatial matcher: (H + 2*" + std::to_string(m.padding.h) + " - " + std::to_string(m.kernel.h) +
                    ") / " + std::to_string(m.stride.h) + " + 1 = " + std::to_string(out_ext.h) + " with H = " +
                    std::to_string(v.height()) + ", (W + 2*" + std::to_string(m.padding.w) + " - " +
                    std::to_string(m.kernel.w) + ") / " + std::to_string(m.stride.w) + " + 1 = " +
                    std::to_string(out_ext.w) + " with W = " + std::to_string(v.width()) + "; target is " +
                    std::to_string(m.target_height) + "x" + std::to_string(m.target_width));
  }

  FeatureVolume out(m.out_channels, out_ext.t, out_ext.h, out_ext.w);
  auto in_range = [](std::size_t base, std::size_t k, std::size_t pad, std::size_t n, std::size_t& idx) {
    if (base + k < pad) return false;
    idx = base + k - pad;
    return idx < n;
  };
  for (std::size_t o = 0; o < m.out_channels; ++o)
    for (std::size_t t = 0; t < out_ext.t; ++t)
      for (std::size_t h = 0; h < out_ext.h; ++h)
        for (std::size_t w = 0; w < out_ext.w; ++w) {
          double acc = 0.0;
          for (std::size_t i = 0; i < m.in_channels; ++i)
            for (std::size_t a = 0; a < m.kernel.t; ++a) {
              std::size_t ti;
              if (!in_range(t * m.stride.t, a, m.padding.t, v.time(), ti)) continue;
              for (std::size_t b = 0; b < m.kernel.h; ++b) {
                std::size_t hi;
                if (!in_range(h * m.stride.h, b, m.padding.h, v.height(), hi)) continue;
                for (std::size_t d = 0; d < m.kernel.w; ++d) {
                  std::size_t wi;
                  if (!in_range(w * m.stride.w, d, m.padding.w, v.width(), wi)) continue;
                  acc += m.weight(o, i, a, b, d) * v.at(i, ti, hi, wi);
                }
              }
            }
          out.at(o, t, h, w) = acc;
        }
  return out;
}

/// Mean over the time axis.
inline FusedMap temporal_average_pool(const FeatureVolume& v) {
  FusedMap out(v.channels(), v.height(), v.width());
  const double inv_t = 1.0 / static_cast<double>(v.time());
  for (std::size_t c = 0; c < v.channels(); ++c)
    for (std::size_t h = 0; h < v.height(); ++h)
      for (std::size_t w = 0; w < v.width(); ++w) {
        double sum = 0.0;
        for (std::size_t t = 0; t < v.time(); ++t) sum += v.at(c, t, h, w);
        out.at(c, h, w) = sum * inv_t;
      }
  return out;
}

/// ViT stream: align spatially first, then pool over time.
inline FusedMap vit_stream(const FeatureVolume& v, const SpatialMatcher& m) {
  return temporal_average_pool(spatial_match(v, m));
}

/// Channel concatenation in [vit | slow | fast] order.
inline FusedMap fuse(const FusedMap& vit, const FusedMap& slow, const FusedMap& fast) {
  auto same = [&](const FusedMap& x) { return x.height() == slow.height() && x.width() == slow.width(); };
  if (!same(vit) || !same(fast)) {
    throw DataError("fusion needs equal spatial dims: vit " + std::to_string(vit.height()) + "x" +
                    std::to_string(vit.width()) + ", slow " + std::to_string(slow.height()) + "x" +
                    std::to_string(slow.width()) + ", fast " + std::to_string(fast.height()) + "x" +
                    std::to_string(fast.width()));
  }
  FusedMap out(vit.channels() + slow.channels() + fast.channels(), slow.height(), slow.width());
  auto dst = out.data().begin();
  for (const FusedMap* part : {&vit, &slow, &fast}) dst = std::copy(part->data().begin(), part->data().end(), dst);
  return out;
}

/// One C-vector per anchor: the mean over grid cells whose centres lie inside
/// the box (edges inclusive). A box that covers no centre uses the cell
/// containing its own centre.
inline std::vector<std::vector<double>> roi_actor_pool(const FusedMap& map, std::span<const BoundingBox> anchors) {
  const auto H = map.height(), W = map.width();
  std::vector<std::vector<double>> out;
  out.reserve(anchors.size());
  for (const auto& box : anchors) {
    std::vector<std::pair<std::size_t, std::size_t>> cells;
    for (std::size_t h = 0; h < H; ++h) {
      double cy = (static_cast<double>(h) + 0.5) / static_cast<double>(H);
      if (cy < box.y1 || cy > box.y2) continue;
      for (std::size_t w = 0; w < W; ++w) {
        double cx = (static_cast<double>(w) + 0.5) / static_cast<double>(W);
        if (cx >= box.x1 && cx <= box.x2) cells.emplace_back(h, w);
      }
    }
    if (cells.empty()) {
      auto nearest = [](double centre, std::size_t n) {
        auto i = static_cast<std::int64_t>(std::floor(centre * static_cast<double>(n)));
        return static_cast<std::size_t>(std::clamp<std::int64_t>(i, 0, static_cast<std::int64_t>(n) - 1));
      };
      cells.emplace_back(nearest(0.5 * (box.y1 + box.y2), H), nearest(0.5 * (box.x1 + box.x2), W));
    }
    std::vector<double> feature(map.channels(), 0.0);
    for (std::size_t c = 0; c < map.channels(); ++c) {
      double sum = 0.0;
      for (auto [h, w] : cells) sum += map.at(c, h, w);
      feature[c] = sum / static_cast<double>(cells.size());
    }
    out.push_back(std::move(feature));
  }
  return out;
}

// --- toy pipeline ----------------------------------------------------------

/// Stand-in stream shapes. The ViT stream enters at (vit_in_channels,
/// vit_t, vit_h, vit_w) and is aligned to (vit_channels, h, w); vit_h and
/// vit_w must be multiples of h and w.
struct ToyDims {
  std::size_t vit_in_channels = 12;
  std::size_t vit_channels = 6;
  std::size_t slow_channels = 8;
  std::size_t fast_channels = 2;
  std::size_t height = 4;
  std::size_t width = 4;
  std::size_t slow_t = 4;
  std::size_t fast_t = 16;
  std::size_t vit_t = 8;
  std::size_t vit_h = 8;
  std::size_t vit_w = 8;

  /// Parses comma-separated key=value overrides, e.g. "cv=4,cs=6,cf=2".
  /// Keys: cvin cv cs cf h w ts tf tv hv wv.
  static ToyDims parse(std::string_view text) {
    ToyDims d;
    std::size_t start = 0;
    while (start <= text.size() && !text.empty()) {
      auto pos = text.find(',', start);
      auto item = text.substr(start, pos == std::string_view::npos ? pos : pos - start);
      auto eq = item.find('=');
      if (eq == std::string_view::npos) throw UsageError("bad dims item '" + std::string(item) + "'");
      auto key = item.substr(0, eq);
      auto val = item.substr(eq + 1);
      std::size_t v = 0;
      auto [ptr, ec] = std::from_chars(val.data(), val.data() + val.size(), v);
      if (val.empty() || ec != std::errc{} || ptr != val.data() + val.size() || v == 0) {
        throw UsageError("bad dims value for '" + std::string(key) + "'");
      }
      if (key == "cvin") d.vit_in_channels = v;
      else if (key == "cv") d.vit_channels = v;
      else if (key == "cs") d.slow_channels = v;
      else if (key == "cf") d.fast_channels = v;
      else if (key == "h") d.height = v;
      else if (key == "w") d.width = v;
      else if (key == "ts") d.slow_t = v;
      else if (key == "tf") d.fast_t = v;
      else if (key == "tv") d.vit_t = v;
      else if (key == "hv") d.vit_h = v;
      else if (key == "wv") d.vit_w = v;
      else throw UsageError("unknown dims key '" + std::string(key) + "'");
      if (pos == std::string_view::npos) break;
      start = pos + 1;
    }
    if (d.vit_h % d.height != 0 || d.vit_w % d.width != 0) {
      throw UsageError("dims: vit spatial size " + std::to_string(d.vit_h) + "x" + std::to_string(d.vit_w) +
                       " is not a multiple of " + std::to_string(d.height) + "x" + std::to_string(d.width));
    }
    return d;
  }
};

/// Volume with entries uniform in [-1, 1) from its own seeded stream.
inline FeatureVolume random_volume(std::size_t c, std::size_t t, std::size_t h, std::size_t w, std::uint64_t seed,
                                   std::uint64_t stream = 0) {
  FeatureVolume v(c, t, h, w);
  Rng rng(stream_seed(seed, {stream}));
  for (auto& x : v.data()) x = rng.uniform(-1.0, 1.0);
  return v;
}

/// FNV-1a over the little-endian IEEE-754 bytes of `values`.
inline std::uint64_t checksum(std::span<const double> values) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : values) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

struct ChannelBlock {
  std::string name;
  std::size_t begin = 0;
  std::size_t end = 0;
  std::uint64_t checksum = 0;
};

struct FusionDemo {
  ToyDims dims;
  FusedMap fused;
  std::vector<ChannelBlock> blocks;
  std::vector<BoundingBox> anchors;
  std::vector<std::vector<double>> actor_features;
};

/// Runs the toy pipeline end to end with volumes and kernel drawn from `seed`.
inline FusionDemo run_fusion_demo(std::uint64_t seed, const ToyDims& dims,
                                  std::vector<BoundingBox> anchors = {{0.0, 0.0, 1.0, 1.0}, {0.25, 0.25, 0.75, 0.75}}) {
  auto vit_raw = random_volume(dims.vit_in_channels, dims.vit_t, dims.vit_h, dims.vit_w, seed, 1);
  auto slow_raw = random_volume(dims.slow_channels, dims.slow_t, dims.height, dims.width, seed, 2);
  auto fast_raw = random_volume(dims.fast_channels, dims.fast_t, dims.height, dims.width, seed, 3);

  Extent3 k{1, dims.vit_h / dims.height, dims.vit_w / dims.width};
  auto matcher = SpatialMatcher::seeded(dims.vit_in_channels, dims.vit_channels, k, k, {0, 0, 0}, dims.height,
                                        dims.width, seed);
  auto vit = vit_stream(vit_raw, matcher);
  auto slow = temporal_average_pool(slow_raw);
  auto fast = temporal_average_pool(fast_raw);

  FusionDemo demo;
  demo.dims = dims;
  demo.fused = fuse(vit, slow, fast);
  std::size_t at = 0;
  for (auto [name, part] : {std::pair<const char*, const FusedMap*>{"vit", &vit}, {"slow", &slow}, {"fast", &fast}}) {
    demo.blocks.push_back(ChannelBlock{name, at, at + part->channels(), checksum(part->data())});
    at += part->channels();
  }
  demo.actor_features = roi_actor_pool(demo.fused, anchors);
  demo.anchors = std::move(anchors);
  return demo;
}

} // namespace chaoseval

#endif // CHAOSEVAL_FUSION_HPP
