#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "chaoseval/metrics.hpp"
#include "chaoseval/synth.hpp"
#include "oracles.hpp"

using namespace chaoseval;

namespace {

GroundTruth gt(std::int64_t ts, BoundingBox box, int action, std::size_t row = 0) {
  return GroundTruth{{"v", ts}, box, action, row};
}

Detection det(std::int64_t ts, BoundingBox box, int action, double score, std::size_t row) {
  return Detection{{"v", ts}, box, action, score, row};
}

std::vector<bool> flags_of(const MatchResult& m) {
  std::vector<bool> out;
  for (const auto& e : m.entries) out.push_back(e.true_positive);
  return out;
}

} // namespace

TEST(Iou, ClosedForms) {
  BoundingBox a{0.0, 0.0, 0.2, 0.2}, b{0.1, 0.1, 0.3, 0.3};
  EXPECT_EQ(iou(a, a), 1.0);
  EXPECT_EQ(iou(a, BoundingBox{0.5, 0.5, 0.7, 0.7}), 0.0);
  EXPECT_EQ(iou(a, BoundingBox{0.2, 0.0, 0.4, 0.2}), 0.0);  // touching edge
  // intersection 0.01, union 0.07
  EXPECT_NEAR(iou(a, b), 1.0 / 7.0, 1e-12);
}

TEST(Iou, SymmetricAndBounded) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 2000; ++i) {
    auto a = oracle::random_box(rng), b = oracle::random_box(rng);
    double v = iou(a, b);
    EXPECT_EQ(v, iou(b, a));
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
    EXPECT_NEAR(v, oracle::box_iou(a, b), 1e-15);
  }
}

TEST(MatchClass, PerfectMatch) {
  std::vector<GroundTruth> gts{gt(1, {0.1, 0.1, 0.5, 0.5}, 1)};
  std::vector<Detection> dets{det(1, {0.1, 0.1, 0.5, 0.5}, 1, 0.9, 0)};
  auto m = match_class(dets, std::span<const GroundTruth>(gts), 0.5);
  EXPECT_EQ(m.positives, 1u);
  ASSERT_EQ(m.entries.size(), 1u);
  EXPECT_TRUE(m.entries[0].true_positive);
  EXPECT_EQ(m.entries[0].gt, 0u);
}

TEST(MatchClass, OneGroundTruthOneMatch) {
  std::vector<GroundTruth> gts{gt(1, {0.1, 0.1, 0.5, 0.5}, 1)};
  std::vector<Detection> dets{det(1, {0.12, 0.1, 0.5, 0.5}, 1, 0.9, 1), det(1, {0.1, 0.1, 0.5, 0.52}, 1, 0.6, 0)};
  auto m = match_class(dets, std::span<const GroundTruth>(gts), 0.5);
  EXPECT_EQ(flags_of(m), (std::vector<bool>{true, false}));
  EXPECT_EQ(m.tp(), 1u);
  EXPECT_EQ(m.fp(), 1u);
}

TEST(MatchClass, OtherFramesNeverMatch) {
  std::vector<GroundTruth> gts{gt(1, {0.1, 0.1, 0.5, 0.5}, 1)};
  std::vector<Detection> dets{det(2, {0.1, 0.1, 0.5, 0.5}, 1, 0.9, 0)};
  auto m = match_class(dets, std::span<const GroundTruth>(gts), 0.5);
  EXPECT_FALSE(m.entries[0].true_positive);
}

TEST(MatchClass, PrefersHighestIouUnmatched) {
  std::vector<GroundTruth> gts{gt(1, {0.1, 0.1, 0.5, 0.5}, 1), gt(1, {0.15, 0.1, 0.55, 0.5}, 1)};
  std::vector<Detection> dets{det(1, {0.15, 0.1, 0.55, 0.5}, 1, 0.9, 0), det(1, {0.15, 0.1, 0.55, 0.5}, 1, 0.8, 1)};
  auto m = match_class(dets, std::span<const GroundTruth>(gts), 0.5);
  EXPECT_EQ(m.entries[0].gt, 1u);
  EXPECT_EQ(m.entries[1].gt, 0u);  // second-best, still above threshold
}

TEST(MatchClass, RandomTenFrameInstancesMatchReference) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 200; ++trial) {
    auto inst = oracle::random_eval_instance(rng, 10, 10, 5, 1);
    if (inst.gts.empty()) continue;
    auto ref = oracle::evaluate(inst.dets, inst.gts, 0.5);
    std::vector<Detection> ranked;
    for (const auto& d : inst.dets)
      if (d.action_id == 1) ranked.push_back(d);
    std::sort(ranked.begin(), ranked.end(), ranks_before);
    auto m = match_class(ranked, std::span<const GroundTruth>(inst.gts), 0.5);
    EXPECT_EQ(flags_of(m), ref.flags.at(1));
  }
}

TEST(AveragePrecision, ClosedForms) {
  EXPECT_EQ(average_precision({true}, 1), 1.0);
  // (1/2) * (1/1 + 2/3)
  EXPECT_NEAR(*average_precision({true, false, true}, 2), 5.0 / 6.0, 1e-12);
  EXPECT_EQ(average_precision({false, false}, 3), 0.0);
  EXPECT_EQ(average_precision({}, 4), 0.0);
  EXPECT_FALSE(average_precision({false}, 0).has_value());
}

TEST(MeanAveragePrecision, PerfectDetections) {
  auto data = generate(noiseless_scenario());
  auto report = mean_average_precision(data.detections, data.ground_truth);
  EXPECT_EQ(report.map, 1.0);
  for (const auto& c : report.per_class) EXPECT_EQ(c.ap, 1.0);
}

TEST(MeanAveragePrecision, ArithmeticMeanOverClasses) {
  // five ground-truth boxes per class; class c gets c perfect detections, so
  // AP(c) = c / 5 = {0.2, 0.4, 0.6}
  std::vector<GroundTruth> gts;
  std::vector<Detection> dets;
  for (int c = 1; c <= 3; ++c) {
    for (int i = 0; i < 5; ++i) {
      BoundingBox b{0.15 * i, 0.1, 0.15 * i + 0.1, 0.3};
      gts.push_back(gt(c, b, c, gts.size()));
      if (i < c) dets.push_back(det(c, b, c, 0.9, dets.size()));
    }
  }
  auto report = mean_average_precision(DetectionStore(dets), GroundTruthStore(gts));
  EXPECT_EQ(report.n_classes, 3u);
  EXPECT_NEAR(*report.ap_of(1), 0.2, 1e-15);
  EXPECT_NEAR(*report.ap_of(2), 0.4, 1e-15);
  EXPECT_NEAR(*report.ap_of(3), 0.6, 1e-15);
  EXPECT_NEAR(report.map, 0.4, 1e-15);
}

TEST(MeanAveragePrecision, EmptyGroundTruthRejected) {
  EXPECT_THROW(mean_average_precision(DetectionStore{}, GroundTruthStore{}), DataError);
}

TEST(MeanAveragePrecision, BadThresholdRejected) {
  GroundTruthStore gts({gt(1, {0.1, 0.1, 0.2, 0.2}, 1)});
  EXPECT_THROW(mean_average_precision(DetectionStore{}, gts, 0.0), UsageError);
  EXPECT_THROW(mean_average_precision(DetectionStore{}, gts, 1.5), UsageError);
}

TEST(MeanAveragePrecision, DetectionOnlyClassReportedNotAveraged) {
  GroundTruthStore gts({gt(1, {0.1, 0.1, 0.5, 0.5}, 1)});
  DetectionStore dets({det(1, {0.1, 0.1, 0.5, 0.5}, 1, 0.9, 0), det(1, {0.1, 0.1, 0.5, 0.5}, 8, 0.99, 1)});
  auto report = mean_average_precision(dets, gts);
  EXPECT_EQ(report.n_classes, 1u);
  EXPECT_EQ(report.map, 1.0);
  ASSERT_EQ(report.per_class.size(), 2u);
  EXPECT_EQ(report.per_class[1].action_id, 8);
  EXPECT_FALSE(report.per_class[1].ap.has_value());
  EXPECT_EQ(report.per_class[1].fp, 1u);
}

TEST(MeanAveragePrecision, ClassWithoutDetectionsScoresZero) {
  GroundTruthStore gts({gt(1, {0.1, 0.1, 0.5, 0.5}, 1), gt(1, {0.6, 0.1, 0.9, 0.5}, 2)});
  DetectionStore dets({det(1, {0.1, 0.1, 0.5, 0.5}, 1, 0.9, 0)});
  auto report = mean_average_precision(dets, gts);
  EXPECT_EQ(report.ap_of(2), 0.0);
  EXPECT_EQ(report.map, 0.5);
}

TEST(MeanAveragePrecision, Seed42ScenarioMatchesReference) {
  auto data = generate(reference_scenario(42));
  ASSERT_EQ(data.ground_truth.frames().size(), 20u);
  auto report = mean_average_precision(data.detections, data.ground_truth);
  auto ref = oracle::evaluate(data.detections.records(), data.ground_truth.records(), 0.5);
  EXPECT_EQ(report.n_classes, ref.ap.size());
  for (const auto& [c, ap] : ref.ap) EXPECT_NEAR(*report.ap_of(c), ap, 1e-9);
  EXPECT_NEAR(report.map, ref.map, 1e-9);
  EXPECT_GT(report.map, 0.0);
  EXPECT_LT(report.map, 1.0);
}

TEST(MetricsProperties, OracleEquivalenceAndBounds) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 300; ++trial) {
    auto inst = oracle::random_eval_instance(rng);
    if (inst.gts.empty()) continue;
    auto report = mean_average_precision(DetectionStore(inst.dets), GroundTruthStore(inst.gts));
    auto ref = oracle::evaluate(inst.dets, inst.gts, 0.5);
    double lo = 1.0, hi = 0.0;
    for (const auto& [c, ap] : ref.ap) {
      ASSERT_TRUE(report.ap_of(c).has_value());
      EXPECT_EQ(*report.ap_of(c), ap);
      EXPECT_GE(ap, 0.0);
      EXPECT_LE(ap, 1.0);
      lo = std::min(lo, ap);
      hi = std::max(hi, ap);
    }
    EXPECT_EQ(report.map, ref.map);
    EXPECT_GE(report.map, lo - 1e-15);
    EXPECT_LE(report.map, hi + 1e-15);
  }
}

TEST(MetricsProperties, ScoreScalingLeavesResultsBitIdentical) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    auto inst = oracle::random_eval_instance(rng);
    if (inst.gts.empty()) continue;
    GroundTruthStore gts(inst.gts);
    auto base = mean_average_precision(DetectionStore(inst.dets), gts);
    for (double lambda : {0.1, 3.7, 1e3}) {
      auto scaled = inst.dets;
      for (auto& d : scaled) d.score *= lambda;
      EXPECT_EQ(mean_average_precision(DetectionStore(scaled), gts), base);
    }
  }
}

TEST(MetricsProperties, AddedFalsePositiveNeverRaisesAp) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    auto inst = oracle::random_eval_instance(rng);
    if (inst.gts.empty()) continue;
    GroundTruthStore gts(inst.gts);
    auto base = mean_average_precision(DetectionStore(inst.dets), gts);
    int target = inst.gts[static_cast<std::size_t>(trial) % inst.gts.size()].action_id;
    // a frame with no ground truth, so the new row can only be a false positive
    auto more = inst.dets;
    more.push_back(Detection{{"no-gt", 0}, {0.1, 0.1, 0.4, 0.4}, target, unit(rng), more.size()});
    auto after = mean_average_precision(DetectionStore(more), gts);
    EXPECT_LE(*after.ap_of(target), *base.ap_of(target));
    EXPECT_LE(after.map, base.map);
  }
}

TEST(MetricsProperties, RemovingTrailingFalsePositiveKeepsAp) {
  std::mt19937_64 rng(12);
  int checked = 0;
  for (int trial = 0; trial < 300; ++trial) {
    auto inst = oracle::random_eval_instance(rng);
    if (inst.gts.empty()) continue;
    GroundTruthStore gts(inst.gts);
    DetectionStore store(inst.dets);
    auto base = mean_average_precision(store, gts);
    auto ref = oracle::evaluate(inst.dets, inst.gts, 0.5);
    for (const auto& [c, flags] : ref.flags) {
      if (flags.empty() || flags.back()) continue;
      // last-ranked detection of class c is an FP below every TP
      std::vector<Detection> cd;
      for (const auto& d : inst.dets)
        if (d.action_id == c) cd.push_back(d);
      std::sort(cd.begin(), cd.end(), ranks_before);
      auto drop = cd.back().row;
      std::vector<Detection> fewer;
      for (const auto& d : inst.dets)
        if (d.row != drop) fewer.push_back(d);
      auto after = mean_average_precision(DetectionStore(fewer), gts);
      EXPECT_EQ(after.ap_of(c), base.ap_of(c));
      ++checked;
    }
  }
  EXPECT_GT(checked, 50);
}
