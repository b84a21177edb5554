#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "chaoseval/json.hpp"
#include "chaoseval/sweep.hpp"
#include "chaoseval/synth.hpp"
#include "oracles.hpp"

using namespace chaoseval;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "chaoseval_test_sweep";
  std::filesystem::create_directories(dir);
  return dir / name;
}

/// Serial sweep from the oracle pruner and the oracle evaluator.
std::vector<double> oracle_curve(const DetectionStore& dets, const GroundTruthStore& gts,
                                 const std::vector<std::size_t>& caps, PruneMode mode) {
  auto all = dets.records();
  auto truth = gts.records();
  std::vector<double> out;
  for (auto c : caps) {
    auto keep = oracle::prune_rows(all, c, mode);
    std::vector<Detection> kept;
    for (const auto& d : all)
      if (keep.count(d.row)) kept.push_back(d);
    out.push_back(oracle::evaluate(kept, truth, 0.5).map);
  }
  return out;
}

} // namespace

TEST(CapacityRange, ParseAndEnumerate) {
  auto r = CapacityRange::parse("50:2200:1");
  EXPECT_EQ(r, (CapacityRange{50, 2200, 1}));
  EXPECT_EQ(r.values().size(), 2151u);
  EXPECT_EQ(CapacityRange::parse("3:10:3").values(), (std::vector<std::size_t>{3, 6, 9}));
  EXPECT_EQ(CapacityRange::parse("5:5").values(), (std::vector<std::size_t>{5}));
  EXPECT_THROW(CapacityRange::parse("10:5:1"), UsageError);
  EXPECT_THROW(CapacityRange::parse("0:5:1"), UsageError);
  EXPECT_THROW(CapacityRange::parse("1:5:0"), UsageError);
  EXPECT_THROW(CapacityRange::parse("1-5"), UsageError);
  EXPECT_THROW(CapacityRange::parse("1:2:3:4"), UsageError);
}

TEST(Sweep, SingleCapacityEqualsDirectCall) {
  auto data = generate(reference_scenario(42));
  auto result = sweep(data.detections, data.ground_truth, {2, 2, 1});
  ASSERT_EQ(result.points.size(), 1u);
  auto direct = mean_average_precision(prune(data.detections, 2, PruneMode::BoxLevel), data.ground_truth);
  EXPECT_EQ(result.points[0].report, direct);
  EXPECT_EQ(result.best_capacity, 2u);
  EXPECT_EQ(result.best_map, direct.map);
}

TEST(Sweep, LargeCapacityEqualsUnpruned) {
  auto data = generate(reference_scenario(42));
  auto hi = data.detections.max_frame_size();
  auto result = sweep(data.detections, data.ground_truth, {1, hi, 1}, PruneMode::RowLevel);
  EXPECT_EQ(result.points.back().report, mean_average_precision(data.detections, data.ground_truth));
}

TEST(Sweep, AdversarialScenarioPeaksAtThree) {
  auto data = generate(adversarial_scenario(7));
  CapacityRange range{1, 20, 1};
  auto result = sweep(data.detections, data.ground_truth, range, PruneMode::BoxLevel, 0.5, 4);
  auto expected = oracle_curve(data.detections, data.ground_truth, range.values(), PruneMode::BoxLevel);

  ASSERT_EQ(result.points.size(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_NEAR(result.points[i].map(), expected[i], 1e-12);
  auto argmax = static_cast<std::size_t>(std::max_element(expected.begin(), expected.end()) - expected.begin());
  EXPECT_EQ(range.values()[argmax], 3u);
  EXPECT_EQ(result.best_capacity, 3u);
  EXPECT_LT(result.points.front().map(), result.best_map);
  EXPECT_LT(result.points.back().map(), result.best_map);
}

TEST(Sweep, WorkerCountDoesNotChangeResult) {
  auto data = generate(reference_scenario(42));
  CapacityRange range{1, 40, 1};
  auto serial = sweep(data.detections, data.ground_truth, range, PruneMode::BoxLevel, 0.5, 1);
  auto serial_json = to_json(serial, range, PruneMode::BoxLevel, 0.5).dump();
  for (std::size_t w : {2u, 3u, 8u, 64u}) {
    auto par = sweep(data.detections, data.ground_truth, range, PruneMode::BoxLevel, 0.5, w);
    EXPECT_EQ(par, serial);
    EXPECT_EQ(to_json(par, range, PruneMode::BoxLevel, 0.5).dump(), serial_json);
  }
}

TEST(Sweep, PointsAreIndependent) {
  auto data = generate(reference_scenario(42));
  Evaluator evaluator(data.ground_truth);
  std::vector<std::size_t> caps{1, 2, 3, 4, 5, 6};
  auto all = evaluate_capacities(data.detections, evaluator, caps, PruneMode::BoxLevel, 3);
  std::vector<std::size_t> fewer{1, 2, 4, 5, 6};
  auto some = evaluate_capacities(data.detections, evaluator, fewer, PruneMode::BoxLevel, 3);
  for (std::size_t i = 0; i < fewer.size(); ++i) {
    auto j = static_cast<std::size_t>(std::find(caps.begin(), caps.end(), fewer[i]) - caps.begin());
    EXPECT_EQ(some[i], all[j]);
  }
}

TEST(Sweep, BestIsConsistent) {
  auto data = generate(reference_scenario(5));
  auto result = sweep(data.detections, data.ground_truth, {1, 15, 1}, PruneMode::RowLevel, 0.5, 2);
  double max_map = 0.0;
  for (const auto& p : result.points) max_map = std::max(max_map, p.map());
  EXPECT_EQ(result.best_map, max_map);
  for (const auto& p : result.points) {
    if (p.capacity < result.best_capacity) {
      EXPECT_LT(p.map(), result.best_map);
    }
  }
  auto again = mean_average_precision(prune(data.detections, result.best_capacity, PruneMode::RowLevel),
                                      data.ground_truth);
  EXPECT_EQ(again.map, result.best_map);
}

TEST(Sweep, Errors) {
  auto data = generate(reference_scenario(42));
  EXPECT_THROW(sweep(data.detections, data.ground_truth, {5, 4, 1}), UsageError);
  EXPECT_THROW(sweep(data.detections, data.ground_truth, {1, 4, 1}, PruneMode::BoxLevel, 0.5, 0), UsageError);
  EXPECT_THROW(sweep(data.detections, GroundTruthStore{}, {1, 4, 1}), DataError);
}

TEST(SweepTwoPass, FindsExhaustiveOptimum) {
  auto data = generate(adversarial_scenario(7));
  CapacityRange range{1, 60, 1};
  auto full = sweep(data.detections, data.ground_truth, range);
  auto fast = sweep_two_pass(data.detections, data.ground_truth, range, 5);
  EXPECT_EQ(fast.best_capacity, full.best_capacity);
  EXPECT_EQ(fast.best_map, full.best_map);
  EXPECT_LT(fast.points.size(), full.points.size());
  EXPECT_TRUE(std::is_sorted(fast.points.begin(), fast.points.end(),
                             [](const SweepPoint& a, const SweepPoint& b) { return a.capacity < b.capacity; }));
  for (const auto& p : fast.points) EXPECT_EQ(p, *full.find(p.capacity));
  EXPECT_THROW(sweep_two_pass(data.detections, data.ground_truth, {1, 10, 2}, 1), UsageError);
}

TEST(EmitCurve, FormatDeterminismAndParseBack) {
  auto data = generate(adversarial_scenario(7));
  auto result = sweep(data.detections, data.ground_truth, {2, 4, 1});
  auto path = temp_path("curve.csv");
  emit_curve(result, path);
  std::string first = read_file(path);
  emit_curve(result, path);
  EXPECT_EQ(read_file(path), first);

  std::istringstream in(first);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "capacity,map,ap_std");
  std::size_t rows = 0, best_cap = 0;
  double best = -1.0;
  while (std::getline(in, line)) {
    ++rows;
    auto c1 = line.find(','), c2 = line.find(',', c1 + 1);
    std::size_t cap = std::stoul(line.substr(0, c1));
    double map = std::stod(line.substr(c1 + 1, c2 - c1 - 1));
    EXPECT_EQ(line.substr(c1 + 1, c2 - c1 - 1).size(), 8u);  // d.dddddd
    if (map > best) {
      best = map;
      best_cap = cap;
    }
  }
  EXPECT_EQ(rows, 3u);
  EXPECT_EQ(best_cap, result.best_capacity);
  EXPECT_THROW(emit_curve(SweepResult{}, path), UsageError);
  EXPECT_THROW(emit_curve(result, "/nonexistent-dir/curve.csv"), Error);
}

namespace {

EvalReport report_of(const std::vector<std::pair<int, double>>& aps) {
  EvalReport r;
  double sum = 0.0;
  for (auto [id, ap] : aps) {
    r.per_class.push_back(ClassReport{id, ap, 1, 0, 0});
    sum += ap;
  }
  r.n_classes = aps.size();
  r.map = sum / static_cast<double>(aps.size());
  return r;
}

} // namespace

TEST(CompareRuns, IdentityAndSubtraction) {
  auto a = report_of({{1, 0.5}, {2, 0.25}});
  for (const auto& row : compare_runs(a, a)) EXPECT_EQ(row.delta, 0.0);
  auto rows = compare_runs(report_of({{1, 0.5}}), report_of({{1, 0.3}}));
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_NEAR(rows[0].delta, 0.2, 1e-15);
  EXPECT_TRUE(rows[0].top);
}

TEST(CompareRuns, TopFiveMatchesIndependentSort) {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::pair<int, double>> a, b;
    for (int c = 1; c <= 10; ++c) {
      a.emplace_back(c, unit(rng));
      b.emplace_back(c, unit(rng));
    }
    auto rows = compare_runs(report_of(a), report_of(b));
    ASSERT_EQ(rows.size(), 10u);

    std::vector<std::pair<double, int>> by_mag;
    for (int i = 0; i < 10; ++i) by_mag.emplace_back(-std::fabs(a[i].second - b[i].second), a[i].first);
    std::sort(by_mag.begin(), by_mag.end());
    std::set<int> expected_top, got_top;
    for (int i = 0; i < 5; ++i) expected_top.insert(by_mag[i].second);
    for (const auto& r : rows)
      if (r.top) got_top.insert(r.action_id);
    EXPECT_EQ(got_top, expected_top);
  }
}

TEST(CompareRuns, SkipsUnscoredAndRejectsDisjoint) {
  auto a = report_of({{1, 0.5}, {2, 0.4}});
  auto b = report_of({{2, 0.1}, {3, 0.9}});
  auto rows = compare_runs(a, b);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].action_id, 2);
  EXPECT_THROW(compare_runs(report_of({{1, 0.5}}), report_of({{2, 0.5}})), DataError);
  EXPECT_EQ(deltas_csv(rows), "action_id,ap_a,ap_b,delta,top5\n2,0.400000,0.100000,0.300000,1\n");
}
