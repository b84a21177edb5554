// Generates the adversarial scenario, sweeps capacities 1..12 and prints the
// curve. Keeping three anchors per frame should win.

#include <cstdio>

#include "chaoseval/sweep.hpp"
#include "chaoseval/synth.hpp"

int main() {
  auto data = chaoseval::generate(chaoseval::adversarial_scenario());
  auto result = chaoseval::sweep(data.detections, data.ground_truth, {1, 12, 1}, chaoseval::PruneMode::BoxLevel,
                                 chaoseval::kDefaultIouThreshold, 4);
  for (const auto& p : result.points) std::printf("%4zu  %.6f  %.6f\n", p.capacity, p.map(), p.ap_std());
  std::printf("best capacity %zu (map %.6f)\n", result.best_capacity, result.best_map);
}
