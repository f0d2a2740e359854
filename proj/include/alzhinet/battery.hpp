#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace alzhinet {

struct BatteryCheck {
  std::string name;
  double max_rel_err = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

struct BatteryReport {
  std::vector<BatteryCheck> checks;
  bool all_pass = false;
};

/// Randomized gradient verification of every differentiable primitive
/// (`trials` random instances each, central differences) plus one end-to-end
/// check of the combined loss through a small hybrid model on a sampled
/// parameter subset. Deterministic for a fixed seed.
BatteryReport run_gradient_battery(int trials, double primitive_threshold,
                                   double end_to_end_threshold, std::uint64_t seed);

std::string battery_text(const BatteryReport& report);
std::string battery_json(const BatteryReport& report);

}  // namespace alzhinet
