#pragma once

// Brute-force metric oracles for the tests: per-sample recounts and the
// exhaustive pair-counting AUC. Independent of src/metrics.cpp by design.

#include <cstdint>
#include <span>
#include <vector>

namespace oraclem {

struct Counts {
  std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
};

/// One-vs-rest counts for class c by walking every sample.
inline Counts recount(std::span<const int> truth, std::span<const int> pred, int c) {
  Counts k;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool is_pos = truth[i] == c;
    const bool said_pos = pred[i] == c;
    if (is_pos && said_pos) ++k.tp;
    if (!is_pos && said_pos) ++k.fp;
    if (is_pos && !said_pos) ++k.fn;
    if (!is_pos && !said_pos) ++k.tn;
  }
  return k;
}

inline double safe_ratio(std::int64_t num, std::int64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

/// AUC for class c by checking every (positive, negative) pair; ties count
/// one half.
inline double pair_auc(std::span<const double> scores, int num_classes,
                       std::span<const int> truth, int c) {
  const auto k = static_cast<std::size_t>(num_classes);
  double wins = 0.0;
  std::int64_t pairs = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] != c) continue;
    for (std::size_t j = 0; j < truth.size(); ++j) {
      if (truth[j] == c) continue;
      ++pairs;
      const double si = scores[i * k + static_cast<std::size_t>(c)];
      const double sj = scores[j * k + static_cast<std::size_t>(c)];
      if (si > sj)
        wins += 1.0;
      else if (si == sj)
        wins += 0.5;
    }
  }
  return wins / static_cast<double>(pairs);
}

}  // namespace oraclem
