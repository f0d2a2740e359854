#pragma once

#include "alzhinet/data.hpp"
#include "alzhinet/metrics.hpp"

#include <functional>
#include <string>
#include <vector>

namespace alzhinet::robust {

enum class Family {
  gaussian_noise,
  brightness,
  contrast,
  salt_pepper,
  color_jitter,
  occlusion,
};

const char* family_name(Family family);
Family family_from_name(const std::string& name);

struct PerturbationGrid {
  Family family;
  std::vector<double> levels;  // strictly increasing, inside the family's range

  void validate() const;
};

/// The six standard corruption grids.
std::vector<PerturbationGrid> default_grids();

/// Applies one corruption at one intensity with a stream derived from
/// (seed, family, level index, sample index).
Image perturb(Family family, double level, const Image& img, std::uint64_t seed, int level_index,
              std::int64_t sample_index);

/// A frozen model under test: name plus an eval-mode metrics callback.
struct NamedModel {
  std::string name;
  std::function<metrics::MetricsReport(const data::Dataset&)> evaluate;
};

struct SweepRow {
  std::string family;  // "clean" for the unperturbed baseline rows
  double level = 0.0;
  std::string model;
  metrics::MetricsReport report;
};

struct SweepReport {
  std::vector<SweepRow> rows;  // clean rows first, then grid order
};

/// Evaluates every model on byte-identical corrupted copies of the test set,
/// one corruption per grid point, plus the clean baseline. A pure function of
/// (models, test set, grids, seed).
SweepReport sweep(const std::vector<NamedModel>& models, const data::Dataset& test_set,
                  const std::vector<PerturbationGrid>& grids, std::uint64_t seed);

struct TrendEntry {
  std::string family;
  std::string model;
  int decreasing_prefix = 0;  // steps from level 0 while accuracy is non-increasing
  std::string verdict;        // "monotone" | "flat" | "mixed"
};

/// Sign of the per-level accuracy difference between two models.
struct PairDelta {
  std::string family;
  double level = 0.0;
  std::string model_a, model_b;
  int sign = 0;
};

struct TrendSummary {
  std::vector<TrendEntry> entries;
  std::vector<PairDelta> pair_deltas;
};

TrendSummary trend_summary(const SweepReport& report);

/// family,level,model,accuracy,precision,recall,f1,specificity,auc
/// (percent, two decimals).
std::string sweep_csv(const SweepReport& report);
std::string sweep_json(const SweepReport& report);
std::string trend_json(const TrendSummary& summary);

}  // namespace alzhinet::robust
