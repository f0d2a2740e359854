#include "alzhinet/robustness.hpp"

#include "alzhinet/augment.hpp"
#include "alzhinet/errors.hpp"
#include "alzhinet/parallel.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>

namespace alzhinet::robust {

namespace {

constexpr const char* kFamilyNames[] = {
    "gaussian_noise", "brightness", "contrast", "salt_pepper", "color_jitter", "occlusion",
};

void check_level(Family family, double level) {
  switch (family) {
    case Family::gaussian_noise:
      if (level < 0.0) throw ParamError("gaussian_noise level must be >= 0");
      break;
    case Family::brightness:
      if (level < -1.0 || level > 1.0) throw ParamError("brightness level must be in [-1,1]");
      break;
    case Family::contrast:
    case Family::salt_pepper:
    case Family::color_jitter:
      if (level < 0.0 || level > 1.0) throw ParamError("level must be in [0,1]");
      break;
    case Family::occlusion:
      if (level <= 0.0 || level >= 1.0) throw ParamError("occlusion level must be in (0,1)");
      break;
  }
}

}  // namespace

const char* family_name(Family family) { return kFamilyNames[static_cast<int>(family)]; }

Family family_from_name(const std::string& name) {
  for (int i = 0; i < 6; ++i)
    if (name == kFamilyNames[i]) return static_cast<Family>(i);
  throw ConfigError("unknown perturbation family '" + name + "'");
}

void PerturbationGrid::validate() const {
  if (levels.empty()) throw ParamError("perturbation grid has no levels");
  for (std::size_t i = 0; i < levels.size(); ++i) {
    check_level(family, levels[i]);
    if (i > 0 && levels[i] <= levels[i - 1])
      throw ParamError("perturbation levels must be strictly increasing");
  }
}

std::vector<PerturbationGrid> default_grids() {
  return {
      {Family::gaussian_noise, {0.03, 0.06, 0.09, 0.12, 0.15}},
      {Family::brightness, {0.5, 0.6, 0.7, 0.8, 0.9, 1.0}},
      {Family::contrast, {0.5, 0.6, 0.7, 0.8, 0.9, 1.0}},
      {Family::salt_pepper, {0.01, 0.015, 0.02, 0.025}},
      {Family::color_jitter, {0.1, 0.2, 0.3, 0.4, 0.5}},
      {Family::occlusion, {0.04, 0.06, 0.08, 0.10, 0.12}},
  };
}

Image perturb(Family family, double level, const Image& img, std::uint64_t seed, int level_index,
              std::int64_t sample_index) {
  RngStream rng = aug::derive_stream(
      {seed, static_cast<std::int64_t>(family), sample_index, level_index});
  switch (family) {
    case Family::gaussian_noise: return aug::gaussian_noise(img, level, rng);
    case Family::brightness: return aug::brightness(img, level);
    case Family::contrast: return aug::contrast(img, level);
    case Family::salt_pepper: return aug::salt_pepper(img, level, rng);
    case Family::color_jitter: return aug::color_jitter(img, level, rng);
    case Family::occlusion: return aug::occlude(img, level, rng);
  }
  throw ParamError("unreachable perturbation family");
}

SweepReport sweep(const std::vector<NamedModel>& models, const data::Dataset& test_set,
                  const std::vector<PerturbationGrid>& grids, std::uint64_t seed) {
  if (test_set.size() == 0) throw DataError("sweep needs a non-empty test set");
  if (models.empty()) throw ParamError("sweep needs at least one model");
  for (const auto& grid : grids) grid.validate();

  SweepReport report;
  for (const auto& model : models)
    report.rows.push_back({"clean", 0.0, model.name, model.evaluate(test_set)});

  for (const auto& grid : grids) {
    for (std::size_t li = 0; li < grid.levels.size(); ++li) {
      const double level = grid.levels[li];
      data::Dataset corrupted = test_set;
      parallel_for(test_set.size(), [&](std::size_t i) {
        corrupted.images[i] = perturb(grid.family, level, test_set.images[i], seed,
                                      static_cast<int>(li), static_cast<std::int64_t>(i));
      });
      // The identical corrupted copy goes to every model.
      for (const auto& model : models)
        report.rows.push_back({family_name(grid.family), level, model.name,
                               model.evaluate(corrupted)});
    }
  }
  return report;
}

TrendSummary trend_summary(const SweepReport& report) {
  std::vector<std::string> families, model_names;
  for (const auto& row : report.rows) {
    if (row.family != "clean" &&
        std::find(families.begin(), families.end(), row.family) == families.end())
      families.push_back(row.family);
    if (std::find(model_names.begin(), model_names.end(), row.model) == model_names.end())
      model_names.push_back(row.model);
  }

  auto accuracies = [&](const std::string& family, const std::string& model) {
    std::vector<std::pair<double, double>> acc;  // (level, accuracy) in row order
    for (const auto& row : report.rows)
      if (row.family == family && row.model == model) acc.push_back({row.level, row.report.accuracy});
    return acc;
  };

  TrendSummary summary;
  for (const auto& family : families) {
    for (const auto& model : model_names) {
      const auto acc = accuracies(family, model);
      if (acc.size() < 2) continue;
      TrendEntry entry{family, model, 0, ""};
      bool strictly_decreasing = true, flat = true;
      for (std::size_t i = 0; i + 1 < acc.size(); ++i) {
        if (acc[i + 1].second <= acc[i].second && entry.decreasing_prefix == static_cast<int>(i))
          entry.decreasing_prefix = static_cast<int>(i) + 1;
        if (acc[i + 1].second >= acc[i].second) strictly_decreasing = false;
        if (acc[i + 1].second != acc[i].second) flat = false;
      }
      entry.verdict = flat ? "flat" : (strictly_decreasing ? "monotone" : "mixed");
      summary.entries.push_back(std::move(entry));
    }
    for (std::size_t a = 0; a < model_names.size(); ++a)
      for (std::size_t b = a + 1; b < model_names.size(); ++b) {
        const auto acc_a = accuracies(family, model_names[a]);
        const auto acc_b = accuracies(family, model_names[b]);
        for (std::size_t i = 0; i < std::min(acc_a.size(), acc_b.size()); ++i) {
          const double d = acc_a[i].second - acc_b[i].second;
          summary.pair_deltas.push_back({family, acc_a[i].first, model_names[a], model_names[b],
                                         d > 0.0 ? 1 : (d < 0.0 ? -1 : 0)});
        }
      }
  }
  return summary;
}

namespace {

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * v);
  return buf;
}

std::string level_str(double level) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", level);
  return buf;
}

}  // namespace

std::string sweep_csv(const SweepReport& report) {
  std::string out = "family,level,model,accuracy,precision,recall,f1,specificity,auc\n";
  for (const auto& row : report.rows) {
    const auto& m = row.report;
    out += row.family + ',' + level_str(row.level) + ',' + row.model + ',' + pct(m.accuracy) +
           ',' + pct(m.macro_precision) + ',' + pct(m.macro_recall) + ',' + pct(m.macro_f1) + ',' +
           pct(m.macro_specificity) + ',' + (m.auc_available ? pct(m.macro_auc) : std::string()) +
           '\n';
  }
  return out;
}

std::string sweep_json(const SweepReport& report) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& row : report.rows) {
    nlohmann::ordered_json detail = nlohmann::ordered_json::parse(metrics::to_json(row.report));
    j.push_back({{"family", row.family},
                 {"level", row.level},
                 {"model", row.model},
                 {"metrics", std::move(detail)}});
  }
  return j.dump(2) + "\n";
}

std::string trend_json(const TrendSummary& summary) {
  nlohmann::ordered_json j;
  auto& entries = j["trends"] = nlohmann::ordered_json::array();
  for (const auto& e : summary.entries)
    entries.push_back({{"family", e.family},
                       {"model", e.model},
                       {"decreasing_prefix", e.decreasing_prefix},
                       {"verdict", e.verdict}});
  auto& deltas = j["pair_deltas"] = nlohmann::ordered_json::array();
  for (const auto& d : summary.pair_deltas)
    deltas.push_back({{"family", d.family},
                      {"level", d.level},
                      {"model_a", d.model_a},
                      {"model_b", d.model_b},
                      {"sign", d.sign}});
  return j.dump(2) + "\n";
}

}  // namespace alzhinet::robust
