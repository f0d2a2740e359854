#include "alzhinet/errors.hpp"
#include "alzhinet/robustness.hpp"
#include "alzhinet/training.hpp"

#include <doctest.h>

#include <cmath>

using namespace alzhinet;
using namespace alzhinet::robust;

namespace {

data::Dataset fixture_set(int per_class = 8) {
  data::SyntheticSpec spec;
  spec.num_classes = 2;
  spec.per_class = per_class;
  spec.image_size = 16;
  spec.seed = 77;
  return data::prepared(data::generate_synthetic(spec), 16, 16);
}

NamedModel wrap(const std::string& name, TwoDNet& net) {
  return {name, [&net](const data::Dataset& ds) { return evaluate(net, ds); }};
}

}  // namespace

TEST_SUITE_BEGIN("robustness");

TEST_CASE("default grids are the fixed six-family set") {
  const auto grids = default_grids();
  REQUIRE(grids.size() == 6);
  CHECK(grids[0].family == Family::gaussian_noise);
  CHECK(grids[0].levels == std::vector<double>{0.03, 0.06, 0.09, 0.12, 0.15});
  CHECK(grids[1].family == Family::brightness);
  CHECK(grids[1].levels == std::vector<double>{0.5, 0.6, 0.7, 0.8, 0.9, 1.0});
  CHECK(grids[2].family == Family::contrast);
  CHECK(grids[2].levels.size() == 6);
  CHECK(grids[3].family == Family::salt_pepper);
  CHECK(grids[3].levels == std::vector<double>{0.01, 0.015, 0.02, 0.025});
  CHECK(grids[4].family == Family::color_jitter);
  CHECK(grids[4].levels == std::vector<double>{0.1, 0.2, 0.3, 0.4, 0.5});
  CHECK(grids[5].family == Family::occlusion);
  CHECK(grids[5].levels == std::vector<double>{0.04, 0.06, 0.08, 0.10, 0.12});
  for (const auto& grid : grids) grid.validate();
}

TEST_CASE("grid validation") {
  PerturbationGrid bad{Family::gaussian_noise, {0.1, 0.1}};
  CHECK_THROWS_AS(bad.validate(), ParamError);
  PerturbationGrid out_of_range{Family::occlusion, {0.5, 1.5}};
  CHECK_THROWS_AS(out_of_range.validate(), ParamError);
}

TEST_CASE("sweep") {
  data::Dataset test = fixture_set();
  TwoDNetConfig cfg;
  cfg.num_classes = 2;
  cfg.width_multiplier = 1.0 / 8.0;
  TwoDNet net_a(cfg, 301);
  TwoDNet net_b(cfg, 302);

  SUBCASE("clean rows equal a plain evaluation bitwise") {
    SweepReport report = sweep({wrap("a", net_a)}, test, {default_grids()[0]}, 9);
    REQUIRE(report.rows.size() == 1 + 5);
    const auto& clean = report.rows[0];
    CHECK(clean.family == "clean");
    const auto direct = evaluate(net_a, test);
    CHECK(clean.report.accuracy == direct.accuracy);
    CHECK(clean.report.macro_f1 == direct.macro_f1);
    CHECK(clean.report.macro_auc == direct.macro_auc);
    for (int t = 0; t < 2; ++t)
      for (int p = 0; p < 2; ++p)
        CHECK(clean.report.confusion.at(t, p) == direct.confusion.at(t, p));
  }
  SUBCASE("identical seeds reproduce the full report") {
    const std::vector<PerturbationGrid> grids = {{Family::salt_pepper, {0.01, 0.02}}};
    SweepReport r1 = sweep({wrap("a", net_a), wrap("b", net_b)}, test, grids, 5);
    SweepReport r2 = sweep({wrap("a", net_a), wrap("b", net_b)}, test, grids, 5);
    CHECK(sweep_csv(r1) == sweep_csv(r2));
    CHECK(sweep_json(r1) == sweep_json(r2));
  }
  SUBCASE("contrast at 1.0 forces the majority-output accuracy") {
    SweepReport report = sweep({wrap("a", net_a)}, test, {{Family::contrast, {1.0}}}, 3);
    const auto& row = report.rows.back();
    // All inputs identical: the confusion matrix has exactly one non-zero column.
    int nonzero_cols = 0;
    std::int64_t majority = 0;
    for (int p = 0; p < 2; ++p) {
      std::int64_t col = row.report.confusion.at(0, p) + row.report.confusion.at(1, p);
      if (col > 0) ++nonzero_cols;
      std::int64_t diag = row.report.confusion.at(p, p);
      majority = std::max(majority, diag);
    }
    CHECK(nonzero_cols == 1);
    const double majority_rate =
        static_cast<double>(majority) / static_cast<double>(test.size());
    CHECK(row.report.accuracy == majority_rate);
  }
  SUBCASE("every model sees the identical corrupted bytes") {
    // Two copies of one net must produce identical rows at every grid point.
    SweepReport report =
        sweep({wrap("x", net_a), wrap("y", net_a)}, test, {{Family::gaussian_noise, {0.1}}}, 21);
    REQUIRE(report.rows.size() == 4);
    CHECK(report.rows[2].report.accuracy == report.rows[3].report.accuracy);
    CHECK(report.rows[2].report.macro_auc == report.rows[3].report.macro_auc);
  }
  SUBCASE("empty test set is an error") {
    data::Dataset empty;
    empty.class_names = {"a", "b"};
    CHECK_THROWS_AS((void)sweep({wrap("a", net_a)}, empty, default_grids(), 1), DataError);
  }
}

TEST_CASE("trend_summary") {
  auto fabricate = [](std::vector<double> accs) {
    SweepReport report;
    for (std::size_t i = 0; i < accs.size(); ++i) {
      SweepRow row;
      row.family = "gaussian_noise";
      row.level = 0.03 * static_cast<double>(i + 1);
      row.model = "m";
      metrics::ConfusionMatrix cm(2);
      cm.at(0, 0) = static_cast<std::int64_t>(accs[i] * 100);
      cm.at(0, 1) = 100 - cm.at(0, 0);
      cm.at(1, 1) = 1;
      row.report = metrics::scalar_metrics(cm);
      row.report.accuracy = accs[i];  // pin the exact accuracy for the trend test
      report.rows.push_back(std::move(row));
    }
    return report;
  };

  SUBCASE("strictly decreasing is monotone") {
    TrendSummary s = trend_summary(fabricate({0.9, 0.8, 0.7, 0.5}));
    REQUIRE(s.entries.size() == 1);
    CHECK(s.entries[0].verdict == "monotone");
    CHECK(s.entries[0].decreasing_prefix == 3);
  }
  SUBCASE("flat stays flat") {
    TrendSummary s = trend_summary(fabricate({0.5, 0.5, 0.5}));
    REQUIRE(s.entries.size() == 1);
    CHECK(s.entries[0].verdict == "flat");
  }
  SUBCASE("a bump is mixed with a shorter prefix") {
    TrendSummary s = trend_summary(fabricate({0.9, 0.7, 0.8, 0.6}));
    REQUIRE(s.entries.size() == 1);
    CHECK(s.entries[0].verdict == "mixed");
    CHECK(s.entries[0].decreasing_prefix == 1);
  }
  SUBCASE("pair deltas record per-level signs") {
    SweepReport report;
    for (int model = 0; model < 2; ++model)
      for (int level = 0; level < 2; ++level) {
        SweepRow row;
        row.family = "brightness";
        row.level = 0.5 + 0.1 * level;
        row.model = model == 0 ? "a" : "b";
        metrics::ConfusionMatrix cm(2);
        cm.at(0, 0) = 1;
        cm.at(1, 1) = 1;
        row.report = metrics::scalar_metrics(cm);
        row.report.accuracy = model == 0 ? 0.9 : (level == 0 ? 0.8 : 0.9);
        report.rows.push_back(std::move(row));
      }
    TrendSummary s = trend_summary(report);
    REQUIRE(s.pair_deltas.size() == 2);
    CHECK(s.pair_deltas[0].sign == 1);
    CHECK(s.pair_deltas[1].sign == 0);
  }
}

TEST_CASE("sweep csv shape") {
  data::Dataset test = fixture_set(4);
  TwoDNetConfig cfg;
  cfg.num_classes = 2;
  cfg.width_multiplier = 1.0 / 8.0;
  TwoDNet net(cfg, 303);
  SweepReport report = sweep({wrap("m", net)}, test, {{Family::brightness, {0.5, 0.6}}}, 2);
  const std::string csv = sweep_csv(report);
  CHECK(csv.find("family,level,model,accuracy,precision,recall,f1,specificity,auc\n") == 0);
  CHECK(csv.find("clean,0,m,") != std::string::npos);
  CHECK(csv.find("brightness,0.5,m,") != std::string::npos);
  CHECK(csv.find("brightness,0.6,m,") != std::string::npos);
}

TEST_SUITE_END();
