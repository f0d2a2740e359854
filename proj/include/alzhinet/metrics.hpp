#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace alzhinet::metrics {

/// K x K counts; rows are true classes, columns predictions.
struct ConfusionMatrix {
  int num_classes = 0;
  std::vector<std::int64_t> counts;  // row-major K x K

  explicit ConfusionMatrix(int k) : num_classes(k), counts(static_cast<std::size_t>(k) * k, 0) {}
  std::int64_t& at(int truth, int pred) {
    return counts[static_cast<std::size_t>(truth) * num_classes + pred];
  }
  std::int64_t at(int truth, int pred) const {
    return counts[static_cast<std::size_t>(truth) * num_classes + pred];
  }
  std::int64_t total() const;
  std::int64_t trace() const;
};

struct PerClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double specificity = 0.0;
  double auc = 0.0;
  bool degenerate = false;      // some one-vs-rest denominator was zero
  bool auc_defined = false;     // class had at least one positive and one negative
};

/// All scalar metrics are macro-averaged (unweighted over classes); the
/// serialized reports state this in their header.
struct MetricsReport {
  ConfusionMatrix confusion{0};
  double accuracy = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  double macro_specificity = 0.0;
  double macro_auc = 0.0;
  bool auc_available = false;
  std::vector<PerClassMetrics> per_class;
  std::vector<std::string> class_names;
};

ConfusionMatrix confusion(std::span<const int> true_labels, std::span<const int> pred_labels,
                          int num_classes);

/// Accuracy plus one-vs-rest precision/recall/F1/specificity per class and
/// their macro means. Zero denominators score 0 and set the degenerate flag.
MetricsReport scalar_metrics(const ConfusionMatrix& cm);

/// Macro one-vs-rest AUC from per-sample per-class scores (rank statistic
/// with tie averaging, equal to the trapezoidal threshold sweep). Classes
/// without both a positive and a negative are excluded from the macro mean;
/// if every class is excluded the labels are single-class and this throws.
double roc_auc(std::span<const double> scores, int num_classes, std::span<const int> true_labels,
               std::vector<PerClassMetrics>* per_class = nullptr);

/// Full report: confusion + scalars + AUC (when scores are provided).
MetricsReport report(std::span<const int> true_labels, std::span<const int> pred_labels,
                     int num_classes, std::span<const double> scores = {},
                     std::span<const std::string> class_names = {});

std::string to_json(const MetricsReport& report);
/// One CSV row per class plus a macro row; values are percent, 2 decimals.
std::string to_csv(const MetricsReport& report, const std::string& experiment);
std::string confusion_csv(const ConfusionMatrix& cm, std::span<const std::string> class_names);

}  // namespace alzhinet::metrics
