#include "alzhinet/metrics.hpp"

#include "alzhinet/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace alzhinet::metrics {

std::int64_t ConfusionMatrix::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

std::int64_t ConfusionMatrix::trace() const {
  std::int64_t t = 0;
  for (int k = 0; k < num_classes; ++k) t += at(k, k);
  return t;
}

ConfusionMatrix confusion(std::span<const int> true_labels, std::span<const int> pred_labels,
                          int num_classes) {
  if (true_labels.size() != pred_labels.size())
    throw ShapeError("label vectors must have equal length");
  ConfusionMatrix cm(num_classes);
  for (std::size_t i = 0; i < true_labels.size(); ++i) {
    const int t = true_labels[i], p = pred_labels[i];
    if (t < 0 || t >= num_classes || p < 0 || p >= num_classes)
      throw IndexError("label outside [0, " + std::to_string(num_classes) + ")");
    ++cm.at(t, p);
  }
  return cm;
}

MetricsReport scalar_metrics(const ConfusionMatrix& cm) {
  const std::int64_t total = cm.total();
  if (total == 0) throw ParamError("confusion matrix is empty");
  const int k = cm.num_classes;

  MetricsReport rep;
  rep.confusion = cm;
  rep.accuracy = static_cast<double>(cm.trace()) / static_cast<double>(total);
  rep.per_class.resize(static_cast<std::size_t>(k));

  for (int c = 0; c < k; ++c) {
    std::int64_t tp = cm.at(c, c), fp = 0, fn = 0;
    for (int o = 0; o < k; ++o) {
      if (o == c) continue;
      fp += cm.at(o, c);
      fn += cm.at(c, o);
    }
    const std::int64_t tn = total - tp - fp - fn;
    auto& m = rep.per_class[static_cast<std::size_t>(c)];
    auto ratio = [&m](std::int64_t num, std::int64_t den) {
      if (den == 0) {
        m.degenerate = true;
        return 0.0;
      }
      return static_cast<double>(num) / static_cast<double>(den);
    };
    m.precision = ratio(tp, tp + fp);
    m.recall = ratio(tp, tp + fn);
    m.specificity = ratio(tn, tn + fp);
    if (m.precision + m.recall > 0.0) {
      m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    } else {
      m.f1 = 0.0;
      m.degenerate = true;
    }
    rep.macro_precision += m.precision;
    rep.macro_recall += m.recall;
    rep.macro_f1 += m.f1;
    rep.macro_specificity += m.specificity;
  }
  rep.macro_precision /= k;
  rep.macro_recall /= k;
  rep.macro_f1 /= k;
  rep.macro_specificity /= k;
  return rep;
}

double roc_auc(std::span<const double> scores, int num_classes, std::span<const int> true_labels,
               std::vector<PerClassMetrics>* per_class) {
  const std::size_t n = true_labels.size();
  if (scores.size() != n * static_cast<std::size_t>(num_classes))
    throw ShapeError("scores must be one row of length K per sample");
  if (per_class && per_class->size() < static_cast<std::size_t>(num_classes))
    per_class->resize(static_cast<std::size_t>(num_classes));

  double macro = 0.0;
  int included = 0;
  for (int c = 0; c < num_classes; ++c) {
    std::size_t positives = 0;
    for (int t : true_labels) positives += (t == c);
    const std::size_t negatives = n - positives;
    if (positives == 0 || negatives == 0) {
      if (per_class) (*per_class)[static_cast<std::size_t>(c)].auc_defined = false;
      continue;
    }

    // Rank statistic with average ranks for ties.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    auto score_of = [&](std::size_t i) { return scores[i * static_cast<std::size_t>(num_classes) +
                                                       static_cast<std::size_t>(c)]; };
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return score_of(a) < score_of(b); });
    double pos_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j + 1 < n && score_of(order[j + 1]) == score_of(order[i])) ++j;
      const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;  // 1-based
      for (std::size_t t = i; t <= j; ++t)
        if (true_labels[order[t]] == c) pos_rank_sum += avg_rank;
      i = j + 1;
    }
    const double p = static_cast<double>(positives), q = static_cast<double>(negatives);
    const double auc = (pos_rank_sum - p * (p + 1.0) / 2.0) / (p * q);
    if (per_class) {
      (*per_class)[static_cast<std::size_t>(c)].auc = auc;
      (*per_class)[static_cast<std::size_t>(c)].auc_defined = true;
    }
    macro += auc;
    ++included;
  }
  if (included == 0) throw ParamError("AUC undefined: labels contain a single class");
  return macro / included;
}

MetricsReport report(std::span<const int> true_labels, std::span<const int> pred_labels,
                     int num_classes, std::span<const double> scores,
                     std::span<const std::string> class_names) {
  MetricsReport rep = scalar_metrics(confusion(true_labels, pred_labels, num_classes));
  rep.class_names.assign(class_names.begin(), class_names.end());
  if (!scores.empty()) {
    rep.macro_auc = roc_auc(scores, num_classes, true_labels, &rep.per_class);
    rep.auc_available = true;
  }
  return rep;
}

std::string to_json(const MetricsReport& rep) {
  nlohmann::ordered_json j;
  j["averaging"] = "macro (unweighted one-vs-rest)";
  j["accuracy"] = rep.accuracy;
  j["macro"] = {{"precision", rep.macro_precision},
                {"recall", rep.macro_recall},
                {"f1", rep.macro_f1},
                {"specificity", rep.macro_specificity}};
  if (rep.auc_available) j["macro"]["auc"] = rep.macro_auc;
  auto& pc = j["per_class"] = nlohmann::ordered_json::array();
  for (std::size_t c = 0; c < rep.per_class.size(); ++c) {
    const auto& m = rep.per_class[c];
    nlohmann::ordered_json row = {{"class", c < rep.class_names.size() ? rep.class_names[c]
                                                                       : std::to_string(c)},
                                  {"precision", m.precision},
                                  {"recall", m.recall},
                                  {"f1", m.f1},
                                  {"specificity", m.specificity},
                                  {"degenerate", m.degenerate}};
    if (m.auc_defined) row["auc"] = m.auc;
    pc.push_back(std::move(row));
  }
  auto& cmj = j["confusion"] = nlohmann::ordered_json::array();
  for (int t = 0; t < rep.confusion.num_classes; ++t) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (int p = 0; p < rep.confusion.num_classes; ++p) row.push_back(rep.confusion.at(t, p));
    cmj.push_back(std::move(row));
  }
  return j.dump(2) + "\n";
}

namespace {
std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * v);
  return buf;
}
}  // namespace

std::string to_csv(const MetricsReport& rep, const std::string& experiment) {
  std::string out =
      "# averaging: macro (unweighted one-vs-rest); values in percent\n"
      "experiment,class,accuracy,precision,recall,f1,specificity,auc,degenerate\n";
  for (std::size_t c = 0; c < rep.per_class.size(); ++c) {
    const auto& m = rep.per_class[c];
    out += experiment + ',' +
           (c < rep.class_names.size() ? rep.class_names[c] : std::to_string(c)) + ",," +
           pct(m.precision) + ',' + pct(m.recall) + ',' + pct(m.f1) + ',' + pct(m.specificity) +
           ',' + (m.auc_defined ? pct(m.auc) : std::string()) + ',' +
           (m.degenerate ? "1" : "0") + '\n';
  }
  out += experiment + ",macro," + pct(rep.accuracy) + ',' + pct(rep.macro_precision) + ',' +
         pct(rep.macro_recall) + ',' + pct(rep.macro_f1) + ',' + pct(rep.macro_specificity) + ',' +
         (rep.auc_available ? pct(rep.macro_auc) : std::string()) + ",0\n";
  return out;
}

std::string confusion_csv(const ConfusionMatrix& cm, std::span<const std::string> class_names) {
  auto name = [&](int c) {
    return static_cast<std::size_t>(c) < class_names.size() ? class_names[static_cast<std::size_t>(c)]
                                                            : std::to_string(c);
  };
  std::string out = "true\\pred";
  for (int p = 0; p < cm.num_classes; ++p) out += ',' + name(p);
  out += '\n';
  for (int t = 0; t < cm.num_classes; ++t) {
    out += name(t);
    for (int p = 0; p < cm.num_classes; ++p) out += ',' + std::to_string(cm.at(t, p));
    out += '\n';
  }
  return out;
}

}  // namespace alzhinet::metrics
