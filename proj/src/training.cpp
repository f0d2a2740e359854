#include "alzhinet/training.hpp"

#include "alzhinet/errors.hpp"
#include "alzhinet/ops.hpp"
#include "alzhinet/parallel.hpp"
#include "alzhinet/tape.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace alzhinet {

void TrainConfig::validate() const {
  if (lambda < 0.0) throw ParamError("lambda must be >= 0");
  if (lr <= 0.0) throw ParamError("learning rate must be > 0");
  if (batch_size < 1) throw ParamError("batch_size must be >= 1");
  if (max_epochs < 1) throw ParamError("max_epochs must be >= 1");
  if (patience < 0) throw ParamError("patience must be >= 0");
  if (val_fraction <= 0.0 || val_fraction >= 0.5)
    throw ParamError("val_fraction must be in (0, 0.5)");
  if (roster.empty()) throw ParamError("augmentation roster must be non-empty");
  if (alpha < 0.0 || beta < 0.0 || alpha + beta <= 0.0)
    throw ParamError("hybrid weights need alpha >= 0, beta >= 0, alpha + beta > 0");
  for (const auto& spec : roster) spec.validate();
}

LossBreakdown combined_loss(const HybridOutput& out, std::span<const int> targets, double lambda,
                            LossMode mode, MseStopGrad stop_grad) {
  if (lambda < 0.0) throw ParamError("lambda must be >= 0");
  auto classification = [&](const Tensor& logits) {
    return mode == LossMode::binary_ce ? binary_cross_entropy(logits, targets)
                                       : cross_entropy(logits, targets);
  };
  LossBreakdown b;
  Tensor l2d = classification(out.o2d);
  Tensor l3d = classification(out.o3d);
  Tensor consistency;
  switch (stop_grad) {
    case MseStopGrad::none: consistency = mse(out.s2d, out.s3d); break;
    case MseStopGrad::two_d: consistency = mse(out.s2d.detach(), out.s3d); break;
    case MseStopGrad::three_d: consistency = mse(out.s2d, out.s3d.detach()); break;
  }
  b.total = add(add(l2d, l3d), scale(consistency, lambda));
  b.l2d = l2d.item();
  b.l3d = l3d.item();
  b.mse_term = consistency.item();
  return b;
}

void adam_step(std::span<NamedTensor> params, AdamState& state, double lr) {
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m[i] = Array::Zero(params[i].tensor.size());
      state.v[i] = Array::Zero(params[i].tensor.size());
    }
  }
  if (state.m.size() != params.size()) throw ContractError("adam state does not match parameters");

  state.t += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& [name, tensor] = params[i];
    if (!tensor.has_grad()) continue;
    const Array& g = tensor.grad();
    if (!g.isFinite().all())
      throw NumericError("non-finite gradient for parameter '" + name + "'");
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g.square();
    tensor.array() -= lr * (state.m[i] / bc1) / ((state.v[i] / bc2).sqrt() + state.eps);
  }
}

namespace {

struct Scored {
  std::vector<int> predictions;
  std::vector<double> scores;  // row-major [n, K]
};

Scored score_logits(const Tensor& logits) {
  Scored out;
  const Index n = logits.dim(0), k = logits.dim(1);
  Tensor probs = softmax(logits);
  out.scores.assign(probs.data(), probs.data() + n * k);
  out.predictions.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    Index best = 0;
    for (Index c = 1; c < k; ++c)
      if (logits.at({i, c}) > logits.at({i, best})) best = c;
    out.predictions[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

std::vector<Volume> build_batch_volumes(const data::Dataset& ds,
                                        std::span<const std::size_t> indices,
                                        const std::vector<aug::AugSpec>& roster,
                                        std::uint64_t seed, std::int64_t epoch) {
  std::vector<Volume> volumes(indices.size());
  parallel_for(indices.size(), [&](std::size_t b) {
    const aug::SeedContext ctx{seed, epoch, static_cast<std::int64_t>(indices[b]), 0};
    volumes[b] = aug::build_volume(ds.images[indices[b]], roster, ctx);
  });
  return volumes;
}

template <typename ForwardFn>
metrics::MetricsReport evaluate_with(const data::Dataset& ds, int batch_size, ForwardFn&& forward) {
  if (ds.size() == 0) throw DataError("cannot evaluate an empty dataset");
  std::vector<int> predictions;
  std::vector<double> scores;
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), 0u);
  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
    const std::span<const std::size_t> chunk(order.data() + start, stop - start);
    Tensor logits = forward(chunk);
    Scored s = score_logits(logits);
    predictions.insert(predictions.end(), s.predictions.begin(), s.predictions.end());
    scores.insert(scores.end(), s.scores.begin(), s.scores.end());
  }
  return metrics::report(ds.labels, predictions, ds.num_classes(), scores, ds.class_names);
}

}  // namespace

metrics::MetricsReport evaluate(TwoDNet& net, const data::Dataset& ds, int batch_size) {
  return evaluate_with(ds, batch_size, [&](std::span<const std::size_t> chunk) {
    return net.forward(data::images_to_tensor(ds, chunk), false);
  });
}

metrics::MetricsReport evaluate(ThreeDNet& net, const data::Dataset& ds,
                                const std::vector<aug::AugSpec>& roster, std::uint64_t eval_seed,
                                int batch_size) {
  return evaluate_with(ds, batch_size, [&](std::span<const std::size_t> chunk) {
    auto volumes = build_batch_volumes(ds, chunk, roster, eval_seed, kEvalEpoch);
    return net.forward(data::volumes_to_tensor(volumes), false);
  });
}

metrics::MetricsReport evaluate(HybridModel& model, const data::Dataset& ds, EvalHead head,
                                const std::vector<aug::AugSpec>& roster, std::uint64_t eval_seed,
                                int batch_size) {
  if (head == EvalHead::two_d) return evaluate(model.two_d(), ds, batch_size);
  return evaluate_with(ds, batch_size, [&](std::span<const std::size_t> chunk) {
    auto volumes = build_batch_volumes(ds, chunk, roster, eval_seed, kEvalEpoch);
    HybridOutput out =
        model.forward(data::images_to_tensor(ds, chunk), data::volumes_to_tensor(volumes), false);
    return out.oh;
  });
}

FitReport fit(HybridModel& model, const data::Dataset& train_set, const TrainConfig& cfg) {
  cfg.validate();
  if (train_set.size() == 0) throw ConfigError("training set is empty");
  {
    const auto counts = train_set.class_counts();
    const auto present = std::count_if(counts.begin(), counts.end(),
                                       [](std::size_t c) { return c > 0; });
    if (present < 2) throw ConfigError("training set must contain at least two classes");
  }
  model.set_weights(cfg.alpha, cfg.beta);

  // Stratified validation slice.
  std::vector<std::size_t> val_idx, fit_idx;
  for (int c = 0; c < train_set.num_classes(); ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < train_set.size(); ++i)
      if (train_set.labels[i] == c) members.push_back(i);
    if (members.empty()) continue;
    RngStream rng(splitmix64_mix(cfg.seed) ^
                  splitmix64_mix(0xa11d8ull + static_cast<std::uint64_t>(c)));
    rng.shuffle(members);
    auto take = static_cast<std::size_t>(
        std::llround(cfg.val_fraction * static_cast<double>(members.size())));
    take = std::min(take, members.size() - 1);
    for (std::size_t i = 0; i < members.size(); ++i)
      (i < take ? val_idx : fit_idx).push_back(members[i]);
  }
  if (val_idx.empty() && fit_idx.size() > 1) {
    val_idx.push_back(fit_idx.back());
    fit_idx.pop_back();
  }
  std::sort(val_idx.begin(), val_idx.end());
  std::sort(fit_idx.begin(), fit_idx.end());

  data::Dataset val_set;
  val_set.class_names = train_set.class_names;
  for (std::size_t i : val_idx) {
    val_set.images.push_back(train_set.images[i]);
    val_set.labels.push_back(train_set.labels[i]);
  }

  std::vector<NamedTensor> trained_params;
  switch (cfg.mode) {
    case TrainMode::hybrid: trained_params = model.parameters(); break;
    case TrainMode::two_d_only: trained_params = model.two_d().parameters(); break;
    case TrainMode::three_d_only: trained_params = model.three_d().parameters(); break;
  }
  AdamState adam;
  double lr = cfg.lr;

  FitReport report;
  report.mode = cfg.mode;
  report.val_indices = val_idx;
  for (const auto& spec : cfg.roster) report.roster_names.push_back(spec.describe());

  auto full_state = model.state();
  std::vector<NamedTensor> best_state = snapshot(full_state);
  int best_epoch = 0;
  int last_improvement = 0;  // strict improvements drive stopping and lr drops
  double best_val = -1.0;
  int last_lr_drop = 0;

  Tape tape;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::vector<std::size_t> order = fit_idx;
    RngStream shuffle_rng(splitmix64_mix(cfg.seed) ^
                          splitmix64_mix(0x5f1e + static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    EpochRow row;
    row.lr = lr;
    int batches = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const std::span<const std::size_t> batch(order.data() + start, stop - start);
      std::vector<int> targets;
      for (std::size_t i : batch) targets.push_back(train_set.labels[i]);
      Tensor imgs = data::images_to_tensor(train_set, batch);

      tape.clear();
      TapeGuard guard(tape);
      if (cfg.mode == TrainMode::two_d_only) {
        Tensor logits = model.two_d().forward(imgs, true);
        Tensor loss = cfg.loss_mode == LossMode::binary_ce ? binary_cross_entropy(logits, targets)
                                                           : cross_entropy(logits, targets);
        row.l2d += loss.item();
        row.total += loss.item();
        backward(loss);
      } else if (cfg.mode == TrainMode::three_d_only) {
        auto volumes = build_batch_volumes(train_set, batch, cfg.roster, cfg.seed, epoch);
        Tensor logits = model.three_d().forward(data::volumes_to_tensor(volumes), true);
        Tensor loss = cfg.loss_mode == LossMode::binary_ce ? binary_cross_entropy(logits, targets)
                                                           : cross_entropy(logits, targets);
        row.l3d += loss.item();
        row.total += loss.item();
        backward(loss);
      } else {
        auto volumes = build_batch_volumes(train_set, batch, cfg.roster, cfg.seed, epoch);
        HybridOutput out = model.forward(imgs, data::volumes_to_tensor(volumes), true);
        LossBreakdown loss =
            combined_loss(out, targets, cfg.lambda, cfg.loss_mode, cfg.mse_stop_grad);
        row.l2d += loss.l2d;
        row.l3d += loss.l3d;
        row.mse_term += loss.mse_term;
        row.total += loss.total.item();
        backward(loss.total);
      }
      adam_step(trained_params, adam, lr);
      ++batches;
    }
    if (batches > 0) {
      row.l2d /= batches;
      row.l3d /= batches;
      row.mse_term /= batches;
      row.total /= batches;
    }

    metrics::MetricsReport val_report =
        cfg.mode == TrainMode::three_d_only
            ? evaluate(model.three_d(), val_set, cfg.roster, cfg.seed, cfg.batch_size)
            : evaluate(model.two_d(), val_set, 32);
    row.val_acc = val_report.accuracy;
    report.epochs.push_back(row);
    report.stopped_epoch = epoch;

    if (row.val_acc > best_val) {
      best_val = row.val_acc;
      best_epoch = epoch;
      last_improvement = epoch;
      best_state = snapshot(full_state);
    } else if (row.val_acc == best_val) {
      // Tie: keep the latest weights among equally good epochs.
      best_epoch = epoch;
      best_state = snapshot(full_state);
    } else if (cfg.lr_plateau &&
               epoch - std::max(last_improvement, last_lr_drop) >= cfg.lr_plateau_patience) {
      lr *= 0.5;
      last_lr_drop = epoch;
    }
    if (epoch - last_improvement >= cfg.patience) break;
  }

  restore(full_state, best_state);
  report.best_epoch = best_epoch;
  report.best_val_acc = best_val;
  return report;
}

std::string fit_report_json(const FitReport& report, const TrainConfig& cfg) {
  nlohmann::ordered_json j;
  j["config"] = {
      {"lambda", cfg.lambda},
      {"alpha", cfg.alpha},
      {"beta", cfg.beta},
      {"lr", cfg.lr},
      {"batch_size", cfg.batch_size},
      {"max_epochs", cfg.max_epochs},
      {"patience", cfg.patience},
      {"val_fraction", cfg.val_fraction},
      {"seed", cfg.seed},
      {"loss_mode", cfg.loss_mode == LossMode::binary_ce ? "binary_ce" : "multiclass_ce"},
      {"mode", report.mode == TrainMode::hybrid
                   ? "hybrid"
                   : (report.mode == TrainMode::two_d_only ? "2d_only" : "3d_only")},
      {"roster", report.roster_names},
  };
  j["best_epoch"] = report.best_epoch;
  j["stopped_epoch"] = report.stopped_epoch;
  j["best_val_acc"] = report.best_val_acc;
  j["val_indices"] = report.val_indices;
  auto& rows = j["epochs"] = nlohmann::ordered_json::array();
  for (std::size_t e = 0; e < report.epochs.size(); ++e) {
    const auto& r = report.epochs[e];
    rows.push_back({{"epoch", e + 1},
                    {"l2d", r.l2d},
                    {"l3d", r.l3d},
                    {"mse", r.mse_term},
                    {"total", r.total},
                    {"val_acc", r.val_acc},
                    {"lr", r.lr}});
  }
  return j.dump(2) + "\n";
}

std::string fit_report_csv(const FitReport& report) {
  std::string out = "epoch,l2d,l3d,mse,total,val_acc\n";
  char buf[160];
  for (std::size_t e = 0; e < report.epochs.size(); ++e) {
    const auto& r = report.epochs[e];
    std::snprintf(buf, sizeof(buf), "%zu,%.12g,%.12g,%.12g,%.12g,%.12g\n", e + 1, r.l2d, r.l3d,
                  r.mse_term, r.total, r.val_acc);
    out += buf;
  }
  return out;
}

}  // namespace alzhinet
