#pragma once

#include "alzhinet/data.hpp"
#include "alzhinet/metrics.hpp"
#include "alzhinet/model.hpp"

#include <span>
#include <string>
#include <vector>

namespace alzhinet {

enum class LossMode { multiclass_ce, binary_ce };
/// Which side of the consistency term is treated as a fixed target.
enum class MseStopGrad { none, two_d, three_d };
/// hybrid trains both nets under the combined loss; the *_only modes are the
/// ablation baselines (plain cross-entropy on one net).
enum class TrainMode { hybrid, two_d_only, three_d_only };
enum class EvalHead { two_d, hybrid };

struct TrainConfig {
  double lambda = 0.5;
  double alpha = 0.5;
  double beta = 0.5;
  double lr = 1e-4;
  int batch_size = 8;
  int max_epochs = 30;
  int patience = 5;  // epochs without validation improvement before stopping
  double val_fraction = 0.1;
  std::uint64_t seed = 0;
  std::vector<aug::AugSpec> roster = aug::default_roster();
  LossMode loss_mode = LossMode::multiclass_ce;
  MseStopGrad mse_stop_grad = MseStopGrad::none;
  TrainMode mode = TrainMode::hybrid;
  bool lr_plateau = true;  // halve the rate after lr_plateau_patience flat epochs
  int lr_plateau_patience = 2;

  void validate() const;
};

struct LossBreakdown {
  Tensor total;  // differentiable
  double l2d = 0.0;
  double l3d = 0.0;
  double mse_term = 0.0;  // unweighted consistency term
};

/// Total = L2d + L3d + lambda * MSE(S2d, S3d), with the component values
/// reported alongside the differentiable total.
LossBreakdown combined_loss(const HybridOutput& out, std::span<const int> targets, double lambda,
                            LossMode mode, MseStopGrad stop_grad = MseStopGrad::none);

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t t = 0;
  std::vector<Array> m, v;  // sized on first step
};

/// Bias-corrected Adam update in place, reading each parameter's gradient
/// slot. Parameters without a gradient are skipped; non-finite gradients
/// abort with the parameter's name.
void adam_step(std::span<NamedTensor> params, AdamState& state, double lr);

struct EpochRow {
  double l2d = 0.0, l3d = 0.0, mse_term = 0.0, total = 0.0;
  double val_acc = 0.0;
  double lr = 0.0;
};

struct FitReport {
  std::vector<EpochRow> epochs;
  int best_epoch = 0;     // 1-based
  int stopped_epoch = 0;  // 1-based
  double best_val_acc = 0.0;
  std::vector<std::size_t> val_indices;  // positions within the train set
  std::vector<std::string> roster_names;
  TrainMode mode = TrainMode::hybrid;
};

/// Epoch loop: seeded shuffle, per-epoch volume synthesis, combined loss,
/// Adam, validation on the held-out slice after every epoch, early stopping
/// on `patience`, best-epoch weights restored into the model before return.
FitReport fit(HybridModel& model, const data::Dataset& train_set, const TrainConfig& cfg);

std::string fit_report_json(const FitReport& report, const TrainConfig& cfg);
/// epoch,l2d,l3d,mse,total,val_acc
std::string fit_report_csv(const FitReport& report);

/// Eval-mode metrics of the 2D classifier over a dataset.
metrics::MetricsReport evaluate(TwoDNet& net, const data::Dataset& ds, int batch_size = 32);
metrics::MetricsReport evaluate(ThreeDNet& net, const data::Dataset& ds,
                                const std::vector<aug::AugSpec>& roster, std::uint64_t eval_seed,
                                int batch_size = 8);
/// head == two_d ignores the volumes; head == hybrid builds eval volumes with
/// a fixed eval seed and scores softmax(alpha*o2d + beta*o3d).
metrics::MetricsReport evaluate(HybridModel& model, const data::Dataset& ds, EvalHead head,
                                const std::vector<aug::AugSpec>& roster, std::uint64_t eval_seed,
                                int batch_size = 8);

/// Epoch tag reserved for evaluation-time volume synthesis.
inline constexpr std::int64_t kEvalEpoch = 1000000007;

}  // namespace alzhinet
