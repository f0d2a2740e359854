#include "alzhinet/errors.hpp"
#include "alzhinet/gradcheck.hpp"
#include "alzhinet/ops.hpp"
#include "alzhinet/tape.hpp"
#include "alzhinet/training.hpp"

#include "test_helpers.hpp"

#include <doctest.h>

#include <cmath>

using namespace alzhinet;
using testh::random_tensor;

namespace {

HybridOutput fake_output(const Tensor& o2d, const Tensor& o3d, double alpha = 0.5,
                         double beta = 0.5) {
  HybridOutput out;
  out.o2d = o2d;
  out.o3d = o3d;
  out.oh = add(scale(o2d, alpha), scale(o3d, beta));
  out.s2d = softmax(o2d);
  out.s3d = softmax(o3d);
  return out;
}

TwoDNetConfig small_2d(int classes) {
  TwoDNetConfig cfg;
  cfg.num_classes = classes;
  cfg.width_multiplier = 1.0 / 8.0;
  return cfg;
}

ThreeDNetConfig small_3d(int classes) {
  ThreeDNetConfig cfg;
  cfg.num_classes = classes;
  cfg.width_multiplier = 1.0 / 8.0;
  return cfg;
}

data::Dataset tiny_synthetic(int classes, int per_class, int size, std::uint64_t seed) {
  data::SyntheticSpec spec;
  spec.num_classes = classes;
  spec.per_class = per_class;
  spec.image_size = size;
  spec.seed = seed;
  return data::prepared(data::generate_synthetic(spec), size, size);
}

}  // namespace

TEST_SUITE_BEGIN("training");

TEST_CASE("combined_loss identities") {
  RngStream rng(71);
  Tensor z2 = random_tensor({4, 3}, rng, -2.0, 2.0);
  Tensor z3 = random_tensor({4, 3}, rng, -2.0, 2.0);
  const std::vector<int> targets = {0, 2, 1, 0};

  SUBCASE("lambda zero drops the consistency term") {
    LossBreakdown b = combined_loss(fake_output(z2, z3), targets, 0.0, LossMode::multiclass_ce);
    CHECK(std::abs(b.total.item() - (b.l2d + b.l3d)) < 1e-12);
  }
  SUBCASE("identical logits zero the consistency term exactly") {
    LossBreakdown b = combined_loss(fake_output(z2, z2), targets, 0.7, LossMode::multiclass_ce);
    CHECK(b.mse_term == 0.0);
  }
  SUBCASE("frozen high-precision reference") {
    Tensor o2d = Tensor::from({1, 3}, {1.0, 2.0, 3.0});
    Tensor o3d = Tensor::from({1, 3}, {3.0, 2.0, 1.0});
    const std::vector<int> t = {2};
    LossBreakdown b = combined_loss(fake_output(o2d, o3d), t, 0.5, LossMode::multiclass_ce);
    CHECK(std::abs(b.l2d - 0.40760596444438030448) < 1e-12);
    CHECK(std::abs(b.l3d - 2.4076059644443803045) < 1e-12);
    CHECK(std::abs(b.mse_term - 0.22057798950396526521) < 1e-12);
    CHECK(std::abs(b.total.item() - 2.9255009236407432416) < 1e-12);
  }
  SUBCASE("additivity holds over random batches") {
    for (int trial = 0; trial < 50; ++trial) {
      const double lambda = rng.uniform(0.0, 3.0);
      Tensor a = random_tensor({6, 4}, rng, -4.0, 4.0);
      Tensor b2 = random_tensor({6, 4}, rng, -4.0, 4.0);
      std::vector<int> t(6);
      for (auto& v : t) v = static_cast<int>(rng.next_below(4));
      LossBreakdown b = combined_loss(fake_output(a, b2), t, lambda, LossMode::multiclass_ce);
      CHECK(std::abs(b.total.item() - (b.l2d + b.l3d + lambda * b.mse_term)) < 1e-9);
    }
  }
  SUBCASE("total is strictly increasing in lambda when the heads disagree") {
    double prev = -1.0;
    for (double lambda : {0.0, 0.5, 1.0, 2.0, 5.0, 10.0}) {
      LossBreakdown b = combined_loss(fake_output(z2, z3), targets, lambda, LossMode::multiclass_ce);
      CHECK(b.total.item() > prev);
      prev = b.total.item();
    }
  }
  SUBCASE("negative lambda is rejected") {
    CHECK_THROWS_AS(
        (void)combined_loss(fake_output(z2, z3), targets, -0.1, LossMode::multiclass_ce),
        ParamError);
  }
  SUBCASE("stop-grad variants block exactly one side of the consistency term") {
    auto grads = [&](MseStopGrad stop, double lambda) {
      Tape tape;
      TapeGuard guard(tape);
      Tensor a = z2.clone().set_requires_grad(true);
      Tensor b = z3.clone().set_requires_grad(true);
      LossBreakdown lb = combined_loss(fake_output(a, b), targets, lambda,
                                       LossMode::multiclass_ce, stop);
      backward(lb.total);
      return std::pair<Array, Array>{a.grad(), b.grad()};
    };
    auto [a_base, b_base] = grads(MseStopGrad::none, 0.0);  // classification only
    auto [a_none, b_none] = grads(MseStopGrad::none, 1000.0);
    CHECK((a_none - a_base).abs().maxCoeff() > 1.0);  // the term reaches both sides
    CHECK((b_none - b_base).abs().maxCoeff() > 1.0);

    auto [a_s2, b_s2] = grads(MseStopGrad::two_d, 1000.0);
    CHECK((a_s2 == a_base).all());  // blocked side: classification gradient only
    CHECK((b_s2 - b_base).abs().maxCoeff() > 1.0);

    auto [a_s3, b_s3] = grads(MseStopGrad::three_d, 1000.0);
    CHECK((a_s3 - a_base).abs().maxCoeff() > 1.0);
    CHECK((b_s3 == b_base).all());
  }
}

TEST_CASE("adam_step") {
  SUBCASE("single hand-computed step") {
    Tensor theta = Tensor::zeros({1}).set_requires_grad(true);
    theta.impl()->grad = Array::Constant(1, 1.0);
    std::vector<NamedTensor> params = {{"theta", theta}};
    AdamState state;
    adam_step(params, state, 0.1);
    // Bias correction makes m_hat = v_hat = 1 on the first step.
    CHECK(theta.array()[0] == doctest::Approx(-0.1 / (1.0 + 1e-8)).epsilon(1e-12));
  }
  SUBCASE("zero gradient leaves parameters unchanged") {
    Tensor theta = Tensor::from({3}, {1.0, -2.0, 3.0}).set_requires_grad(true);
    theta.impl()->grad = Array::Zero(3);
    std::vector<NamedTensor> params = {{"theta", theta}};
    AdamState state;
    adam_step(params, state, 0.1);
    CHECK(theta.array()[0] == 1.0);
    CHECK(theta.array()[1] == -2.0);
    CHECK(theta.array()[2] == 3.0);
  }
  SUBCASE("two identical-gradient steps do not grow") {
    Tensor theta = Tensor::zeros({1}).set_requires_grad(true);
    theta.impl()->grad = Array::Constant(1, 1.0);
    std::vector<NamedTensor> params = {{"theta", theta}};
    AdamState state;
    adam_step(params, state, 0.1);
    const double step1 = std::abs(theta.array()[0]);
    const double before = theta.array()[0];
    theta.impl()->grad = Array::Constant(1, 1.0);
    adam_step(params, state, 0.1);
    const double step2 = std::abs(theta.array()[0] - before);
    CHECK(step2 <= step1 + 1e-12);
  }
  SUBCASE("non-finite gradient aborts with the parameter name") {
    Tensor theta = Tensor::zeros({2}).set_requires_grad(true);
    theta.impl()->grad = Array::Constant(2, std::nan(""));
    std::vector<NamedTensor> params = {{"stage1.block0.conv1.weight", theta}};
    AdamState state;
    CHECK_THROWS_WITH_AS(adam_step(params, state, 0.1),
                         doctest::Contains("stage1.block0.conv1.weight"), NumericError);
  }
}

TEST_CASE("end-to-end gradients through the hybrid model") {
  data::Dataset ds = tiny_synthetic(3, 4, 12, 90);
  HybridModel model(small_2d(3), small_3d(3), 0.5, 0.5, 17);
  const std::vector<std::size_t> batch = {0, 5, 9};
  std::vector<int> targets;
  for (std::size_t i : batch) targets.push_back(ds.labels[i]);
  Tensor imgs = data::images_to_tensor(ds, batch);
  std::vector<Volume> vols;
  for (std::size_t i : batch)
    vols.push_back(aug::build_volume(ds.images[i], aug::default_roster(3),
                                     {91, 0, static_cast<std::int64_t>(i), 0}));
  Tensor vbatch = data::volumes_to_tensor(vols);

  auto loss_fn = [&] {
    HybridOutput out = model.forward(imgs, vbatch, true);
    return combined_loss(out, targets, 0.5, LossMode::multiclass_ce).total;
  };
  auto params = model.parameters();
  std::vector<Tensor> tensors;
  for (auto& [name, t] : params) tensors.push_back(t);
  CHECK(gradcheck_params(loss_fn, tensors, 20, 4242, 1e-4) < 1e-4);
}

TEST_CASE("fit") {
  data::Dataset ds = tiny_synthetic(2, 24, 16, 5);

  TrainConfig cfg;
  cfg.lambda = 0.5;
  cfg.batch_size = 8;
  cfg.max_epochs = 3;
  cfg.patience = 3;
  cfg.val_fraction = 0.15;
  cfg.seed = 11;
  cfg.roster = aug::default_roster(3);

  SUBCASE("patience zero runs exactly one epoch") {
    TrainConfig one = cfg;
    one.patience = 0;
    HybridModel model(small_2d(2), small_3d(2), 0.5, 0.5, 21);
    FitReport report = fit(model, ds, one);
    CHECK(report.stopped_epoch == 1);
    CHECK(report.epochs.size() == 1);
    CHECK(report.best_epoch == 1);
  }
  SUBCASE("identical config and seed give identical reports") {
    HybridModel m1(small_2d(2), small_3d(2), 0.5, 0.5, 22);
    HybridModel m2(small_2d(2), small_3d(2), 0.5, 0.5, 22);
    FitReport r1 = fit(m1, ds, cfg);
    FitReport r2 = fit(m2, ds, cfg);
    CHECK(fit_report_json(r1, cfg) == fit_report_json(r2, cfg));
    CHECK(fit_report_csv(r1) == fit_report_csv(r2));
  }
  SUBCASE("loss additivity holds per epoch") {
    HybridModel model(small_2d(2), small_3d(2), 0.5, 0.5, 23);
    FitReport report = fit(model, ds, cfg);
    for (const auto& row : report.epochs)
      CHECK(std::abs(row.total - (row.l2d + row.l3d + cfg.lambda * row.mse_term)) < 1e-9);
  }
  SUBCASE("best epoch dominates the validation history") {
    HybridModel model(small_2d(2), small_3d(2), 0.5, 0.5, 24);
    FitReport report = fit(model, ds, cfg);
    REQUIRE(report.best_epoch >= 1);
    for (const auto& row : report.epochs)
      CHECK(report.best_val_acc >= row.val_acc);
    CHECK(report.best_val_acc ==
          report.epochs[static_cast<std::size_t>(report.best_epoch - 1)].val_acc);
  }
  SUBCASE("checkpoint fidelity: best weights reproduce the recorded accuracy") {
    HybridModel model(small_2d(2), small_3d(2), 0.5, 0.5, 25);
    FitReport report = fit(model, ds, cfg);
    data::Dataset val;
    val.class_names = ds.class_names;
    for (std::size_t i : report.val_indices) {
      val.images.push_back(ds.images[i]);
      val.labels.push_back(ds.labels[i]);
    }
    CHECK(evaluate(model.two_d(), val).accuracy == report.best_val_acc);

    const auto path = std::filesystem::temp_directory_path() / "alzhinet_fit_best.azwt";
    save_weights(model.two_d().state(), path);
    HybridModel fresh(small_2d(2), small_3d(2), 0.5, 0.5, 999);
    load_weights(fresh.two_d().state(), path);
    CHECK(evaluate(fresh.two_d(), val).accuracy == report.best_val_acc);
    std::filesystem::remove(path);
  }
  SUBCASE("single-class training set is a configuration error") {
    data::Dataset bad;
    bad.class_names = {"a", "b"};
    for (int i = 0; i < 6; ++i) {
      bad.images.push_back(Image::constant(3, 16, 16, 0.5));
      bad.labels.push_back(0);
    }
    HybridModel model(small_2d(2), small_3d(2), 0.5, 0.5, 26);
    CHECK_THROWS_AS((void)fit(model, bad, cfg), ConfigError);
  }
  SUBCASE("2d-only mode trains without touching the 3d net") {
    TrainConfig two = cfg;
    two.mode = TrainMode::two_d_only;
    HybridModel model(small_2d(2), small_3d(2), 0.5, 0.5, 27);
    Tensor before = model.three_d().parameters()[0].tensor.clone();
    FitReport report = fit(model, ds, two);
    CHECK(report.epochs.size() >= 1);
    CHECK((model.three_d().parameters()[0].tensor.array() == before.array()).all());
    for (const auto& row : report.epochs) CHECK(row.l3d == 0.0);
  }
}

TEST_CASE("evaluate") {
  data::Dataset ds = tiny_synthetic(4, 10, 16, 31);

  SUBCASE("hybrid head with beta 0 and alpha 1 matches the 2d head") {
    HybridModel model(small_2d(4), small_3d(4), 1.0, 0.0, 41);
    auto r2d = evaluate(model, ds, EvalHead::two_d, aug::default_roster(3), 7);
    auto rh = evaluate(model, ds, EvalHead::hybrid, aug::default_roster(3), 7);
    CHECK(r2d.accuracy == rh.accuracy);
    CHECK(r2d.macro_f1 == rh.macro_f1);
    CHECK(r2d.macro_auc == rh.macro_auc);
    for (int t = 0; t < 4; ++t)
      for (int p = 0; p < 4; ++p) CHECK(r2d.confusion.at(t, p) == rh.confusion.at(t, p));
  }
  SUBCASE("random-init nets sit at chance on a balanced set") {
    double total = 0.0;
    for (int seed = 0; seed < 20; ++seed) {
      TwoDNet net(small_2d(4), 1000 + static_cast<std::uint64_t>(seed));
      total += evaluate(net, ds).accuracy;
    }
    const double mean = total / 20.0;
    CHECK(mean > 0.25 - 0.05);
    CHECK(mean < 0.25 + 0.05);
  }
  SUBCASE("empty dataset is an error") {
    data::Dataset empty;
    empty.class_names = {"a", "b"};
    TwoDNet net(small_2d(2), 1);
    CHECK_THROWS_AS((void)evaluate(net, empty), DataError);
  }
}

TEST_SUITE_END();
