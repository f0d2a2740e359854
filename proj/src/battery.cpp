#include "alzhinet/battery.hpp"

#include "alzhinet/data.hpp"
#include "alzhinet/gradcheck.hpp"
#include "alzhinet/ops.hpp"
#include "alzhinet/parallel.hpp"
#include "alzhinet/rng.hpp"
#include "alzhinet/training.hpp"

#include <json.hpp>

#include <cmath>
#include <functional>

namespace alzhinet {

namespace {

Tensor rand_tensor(std::vector<Index> shape, RngStream& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (Index i = 0; i < t.size(); ++i) t.array()[i] = rng.uniform(lo, hi);
  return t;
}

Tensor rand_off_zero(std::vector<Index> shape, RngStream& rng, double margin) {
  Tensor t(std::move(shape));
  for (Index i = 0; i < t.size(); ++i) {
    const double mag = margin + rng.next_double() * (1.0 - margin);
    t.array()[i] = (rng.next_u64() & 1) ? mag : -mag;
  }
  return t;
}

// Scalarizes an op output so every coordinate carries a distinct weight.
Tensor pin(const Tensor& y, RngStream& rng) {
  Tensor r(y.shape());
  for (Index i = 0; i < r.size(); ++i) r.array()[i] = rng.uniform(-1.0, 1.0);
  return r;
}

struct Trial {
  // One randomized instance: max gradcheck error over all checked arguments.
  std::function<double(RngStream&)> run;
};

double end_to_end_error(std::uint64_t seed) {
  data::SyntheticSpec spec;
  spec.num_classes = 3;
  spec.per_class = 4;
  spec.image_size = 12;
  spec.seed = seed;
  data::Dataset ds = data::prepared(data::generate_synthetic(spec), 12, 12);

  TwoDNetConfig c2;
  c2.num_classes = 3;
  c2.width_multiplier = 1.0 / 8.0;
  ThreeDNetConfig c3;
  c3.num_classes = 3;
  c3.width_multiplier = 1.0 / 8.0;
  HybridModel model(c2, c3, 0.5, 0.5, seed ^ 0x6e7ull);

  const std::vector<std::size_t> batch = {0, 5, 9};
  std::vector<int> targets;
  for (std::size_t i : batch) targets.push_back(ds.labels[i]);
  Tensor imgs = data::images_to_tensor(ds, batch);
  std::vector<Volume> vols;
  for (std::size_t i : batch)
    vols.push_back(aug::build_volume(ds.images[i], aug::default_roster(3),
                                     {seed, 0, static_cast<std::int64_t>(i), 0}));
  Tensor vbatch = data::volumes_to_tensor(vols);

  auto loss_fn = [&] {
    HybridOutput out = model.forward(imgs, vbatch, true);
    return combined_loss(out, targets, 0.5, LossMode::multiclass_ce).total;
  };
  auto named = model.parameters();
  std::vector<Tensor> params;
  for (auto& [name, t] : named) params.push_back(t);
  return gradcheck_params(loss_fn, params, 50, seed ^ 0x50ull, 1e-4);
}

}  // namespace

BatteryReport run_gradient_battery(int trials, double primitive_threshold,
                                   double end_to_end_threshold, std::uint64_t seed) {
  std::vector<std::pair<std::string, Trial>> primitives;

  primitives.push_back({"conv2d", {[](RngStream& rng) {
    const int stride = 1 + static_cast<int>(rng.next_below(2));
    const int pad = static_cast<int>(rng.next_below(2));
    const Index C = 1 + static_cast<Index>(rng.next_below(3));
    const Index O = 1 + static_cast<Index>(rng.next_below(3));
    Tensor x = rand_tensor({1, C, 5, 5}, rng);
    Tensor w = rand_tensor({O, C, 3, 3}, rng);
    Tensor b = rand_tensor({O}, rng);
    Tensor anchor = pin(conv2d(x, w, b, stride, pad), rng);
    double err = gradcheck([&](const Tensor& v) { return mse(conv2d(v, w, b, stride, pad), anchor); }, x);
    err = std::max(err, gradcheck([&](const Tensor& v) { return mse(conv2d(x, v, b, stride, pad), anchor); }, w));
    return std::max(err, gradcheck([&](const Tensor& v) { return mse(conv2d(x, w, v, stride, pad), anchor); }, b));
  }}});

  primitives.push_back({"conv3d", {[](RngStream& rng) {
    const Index C = 1 + static_cast<Index>(rng.next_below(2));
    const Index O = 1 + static_cast<Index>(rng.next_below(2));
    Tensor x = rand_tensor({1, C, 3, 4, 4}, rng);
    Tensor w = rand_tensor({O, C, 3, 3, 3}, rng);
    Tensor b = rand_tensor({O}, rng);
    Tensor anchor = pin(conv3d(x, w, b), rng);
    double err = gradcheck([&](const Tensor& v) { return mse(conv3d(v, w, b), anchor); }, x);
    err = std::max(err, gradcheck([&](const Tensor& v) { return mse(conv3d(x, v, b), anchor); }, w));
    return std::max(err, gradcheck([&](const Tensor& v) { return mse(conv3d(x, w, v), anchor); }, b));
  }}});

  primitives.push_back({"batch_norm", {[](RngStream& rng) {
    const bool training = rng.next_below(2) == 1;
    Tensor x = rand_tensor({3, 2, 4, 4}, rng);
    Tensor gamma = rand_tensor({2}, rng, 0.5, 1.5);
    Tensor beta = rand_tensor({2}, rng);
    Tensor rm = rand_tensor({2}, rng, -0.2, 0.2);
    Tensor rv = rand_tensor({2}, rng, 0.5, 2.0);
    Tensor anchor = rand_tensor({3, 2, 4, 4}, rng);
    auto run = [&](const Tensor& xx, const Tensor& g, const Tensor& bb) {
      Tensor m = rm.clone(), v = rv.clone();
      return mse(batch_norm(xx, m, v, g, bb, training), anchor);
    };
    double err = gradcheck([&](const Tensor& v) { return run(v, gamma, beta); }, x);
    err = std::max(err, gradcheck([&](const Tensor& v) { return run(x, v, beta); }, gamma));
    return std::max(err, gradcheck([&](const Tensor& v) { return run(x, gamma, v); }, beta));
  }}});

  primitives.push_back({"relu", {[](RngStream& rng) {
    Tensor x = rand_off_zero({3, 7}, rng, 0.05);
    Tensor anchor = pin(x, rng);
    return gradcheck([&](const Tensor& v) { return mse(relu(v), anchor); }, x);
  }}});

  primitives.push_back({"avg_pool", {[](RngStream& rng) {
    Tensor x2 = rand_tensor({2, 2, 6, 6}, rng);
    Tensor a2 = pin(avg_pool(x2, 2), rng);
    double err = gradcheck([&](const Tensor& v) { return mse(avg_pool(v, 2), a2); }, x2);
    Tensor x3 = rand_tensor({1, 2, 3, 6, 6}, rng);
    Tensor a3 = pin(avg_pool(x3, 3), rng);
    return std::max(err, gradcheck([&](const Tensor& v) { return mse(avg_pool(v, 3), a3); }, x3));
  }}});

  primitives.push_back({"adaptive_avg_pool_to_one", {[](RngStream& rng) {
    Tensor x = rand_tensor({2, 3, 4, 4}, rng);
    Tensor anchor = pin(adaptive_avg_pool_to_one(x), rng);
    return gradcheck([&](const Tensor& v) { return mse(adaptive_avg_pool_to_one(v), anchor); }, x);
  }}});

  primitives.push_back({"dense", {[](RngStream& rng) {
    Tensor x = rand_tensor({3, 5}, rng);
    Tensor w = rand_tensor({4, 5}, rng);
    Tensor b = rand_tensor({4}, rng);
    Tensor anchor = pin(dense(x, w, b), rng);
    double err = gradcheck([&](const Tensor& v) { return mse(dense(v, w, b), anchor); }, x);
    err = std::max(err, gradcheck([&](const Tensor& v) { return mse(dense(x, v, b), anchor); }, w));
    return std::max(err, gradcheck([&](const Tensor& v) { return mse(dense(x, w, v), anchor); }, b));
  }}});

  primitives.push_back({"softmax", {[](RngStream& rng) {
    Tensor z = rand_tensor({3, 4}, rng, -2.0, 2.0);
    Tensor anchor = pin(softmax(z), rng);
    return gradcheck([&](const Tensor& v) { return mse(softmax(v), anchor); }, z);
  }}});

  primitives.push_back({"cross_entropy", {[](RngStream& rng) {
    const Index K = 2 + static_cast<Index>(rng.next_below(4));
    Tensor z = rand_tensor({4, K}, rng, -3.0, 3.0);
    std::vector<int> t(4);
    for (auto& v : t) v = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(K)));
    return gradcheck([&](const Tensor& v) { return cross_entropy(v, t); }, z);
  }}});

  primitives.push_back({"binary_cross_entropy", {[](RngStream& rng) {
    std::vector<int> t(4);
    for (auto& v : t) v = static_cast<int>(rng.next_below(2));
    Tensor z2 = rand_tensor({4, 2}, rng, -3.0, 3.0);
    double err = gradcheck([&](const Tensor& v) { return binary_cross_entropy(v, t); }, z2);
    Tensor z1 = rand_tensor({4, 1}, rng, -3.0, 3.0);
    return std::max(err, gradcheck([&](const Tensor& v) { return binary_cross_entropy(v, t); }, z1));
  }}});

  primitives.push_back({"mse", {[](RngStream& rng) {
    Tensor p = rand_tensor({3, 4}, rng);
    Tensor q = rand_tensor({3, 4}, rng);
    double err = gradcheck([&](const Tensor& v) { return mse(v, q); }, p);
    return std::max(err, gradcheck([&](const Tensor& v) { return mse(p, v); }, q));
  }}});

  primitives.push_back({"add", {[](RngStream& rng) {
    Tensor a = rand_tensor({6}, rng);
    Tensor b = rand_tensor({6}, rng);
    Tensor anchor = pin(a, rng);
    double err = gradcheck([&](const Tensor& v) { return mse(add(v, b), anchor); }, a);
    // Same tensor on both sides: gradients must accumulate.
    return std::max(err, gradcheck([&](const Tensor& v) { return mse(add(v, v), anchor); }, a));
  }}});

  primitives.push_back({"scale", {[](RngStream& rng) {
    Tensor x = rand_tensor({5}, rng);
    Tensor anchor = pin(x, rng);
    const double c = rng.uniform(-2.0, 2.0);
    return gradcheck([&](const Tensor& v) { return mse(scale(v, c), anchor); }, x);
  }}});

  primitives.push_back({"sum", {[](RngStream& rng) {
    Tensor x = rand_tensor({7}, rng);
    return gradcheck([&](const Tensor& v) { return sum(v); }, x);
  }}});

  primitives.push_back({"reshape", {[](RngStream& rng) {
    Tensor x = rand_tensor({2, 6}, rng);
    Tensor anchor = pin(reshape(x, {3, 4}), rng);
    return gradcheck([&](const Tensor& v) { return mse(reshape(v, {3, 4}), anchor); }, x);
  }}});

  BatteryReport report;
  report.checks.resize(primitives.size() + 1);
  parallel_for(primitives.size(), [&](std::size_t p) {
    double worst = 0.0;
    for (int trial = 0; trial < trials; ++trial) {
      RngStream rng(splitmix64_mix(seed) ^
                    splitmix64_mix((static_cast<std::uint64_t>(p) << 32) |
                                   static_cast<std::uint64_t>(trial)));
      worst = std::max(worst, primitives[p].second.run(rng));
    }
    report.checks[p] = {primitives[p].first, worst, primitive_threshold,
                        worst < primitive_threshold};
  });

  const double e2e = end_to_end_error(seed ^ 0xe2eull);
  report.checks.back() = {"end_to_end_combined_loss", e2e, end_to_end_threshold,
                          e2e < end_to_end_threshold};

  report.all_pass = true;
  for (const auto& check : report.checks) report.all_pass = report.all_pass && check.pass;
  return report;
}

std::string battery_text(const BatteryReport& report) {
  std::string out;
  char buf[160];
  for (const auto& check : report.checks) {
    std::snprintf(buf, sizeof(buf), "%-26s max_rel_err=%-12.3e threshold=%-9.0e %s\n",
                  check.name.c_str(), check.max_rel_err, check.threshold,
                  check.pass ? "PASS" : "FAIL");
    out += buf;
  }
  out += report.all_pass ? "gradient battery: PASS\n" : "gradient battery: FAIL\n";
  return out;
}

std::string battery_json(const BatteryReport& report) {
  nlohmann::ordered_json j;
  j["all_pass"] = report.all_pass;
  auto& checks = j["checks"] = nlohmann::ordered_json::array();
  for (const auto& check : report.checks)
    checks.push_back({{"name", check.name},
                      {"max_rel_err", check.max_rel_err},
                      {"threshold", check.threshold},
                      {"pass", check.pass}});
  return j.dump(2) + "\n";
}

}  // namespace alzhinet
