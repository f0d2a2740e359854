#include "alzhinet/gradcheck.hpp"

#include "alzhinet/errors.hpp"
#include "alzhinet/ops.hpp"
#include "alzhinet/rng.hpp"
#include "alzhinet/tape.hpp"

#include <algorithm>
#include <cmath>

namespace alzhinet {

namespace {

double rel_err(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({1.0, std::abs(analytic), std::abs(numeric)});
}

}  // namespace

double gradcheck(const std::function<Tensor(const Tensor&)>& f, const Tensor& input,
                 const GradcheckOptions& options) {
  Tensor x = input.clone();
  Array analytic;
  for (int attempt = 0;; ++attempt) {
    Tape tape;
    Tensor probe = x.clone().set_requires_grad(true);
    {
      TapeGuard guard(tape);
      Tensor loss = f(probe);
      if (tape.relu_kink_gap() >= options.kink_margin || !options.resample ||
          attempt >= options.max_resamples) {
        backward(loss);
        analytic = probe.grad();
        break;
      }
    }
    x = options.resample().clone();
  }

  double worst = 0.0;
  for (Index i = 0; i < x.size(); ++i) {
    const double saved = x.array()[i];
    x.array()[i] = saved + options.eps;
    const double hi = f(x).item();
    x.array()[i] = saved - options.eps;
    const double lo = f(x).item();
    x.array()[i] = saved;
    const double numeric = (hi - lo) / (2.0 * options.eps);
    worst = std::max(worst, rel_err(analytic[i], numeric));
  }
  return worst;
}

double gradcheck_params(const std::function<Tensor()>& loss_fn, std::span<Tensor> params,
                        int samples, std::uint64_t pick_seed, double eps) {
  if (params.empty()) throw ParamError("gradcheck_params needs at least one parameter");

  std::vector<Array> analytic(params.size());
  {
    Tape tape;
    TapeGuard guard(tape);
    backward(loss_fn());
    for (std::size_t p = 0; p < params.size(); ++p)
      analytic[p] = params[p].has_grad() ? params[p].grad() : Array::Zero(params[p].size());
  }

  RngStream pick(pick_seed);
  ReluSignProbe probe;
  double worst = 0.0;
  int accepted = 0;
  // A coordinate whose +/-eps interval flips any relu sign is rejected and a
  // fresh (parameter, coordinate) pair drawn: central differences do not
  // estimate the derivative across a kink.
  for (int attempts = 0; accepted < samples && attempts < 50 * samples; ++attempts) {
    const auto p = static_cast<std::size_t>(pick.next_below(params.size()));
    const auto i = static_cast<Index>(pick.next_below(static_cast<std::uint64_t>(params[p].size())));
    const double saved = params[p].array()[i];
    params[p].array()[i] = saved + eps;
    probe.reset();
    const double hi = loss_fn().item();
    const std::uint64_t sign_hi = probe.digest();
    params[p].array()[i] = saved - eps;
    probe.reset();
    const double lo = loss_fn().item();
    const std::uint64_t sign_lo = probe.digest();
    params[p].array()[i] = saved;
    if (sign_hi != sign_lo) continue;
    const double numeric = (hi - lo) / (2.0 * eps);
    worst = std::max(worst, rel_err(analytic[p][i], numeric));
    ++accepted;
  }
  return worst;
}

}  // namespace alzhinet
