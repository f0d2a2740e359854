#pragma once

#include "alzhinet/tensor.hpp"

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace alzhinet {

struct GradcheckOptions {
  double eps = 1e-5;
  /// An input whose forward pass puts a relu argument closer to 0 than this
  /// is rejected and resampled; central differences would straddle the kink.
  double kink_margin = 1e-3;
  int max_resamples = 25;
  /// Fresh input supplier for rejection; without one a kink-adjacent input is
  /// checked as-is.
  std::function<Tensor()> resample;
};

/// Compares the tape gradient of a scalar-valued f against central finite
/// differences, coordinate by coordinate. Returns the max over coordinates of
/// |analytic - numeric| / max(1, |analytic|, |numeric|).
double gradcheck(const std::function<Tensor(const Tensor&)>& f, const Tensor& input,
                 const GradcheckOptions& options = {});

/// Same check for parameters captured inside a closure: runs one backward for
/// the analytic gradients, then central differences on `samples` randomly
/// chosen (parameter, coordinate) pairs. `pick_seed` fixes the sample set.
double gradcheck_params(const std::function<Tensor()>& loss_fn, std::span<Tensor> params,
                        int samples, std::uint64_t pick_seed, double eps = 1e-4);

}  // namespace alzhinet
