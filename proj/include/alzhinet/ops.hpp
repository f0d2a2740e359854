#pragma once

#include "alzhinet/tape.hpp"
#include "alzhinet/tensor.hpp"

#include <span>
#include <vector>

namespace alzhinet {

// Differentiable primitives. Each op computes its forward value and, when the
// active tape tracks any input, records the matching vector-Jacobian product.
// All math is double precision; convolutions are im2col + Eigen GEMM.

/// [N,C,H,W] (x) [O,C,kh,kw] -> [N,O,H',W'], zero padding,
/// H' = floor((H + 2 pad - kh) / stride) + 1.
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride = 1,
              int padding = 0);
Tensor conv2d(const Tensor& input, const Tensor& weight, int stride = 1, int padding = 0);

/// [N,C,D,H,W] (x) [O,C,kd,kh,kw] -> [N,O,D',H',W']. Defaults keep D,H,W for
/// a 3x3x3 kernel.
Tensor conv3d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride = 1,
              int padding = 1);
Tensor conv3d(const Tensor& input, const Tensor& weight, int stride = 1, int padding = 1);

/// Channel-wise batch normalization for [N,C,H,W] or [N,C,D,H,W]. Training
/// mode normalizes with batch statistics and updates the running buffers in
/// place (exponential moving average, unbiased variance); eval mode uses the
/// running buffers. Differentiable in input, gamma, beta.
Tensor batch_norm(const Tensor& input, Tensor& running_mean, Tensor& running_var,
                  const Tensor& gamma, const Tensor& beta, bool training, double momentum = 0.1,
                  double eps = 1e-5);

/// Elementwise max(0, x); subgradient at 0 is 0.
Tensor relu(const Tensor& input);

/// Non-overlapping average pooling (stride == kernel) over the trailing
/// spatial dims; rank 4 pools H,W and rank 5 pools D,H,W. Extents divide by
/// floor; remainder positions are dropped.
Tensor avg_pool(const Tensor& input, int kernel);

/// Global mean over all spatial positions per channel: [N,C,...] -> [N,C,1,...].
Tensor adaptive_avg_pool_to_one(const Tensor& input);

/// [N,F] x [G,F]^T + [G] -> [N,G].
Tensor dense(const Tensor& input, const Tensor& weight, const Tensor& bias);

/// Row softmax with max subtraction, [N,K] -> [N,K].
Tensor softmax(const Tensor& logits);

/// Mean over the batch of -log softmax(logits)[target].
Tensor cross_entropy(const Tensor& logits, std::span<const int> targets);

/// Numerically stable BCE-with-logit for binary tasks. Accepts [N,1] (one
/// logit) or [N,2] (two-class logits, reduced to their difference); the [N,2]
/// form agrees with cross_entropy.
Tensor binary_cross_entropy(const Tensor& logits, std::span<const int> targets);

/// Mean of squared elementwise differences.
Tensor mse(const Tensor& p, const Tensor& q);

Tensor add(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double c);
Tensor sum(const Tensor& x);
Tensor reshape(const Tensor& x, std::vector<Index> new_shape);

// Shape arithmetic shared with the tests.
Index conv_out_extent(Index in, Index k, Index stride, Index padding);

/// While installed on its thread, every relu forward folds its input sign
/// pattern into a digest. Finite-difference checks compare the digests of two
/// nearby evaluations: a mismatch means some activation crossed its kink
/// inside the difference interval, so that measurement is rejected.
class ReluSignProbe {
 public:
  ReluSignProbe();
  ~ReluSignProbe();
  ReluSignProbe(const ReluSignProbe&) = delete;
  ReluSignProbe& operator=(const ReluSignProbe&) = delete;

  void reset() { digest_ = 0x9e3779b97f4a7c15ull; }
  std::uint64_t digest() const { return digest_; }
  void fold(const Array& relu_input);

  static ReluSignProbe* current();

 private:
  std::uint64_t digest_ = 0x9e3779b97f4a7c15ull;
  ReluSignProbe* previous_ = nullptr;
};

}  // namespace alzhinet
