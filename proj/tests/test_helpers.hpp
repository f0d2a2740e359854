#pragma once

#include "alzhinet/rng.hpp"
#include "alzhinet/tensor.hpp"

namespace testh {

using alzhinet::Index;
using alzhinet::RngStream;
using alzhinet::Tensor;

inline Tensor random_tensor(std::vector<Index> shape, RngStream& rng, double lo = -1.0,
                            double hi = 1.0) {
  Tensor t(std::move(shape));
  for (Index i = 0; i < t.size(); ++i) t.array()[i] = rng.uniform(lo, hi);
  return t;
}

/// Random tensor with every entry at least `margin` away from zero; keeps
/// relu checks off the kink.
inline Tensor random_tensor_off_zero(std::vector<Index> shape, RngStream& rng, double margin) {
  Tensor t(std::move(shape));
  for (Index i = 0; i < t.size(); ++i) {
    const double mag = margin + rng.next_double() * (1.0 - margin);
    t.array()[i] = (rng.next_u64() & 1) ? mag : -mag;
  }
  return t;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  return (a.array() - b.array()).abs().maxCoeff();
}

}  // namespace testh
