#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

namespace alzhinet {

using Index = std::int64_t;
using Array = Eigen::ArrayXd;

Index numel(const std::vector<Index>& shape);
std::string shape_str(const std::vector<Index>& shape);

struct TensorData {
  std::vector<Index> shape;
  Array values;
  Array grad;  // empty until a backward pass writes it
  bool requires_grad = false;
  std::uint64_t tape_serial = 0;  // which tape `node` belongs to
  int node = -1;
};

/// Dense n-dimensional array of doubles, row-major, with an optional gradient
/// slot. Copying a Tensor aliases the same storage (shared handle), so the
/// parameter objects a model holds are the ones a backward pass fills.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<Index> shape);

  static Tensor zeros(std::vector<Index> shape);
  static Tensor full(std::vector<Index> shape, double value);
  static Tensor from(std::vector<Index> shape, std::vector<double> values);
  static Tensor scalar(double value);

  bool defined() const { return impl_ != nullptr; }
  const std::vector<Index>& shape() const { return impl_->shape; }
  Index rank() const { return static_cast<Index>(impl_->shape.size()); }
  Index dim(Index i) const { return impl_->shape[static_cast<std::size_t>(i)]; }
  Index size() const { return impl_->values.size(); }

  Array& array() { return impl_->values; }
  const Array& array() const { return impl_->values; }
  double* data() { return impl_->values.data(); }
  const double* data() const { return impl_->values.data(); }

  /// Value of a one-element tensor.
  double item() const;

  double& at(std::initializer_list<Index> idx);
  double at(std::initializer_list<Index> idx) const;

  Tensor& set_requires_grad(bool value = true);
  bool requires_grad() const { return impl_->requires_grad; }
  bool has_grad() const { return impl_ && impl_->grad.size() == impl_->values.size(); }
  Array& grad();
  const Array& grad() const;
  void clear_grad() { impl_->grad.resize(0); }

  /// Deep copy. Keeps requires_grad, drops tape linkage and gradient.
  Tensor clone() const;
  /// Deep copy that never participates in differentiation.
  Tensor detach() const;

  bool all_finite() const;

  const std::shared_ptr<TensorData>& impl() const { return impl_; }

 private:
  std::shared_ptr<TensorData> impl_;
};

Index flat_index(const std::vector<Index>& shape, std::initializer_list<Index> idx);

}  // namespace alzhinet
