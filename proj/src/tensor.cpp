#include "alzhinet/tensor.hpp"

#include "alzhinet/errors.hpp"

#include <sstream>

namespace alzhinet {

Index numel(const std::vector<Index>& shape) {
  Index n = 1;
  for (Index d : shape) {
    if (d <= 0) throw ShapeError("tensor extents must be positive, got " + shape_str(shape));
    n *= d;
  }
  return n;
}

std::string shape_str(const std::vector<Index>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Index flat_index(const std::vector<Index>& shape, std::initializer_list<Index> idx) {
  if (idx.size() != shape.size())
    throw IndexError("index rank mismatch for shape " + shape_str(shape));
  Index flat = 0;
  std::size_t k = 0;
  for (Index i : idx) {
    if (i < 0 || i >= shape[k]) throw IndexError("index out of range in dim " + std::to_string(k));
    flat = flat * shape[k] + i;
    ++k;
  }
  return flat;
}

Tensor::Tensor(std::vector<Index> shape) : impl_(std::make_shared<TensorData>()) {
  impl_->shape = std::move(shape);
  impl_->values = Array::Zero(numel(impl_->shape));
}

Tensor Tensor::zeros(std::vector<Index> shape) { return Tensor(std::move(shape)); }

Tensor Tensor::full(std::vector<Index> shape, double value) {
  Tensor t(std::move(shape));
  t.array().setConstant(value);
  return t;
}

Tensor Tensor::from(std::vector<Index> shape, std::vector<double> values) {
  Tensor t(std::move(shape));
  if (static_cast<Index>(values.size()) != t.size())
    throw ShapeError("value count " + std::to_string(values.size()) + " does not fill shape " +
                     shape_str(t.shape()));
  for (Index i = 0; i < t.size(); ++i) t.array()[i] = values[static_cast<std::size_t>(i)];
  return t;
}

Tensor Tensor::scalar(double value) { return full({1}, value); }

double Tensor::item() const {
  if (size() != 1) throw ContractError("item() requires a one-element tensor, got " + shape_str(shape()));
  return impl_->values[0];
}

double& Tensor::at(std::initializer_list<Index> idx) {
  return impl_->values[flat_index(impl_->shape, idx)];
}

double Tensor::at(std::initializer_list<Index> idx) const {
  return impl_->values[flat_index(impl_->shape, idx)];
}

Tensor& Tensor::set_requires_grad(bool value) {
  impl_->requires_grad = value;
  return *this;
}

Array& Tensor::grad() {
  if (!has_grad()) throw ContractError("tensor has no gradient; run backward first");
  return impl_->grad;
}

const Array& Tensor::grad() const {
  if (!has_grad()) throw ContractError("tensor has no gradient; run backward first");
  return impl_->grad;
}

Tensor Tensor::clone() const {
  Tensor t(impl_->shape);
  t.array() = impl_->values;
  t.impl()->requires_grad = impl_->requires_grad;
  return t;
}

Tensor Tensor::detach() const {
  Tensor t(impl_->shape);
  t.array() = impl_->values;
  return t;
}

bool Tensor::all_finite() const { return impl_->values.isFinite().all(); }

}  // namespace alzhinet
