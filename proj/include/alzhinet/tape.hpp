#pragma once

#include "alzhinet/tensor.hpp"

#include <functional>
#include <limits>

namespace alzhinet {

/// Reverse-mode tape. Single use: record one forward pass, run one backward,
/// then clear() before recording again. A tape and the tensors tracked on it
/// belong to one thread at a time.
class Tape {
 public:
  using Vjp = std::function<void(Tape&, const Array&)>;

  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Tape activated on this thread by the innermost TapeGuard, or null.
  static Tape* current();

  void clear();
  bool consumed() const { return consumed_; }
  std::size_t node_count() const { return nodes_.size(); }

  /// Smallest |x| any relu input saw during recording; used by gradcheck to
  /// reject inputs sitting on a kink.
  double relu_kink_gap() const { return relu_kink_gap_; }
  void note_relu_gap(double gap);

  // --- recording interface (used by the op implementations) ---
  bool tracks(const Tensor& t) const;
  /// Node id of t on this tape; registers a leaf for requires_grad tensors.
  /// Returns -1 for untracked tensors.
  int node_of(const Tensor& t);
  int emit(const Tensor& out, Vjp vjp);
  /// Accumulates g into a node's gradient buffer; ignores node < 0.
  void add_grad(int node, const Array& g);
  Array& grad_buffer(int node);

  void run_backward(const Tensor& loss);

 private:
  struct Node {
    std::shared_ptr<TensorData> out;
    Vjp vjp;  // null for leaves
  };
  std::vector<Node> nodes_;
  std::vector<Array> grads_;
  std::uint64_t serial_;
  bool consumed_ = false;
  double relu_kink_gap_ = std::numeric_limits<double>::infinity();
};

/// RAII activation of a tape on the current thread.
class TapeGuard {
 public:
  explicit TapeGuard(Tape& tape);
  ~TapeGuard();
  TapeGuard(const TapeGuard&) = delete;
  TapeGuard& operator=(const TapeGuard&) = delete;

 private:
  Tape* previous_;
};

/// Backpropagates from a scalar loss recorded on the active tape. Afterwards
/// every tensor reachable from the loss holds its gradient; gradients from
/// multiple uses of the same tensor accumulate additively.
void backward(const Tensor& loss);

}  // namespace alzhinet
