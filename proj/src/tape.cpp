#include "alzhinet/tape.hpp"

#include "alzhinet/errors.hpp"

#include <atomic>

namespace alzhinet {

namespace {
std::atomic<std::uint64_t> g_tape_serials{1};
thread_local Tape* g_active_tape = nullptr;
}  // namespace

Tape::Tape() : serial_(g_tape_serials.fetch_add(1)) {}

Tape::~Tape() = default;

Tape* Tape::current() { return g_active_tape; }

void Tape::clear() {
  nodes_.clear();
  grads_.clear();
  consumed_ = false;
  relu_kink_gap_ = std::numeric_limits<double>::infinity();
  serial_ = g_tape_serials.fetch_add(1);  // invalidates stale node ids
}

void Tape::note_relu_gap(double gap) {
  if (gap < relu_kink_gap_) relu_kink_gap_ = gap;
}

bool Tape::tracks(const Tensor& t) const {
  if (!t.defined()) return false;
  const auto& d = *t.impl();
  return (d.node >= 0 && d.tape_serial == serial_) || d.requires_grad;
}

int Tape::node_of(const Tensor& t) {
  if (!t.defined()) return -1;
  auto& d = *t.impl();
  if (d.node >= 0 && d.tape_serial == serial_) return d.node;
  if (!d.requires_grad) return -1;
  if (consumed_) throw ContractError("tape already consumed; clear() before recording again");
  nodes_.push_back(Node{t.impl(), nullptr});
  d.tape_serial = serial_;
  d.node = static_cast<int>(nodes_.size()) - 1;
  return d.node;
}

int Tape::emit(const Tensor& out, Vjp vjp) {
  if (consumed_) throw ContractError("tape already consumed; clear() before recording again");
  nodes_.push_back(Node{out.impl(), std::move(vjp)});
  auto& d = *out.impl();
  d.tape_serial = serial_;
  d.node = static_cast<int>(nodes_.size()) - 1;
  return d.node;
}

Array& Tape::grad_buffer(int node) {
  auto& buf = grads_[static_cast<std::size_t>(node)];
  if (buf.size() == 0) buf = Array::Zero(nodes_[static_cast<std::size_t>(node)].out->values.size());
  return buf;
}

void Tape::add_grad(int node, const Array& g) {
  if (node < 0) return;
  grad_buffer(node) += g;
}

void Tape::run_backward(const Tensor& loss) {
  if (consumed_) throw ContractError("tape already consumed; clear() before another backward");
  if (!loss.defined() || loss.impl()->tape_serial != serial_ || loss.impl()->node < 0)
    throw ContractError("loss was not produced on the active tape");
  if (loss.size() != 1)
    throw ContractError("backward requires a scalar loss, got " + shape_str(loss.shape()));

  grads_.assign(nodes_.size(), Array());
  const int root = loss.impl()->node;
  grad_buffer(root).setConstant(1.0);
  for (int i = root; i >= 0; --i) {
    auto& node = nodes_[static_cast<std::size_t>(i)];
    auto& g = grads_[static_cast<std::size_t>(i)];
    if (g.size() == 0 || !node.vjp) continue;
    node.vjp(*this, g);
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (grads_[i].size() != 0) nodes_[i].out->grad = std::move(grads_[i]);
  }
  grads_.clear();
  consumed_ = true;
}

TapeGuard::TapeGuard(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }

TapeGuard::~TapeGuard() { g_active_tape = previous_; }

void backward(const Tensor& loss) {
  Tape* tape = Tape::current();
  if (!tape) throw ContractError("backward called with no active tape");
  tape->run_backward(loss);
}

}  // namespace alzhinet
