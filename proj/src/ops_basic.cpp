#include "alzhinet/errors.hpp"
#include "alzhinet/ops.hpp"
#include "alzhinet/rng.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace alzhinet {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace {

bool recording(std::initializer_list<const Tensor*> inputs, Tape*& tape) {
  tape = Tape::current();
  if (!tape) return false;
  for (const Tensor* t : inputs)
    if (t && tape->tracks(*t)) return true;
  return false;
}

// Channel segments of a [N,C,spatial...] tensor: contiguous runs of length S
// at offset (n*C + c)*S.
struct ChannelLayout {
  Index N, C, S;
};

ChannelLayout channel_layout(const Tensor& t) {
  if (t.rank() < 2) throw ShapeError("expected a [N,C,...] tensor, got " + shape_str(t.shape()));
  Index S = 1;
  for (Index d = 2; d < t.rank(); ++d) S *= t.dim(d);
  return {t.dim(0), t.dim(1), S};
}

}  // namespace

namespace {
thread_local ReluSignProbe* g_relu_probe = nullptr;
}

ReluSignProbe::ReluSignProbe() : previous_(g_relu_probe) { g_relu_probe = this; }

ReluSignProbe::~ReluSignProbe() { g_relu_probe = previous_; }

ReluSignProbe* ReluSignProbe::current() { return g_relu_probe; }

void ReluSignProbe::fold(const Array& relu_input) {
  std::uint64_t word = 0;
  int filled = 0;
  for (Index i = 0; i < relu_input.size(); ++i) {
    word = (word << 1) | static_cast<std::uint64_t>(relu_input[i] > 0.0);
    if (++filled == 64) {
      digest_ = splitmix64_mix(digest_ ^ word);
      word = 0;
      filled = 0;
    }
  }
  if (filled) digest_ = splitmix64_mix(digest_ ^ (word | (1ull << filled)));
}

Tensor relu(const Tensor& input) {
  Tensor out(input.shape());
  out.array() = input.array().max(0.0);
  if (ReluSignProbe* probe = ReluSignProbe::current()) probe->fold(input.array());
  Tape* tape;
  if (recording({&input}, tape)) {
    if (input.size() > 0) tape->note_relu_gap(input.array().abs().minCoeff());
    const int xn = tape->node_of(input);
    auto xd = input.impl();
    tape->emit(out, [=](Tape& tp, const Array& gy) {
      if (xn < 0) return;
      tp.grad_buffer(xn) += gy * (xd->values > 0.0).cast<double>();
    });
  }
  return out;
}

Tensor batch_norm(const Tensor& input, Tensor& running_mean, Tensor& running_var,
                  const Tensor& gamma, const Tensor& beta, bool training, double momentum,
                  double eps) {
  if (input.rank() != 4 && input.rank() != 5)
    throw ShapeError("batch_norm expects [N,C,H,W] or [N,C,D,H,W], got " + shape_str(input.shape()));
  const auto [N, C, S] = channel_layout(input);
  for (const Tensor* p : std::initializer_list<const Tensor*>{&running_mean, &running_var, &gamma, &beta})
    if (p->rank() != 1 || p->dim(0) != C)
      throw ShapeError("batch_norm parameter length must equal channel count " + std::to_string(C));

  const Index m = N * S;  // values per channel
  Array mean(C), invstd(C);

  if (training) {
    if (m <= 1) throw NumericError("batch_norm training needs more than one value per channel");
    Array var(C);
    for (Index c = 0; c < C; ++c) {
      double sum = 0.0;
      for (Index n = 0; n < N; ++n)
        sum += Eigen::Map<const Array>(input.data() + (n * C + c) * S, S).sum();
      const double mu = sum / static_cast<double>(m);
      double sq = 0.0;
      for (Index n = 0; n < N; ++n)
        sq += (Eigen::Map<const Array>(input.data() + (n * C + c) * S, S) - mu).square().sum();
      mean[c] = mu;
      var[c] = sq / static_cast<double>(m);
      invstd[c] = 1.0 / std::sqrt(var[c] + eps);
    }
    // Exponential moving average; running variance uses the unbiased estimate.
    const double unbias = static_cast<double>(m) / static_cast<double>(m - 1);
    running_mean.array() = (1.0 - momentum) * running_mean.array() + momentum * mean;
    running_var.array() = (1.0 - momentum) * running_var.array() + momentum * (var * unbias);
  } else {
    mean = running_mean.array();
    invstd = (running_var.array() + eps).sqrt().inverse();
  }

  Tensor out(input.shape());
  Array xhat(input.size());
  for (Index n = 0; n < N; ++n)
    for (Index c = 0; c < C; ++c) {
      const Index off = (n * C + c) * S;
      Eigen::Map<Array> xh(xhat.data() + off, S);
      xh = (Eigen::Map<const Array>(input.data() + off, S) - mean[c]) * invstd[c];
      Eigen::Map<Array>(out.data() + off, S) = gamma.data()[c] * xh + beta.data()[c];
    }

  Tape* tape;
  if (recording({&input, &gamma, &beta}, tape)) {
    const int xn = tape->node_of(input);
    const int gn = tape->node_of(gamma);
    const int bn = tape->node_of(beta);
    auto gd = gamma.impl();
    auto saved_xhat = std::make_shared<Array>(std::move(xhat));
    auto saved_invstd = std::make_shared<Array>(invstd);
    const double inv_m = 1.0 / static_cast<double>(m);
    tape->emit(out, [=](Tape& tp, const Array& gy) {
      Array dbeta(C), dgamma(C);
      for (Index c = 0; c < C; ++c) {
        double db = 0.0, dg = 0.0;
        for (Index n = 0; n < N; ++n) {
          const Index off = (n * C + c) * S;
          Eigen::Map<const Array> g(gy.data() + off, S);
          Eigen::Map<const Array> xh(saved_xhat->data() + off, S);
          db += g.sum();
          dg += (g * xh).sum();
        }
        dbeta[c] = db;
        dgamma[c] = dg;
      }
      if (xn >= 0) {
        Array& gx = tp.grad_buffer(xn);
        for (Index n = 0; n < N; ++n)
          for (Index c = 0; c < C; ++c) {
            const Index off = (n * C + c) * S;
            Eigen::Map<const Array> g(gy.data() + off, S);
            Eigen::Map<const Array> xh(saved_xhat->data() + off, S);
            const double scale = gd->values[c] * (*saved_invstd)[c];
            if (training) {
              Eigen::Map<Array>(gx.data() + off, S) +=
                  scale * (g - dbeta[c] * inv_m - xh * (dgamma[c] * inv_m));
            } else {
              Eigen::Map<Array>(gx.data() + off, S) += scale * g;
            }
          }
      }
      if (gn >= 0) tp.grad_buffer(gn) += dgamma;
      if (bn >= 0) tp.grad_buffer(bn) += dbeta;
    });
  }
  return out;
}

Tensor dense(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  if (input.rank() != 2) throw ShapeError("dense input must be [N,F], got " + shape_str(input.shape()));
  if (weight.rank() != 2) throw ShapeError("dense weight must be [G,F], got " + shape_str(weight.shape()));
  const Index N = input.dim(0), F = input.dim(1), G = weight.dim(0);
  if (weight.dim(1) != F)
    throw ShapeError("dense feature mismatch: input has " + std::to_string(F) + ", weight expects " +
                     std::to_string(weight.dim(1)));
  if (bias.rank() != 1 || bias.dim(0) != G) throw ShapeError("dense bias must be [G]");

  Tensor out({N, G});
  Eigen::Map<const RowMat> x(input.data(), N, F);
  Eigen::Map<const RowMat> w(weight.data(), G, F);
  Eigen::Map<RowMat> y(out.data(), N, G);
  y.noalias() = x * w.transpose();
  for (Index n = 0; n < N; ++n) y.row(n) += Eigen::Map<const Eigen::RowVectorXd>(bias.data(), G);

  Tape* tape;
  if (recording({&input, &weight, &bias}, tape)) {
    const int xn = tape->node_of(input);
    const int wn = tape->node_of(weight);
    const int bn = tape->node_of(bias);
    auto xd = input.impl();
    auto wd = weight.impl();
    tape->emit(out, [=](Tape& tp, const Array& gy) {
      Eigen::Map<const RowMat> g(gy.data(), N, G);
      if (xn >= 0) {
        Eigen::Map<const RowMat> wm(wd->values.data(), G, F);
        Eigen::Map<RowMat> gx(tp.grad_buffer(xn).data(), N, F);
        gx.noalias() += g * wm;
      }
      if (wn >= 0) {
        Eigen::Map<const RowMat> xm(xd->values.data(), N, F);
        Eigen::Map<RowMat> gw(tp.grad_buffer(wn).data(), G, F);
        gw.noalias() += g.transpose() * xm;
      }
      if (bn >= 0) {
        Array& gb = tp.grad_buffer(bn);
        for (Index o = 0; o < G; ++o) gb[o] += g.col(o).sum();
      }
    });
  }
  return out;
}

Tensor softmax(const Tensor& logits) {
  if (logits.rank() != 2 || logits.dim(1) < 2)
    throw ShapeError("softmax expects [N,K] with K >= 2, got " + shape_str(logits.shape()));
  const Index N = logits.dim(0), K = logits.dim(1);
  Tensor out(logits.shape());
  for (Index n = 0; n < N; ++n) {
    Eigen::Map<const Array> z(logits.data() + n * K, K);
    Eigen::Map<Array> s(out.data() + n * K, K);
    s = (z - z.maxCoeff()).exp();
    s /= s.sum();
  }

  Tape* tape;
  if (recording({&logits}, tape)) {
    const int zn = tape->node_of(logits);
    auto sd = out.impl();
    tape->emit(out, [=](Tape& tp, const Array& gy) {
      if (zn < 0) return;
      Array& gz = tp.grad_buffer(zn);
      for (Index n = 0; n < N; ++n) {
        Eigen::Map<const Array> s(sd->values.data() + n * K, K);
        Eigen::Map<const Array> g(gy.data() + n * K, K);
        Eigen::Map<Array>(gz.data() + n * K, K) += s * (g - (g * s).sum());
      }
    });
  }
  return out;
}

namespace {

void check_targets(std::span<const int> targets, Index N, Index K) {
  if (static_cast<Index>(targets.size()) != N)
    throw ShapeError("target count " + std::to_string(targets.size()) + " != batch size " +
                     std::to_string(N));
  for (int t : targets)
    if (t < 0 || t >= K)
      throw IndexError("target " + std::to_string(t) + " outside [0, " + std::to_string(K) + ")");
}

}  // namespace

Tensor cross_entropy(const Tensor& logits, std::span<const int> targets) {
  if (logits.rank() != 2) throw ShapeError("cross_entropy expects [N,K], got " + shape_str(logits.shape()));
  const Index N = logits.dim(0), K = logits.dim(1);
  check_targets(targets, N, K);

  Array probs(N * K);
  double total = 0.0;
  for (Index n = 0; n < N; ++n) {
    Eigen::Map<const Array> z(logits.data() + n * K, K);
    Eigen::Map<Array> p(probs.data() + n * K, K);
    const double zmax = z.maxCoeff();
    p = (z - zmax).exp();
    const double denom = p.sum();
    p /= denom;
    total += std::log(denom) - (z[targets[static_cast<std::size_t>(n)]] - zmax);
  }
  Tensor out = Tensor::scalar(total / static_cast<double>(N));

  Tape* tape;
  if (recording({&logits}, tape)) {
    const int zn = tape->node_of(logits);
    auto saved = std::make_shared<Array>(std::move(probs));
    std::vector<int> tgt(targets.begin(), targets.end());
    tape->emit(out, [=](Tape& tp, const Array& gy) {
      if (zn < 0) return;
      Array& gz = tp.grad_buffer(zn);
      const double w = gy[0] / static_cast<double>(N);
      for (Index n = 0; n < N; ++n) {
        Eigen::Map<const Array> p(saved->data() + n * K, K);
        Eigen::Map<Array> g(gz.data() + n * K, K);
        g += w * p;
        g[tgt[static_cast<std::size_t>(n)]] -= w;
      }
    });
  }
  return out;
}

Tensor binary_cross_entropy(const Tensor& logits, std::span<const int> targets) {
  if (logits.rank() != 2 || (logits.dim(1) != 1 && logits.dim(1) != 2))
    throw ConfigError("binary_cross_entropy expects [N,1] or [N,2] logits, got " +
                      shape_str(logits.shape()));
  const Index N = logits.dim(0), K = logits.dim(1);
  check_targets(targets, N, 2);

  // Effective single logit: z for [N,1], z1 - z0 for [N,2]; then the stable
  // max(z,0) - z*y + log1p(exp(-|z|)) form.
  Array z(N);
  for (Index n = 0; n < N; ++n)
    z[n] = (K == 1) ? logits.data()[n] : logits.data()[n * 2 + 1] - logits.data()[n * 2];
  double total = 0.0;
  for (Index n = 0; n < N; ++n) {
    const double y = static_cast<double>(targets[static_cast<std::size_t>(n)]);
    total += std::max(z[n], 0.0) - z[n] * y + std::log1p(std::exp(-std::abs(z[n])));
  }
  Tensor out = Tensor::scalar(total / static_cast<double>(N));

  Tape* tape;
  if (recording({&logits}, tape)) {
    const int zn = tape->node_of(logits);
    auto saved = std::make_shared<Array>(std::move(z));
    std::vector<int> tgt(targets.begin(), targets.end());
    tape->emit(out, [=](Tape& tp, const Array& gy) {
      if (zn < 0) return;
      Array& gz = tp.grad_buffer(zn);
      const double w = gy[0] / static_cast<double>(N);
      for (Index n = 0; n < N; ++n) {
        const double p = 1.0 / (1.0 + std::exp(-(*saved)[n]));
        const double d = w * (p - static_cast<double>(tgt[static_cast<std::size_t>(n)]));
        if (K == 1) {
          gz[n] += d;
        } else {
          gz[n * 2 + 1] += d;
          gz[n * 2] -= d;
        }
      }
    });
  }
  return out;
}

Tensor mse(const Tensor& p, const Tensor& q) {
  if (p.shape() != q.shape())
    throw ShapeError("mse shape mismatch: " + shape_str(p.shape()) + " vs " + shape_str(q.shape()));
  const Index n = p.size();
  Tensor out = Tensor::scalar((p.array() - q.array()).square().sum() / static_cast<double>(n));

  Tape* tape;
  if (recording({&p, &q}, tape)) {
    const int pn = tape->node_of(p);
    const int qn = tape->node_of(q);
    auto pd = p.impl();
    auto qd = q.impl();
    tape->emit(out, [=](Tape& tp, const Array& gy) {
      const Array d = (2.0 * gy[0] / static_cast<double>(n)) * (pd->values - qd->values);
      if (pn >= 0) tp.grad_buffer(pn) += d;
      if (qn >= 0) tp.grad_buffer(qn) -= d;
    });
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw ShapeError("add shape mismatch: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  Tensor out(a.shape());
  out.array() = a.array() + b.array();
  Tape* tape;
  if (recording({&a, &b}, tape)) {
    const int an = tape->node_of(a);
    const int bn = tape->node_of(b);
    tape->emit(out, [=](Tape& tp, const Array& gy) {
      tp.add_grad(an, gy);
      tp.add_grad(bn, gy);
    });
  }
  return out;
}

Tensor scale(const Tensor& x, double c) {
  Tensor out(x.shape());
  out.array() = c * x.array();
  Tape* tape;
  if (recording({&x}, tape)) {
    const int xn = tape->node_of(x);
    tape->emit(out, [=](Tape& tp, const Array& gy) {
      if (xn >= 0) tp.grad_buffer(xn) += c * gy;
    });
  }
  return out;
}

Tensor sum(const Tensor& x) {
  Tensor out = Tensor::scalar(x.array().sum());
  Tape* tape;
  if (recording({&x}, tape)) {
    const int xn = tape->node_of(x);
    tape->emit(out, [=](Tape& tp, const Array& gy) {
      if (xn >= 0) tp.grad_buffer(xn) += gy[0];
    });
  }
  return out;
}

Tensor reshape(const Tensor& x, std::vector<Index> new_shape) {
  if (numel(new_shape) != x.size())
    throw ShapeError("reshape from " + shape_str(x.shape()) + " to " + shape_str(new_shape) +
                     " changes element count");
  Tensor out(std::move(new_shape));
  out.array() = x.array();
  Tape* tape;
  if (recording({&x}, tape)) {
    const int xn = tape->node_of(x);
    tape->emit(out, [=](Tape& tp, const Array& gy) { tp.add_grad(xn, gy); });
  }
  return out;
}

}  // namespace alzhinet
