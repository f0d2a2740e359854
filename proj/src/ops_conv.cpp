#include "alzhinet/errors.hpp"
#include "alzhinet/ops.hpp"
#include "alzhinet/parallel.hpp"

#include <Eigen/Dense>

#include <cstring>

namespace alzhinet {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRow = Eigen::Map<RowMat>;
using MapRowC = Eigen::Map<const RowMat>;

Index conv_out_extent(Index in, Index k, Index stride, Index padding) {
  return (in + 2 * padding - k) / stride + 1;
}

namespace {

bool recording(std::initializer_list<const Tensor*> inputs, Tape*& tape) {
  tape = Tape::current();
  if (!tape) return false;
  for (const Tensor* t : inputs)
    if (t && tape->tracks(*t)) return true;
  return false;
}

void check_conv_args(int stride, int padding) {
  if (stride < 1) throw ParamError("conv stride must be >= 1, got " + std::to_string(stride));
  if (padding < 0) throw ParamError("conv padding must be >= 0, got " + std::to_string(padding));
}

// Per-thread scratch for the patch matrices; sizes are stable within a
// training run so this allocates once per worker.
double* scratch(int slot, Index size) {
  thread_local Array buffers[2];
  Array& buf = buffers[slot];
  if (buf.size() < size) buf.resize(size);
  return buf.data();
}

// One output row span of the patch matrix: every tap offset contributes a
// contiguous (stride 1) or strided run over the output width. `fill` copies
// input values into the row; `drain` scatter-adds row gradients back.
struct TapRow {
  const double* src_base;  // input plane row start (possibly out of range)
  Index x0;                // input x of output column 0
};

// Patch matrix layout: rows indexed by (channel, tap offsets), columns by
// output position; row-major, so each (plane row, tap) pair is one segment.
template <bool kDrain>
void row_segment(double* col_row, double* x_row, Index W, Index Wo, Index stride, Index x0) {
  if (stride == 1) {
    const Index lead = std::min(Wo, std::max<Index>(0, -x0));         // taps left of the image
    const Index valid_end = std::min(Wo, W - x0);                     // first out-of-range column
    const Index valid = std::max<Index>(0, valid_end - lead);
    if constexpr (kDrain) {
      if (valid > 0)
        Eigen::Map<Array>(x_row + x0 + lead, valid) +=
            Eigen::Map<const Array>(col_row + lead, valid);
    } else {
      if (lead > 0) std::memset(col_row, 0, static_cast<std::size_t>(lead) * sizeof(double));
      if (valid > 0)
        std::memcpy(col_row + lead, x_row + x0 + lead, static_cast<std::size_t>(valid) * sizeof(double));
      if (Wo - lead - valid > 0)
        std::memset(col_row + lead + valid, 0,
                    static_cast<std::size_t>(Wo - lead - valid) * sizeof(double));
    }
  } else {
    for (Index ox = 0; ox < Wo; ++ox) {
      const Index x = x0 + ox * stride;
      if constexpr (kDrain) {
        if (x >= 0 && x < W) x_row[x] += col_row[ox];
      } else {
        col_row[ox] = (x >= 0 && x < W) ? x_row[x] : 0.0;
      }
    }
  }
}

// kDrain=false: build the patch matrix from x. kDrain=true: scatter-add the
// patch matrix into x (which then holds gradients).
template <bool kDrain>
void patch_pass_2d(double* x, Index C, Index H, Index W, Index kh, Index kw, Index stride,
                   Index pad, Index Ho, Index Wo, double* col) {
  for (Index c = 0; c < C; ++c)
    for (Index i = 0; i < kh; ++i)
      for (Index j = 0; j < kw; ++j) {
        double* col_base = col + (((c * kh) + i) * kw + j) * (Ho * Wo);
        for (Index oy = 0; oy < Ho; ++oy) {
          const Index y = oy * stride - pad + i;
          double* col_row = col_base + oy * Wo;
          if (y < 0 || y >= H) {
            if constexpr (!kDrain)
              std::memset(col_row, 0, static_cast<std::size_t>(Wo) * sizeof(double));
            continue;
          }
          row_segment<kDrain>(col_row, x + (c * H + y) * W, W, Wo, stride, j - pad);
        }
      }
}

template <bool kDrain>
void patch_pass_3d(double* x, Index C, Index D, Index H, Index W, Index kd, Index kh, Index kw,
                   Index stride, Index pad, Index Do, Index Ho, Index Wo, double* col) {
  for (Index c = 0; c < C; ++c)
    for (Index a = 0; a < kd; ++a)
      for (Index i = 0; i < kh; ++i)
        for (Index j = 0; j < kw; ++j) {
          double* col_base = col + ((((c * kd) + a) * kh + i) * kw + j) * (Do * Ho * Wo);
          for (Index od = 0; od < Do; ++od) {
            const Index d = od * stride - pad + a;
            for (Index oy = 0; oy < Ho; ++oy) {
              double* col_row = col_base + (od * Ho + oy) * Wo;
              const Index y = oy * stride - pad + i;
              if (d < 0 || d >= D || y < 0 || y >= H) {
                if constexpr (!kDrain)
                  std::memset(col_row, 0, static_cast<std::size_t>(Wo) * sizeof(double));
                continue;
              }
              row_segment<kDrain>(col_row, x + ((c * D + d) * H + y) * W, W, Wo, stride, j - pad);
            }
          }
        }
}

Tensor conv2d_impl(const Tensor& input, const Tensor& weight, const Tensor* bias, int stride,
                   int padding) {
  check_conv_args(stride, padding);
  if (input.rank() != 4) throw ShapeError("conv2d input must be [N,C,H,W], got " + shape_str(input.shape()));
  if (weight.rank() != 4) throw ShapeError("conv2d weight must be [O,C,kh,kw], got " + shape_str(weight.shape()));
  const Index N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  const Index O = weight.dim(0), kh = weight.dim(2), kw = weight.dim(3);
  if (weight.dim(1) != C)
    throw ShapeError("conv2d channel mismatch: input has " + std::to_string(C) + ", weight expects " +
                     std::to_string(weight.dim(1)));
  if (bias && (bias->rank() != 1 || bias->dim(0) != O))
    throw ShapeError("conv2d bias must be [O]");
  if (kh > H + 2 * padding || kw > W + 2 * padding)
    throw ShapeError("conv2d kernel larger than padded input");
  const Index Ho = conv_out_extent(H, kh, stride, padding);
  const Index Wo = conv_out_extent(W, kw, stride, padding);
  if (Ho < 1 || Wo < 1) throw ShapeError("conv2d output would be empty");

  const Index K = C * kh * kw, P = Ho * Wo;
  Tensor out({N, O, Ho, Wo});
  MapRowC wmat(weight.data(), O, K);

  parallel_for(static_cast<std::size_t>(N), [&](std::size_t n) {
    double* col = scratch(0, K * P);
    patch_pass_2d<false>(const_cast<double*>(input.data()) + static_cast<Index>(n) * C * H * W, C,
                         H, W, kh, kw, stride, padding, Ho, Wo, col);
    MapRow outn(out.data() + static_cast<Index>(n) * O * P, O, P);
    outn.noalias() = wmat * MapRowC(col, K, P);
    if (bias)
      for (Index o = 0; o < O; ++o) outn.row(o).array() += bias->data()[o];
  });

  Tape* tape;
  if (recording({&input, &weight, bias}, tape)) {
    const int xn = tape->node_of(input);
    const int wn = tape->node_of(weight);
    const int bn = bias ? tape->node_of(*bias) : -1;
    auto xd = input.impl();
    tape->emit(out, [=](Tape& tp, const Array& gy) {
      std::vector<Array> gx_parts, gw_parts;
      if (xn >= 0) gx_parts.assign(static_cast<std::size_t>(N), Array());
      if (wn >= 0) gw_parts.assign(static_cast<std::size_t>(N), Array());
      parallel_for(static_cast<std::size_t>(N), [&](std::size_t n) {
        MapRowC gyn(gy.data() + static_cast<Index>(n) * O * P, O, P);
        if (wn >= 0) {
          double* col = scratch(0, K * P);
          patch_pass_2d<false>(xd->values.data() + static_cast<Index>(n) * C * H * W, C, H, W, kh,
                               kw, stride, padding, Ho, Wo, col);
          gw_parts[n] = Array::Zero(O * K);
          MapRow gwn(gw_parts[n].data(), O, K);
          gwn.noalias() = gyn * MapRowC(col, K, P).transpose();
        }
        if (xn >= 0) {
          double* gcol = scratch(1, K * P);
          MapRow(gcol, K, P).noalias() = wmat.transpose() * gyn;
          gx_parts[n] = Array::Zero(C * H * W);
          patch_pass_2d<true>(gx_parts[n].data(), C, H, W, kh, kw, stride, padding, Ho, Wo, gcol);
        }
      });
      if (xn >= 0) {
        Array& gx = tp.grad_buffer(xn);
        for (Index n = 0; n < N; ++n)
          gx.segment(n * C * H * W, C * H * W) += gx_parts[static_cast<std::size_t>(n)];
      }
      if (wn >= 0) {
        Array& gw = tp.grad_buffer(wn);
        for (Index n = 0; n < N; ++n) gw += gw_parts[static_cast<std::size_t>(n)];
      }
      if (bn >= 0) {
        Array& gb = tp.grad_buffer(bn);
        for (Index n = 0; n < N; ++n) {
          MapRowC gyn(gy.data() + n * O * P, O, P);
          for (Index o = 0; o < O; ++o) gb[o] += gyn.row(o).sum();
        }
      }
    });
  }
  return out;
}

Tensor conv3d_impl(const Tensor& input, const Tensor& weight, const Tensor* bias, int stride,
                   int padding) {
  check_conv_args(stride, padding);
  if (input.rank() != 5) throw ShapeError("conv3d input must be [N,C,D,H,W], got " + shape_str(input.shape()));
  if (weight.rank() != 5) throw ShapeError("conv3d weight must be [O,C,kd,kh,kw], got " + shape_str(weight.shape()));
  const Index N = input.dim(0), C = input.dim(1), D = input.dim(2), H = input.dim(3), W = input.dim(4);
  const Index O = weight.dim(0), kd = weight.dim(2), kh = weight.dim(3), kw = weight.dim(4);
  if (weight.dim(1) != C)
    throw ShapeError("conv3d channel mismatch: input has " + std::to_string(C) + ", weight expects " +
                     std::to_string(weight.dim(1)));
  if (bias && (bias->rank() != 1 || bias->dim(0) != O))
    throw ShapeError("conv3d bias must be [O]");
  if (kd > D + 2 * padding || kh > H + 2 * padding || kw > W + 2 * padding)
    throw ShapeError("conv3d kernel larger than padded input");
  const Index Do = conv_out_extent(D, kd, stride, padding);
  const Index Ho = conv_out_extent(H, kh, stride, padding);
  const Index Wo = conv_out_extent(W, kw, stride, padding);
  if (Do < 1 || Ho < 1 || Wo < 1) throw ShapeError("conv3d output would be empty");

  const Index K = C * kd * kh * kw, P = Do * Ho * Wo;
  Tensor out({N, O, Do, Ho, Wo});
  MapRowC wmat(weight.data(), O, K);

  parallel_for(static_cast<std::size_t>(N), [&](std::size_t n) {
    double* col = scratch(0, K * P);
    patch_pass_3d<false>(const_cast<double*>(input.data()) + static_cast<Index>(n) * C * D * H * W,
                         C, D, H, W, kd, kh, kw, stride, padding, Do, Ho, Wo, col);
    MapRow outn(out.data() + static_cast<Index>(n) * O * P, O, P);
    outn.noalias() = wmat * MapRowC(col, K, P);
    if (bias)
      for (Index o = 0; o < O; ++o) outn.row(o).array() += bias->data()[o];
  });

  Tape* tape;
  if (recording({&input, &weight, bias}, tape)) {
    const int xn = tape->node_of(input);
    const int wn = tape->node_of(weight);
    const int bn = bias ? tape->node_of(*bias) : -1;
    auto xd = input.impl();
    tape->emit(out, [=](Tape& tp, const Array& gy) {
      std::vector<Array> gx_parts, gw_parts;
      if (xn >= 0) gx_parts.assign(static_cast<std::size_t>(N), Array());
      if (wn >= 0) gw_parts.assign(static_cast<std::size_t>(N), Array());
      parallel_for(static_cast<std::size_t>(N), [&](std::size_t n) {
        MapRowC gyn(gy.data() + static_cast<Index>(n) * O * P, O, P);
        if (wn >= 0) {
          double* col = scratch(0, K * P);
          patch_pass_3d<false>(xd->values.data() + static_cast<Index>(n) * C * D * H * W, C, D, H,
                               W, kd, kh, kw, stride, padding, Do, Ho, Wo, col);
          gw_parts[n] = Array::Zero(O * K);
          MapRow gwn(gw_parts[n].data(), O, K);
          gwn.noalias() = gyn * MapRowC(col, K, P).transpose();
        }
        if (xn >= 0) {
          double* gcol = scratch(1, K * P);
          MapRow(gcol, K, P).noalias() = wmat.transpose() * gyn;
          gx_parts[n] = Array::Zero(C * D * H * W);
          patch_pass_3d<true>(gx_parts[n].data(), C, D, H, W, kd, kh, kw, stride, padding, Do, Ho,
                              Wo, gcol);
        }
      });
      if (xn >= 0) {
        Array& gx = tp.grad_buffer(xn);
        for (Index n = 0; n < N; ++n)
          gx.segment(n * C * D * H * W, C * D * H * W) += gx_parts[static_cast<std::size_t>(n)];
      }
      if (wn >= 0) {
        Array& gw = tp.grad_buffer(wn);
        for (Index n = 0; n < N; ++n) gw += gw_parts[static_cast<std::size_t>(n)];
      }
      if (bn >= 0) {
        Array& gb = tp.grad_buffer(bn);
        for (Index n = 0; n < N; ++n) {
          MapRowC gyn(gy.data() + n * O * P, O, P);
          for (Index o = 0; o < O; ++o) gb[o] += gyn.row(o).sum();
        }
      }
    });
  }
  return out;
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride,
              int padding) {
  return conv2d_impl(input, weight, &bias, stride, padding);
}

Tensor conv2d(const Tensor& input, const Tensor& weight, int stride, int padding) {
  return conv2d_impl(input, weight, nullptr, stride, padding);
}

Tensor conv3d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride,
              int padding) {
  return conv3d_impl(input, weight, &bias, stride, padding);
}

Tensor conv3d(const Tensor& input, const Tensor& weight, int stride, int padding) {
  return conv3d_impl(input, weight, nullptr, stride, padding);
}

Tensor avg_pool(const Tensor& input, int kernel) {
  if (kernel <= 0) throw ParamError("avg_pool kernel must be positive, got " + std::to_string(kernel));
  const Index rank = input.rank();
  if (rank != 4 && rank != 5)
    throw ShapeError("avg_pool expects [N,C,H,W] or [N,C,D,H,W], got " + shape_str(input.shape()));
  const Index k = kernel;
  const Index spatial_dims = rank - 2;
  std::vector<Index> out_shape = {input.dim(0), input.dim(1)};
  for (Index d = 0; d < spatial_dims; ++d) {
    const Index in_ext = input.dim(2 + d);
    if (in_ext < k) throw ShapeError("avg_pool extent " + std::to_string(in_ext) + " < kernel");
    out_shape.push_back(in_ext / k);
  }
  Tensor out(out_shape);

  const Index NC = input.dim(0) * input.dim(1);
  const Index D = (rank == 5) ? input.dim(2) : 1;
  const Index H = input.dim(rank - 2), W = input.dim(rank - 1);
  const Index Do = (rank == 5) ? D / k : 1;
  const Index Ho = H / k, Wo = W / k;
  const Index kd = (rank == 5) ? k : 1;
  const double window = static_cast<double>(kd * k * k);

  for (Index nc = 0; nc < NC; ++nc) {
    const double* src = input.data() + nc * D * H * W;
    double* dst = out.data() + nc * Do * Ho * Wo;
    for (Index od = 0; od < Do; ++od)
      for (Index oy = 0; oy < Ho; ++oy)
        for (Index ox = 0; ox < Wo; ++ox) {
          double acc = 0.0;
          for (Index a = 0; a < kd; ++a)
            for (Index i = 0; i < k; ++i)
              for (Index j = 0; j < k; ++j)
                acc += src[((od * k + a) * H + oy * k + i) * W + ox * k + j];
          dst[(od * Ho + oy) * Wo + ox] = acc / window;
        }
  }

  Tape* tape;
  if (recording({&input}, tape)) {
    const int xn = tape->node_of(input);
    tape->emit(out, [=](Tape& tp, const Array& gy) {
      if (xn < 0) return;
      Array& gx = tp.grad_buffer(xn);
      for (Index nc = 0; nc < NC; ++nc) {
        const double* g = gy.data() + nc * Do * Ho * Wo;
        double* dst = gx.data() + nc * D * H * W;
        for (Index od = 0; od < Do; ++od)
          for (Index oy = 0; oy < Ho; ++oy)
            for (Index ox = 0; ox < Wo; ++ox) {
              const double share = g[(od * Ho + oy) * Wo + ox] / window;
              for (Index a = 0; a < kd; ++a)
                for (Index i = 0; i < k; ++i)
                  for (Index j = 0; j < k; ++j)
                    dst[((od * k + a) * H + oy * k + i) * W + ox * k + j] += share;
            }
      }
    });
  }
  return out;
}

Tensor adaptive_avg_pool_to_one(const Tensor& input) {
  const Index rank = input.rank();
  if (rank < 3) throw ShapeError("adaptive_avg_pool_to_one expects [N,C,spatial...], got " +
                                 shape_str(input.shape()));
  const Index N = input.dim(0), C = input.dim(1);
  Index S = 1;
  std::vector<Index> out_shape = {N, C};
  for (Index d = 2; d < rank; ++d) {
    S *= input.dim(d);
    out_shape.push_back(1);
  }
  Tensor out(out_shape);
  for (Index nc = 0; nc < N * C; ++nc)
    out.data()[nc] = Eigen::Map<const Array>(input.data() + nc * S, S).mean();

  Tape* tape;
  if (recording({&input}, tape)) {
    const int xn = tape->node_of(input);
    const double inv = 1.0 / static_cast<double>(S);
    tape->emit(out, [=](Tape& tp, const Array& gy) {
      if (xn < 0) return;
      Array& gx = tp.grad_buffer(xn);
      for (Index nc = 0; nc < N * C; ++nc)
        Eigen::Map<Array>(gx.data() + nc * S, S) += gy[nc] * inv;
    });
  }
  return out;
}

}  // namespace alzhinet
