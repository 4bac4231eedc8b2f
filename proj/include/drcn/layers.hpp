#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "drcn/error.hpp"
#include "drcn/random.hpp"
#include "drcn/tensor.hpp"

// Layer kernels. Convolutions are lowered onto the single matmul kernel via
// im2col/col2im so every floating-point reduction in the network runs through
// one fixed-order accumulator — that is what makes whole training runs
// bit-reproducible for a given seed.

namespace drcn {

// ---------------------------------------------------------------------------
// parameter holders

struct ConvLayer {
  Tensor kernels;  // [out_ch, in_ch, kh, kw]
  Tensor bias;     // [out_ch]

  static ConvLayer he_init(std::size_t out_ch, std::size_t in_ch, std::size_t kh,
                           std::size_t kw, Rng& rng) {
    check_kernel(kh, kw);
    const double stddev = std::sqrt(2.0 / static_cast<double>(in_ch * kh * kw));
    return ConvLayer{rand_normal(rng, {out_ch, in_ch, kh, kw}, 0.0, stddev),
                     Tensor({out_ch})};
  }

  static void check_kernel(std::size_t kh, std::size_t kw) {
    if (kh % 2 == 0 || kw % 2 == 0 || kh == 0 || kw == 0) {
      throw ArgumentError("convolution kernels must have odd extent, got " +
                          std::to_string(kh) + "x" + std::to_string(kw));
    }
  }
};

// Decoder-side layer: maps [in_ch, h, w] up to [out_ch, h+kh-1, w+kw-1] as the
// exact adjoint of a valid convolution.
struct TransposedConvLayer {
  Tensor kernels;  // [in_ch, out_ch, kh, kw]
  Tensor bias;     // [out_ch]

  static TransposedConvLayer he_init(std::size_t in_ch, std::size_t out_ch,
                                     std::size_t kh, std::size_t kw, Rng& rng) {
    ConvLayer::check_kernel(kh, kw);
    const double stddev = std::sqrt(2.0 / static_cast<double>(in_ch * kh * kw));
    return TransposedConvLayer{rand_normal(rng, {in_ch, out_ch, kh, kw}, 0.0, stddev),
                               Tensor({out_ch})};
  }
};

struct DenseLayer {
  Tensor weights;  // [out, in]
  Tensor bias;     // [out]

  static DenseLayer he_init(std::size_t out, std::size_t in, Rng& rng) {
    const double stddev = std::sqrt(2.0 / static_cast<double>(in));
    return DenseLayer{rand_normal(rng, {out, in}, 0.0, stddev), Tensor({out})};
  }
};

// ---------------------------------------------------------------------------
// im2col machinery (shared by conv and its transpose)

namespace detail {

inline void check_batched_images(const Tensor& x, const char* who) {
  if (x.rank() != 4) {
    throw DimensionError(std::string(who) + " expects [batch, channels, h, w], got " +
                         shape_str(x.shape()));
  }
}

// Patches of x at every valid offset: rows ordered (b, i, j), columns (c, u, v).
inline Tensor im2col(const Tensor& x, std::size_t kh, std::size_t kw) {
  const std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (H < kh || W < kw) {
    throw DimensionError("input " + shape_str(x.shape()) + " is smaller than the " +
                         std::to_string(kh) + "x" + std::to_string(kw) + " kernel");
  }
  const std::size_t oh = H - kh + 1, ow = W - kw + 1;
  Tensor cols({B * oh * ow, C * kh * kw});
  const double* X = x.data().data();
  double* O = cols.data().data();
  std::size_t row = 0;
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t i = 0; i < oh; ++i)
      for (std::size_t j = 0; j < ow; ++j, ++row) {
        double* dst = O + row * (C * kh * kw);
        for (std::size_t c = 0; c < C; ++c) {
          const double* plane = X + ((b * C + c) * H + i) * W + j;
          for (std::size_t u = 0; u < kh; ++u) {
            const double* src = plane + u * W;
            for (std::size_t v = 0; v < kw; ++v) *dst++ = src[v];
          }
        }
      }
  return cols;
}

// Adjoint of im2col: scatter-add patch columns back into an image tensor.
inline Tensor col2im_add(const Tensor& cols, std::size_t B, std::size_t C, std::size_t H,
                         std::size_t W, std::size_t kh, std::size_t kw) {
  const std::size_t oh = H - kh + 1, ow = W - kw + 1;
  if (cols.dim(0) != B * oh * ow || cols.dim(1) != C * kh * kw) {
    throw DimensionError("col2im_add: column tensor " + shape_str(cols.shape()) +
                         " does not match target geometry");
  }
  Tensor x({B, C, H, W});
  const double* I = cols.data().data();
  double* X = x.data().data();
  std::size_t row = 0;
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t i = 0; i < oh; ++i)
      for (std::size_t j = 0; j < ow; ++j, ++row) {
        const double* src = I + row * (C * kh * kw);
        for (std::size_t c = 0; c < C; ++c) {
          double* plane = X + ((b * C + c) * H + i) * W + j;
          for (std::size_t u = 0; u < kh; ++u) {
            double* dst = plane + u * W;
            for (std::size_t v = 0; v < kw; ++v) dst[v] += *src++;
          }
        }
      }
  return x;
}

// [B,C,h,w] -> rows (b,i,j), cols c. Used to route batched maps through matmul.
inline Tensor channels_to_cols(const Tensor& x) {
  const std::size_t B = x.dim(0), C = x.dim(1), h = x.dim(2), w = x.dim(3);
  Tensor out({B * h * w, C});
  const double* X = x.data().data();
  double* O = out.data().data();
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c) {
      const double* plane = X + (b * C + c) * h * w;
      double* col = O + b * h * w * C + c;
      for (std::size_t s = 0; s < h * w; ++s) col[s * C] = plane[s];
    }
  return out;
}

inline Tensor cols_to_channels(const Tensor& cols, std::size_t B, std::size_t C,
                               std::size_t h, std::size_t w) {
  Tensor out({B, C, h, w});
  const double* I = cols.data().data();
  double* X = out.data().data();
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c) {
      double* plane = X + (b * C + c) * h * w;
      const double* col = I + b * h * w * C + c;
      for (std::size_t s = 0; s < h * w; ++s) plane[s] = col[s * C];
    }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// valid convolution, stride 1

inline Tensor conv2d_forward(const ConvLayer& layer, const Tensor& x) {
  detail::check_batched_images(x, "conv2d_forward");
  const std::size_t oc = layer.kernels.dim(0), ic = layer.kernels.dim(1);
  const std::size_t kh = layer.kernels.dim(2), kw = layer.kernels.dim(3);
  if (x.dim(1) != ic) {
    throw DimensionError("conv2d_forward: input has " + std::to_string(x.dim(1)) +
                         " channels, kernels expect " + std::to_string(ic));
  }
  const std::size_t B = x.dim(0), oh = x.dim(2) - kh + 1, ow = x.dim(3) - kw + 1;
  Tensor cols = detail::im2col(x, kh, kw);
  Tensor kt = transpose2d(layer.kernels.reshaped({oc, ic * kh * kw}));
  Tensor prod = matmul(cols, kt);  // [B*oh*ow, oc]
  Tensor y = detail::cols_to_channels(prod, B, oc, oh, ow);
  double* Y = y.data().data();
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t o = 0; o < oc; ++o) {
      const double bv = layer.bias[o];
      double* plane = Y + (b * oc + o) * oh * ow;
      for (std::size_t s = 0; s < oh * ow; ++s) plane[s] += bv;
    }
  return y;
}

struct ConvGrads {
  Tensor input;    // same shape as x
  Tensor kernels;  // same shape as layer.kernels
  Tensor bias;     // same shape as layer.bias
};

inline ConvGrads conv2d_backward(const ConvLayer& layer, const Tensor& x,
                                 const Tensor& grad_out) {
  detail::check_batched_images(x, "conv2d_backward");
  detail::check_batched_images(grad_out, "conv2d_backward");
  const std::size_t oc = layer.kernels.dim(0), ic = layer.kernels.dim(1);
  const std::size_t kh = layer.kernels.dim(2), kw = layer.kernels.dim(3);
  const std::size_t B = x.dim(0), H = x.dim(2), W = x.dim(3);
  const std::size_t oh = H - kh + 1, ow = W - kw + 1;
  if (grad_out.dim(0) != B || grad_out.dim(1) != oc || grad_out.dim(2) != oh ||
      grad_out.dim(3) != ow) {
    throw DimensionError("conv2d_backward: grad " + shape_str(grad_out.shape()) +
                         " does not match forward output geometry");
  }
  Tensor gcol = detail::channels_to_cols(grad_out);       // [B*oh*ow, oc]
  Tensor cols = detail::im2col(x, kh, kw);                // [B*oh*ow, ic*kh*kw]
  Tensor kflat = layer.kernels.reshaped({oc, ic * kh * kw});

  ConvGrads g{Tensor({B, ic, H, W}), Tensor({oc, ic, kh, kw}), Tensor({oc})};
  g.kernels = matmul(transpose2d(gcol), cols).reshaped({oc, ic, kh, kw});
  g.input = detail::col2im_add(matmul(gcol, kflat), B, ic, H, W, kh, kw);
  const double* G = grad_out.data().data();
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t o = 0; o < oc; ++o) {
      const double* plane = G + (b * oc + o) * oh * ow;
      double acc = 0;
      for (std::size_t s = 0; s < oh * ow; ++s) acc += plane[s];
      g.bias[o] += acc;
    }
  return g;
}

// ---------------------------------------------------------------------------
// transposed convolution (adjoint of valid conv; grows h,w by kernel-1)

inline Tensor tconv2d_forward(const TransposedConvLayer& layer, const Tensor& x) {
  detail::check_batched_images(x, "tconv2d_forward");
  const std::size_t ic = layer.kernels.dim(0), oc = layer.kernels.dim(1);
  const std::size_t kh = layer.kernels.dim(2), kw = layer.kernels.dim(3);
  if (x.dim(1) != ic) {
    throw DimensionError("tconv2d_forward: input has " + std::to_string(x.dim(1)) +
                         " channels, kernels expect " + std::to_string(ic));
  }
  const std::size_t B = x.dim(0), h = x.dim(2), w = x.dim(3);
  const std::size_t H = h + kh - 1, W = w + kw - 1;
  Tensor xcol = detail::channels_to_cols(x);                        // [B*h*w, ic]
  Tensor kflat = layer.kernels.reshaped({ic, oc * kh * kw});
  Tensor y = detail::col2im_add(matmul(xcol, kflat), B, oc, H, W, kh, kw);
  double* Y = y.data().data();
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t o = 0; o < oc; ++o) {
      const double bv = layer.bias[o];
      double* plane = Y + (b * oc + o) * H * W;
      for (std::size_t s = 0; s < H * W; ++s) plane[s] += bv;
    }
  return y;
}

struct TConvGrads {
  Tensor input;
  Tensor kernels;
  Tensor bias;
};

inline TConvGrads tconv2d_backward(const TransposedConvLayer& layer, const Tensor& x,
                                   const Tensor& grad_out) {
  detail::check_batched_images(x, "tconv2d_backward");
  detail::check_batched_images(grad_out, "tconv2d_backward");
  const std::size_t ic = layer.kernels.dim(0), oc = layer.kernels.dim(1);
  const std::size_t kh = layer.kernels.dim(2), kw = layer.kernels.dim(3);
  const std::size_t B = x.dim(0), h = x.dim(2), w = x.dim(3);
  const std::size_t H = h + kh - 1, W = w + kw - 1;
  if (grad_out.dim(0) != B || grad_out.dim(1) != oc || grad_out.dim(2) != H ||
      grad_out.dim(3) != W) {
    throw DimensionError("tconv2d_backward: grad " + shape_str(grad_out.shape()) +
                         " does not match forward output geometry");
  }
  Tensor gcols = detail::im2col(grad_out, kh, kw);  // [B*h*w, oc*kh*kw]
  Tensor xcol = detail::channels_to_cols(x);        // [B*h*w, ic]
  Tensor kflat = layer.kernels.reshaped({ic, oc * kh * kw});

  TConvGrads g{Tensor({B, ic, h, w}), Tensor({ic, oc, kh, kw}), Tensor({oc})};
  g.input = detail::cols_to_channels(matmul(gcols, transpose2d(kflat)), B, ic, h, w);
  g.kernels = matmul(transpose2d(xcol), gcols).reshaped({ic, oc, kh, kw});
  const double* G = grad_out.data().data();
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t o = 0; o < oc; ++o) {
      const double* plane = G + (b * oc + o) * H * W;
      double acc = 0;
      for (std::size_t s = 0; s < H * W; ++s) acc += plane[s];
      g.bias[o] += acc;
    }
  return g;
}

// ---------------------------------------------------------------------------
// 2x2 max pooling, stride 2; switches recorded for the backward pass

struct PoolSwitches {
  IndexTensor argmax;                    // flat index into the pool input
  std::vector<std::size_t> input_shape;  // [B,C,H,W] of the forward input
};

struct PoolResult {
  Tensor output;
  PoolSwitches switches;
};

inline PoolResult maxpool2_forward(const Tensor& x) {
  detail::check_batched_images(x, "maxpool2_forward");
  const std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (H % 2 != 0 || W % 2 != 0) {
    throw DimensionError("maxpool2_forward needs even spatial dims, got " +
                         shape_str(x.shape()));
  }
  const std::size_t oh = H / 2, ow = W / 2;
  PoolResult r{Tensor({B, C, oh, ow}), {IndexTensor({B, C, oh, ow}), x.shape()}};
  const double* X = x.data().data();
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c) {
      const std::size_t base = (b * C + c) * H * W;
      for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j) {
          // Ties resolve to the first element in row-major window order.
          std::size_t best = base + (2 * i) * W + 2 * j;
          double bv = X[best];
          const std::size_t cand[3] = {best + 1, best + W, best + W + 1};
          for (std::size_t k = 0; k < 3; ++k) {
            if (X[cand[k]] > bv) {
              bv = X[cand[k]];
              best = cand[k];
            }
          }
          r.output(b, c, i, j) = bv;
          r.switches.argmax(b, c, i, j) = static_cast<std::int64_t>(best);
        }
    }
  return r;
}

inline Tensor maxpool2_backward(const PoolSwitches& sw, const Tensor& grad_out) {
  detail::check_batched_images(grad_out, "maxpool2_backward");
  Tensor gx(sw.input_shape);
  if (grad_out.size() != sw.argmax.size()) {
    throw DimensionError("maxpool2_backward: grad " + shape_str(grad_out.shape()) +
                         " does not match recorded switches");
  }
  for (std::size_t i = 0; i < grad_out.size(); ++i) {
    gx[static_cast<std::size_t>(sw.argmax[i])] += grad_out[i];
  }
  return gx;
}

// ---------------------------------------------------------------------------
// 2x unpooling by duplication: each value fills its 2x2 block

inline Tensor unpool2_forward(const Tensor& x) {
  detail::check_batched_images(x, "unpool2_forward");
  const std::size_t B = x.dim(0), C = x.dim(1), h = x.dim(2), w = x.dim(3);
  Tensor y({B, C, 2 * h, 2 * w});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j) {
          const double v = x(b, c, i, j);
          y(b, c, 2 * i, 2 * j) = v;
          y(b, c, 2 * i, 2 * j + 1) = v;
          y(b, c, 2 * i + 1, 2 * j) = v;
          y(b, c, 2 * i + 1, 2 * j + 1) = v;
        }
  return y;
}

inline Tensor unpool2_backward(const Tensor& grad_out) {
  detail::check_batched_images(grad_out, "unpool2_backward");
  const std::size_t B = grad_out.dim(0), C = grad_out.dim(1);
  const std::size_t H = grad_out.dim(2), W = grad_out.dim(3);
  if (H % 2 != 0 || W % 2 != 0) {
    throw DimensionError("unpool2_backward needs even spatial dims, got " +
                         shape_str(grad_out.shape()));
  }
  Tensor gx({B, C, H / 2, W / 2});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t i = 0; i < H / 2; ++i)
        for (std::size_t j = 0; j < W / 2; ++j) {
          gx(b, c, i, j) = grad_out(b, c, 2 * i, 2 * j) + grad_out(b, c, 2 * i, 2 * j + 1) +
                           grad_out(b, c, 2 * i + 1, 2 * j) +
                           grad_out(b, c, 2 * i + 1, 2 * j + 1);
        }
  return gx;
}

// ---------------------------------------------------------------------------
// dense

inline Tensor dense_forward(const DenseLayer& layer, const Tensor& x) {
  if (x.rank() != 2 || x.dim(1) != layer.weights.dim(1)) {
    throw DimensionError("dense_forward: input " + shape_str(x.shape()) +
                         " does not match weights " + shape_str(layer.weights.shape()));
  }
  Tensor y = matmul(x, transpose2d(layer.weights));  // [B, out]
  const std::size_t B = y.dim(0), out = y.dim(1);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t o = 0; o < out; ++o) y(b, o) += layer.bias[o];
  return y;
}

struct DenseGrads {
  Tensor input;
  Tensor weights;
  Tensor bias;
};

inline DenseGrads dense_backward(const DenseLayer& layer, const Tensor& x,
                                 const Tensor& grad_out) {
  if (grad_out.rank() != 2 || grad_out.dim(0) != x.dim(0) ||
      grad_out.dim(1) != layer.weights.dim(0)) {
    throw DimensionError("dense_backward: grad " + shape_str(grad_out.shape()) +
                         " does not match layer geometry");
  }
  DenseGrads g{matmul(grad_out, layer.weights), matmul(transpose2d(grad_out), x),
               Tensor({layer.bias.dim(0)})};
  for (std::size_t b = 0; b < grad_out.dim(0); ++b)
    for (std::size_t o = 0; o < grad_out.dim(1); ++o) g.bias[o] += grad_out(b, o);
  return g;
}

// ---------------------------------------------------------------------------
// activations

inline Tensor relu(const Tensor& x) {
  return map_elementwise(x, [](double v) { return v > 0 ? v : 0.0; });
}

// Gradient gate uses the pre-activation; the kink at 0 passes zero.
inline Tensor relu_backward(const Tensor& pre, const Tensor& grad_out) {
  if (!pre.same_shape(grad_out)) {
    throw DimensionError("relu_backward shapes disagree: " + shape_str(pre.shape()) +
                         " vs " + shape_str(grad_out.shape()));
  }
  Tensor g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!(pre[i] > 0)) g[i] = 0.0;
  }
  return g;
}

// Row-wise softmax with max-shift; logits [B, m], m >= 2.
inline Tensor softmax(const Tensor& logits) {
  if (logits.rank() != 2 || logits.dim(1) < 2) {
    throw DimensionError("softmax expects [batch, classes>=2], got " +
                         shape_str(logits.shape()));
  }
  const std::size_t B = logits.dim(0), m = logits.dim(1);
  Tensor p = logits;
  for (std::size_t b = 0; b < B; ++b) {
    double mx = p(b, std::size_t{0});
    for (std::size_t j = 1; j < m; ++j) mx = std::max(mx, p(b, j));
    double sum = 0;
    for (std::size_t j = 0; j < m; ++j) {
      p(b, j) = std::exp(p(b, j) - mx);
      sum += p(b, j);
    }
    for (std::size_t j = 0; j < m; ++j) p(b, j) /= sum;
  }
  return p;
}

// ---------------------------------------------------------------------------
// inverted dropout

struct DropoutResult {
  Tensor output;
  Tensor mask;  // elements are 0 or 1/p_keep
};

inline DropoutResult dropout_forward(const Tensor& x, double p_keep, Rng& rng) {
  if (!(p_keep > 0.0 && p_keep <= 1.0)) {
    throw ArgumentError("dropout p_keep must lie in (0,1], got " + std::to_string(p_keep));
  }
  DropoutResult r{x, Tensor(x.shape())};
  const double inv = 1.0 / p_keep;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double m = rng.uniform() < p_keep ? inv : 0.0;
    r.mask[i] = m;
    r.output[i] = x[i] * m;
  }
  return r;
}

inline Tensor dropout_backward(const Tensor& mask, const Tensor& grad_out) {
  if (!mask.same_shape(grad_out)) {
    throw DimensionError("dropout_backward shapes disagree");
  }
  Tensor g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i) g[i] *= mask[i];
  return g;
}

}  // namespace drcn
