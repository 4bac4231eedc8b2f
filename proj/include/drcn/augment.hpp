#pragma once

#include <cmath>
#include <string>

#include "drcn/error.hpp"
#include "drcn/random.hpp"
#include "drcn/tensor.hpp"

// Stochastic input corruption Q(x_tilde | x). Two consumers with different
// recipes: supervised augmentation uses the geometric family only, while
// denoising corruption chains geometric -> zero-mask -> additive Gaussian.
// The clean image is always the learning target; corruption never mutates
// its input.

namespace drcn {

struct NoiseConfig {
  bool geometric = true;
  int translate_px = 2;       // +/- integer pixel shift per axis
  double rotate_deg = 15.0;   // +/- rotation
  double skew = 0.1;          // +/- horizontal shear coefficient
  double scale_min = 0.85;    // multiplicative zoom range, must straddle 1
  double scale_max = 1.15;

  bool zero_mask = true;
  double zero_mask_fraction = 0.25;

  bool gaussian = true;
  double gaussian_std = 0.1;

  void validate() const {
    if (translate_px < 0) throw ArgumentError("noise: translate_px must be >= 0");
    if (rotate_deg < 0) throw ArgumentError("noise: rotate_deg must be >= 0");
    if (skew < 0) throw ArgumentError("noise: skew must be >= 0");
    if (!(scale_min > 0)) throw ArgumentError("noise: scale_min must be > 0");
    if (!(scale_min <= 1.0 && 1.0 <= scale_max)) {
      throw ArgumentError("noise: scale range [" + std::to_string(scale_min) + ", " +
                          std::to_string(scale_max) + "] must contain 1");
    }
    if (!(zero_mask_fraction >= 0 && zero_mask_fraction < 1)) {
      throw ArgumentError("noise: zero_mask_fraction must lie in [0,1)");
    }
    if (gaussian_std < 0) throw ArgumentError("noise: gaussian_std must be >= 0");
  }
};

// One draw from the geometric family. Ranges are symmetric about the
// identity, so shrinking every range to zero reproduces inputs bitwise.
struct AffineSample {
  double dx = 0, dy = 0;   // integer-valued translations
  double theta_deg = 0;
  double shear = 0;
  double scale = 1;

  bool is_identity() const {
    return dx == 0 && dy == 0 && theta_deg == 0 && shear == 0 && scale == 1;
  }
};

// Draw order is fixed: dx, dy, angle, shear, scale.
inline AffineSample sample_geometric(const NoiseConfig& cfg, Rng& rng) {
  AffineSample s;
  s.dx = static_cast<double>(rng.uniform_int(-cfg.translate_px, cfg.translate_px));
  s.dy = static_cast<double>(rng.uniform_int(-cfg.translate_px, cfg.translate_px));
  s.theta_deg = rng.uniform(-cfg.rotate_deg, cfg.rotate_deg);
  s.shear = rng.uniform(-cfg.skew, cfg.skew);
  s.scale = rng.uniform(cfg.scale_min, cfg.scale_max);
  return s;
}

// Row 0 maps output (x,y) to source x, row 1 to source y.
struct AffineCoeffs {
  double m00 = 1, m01 = 0, m02 = 0;
  double m10 = 0, m11 = 1, m12 = 0;
};

namespace detail {

struct Mat3 {
  double a[9];
};

inline Mat3 mat3_identity() { return {{1, 0, 0, 0, 1, 0, 0, 0, 1}}; }

inline Mat3 mat3_mul(const Mat3& l, const Mat3& r) {
  Mat3 out{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double acc = 0;
      for (int k = 0; k < 3; ++k) acc += l.a[i * 3 + k] * r.a[k * 3 + j];
      out.a[i * 3 + j] = acc;
    }
  return out;
}

inline Mat3 mat3_translate(double tx, double ty) {
  return {{1, 0, tx, 0, 1, ty, 0, 0, 1}};
}

}  // namespace detail

// Inverse (output -> source) map for the sampled transform, composed about
// the image center. Built directly from the inverses of each factor so a
// pure integer translation inverts exactly.
inline AffineCoeffs affine_inverse_coeffs(const AffineSample& s, std::size_t height,
                                          std::size_t width) {
  using detail::Mat3;
  const double cx = (static_cast<double>(width) - 1.0) / 2.0;
  const double cy = (static_cast<double>(height) - 1.0) / 2.0;
  const double th = -s.theta_deg * 3.14159265358979323846 / 180.0;
  const double c = std::cos(th), sn = std::sin(th);

  // forward = center . translate . rotate . shear . scale . uncenter
  // inverse = center . scale^-1 . shear^-1 . rotate^-1 . translate^-1 . uncenter
  const Mat3 rot{{c, -sn, 0, sn, c, 0, 0, 0, 1}};
  const Mat3 unshear{{1, -s.shear, 0, 0, 1, 0, 0, 0, 1}};
  const double inv = 1.0 / s.scale;
  const Mat3 unscale{{inv, 0, 0, 0, inv, 0, 0, 0, 1}};

  Mat3 m = detail::mat3_translate(cx, cy);
  m = detail::mat3_mul(m, unscale);
  m = detail::mat3_mul(m, unshear);
  m = detail::mat3_mul(m, rot);
  m = detail::mat3_mul(m, detail::mat3_translate(-s.dx, -s.dy));
  m = detail::mat3_mul(m, detail::mat3_translate(-cx, -cy));
  return AffineCoeffs{m.a[0], m.a[1], m.a[2], m.a[3], m.a[4], m.a[5]};
}

// Bilinear resampling of a [channels, h, w] image under an output->source
// map; source locations outside the frame contribute background zero.
inline Tensor warp_bilinear(const Tensor& image, const AffineCoeffs& m) {
  if (image.rank() != 3) {
    throw DimensionError("warp_bilinear expects [channels, h, w], got " +
                         shape_str(image.shape()));
  }
  const std::size_t C = image.dim(0), H = image.dim(1), W = image.dim(2);
  Tensor out({C, H, W});
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x) {
      const double fx = static_cast<double>(x), fy = static_cast<double>(y);
      const double sx = m.m00 * fx + m.m01 * fy + m.m02;
      const double sy = m.m10 * fx + m.m11 * fy + m.m12;
      const double x0f = std::floor(sx), y0f = std::floor(sy);
      const double wx = sx - x0f, wy = sy - y0f;
      const long x0 = static_cast<long>(x0f), y0 = static_cast<long>(y0f);
      const double w00 = (1 - wx) * (1 - wy), w01 = wx * (1 - wy);
      const double w10 = (1 - wx) * wy, w11 = wx * wy;
      for (std::size_t ch = 0; ch < C; ++ch) {
        double acc = 0;
        auto tap = [&](long yy, long xx, double w) {
          if (w != 0 && yy >= 0 && xx >= 0 && yy < static_cast<long>(H) &&
              xx < static_cast<long>(W)) {
            acc += w * image(ch, static_cast<std::size_t>(yy), static_cast<std::size_t>(xx));
          }
        };
        tap(y0, x0, w00);
        tap(y0, x0 + 1, w01);
        tap(y0 + 1, x0, w10);
        tap(y0 + 1, x0 + 1, w11);
        out(ch, y, x) = acc;
      }
    }
  return out;
}

// Supervised-pipeline augmentation: the geometric family only.
inline Tensor augment_geometric(const Tensor& image, const NoiseConfig& cfg, Rng& rng) {
  cfg.validate();
  if (!cfg.geometric) return image;
  const AffineSample s = sample_geometric(cfg, rng);
  if (s.is_identity()) return image;  // bitwise no-op when every range is zero
  return warp_bilinear(image, affine_inverse_coeffs(s, image.dim(1), image.dim(2)));
}

// Denoising corruption: geometric, then zero-mask, then additive Gaussian.
inline Tensor corrupt_for_denoising(const Tensor& image, const NoiseConfig& cfg,
                                    Rng& rng) {
  cfg.validate();
  Tensor out = augment_geometric(image, cfg, rng);
  if (cfg.zero_mask && cfg.zero_mask_fraction > 0) {
    for (auto& v : out.data()) {
      if (rng.uniform() < cfg.zero_mask_fraction) v = 0.0;
    }
  }
  if (cfg.gaussian && cfg.gaussian_std > 0) {
    for (auto& v : out.data()) v += rng.normal(0.0, cfg.gaussian_std);
  }
  return out;
}

}  // namespace drcn
