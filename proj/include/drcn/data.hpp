#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "drcn/augment.hpp"
#include "drcn/error.hpp"
#include "drcn/io.hpp"
#include "drcn/random.hpp"
#include "drcn/tensor.hpp"

namespace drcn {

// Labeled image collection; pixels live in [0,1], labels in [0, classes).
struct Dataset {
  Tensor images;  // [count, channels, h, w]
  std::vector<int> labels;
  int classes = 0;
  std::string provenance;

  std::size_t count() const { return images.dim(0); }

  void validate() const {
    if (images.rank() != 4) {
      throw DimensionError("dataset images must be [count, channels, h, w], got " +
                           shape_str(images.shape()));
    }
    if (labels.size() != images.dim(0)) {
      throw DimensionError("dataset has " + std::to_string(images.dim(0)) +
                           " images but " + std::to_string(labels.size()) + " labels");
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] < 0 || labels[i] >= classes) {
        throw FormatError("label " + std::to_string(labels[i]) + " at record " +
                          std::to_string(i) + " is outside [0, " +
                          std::to_string(classes) + ")");
      }
    }
  }
};

// Image collection that structurally cannot carry labels: the reconstruction
// pipeline accepts only this type, so target labels can never leak into
// training.
struct UnlabeledImages {
  Tensor images;  // [count, channels, h, w]
  std::string provenance;

  std::size_t count() const { return images.dim(0); }
};

inline UnlabeledImages strip_labels(const Dataset& ds) {
  return UnlabeledImages{ds.images, ds.provenance + " | unlabeled"};
}

inline UnlabeledImages concat_images(const UnlabeledImages& a, const UnlabeledImages& b) {
  if (a.images.rank() != 4 || b.images.rank() != 4 || a.images.dim(1) != b.images.dim(1) ||
      a.images.dim(2) != b.images.dim(2) || a.images.dim(3) != b.images.dim(3)) {
    throw DimensionError("cannot concatenate image sets " + shape_str(a.images.shape()) +
                         " and " + shape_str(b.images.shape()));
  }
  Tensor out({a.count() + b.count(), a.images.dim(1), a.images.dim(2), a.images.dim(3)});
  std::copy(a.images.data().begin(), a.images.data().end(), out.data().begin());
  std::copy(b.images.data().begin(), b.images.data().end(),
            out.data().begin() + static_cast<std::ptrdiff_t>(a.images.size()));
  return UnlabeledImages{std::move(out), a.provenance + " + " + b.provenance};
}

inline Dataset subset(const Dataset& ds, const std::vector<std::size_t>& indices) {
  const std::size_t C = ds.images.dim(1), H = ds.images.dim(2), W = ds.images.dim(3);
  Dataset out;
  out.images = Tensor({indices.size(), C, H, W});
  out.labels.reserve(indices.size());
  out.classes = ds.classes;
  out.provenance = ds.provenance + " | subset(" + std::to_string(indices.size()) + ")";
  const std::size_t stride = C * H * W;
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const std::size_t i = indices[k];
    if (i >= ds.count()) throw ArgumentError("subset index out of range");
    std::copy_n(ds.images.data().begin() + static_cast<std::ptrdiff_t>(i * stride), stride,
                out.images.data().begin() + static_cast<std::ptrdiff_t>(k * stride));
    out.labels.push_back(ds.labels[i]);
  }
  return out;
}

inline Dataset take_first(const Dataset& ds, std::size_t n) {
  if (n > ds.count()) throw ArgumentError("take_first: asked for more records than exist");
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  return subset(ds, idx);
}

// ---------------------------------------------------------------------------
// IDX (big-endian header, unsigned-byte pixels scaled onto [0,1])

namespace detail {
constexpr std::uint32_t kIdxImagesMagic = 2051;
constexpr std::uint32_t kIdxLabelsMagic = 2049;
}  // namespace detail

inline Tensor load_idx_images(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  ByteReader r(bytes, path.string());
  const std::uint32_t magic = r.u32_be();
  if (magic != detail::kIdxImagesMagic) {
    throw FormatError("'" + path.string() + "': bad IDX image magic " +
                      std::to_string(magic) + ", expected 2051");
  }
  const std::uint32_t n = r.u32_be(), h = r.u32_be(), w = r.u32_be();
  if (n == 0 || h == 0 || w == 0) {
    throw FormatError("'" + path.string() + "': degenerate IDX dimensions");
  }
  r.need(static_cast<std::size_t>(n) * h * w);
  Tensor images({n, 1, h, w});
  for (std::size_t i = 0; i < images.size(); ++i) {
    images[i] = static_cast<double>(r.u8()) / 255.0;
  }
  return images;
}

inline std::vector<int> load_idx_labels(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  ByteReader r(bytes, path.string());
  const std::uint32_t magic = r.u32_be();
  if (magic != detail::kIdxLabelsMagic) {
    throw FormatError("'" + path.string() + "': bad IDX label magic " +
                      std::to_string(magic) + ", expected 2049");
  }
  const std::uint32_t n = r.u32_be();
  r.need(n);
  std::vector<int> labels(n);
  for (auto& l : labels) l = r.u8();
  return labels;
}

inline Dataset load_idx(const std::filesystem::path& images_path,
                        const std::filesystem::path& labels_path, int classes) {
  Dataset ds;
  ds.images = load_idx_images(images_path);
  ds.labels = load_idx_labels(labels_path);
  ds.classes = classes;
  ds.provenance = "idx(" + images_path.filename().string() + ")";
  if (ds.labels.size() != ds.images.dim(0)) {
    throw FormatError("'" + labels_path.string() + "' has " +
                      std::to_string(ds.labels.size()) + " labels for " +
                      std::to_string(ds.images.dim(0)) + " images");
  }
  ds.validate();
  return ds;
}

// Re-encoding a decoded file reproduces its bytes: round(v*255) inverts /255.
inline void save_idx_images(const Tensor& images, const std::filesystem::path& path) {
  if (images.rank() != 4 || images.dim(1) != 1) {
    throw DimensionError("save_idx_images expects [count, 1, h, w], got " +
                         shape_str(images.shape()));
  }
  ByteWriter w;
  w.u32_be(detail::kIdxImagesMagic);
  w.u32_be(static_cast<std::uint32_t>(images.dim(0)));
  w.u32_be(static_cast<std::uint32_t>(images.dim(2)));
  w.u32_be(static_cast<std::uint32_t>(images.dim(3)));
  for (double v : images.data()) {
    double b = std::round(v * 255.0);
    if (b < 0) b = 0;
    if (b > 255) b = 255;
    w.u8(static_cast<std::uint8_t>(b));
  }
  write_file_atomic(path, w.take());
}

inline void save_idx_labels(const std::vector<int>& labels,
                            const std::filesystem::path& path) {
  ByteWriter w;
  w.u32_be(detail::kIdxLabelsMagic);
  w.u32_be(static_cast<std::uint32_t>(labels.size()));
  for (int l : labels) {
    if (l < 0 || l > 255) throw ArgumentError("label out of byte range");
    w.u8(static_cast<std::uint8_t>(l));
  }
  write_file_atomic(path, w.take());
}

// ---------------------------------------------------------------------------
// USPS container: "USPS" magic, then little-endian u32 count/h/w (16x16),
// float32 pixels in [0,1] row-major per record, then one label byte per
// record.

inline Dataset load_usps(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  ByteReader r(bytes, path.string());
  char magic[4];
  r.raw(magic, 4);
  if (std::string(magic, 4) != "USPS") {
    throw FormatError("'" + path.string() + "': bad container magic, expected \"USPS\"");
  }
  const std::uint32_t n = r.u32_le(), h = r.u32_le(), w = r.u32_le();
  if (h != 16 || w != 16) {
    throw FormatError("'" + path.string() + "': container must hold 16x16 images, has " +
                      std::to_string(h) + "x" + std::to_string(w));
  }
  if (n == 0) throw FormatError("'" + path.string() + "': empty container");
  Dataset ds;
  ds.images = Tensor({n, 1, h, w});
  ds.classes = 10;
  ds.provenance = "usps(" + path.filename().string() + ")";
  for (std::uint32_t i = 0; i < n; ++i) {
    for (std::uint32_t p = 0; p < h * w; ++p) {
      const float v = r.f32_le();
      if (!(v >= 0.0f && v <= 1.0f)) {
        throw FormatError("'" + path.string() + "': pixel outside [0,1] in record " +
                          std::to_string(i));
      }
      ds.images[static_cast<std::size_t>(i) * h * w + p] = static_cast<double>(v);
    }
  }
  ds.labels.resize(n);
  for (auto& l : ds.labels) l = r.u8();
  ds.validate();
  return ds;
}

inline void save_usps(const Dataset& ds, const std::filesystem::path& path) {
  if (ds.images.rank() != 4 || ds.images.dim(1) != 1 || ds.images.dim(2) != 16 ||
      ds.images.dim(3) != 16) {
    throw DimensionError("save_usps expects [count, 1, 16, 16], got " +
                         shape_str(ds.images.shape()));
  }
  ds.validate();
  ByteWriter w;
  w.raw("USPS", 4);
  w.u32_le(static_cast<std::uint32_t>(ds.count()));
  w.u32_le(16);
  w.u32_le(16);
  for (double v : ds.images.data()) w.f32_le(static_cast<float>(v));
  for (int l : ds.labels) w.u8(static_cast<std::uint8_t>(l));
  write_file_atomic(path, w.take());
}

// ---------------------------------------------------------------------------
// preprocessing

// Standard bilinear resize (half-pixel centers, edge taps clamped). Equal
// sizes return the input unchanged, bit for bit.
inline Tensor rescale_bilinear(const Tensor& images, std::size_t out_h, std::size_t out_w) {
  if (images.rank() != 4) {
    throw DimensionError("rescale_bilinear expects [count, channels, h, w], got " +
                         shape_str(images.shape()));
  }
  const std::size_t N = images.dim(0), C = images.dim(1), H = images.dim(2),
                    W = images.dim(3);
  if (out_h == 0 || out_w == 0) throw ArgumentError("rescale target must be non-empty");
  if (out_h == H && out_w == W) return images;
  Tensor out({N, C, out_h, out_w});
  const double sy = static_cast<double>(H) / static_cast<double>(out_h);
  const double sx = static_cast<double>(W) / static_cast<double>(out_w);
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t y = 0; y < out_h; ++y) {
        const double fy = (static_cast<double>(y) + 0.5) * sy - 0.5;
        double y0f = std::floor(fy);
        const double wy = fy - y0f;
        const long y0 = std::clamp<long>(static_cast<long>(y0f), 0, static_cast<long>(H) - 1);
        const long y1 = std::clamp<long>(static_cast<long>(y0f) + 1, 0, static_cast<long>(H) - 1);
        for (std::size_t x = 0; x < out_w; ++x) {
          const double fx = (static_cast<double>(x) + 0.5) * sx - 0.5;
          double x0f = std::floor(fx);
          const double wx = fx - x0f;
          const long x0 = std::clamp<long>(static_cast<long>(x0f), 0, static_cast<long>(W) - 1);
          const long x1 = std::clamp<long>(static_cast<long>(x0f) + 1, 0, static_cast<long>(W) - 1);
          const double v00 = images(n, c, static_cast<std::size_t>(y0), static_cast<std::size_t>(x0));
          const double v01 = images(n, c, static_cast<std::size_t>(y0), static_cast<std::size_t>(x1));
          const double v10 = images(n, c, static_cast<std::size_t>(y1), static_cast<std::size_t>(x0));
          const double v11 = images(n, c, static_cast<std::size_t>(y1), static_cast<std::size_t>(x1));
          out(n, c, y, x) = (1 - wy) * ((1 - wx) * v00 + wx * v01) +
                            wy * ((1 - wx) * v10 + wx * v11);
        }
      }
  return out;
}

enum class NormalizeMode { unit_range, none };

// unit_range maps the dataset's [min, max] onto [0,1]; a (near-)constant
// dataset is left untouched rather than divided by zero.
inline Tensor normalize_images(const Tensor& images, NormalizeMode mode) {
  if (mode == NormalizeMode::none) return images;
  double lo = images[0], hi = images[0];
  for (double v : images.data()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (hi - lo < 1e-12) return images;
  const double inv = 1.0 / (hi - lo);
  return map_elementwise(images, [&](double v) { return (v - lo) * inv; });
}

// ---------------------------------------------------------------------------
// synthetic shifted-domain task

struct SyntheticShiftSpec {
  enum class Kind { identity, invert, rotate, brighten };
  Kind kind = Kind::invert;
  double amount = 0.0;  // degrees for rotate, offset for brighten
  std::size_t classes = 5;
  std::size_t image_size = 24;
};

namespace detail {

// Five glyph stroke shapes rendered with jitter and thickness; the caller
// composes them onto the background (see make_synthetic_glyphs).
inline void render_glyph(Tensor& img, int label, double v, long t, long dx, long dy) {
  const long s = static_cast<long>(img.dim(1));
  const long c = s / 2;
  const long m = 4;  // margin
  auto put = [&](long y, long x) {
    if (y >= 0 && x >= 0 && y < s && x < s) {
      img(std::size_t{0}, static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = v;
    }
  };
  switch (label) {
    case 0:  // horizontal bar
      for (long y = c + dy - t; y < c + dy + t; ++y)
        for (long x = m + dx; x < s - m + dx; ++x) put(y, x);
      break;
    case 1:  // vertical bar
      for (long y = m + dy; y < s - m + dy; ++y)
        for (long x = c + dx - t; x < c + dx + t; ++x) put(y, x);
      break;
    case 2:  // cross
      for (long y = c + dy - t; y < c + dy + t; ++y)
        for (long x = m + dx; x < s - m + dx; ++x) put(y, x);
      for (long y = m + dy; y < s - m + dy; ++y)
        for (long x = c + dx - t; x < c + dx + t; ++x) put(y, x);
      break;
    case 3: {  // box outline
      const long r = s / 2 - m;
      for (long y = c + dy - r; y < c + dy + r; ++y)
        for (long x = c + dx - r; x < c + dx + r; ++x) {
          const bool edge = y < c + dy - r + t || y >= c + dy + r - t ||
                            x < c + dx - r + t || x >= c + dx + r - t;
          if (edge) put(y, x);
        }
      break;
    }
    default:  // diagonal stripe
      for (long y = m + dy; y < s - m + dy; ++y)
        for (long x = m + dx; x < s - m + dx; ++x) {
          if (std::labs((y - dy) - (x - dx)) < t) put(y, x);
        }
      break;
  }
}

}  // namespace detail

// Balanced by construction: label of record i is i mod classes. Glyphs are
// embossed strokes on a mid-gray field: background 0.35, stroke core at a
// per-image intensity v in [0.8, 1.0], a one-pixel rim at 1 - v, plus 5%
// symmetric speckle. Pixelwise inversion then swaps the core/rim roles and
// sends the background to 0.65, so both domains draw on one family of local
// contrasts while differing in global style.
inline Dataset make_synthetic_glyphs(Rng& rng, std::size_t n,
                                     const SyntheticShiftSpec& spec) {
  if (spec.classes < 2 || spec.classes > 5) {
    throw ArgumentError("synthetic task supports 2..5 classes");
  }
  if (spec.image_size < 16) throw ArgumentError("synthetic images must be at least 16x16");
  if (n == 0) throw ArgumentError("synthetic dataset must be non-empty");
  const std::size_t s = spec.image_size;
  const double bg = 0.35;
  Dataset ds;
  ds.images = Tensor({n, 1, s, s});
  ds.labels.resize(n);
  ds.classes = static_cast<int>(spec.classes);
  ds.provenance = "synthetic-glyphs(n=" + std::to_string(n) + ")";
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % spec.classes);
    ds.labels[i] = label;
    Tensor mask({1, s, s});
    const double v = rng.uniform(0.8, 1.0);
    const long t = static_cast<long>(rng.uniform_int(2, 3));
    const long dx = rng.uniform_int(-3, 3);
    const long dy = rng.uniform_int(-3, 3);
    detail::render_glyph(mask, label, 1.0, t, dx, dy);
    Tensor img({1, s, s});
    const long L = static_cast<long>(s);
    auto core = [&](long y, long x) {
      return y >= 0 && x >= 0 && y < L && x < L &&
             mask(std::size_t{0}, static_cast<std::size_t>(y),
                  static_cast<std::size_t>(x)) > 0.5;
    };
    for (long y = 0; y < L; ++y) {
      for (long x = 0; x < L; ++x) {
        double px = bg;
        if (core(y, x)) {
          px = v;
        } else {
          for (long ddy = -1; ddy <= 1 && px == bg; ++ddy)
            for (long ddx = -1; ddx <= 1 && px == bg; ++ddx)
              if (core(y + ddy, x + ddx)) px = 1.0 - v;
        }
        img(std::size_t{0}, static_cast<std::size_t>(y),
            static_cast<std::size_t>(x)) = px;
      }
    }
    for (auto& px : img.data()) {
      if (rng.uniform() < 0.05) {
        px = std::min(1.0, std::max(0.0, px + rng.uniform(-0.3, 0.3)));
      }
    }
    std::copy(img.data().begin(), img.data().end(),
              ds.images.data().begin() + static_cast<std::ptrdiff_t>(i * s * s));
  }
  return ds;
}

// Deterministic domain transform; labels carry over untouched.
inline Dataset apply_domain_shift(const Dataset& base, const SyntheticShiftSpec& spec) {
  Dataset out = base;
  using Kind = SyntheticShiftSpec::Kind;
  switch (spec.kind) {
    case Kind::identity:
      out.provenance += " | shift(identity)";
      break;
    case Kind::invert:
      out.images = map_elementwise(base.images, [](double v) { return 1.0 - v; });
      out.provenance += " | shift(invert)";
      break;
    case Kind::brighten:
      out.images = map_elementwise(
          base.images, [&](double v) { return std::min(1.0, v + spec.amount); });
      out.provenance += " | shift(brighten " + std::to_string(spec.amount) + ")";
      break;
    case Kind::rotate: {
      AffineSample s;
      s.theta_deg = spec.amount;
      const std::size_t H = base.images.dim(2), W = base.images.dim(3);
      const AffineCoeffs m = affine_inverse_coeffs(s, H, W);
      const std::size_t stride = base.images.dim(1) * H * W;
      for (std::size_t i = 0; i < base.count(); ++i) {
        Tensor img({base.images.dim(1), H, W});
        std::copy_n(base.images.data().begin() + static_cast<std::ptrdiff_t>(i * stride),
                    stride, img.data().begin());
        Tensor warped = warp_bilinear(img, m);
        std::copy(warped.data().begin(), warped.data().end(),
                  out.images.data().begin() + static_cast<std::ptrdiff_t>(i * stride));
      }
      out.provenance += " | shift(rotate " + std::to_string(spec.amount) + ")";
      break;
    }
  }
  return out;
}

struct SyntheticPair {
  Dataset source;
  Dataset target;
};

// Source and target are drawn as a paired sample: the target set is the
// domain shift applied to the very images drawn for the source, so with
// kind=invert, target pixels are exactly 1 - source. Training never sees the
// pairing (the target enters unlabeled and is shuffled independently).
inline SyntheticPair make_synthetic_shift(Rng& rng, std::size_t n_per_domain,
                                          const SyntheticShiftSpec& spec) {
  SyntheticPair pair;
  pair.source = make_synthetic_glyphs(rng, n_per_domain, spec);
  pair.target = apply_domain_shift(pair.source, spec);
  return pair;
}

}  // namespace drcn
