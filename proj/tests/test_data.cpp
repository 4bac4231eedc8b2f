#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <string>

#include "drcn/data.hpp"
#include "drcn/io.hpp"
#include "drcn/random.hpp"

using namespace drcn;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  static fs::path dir = [] {
    fs::path p = fs::temp_directory_path() / "drcn_data_tests";
    fs::create_directories(p);
    return p;
  }();
  return dir;
}

std::string idx_image_fixture() {
  ByteWriter w;
  w.u32_be(2051);
  w.u32_be(1);  // one image
  w.u32_be(2);
  w.u32_be(2);
  w.u8(0);
  w.u8(255);
  w.u8(128);
  w.u8(64);
  return w.take();
}

std::string idx_label_fixture(std::initializer_list<int> labels) {
  ByteWriter w;
  w.u32_be(2049);
  w.u32_be(static_cast<std::uint32_t>(labels.size()));
  for (int l : labels) w.u8(static_cast<std::uint8_t>(l));
  return w.take();
}

}  // namespace

// ---------------------------------------------------------------------------
// IDX

TEST_CASE("IDX pixels decode as byte/255", "[data]") {
  const fs::path img = temp_dir() / "fixture-images.idx";
  const fs::path lab = temp_dir() / "fixture-labels.idx";
  write_file_atomic(img, idx_image_fixture());
  write_file_atomic(lab, idx_label_fixture({7}));

  Dataset ds = load_idx(img, lab, 10);
  REQUIRE(ds.images.shape() == std::vector<std::size_t>{1, 1, 2, 2});
  CHECK(ds.images[0] == 0.0);
  CHECK(ds.images[1] == 1.0);
  CHECK(ds.images[2] == 128.0 / 255.0);
  CHECK(ds.images[3] == 64.0 / 255.0);
  CHECK(ds.labels == std::vector<int>{7});
}

TEST_CASE("re-encoding a decoded IDX file reproduces its bytes", "[data]") {
  const fs::path img = temp_dir() / "roundtrip-images.idx";
  const fs::path lab = temp_dir() / "roundtrip-labels.idx";
  write_file_atomic(img, idx_image_fixture());
  write_file_atomic(lab, idx_label_fixture({3}));

  Dataset ds = load_idx(img, lab, 10);
  const fs::path img2 = temp_dir() / "reencoded-images.idx";
  const fs::path lab2 = temp_dir() / "reencoded-labels.idx";
  save_idx_images(ds.images, img2);
  save_idx_labels(ds.labels, lab2);
  CHECK(read_file(img2) == read_file(img));
  CHECK(read_file(lab2) == read_file(lab));
}

TEST_CASE("IDX loader rejects malformed files", "[data]") {
  const fs::path bad_magic = temp_dir() / "bad-magic.idx";
  {
    ByteWriter w;
    w.u32_be(2052);
    w.u32_be(1);
    w.u32_be(2);
    w.u32_be(2);
    for (int i = 0; i < 4; ++i) w.u8(0);
    write_file_atomic(bad_magic, w.take());
  }
  CHECK_THROWS_AS(load_idx_images(bad_magic), FormatError);
  CHECK_THROWS_WITH(load_idx_images(bad_magic),
                    Catch::Matchers::ContainsSubstring("2052"));

  const fs::path truncated = temp_dir() / "truncated.idx";
  {
    std::string bytes = idx_image_fixture();
    bytes.resize(bytes.size() - 2);
    write_file_atomic(truncated, bytes);
  }
  CHECK_THROWS_AS(load_idx_images(truncated), FormatError);

  CHECK_THROWS_AS(load_idx_images(temp_dir() / "does-not-exist.idx"), IoError);
}

TEST_CASE("IDX pairing validates counts and label range", "[data]") {
  const fs::path img = temp_dir() / "pair-images.idx";
  const fs::path lab_extra = temp_dir() / "pair-labels-extra.idx";
  const fs::path lab_big = temp_dir() / "pair-labels-big.idx";
  write_file_atomic(img, idx_image_fixture());
  write_file_atomic(lab_extra, idx_label_fixture({1, 2}));
  write_file_atomic(lab_big, idx_label_fixture({12}));

  CHECK_THROWS_AS(load_idx(img, lab_extra, 10), FormatError);
  CHECK_THROWS_AS(load_idx(img, lab_big, 10), FormatError);
  CHECK_THROWS_WITH(load_idx(img, lab_big, 10),
                    Catch::Matchers::ContainsSubstring("record 0"));
}

// ---------------------------------------------------------------------------
// USPS container

TEST_CASE("USPS container round-trips", "[data]") {
  Rng rng(400);
  Dataset ds;
  ds.images = Tensor({3, 1, 16, 16});
  for (auto& v : ds.images.data()) v = rng.uniform();
  ds.labels = {0, 5, 9};
  ds.classes = 10;
  ds.provenance = "fixture";

  const fs::path path = temp_dir() / "fixture.usps";
  save_usps(ds, path);
  Dataset back = load_usps(path);
  REQUIRE(back.count() == 3);
  CHECK(back.labels == ds.labels);
  // float32 storage: doubles come back within one float ulp
  CHECK(max_abs_diff(back.images, ds.images) < 1e-7);

  const fs::path path2 = temp_dir() / "fixture2.usps";
  save_usps(back, path2);
  CHECK(read_file(path2) == read_file(path));  // decode . encode is lossless
}

TEST_CASE("USPS loader rejects malformed containers", "[data]") {
  const fs::path bad_magic = temp_dir() / "bad.usps";
  {
    ByteWriter w;
    w.raw("USPX", 4);
    w.u32_le(1);
    w.u32_le(16);
    w.u32_le(16);
    for (int i = 0; i < 256; ++i) w.f32_le(0.0f);
    w.u8(0);
    write_file_atomic(bad_magic, w.take());
  }
  CHECK_THROWS_AS(load_usps(bad_magic), FormatError);

  const fs::path bad_dims = temp_dir() / "bad-dims.usps";
  {
    ByteWriter w;
    w.raw("USPS", 4);
    w.u32_le(1);
    w.u32_le(8);
    w.u32_le(8);
    for (int i = 0; i < 64; ++i) w.f32_le(0.0f);
    w.u8(0);
    write_file_atomic(bad_dims, w.take());
  }
  CHECK_THROWS_AS(load_usps(bad_dims), FormatError);

  const fs::path bad_pixel = temp_dir() / "bad-pixel.usps";
  {
    ByteWriter w;
    w.raw("USPS", 4);
    w.u32_le(2);
    w.u32_le(16);
    w.u32_le(16);
    for (int i = 0; i < 256; ++i) w.f32_le(0.5f);
    w.f32_le(2.0f);  // record 1 out of range
    for (int i = 1; i < 256; ++i) w.f32_le(0.5f);
    w.u8(0);
    w.u8(1);
    write_file_atomic(bad_pixel, w.take());
  }
  CHECK_THROWS_AS(load_usps(bad_pixel), FormatError);
  CHECK_THROWS_WITH(load_usps(bad_pixel), Catch::Matchers::ContainsSubstring("record 1"));
}

// ---------------------------------------------------------------------------
// rescale + normalize

TEST_CASE("rescale to the same size is the identity", "[data]") {
  Rng rng(401);
  Tensor imgs({2, 1, 9, 9});
  for (auto& v : imgs.data()) v = rng.uniform();
  CHECK(max_abs_diff(rescale_bilinear(imgs, 9, 9), imgs) == 0.0);
}

TEST_CASE("constant images rescale to the same constant", "[data]") {
  Tensor imgs = Tensor::full({1, 1, 16, 16}, 0.37);
  Tensor out = rescale_bilinear(imgs, 28, 28);
  for (double v : out.data()) CHECK(std::abs(v - 0.37) < 1e-12);
}

TEST_CASE("bilinear 16->28 rescale conserves impulse mass on average", "[data]") {
  // Phase ripple moves single-impulse mass by up to ~4%; across all interior
  // positions the coset structure cancels exactly, so the mean ratio is the
  // sharp oracle and a 5% envelope bounds each individual impulse.
  const double area_ratio = (28.0 * 28.0) / (16.0 * 16.0);
  double ratio_sum = 0;
  int count = 0;
  for (std::size_t r = 2; r < 14; ++r)
    for (std::size_t c = 2; c < 14; ++c) {
      Tensor img({1, 1, 16, 16});
      img(std::size_t{0}, std::size_t{0}, r, c) = 1.0;
      Tensor out = rescale_bilinear(img, 28, 28);
      double mass = 0;
      for (double v : out.data()) mass += v;
      const double ratio = mass / area_ratio;
      CHECK(std::abs(ratio - 1.0) < 0.05);
      ratio_sum += ratio;
      ++count;
    }
  CHECK(std::abs(ratio_sum / count - 1.0) < 0.02);
}

TEST_CASE("unit-range normalization maps extremes onto [0,1]", "[data]") {
  Tensor imgs({1, 1, 2, 2}, {-1.0, 0.0, 1.0, 3.0});
  Tensor out = normalize_images(imgs, NormalizeMode::unit_range);
  CHECK(out[0] == 0.0);
  CHECK(std::abs(out[1] - 0.25) < 1e-12);
  CHECK(out[3] == 1.0);

  Tensor flat = Tensor::full({1, 1, 2, 2}, 0.6);
  CHECK(max_abs_diff(normalize_images(flat, NormalizeMode::unit_range), flat) == 0.0);
  CHECK(max_abs_diff(normalize_images(imgs, NormalizeMode::none), imgs) == 0.0);
}

// ---------------------------------------------------------------------------
// synthetic shifted-domain task

TEST_CASE("synthetic glyph classes are exactly balanced", "[data]") {
  Rng rng(402);
  SyntheticShiftSpec spec;
  Dataset ds = make_synthetic_glyphs(rng, 25, spec);
  std::vector<int> counts(5, 0);
  for (int l : ds.labels) counts[static_cast<std::size_t>(l)]++;
  for (int c : counts) CHECK(c == 5);
  for (double v : ds.images.data()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("inversion shift pairs target pixels as exactly 1 - source", "[data]") {
  Rng rng(403);
  SyntheticShiftSpec spec;
  spec.kind = SyntheticShiftSpec::Kind::invert;
  SyntheticPair pair = make_synthetic_shift(rng, 20, spec);
  REQUIRE(pair.source.count() == 20);
  REQUIRE(pair.target.count() == 20);
  CHECK(pair.source.labels == pair.target.labels);
  for (std::size_t i = 0; i < pair.source.images.size(); ++i) {
    CHECK(pair.target.images[i] == 1.0 - pair.source.images[i]);
  }
}

TEST_CASE("rotation and brighten shifts transform as declared", "[data]") {
  Rng rng(404);
  SyntheticShiftSpec spec;
  spec.kind = SyntheticShiftSpec::Kind::rotate;
  spec.amount = 30.0;
  SyntheticPair pair = make_synthetic_shift(rng, 10, spec);
  CHECK(max_abs_diff(pair.source.images, pair.target.images) > 0.1);

  spec.kind = SyntheticShiftSpec::Kind::brighten;
  spec.amount = 0.3;
  SyntheticPair bright = make_synthetic_shift(rng, 10, spec);
  for (std::size_t i = 0; i < bright.source.images.size(); ++i) {
    CHECK(bright.target.images[i] == std::min(1.0, bright.source.images[i] + 0.3));
  }
}

TEST_CASE("synthetic generation is deterministic per seed", "[data]") {
  SyntheticShiftSpec spec;
  Rng a(42), b(42), c(43);
  Dataset da = make_synthetic_glyphs(a, 15, spec);
  Dataset db = make_synthetic_glyphs(b, 15, spec);
  Dataset dc = make_synthetic_glyphs(c, 15, spec);
  CHECK(max_abs_diff(da.images, db.images) == 0.0);
  CHECK(max_abs_diff(da.images, dc.images) > 0.0);
}

TEST_CASE("synthetic spec is validated", "[data]") {
  Rng rng(405);
  SyntheticShiftSpec spec;
  spec.classes = 1;
  CHECK_THROWS_AS(make_synthetic_glyphs(rng, 10, spec), ArgumentError);
  spec = SyntheticShiftSpec{};
  spec.image_size = 8;
  CHECK_THROWS_AS(make_synthetic_glyphs(rng, 10, spec), ArgumentError);
  spec = SyntheticShiftSpec{};
  CHECK_THROWS_AS(make_synthetic_glyphs(rng, 0, spec), ArgumentError);
}

// ---------------------------------------------------------------------------
// dataset utilities

TEST_CASE("subset, take_first, strip and concat behave structurally", "[data]") {
  Rng rng(406);
  SyntheticShiftSpec spec;
  Dataset ds = make_synthetic_glyphs(rng, 12, spec);

  Dataset sub = subset(ds, {0, 5, 7});
  REQUIRE(sub.count() == 3);
  CHECK(sub.labels[1] == ds.labels[5]);

  Dataset head = take_first(ds, 4);
  CHECK(head.count() == 4);
  CHECK_THROWS_AS(take_first(ds, 100), ArgumentError);

  UnlabeledImages u = strip_labels(ds);
  CHECK(u.count() == 12);
  CHECK(max_abs_diff(u.images, ds.images) == 0.0);

  UnlabeledImages both = concat_images(u, strip_labels(sub));
  CHECK(both.count() == 15);
  // appended block preserves order
  const std::size_t stride = 1 * 24 * 24;
  for (std::size_t p = 0; p < stride; ++p) {
    CHECK(both.images[12 * stride + p] == sub.images[p]);
  }

  Dataset tiny = make_synthetic_glyphs(rng, 3, SyntheticShiftSpec{
                                                   SyntheticShiftSpec::Kind::invert,
                                                   0.0, 5, 16});
  CHECK_THROWS_AS(concat_images(u, strip_labels(tiny)), DimensionError);
}

TEST_CASE("dataset validation catches inconsistencies", "[data]") {
  Dataset ds;
  ds.images = Tensor({2, 1, 4, 4});
  ds.labels = {0};
  ds.classes = 5;
  CHECK_THROWS_AS(ds.validate(), DimensionError);
  ds.labels = {0, 9};
  CHECK_THROWS_AS(ds.validate(), FormatError);
}
