#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <vector>

#include "cbctox/error.hpp"
#include "cbctox/preprocess.hpp"
#include "cbctox/rng.hpp"
#include "cbctox/volume.hpp"

using namespace cbctox;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  auto p = fs::temp_directory_path() / "cbctox_volio_test";
  fs::create_directories(p);
  return p;
}

Volume random_volume(Rng& rng, std::array<std::int64_t, 3> dims,
                     std::int64_t channels = 1) {
  Volume v = Volume::make(dims, channels, {2, 2, 2});
  for (auto& x : v.data) x = float(rng.normal(0.3, 0.2));
  return v;
}

}  // namespace

TEST_CASE("v3j round-trip is bit-exact") {
  Rng rng(1);
  auto v = random_volume(rng, {5, 4, 3}, 2);
  v.origin_mm = {-3.5, 0.25, 11.0};
  v.spacing_mm = {1.5, 2.0, 2.5};
  const auto path = temp_dir() / "rt.v3j";
  write_volume(v, path);
  const Volume r = read_volume(path);
  CHECK(r.dims == v.dims);
  CHECK(r.spacing_mm == v.spacing_mm);
  CHECK(r.origin_mm == v.origin_mm);
  CHECK(r.channels == v.channels);
  REQUIRE(r.data.size() == v.data.size());
  CHECK(std::memcmp(r.data.data(), v.data.data(),
                    v.data.size() * sizeof(float)) == 0);
}

TEST_CASE("constant 2x2x2 volume reads back") {
  Volume v = Volume::make({2, 2, 2}, 1, {1, 1, 1}, {0, 0, 0}, 0.5f);
  const auto path = temp_dir() / "const.v3j";
  write_volume(v, path);
  const Volume r = read_volume(path);
  CHECK(r.voxels() == 8);
  for (float x : r.data) CHECK(x == 0.5f);
}

TEST_CASE("9-channel export echoes channel count") {
  Volume v = Volume::make({3, 3, 3}, 9, {2, 2, 2});
  const auto path = temp_dir() / "jf.v3j";
  write_volume(v, path);
  std::ifstream hf(path);
  std::string text((std::istreambuf_iterator<char>(hf)),
                   std::istreambuf_iterator<char>());
  CHECK(text.find("\"channels\": 9") != std::string::npos);
  CHECK(read_volume(path).channels == 9);
}

TEST_CASE("overwriting a volume leaves no stale bytes") {
  const auto path = temp_dir() / "ow.v3j";
  Volume big = Volume::make({8, 8, 8}, 1, {1, 1, 1}, {0, 0, 0}, 2.f);
  write_volume(big, path);
  Volume small = Volume::make({2, 2, 2}, 1, {1, 1, 1}, {0, 0, 0}, 3.f);
  write_volume(small, path);
  const Volume r = read_volume(path);
  CHECK(r.voxels() == 8);
  for (float x : r.data) CHECK(x == 3.f);
}

TEST_CASE("length mismatch between header and payload errors") {
  const auto dir = temp_dir();
  Volume v = Volume::make({2, 2, 2}, 1);
  write_volume(v, dir / "broken.v3j");
  {  // truncate the payload to 8 floats' worth minus a few
    std::ofstream rf(dir / "broken.raw",
                     std::ios::binary | std::ios::trunc);
    const float vals[5] = {0, 0, 0, 0, 0};
    rf.write(reinterpret_cast<const char*>(vals), sizeof(vals));
  }
  CHECK_THROWS_AS((void)read_volume(dir / "broken.v3j"), Error);
  CHECK_THROWS_AS((void)read_volume(dir / "missing.v3j"), Error);
}

TEST_CASE("unsupported dtype is rejected") {
  const auto dir = temp_dir();
  Volume v = Volume::make({2, 2, 2}, 1);
  write_volume(v, dir / "dtype.v3j");
  std::ifstream in(dir / "dtype.v3j");
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  in.close();
  const auto at = text.find("f32le");
  text.replace(at, 5, "f64be");
  std::ofstream out(dir / "dtype.v3j", std::ios::trunc);
  out << text;
  out.close();
  CHECK_THROWS_AS((void)read_volume(dir / "dtype.v3j"), Error);
}

TEST_CASE("resample 160 voxels at 1.5mm to 2mm gives 120 voxels") {
  Volume v = Volume::make({160, 4, 4}, 1, {1.5, 1.5, 1.5});
  const Volume r = resample_isotropic(v, 2.0);
  CHECK(r.dims[0] == 120);
  CHECK(r.dims[1] == 3);
  CHECK(r.spacing_mm[0] == 2.0);
  CHECK(r.origin_mm == v.origin_mm);
}

TEST_CASE("resample to own spacing is the identity within 1e-6") {
  Rng rng(2);
  auto v = random_volume(rng, {9, 7, 5});
  const Volume r = resample_isotropic(v, 2.0);
  REQUIRE(r.dims == v.dims);
  for (std::size_t i = 0; i < v.data.size(); ++i)
    CHECK(std::abs(r.data[i] - v.data[i]) <= 1e-6f);
}

TEST_CASE("resampling a constant volume stays constant") {
  Volume v = Volume::make({10, 8, 6}, 1, {1.0, 2.0, 3.0}, {0, 0, 0}, 0.7f);
  const Volume r = resample_isotropic(v, 1.3);
  for (float x : r.data) CHECK(x == doctest::Approx(0.7f).epsilon(1e-6));
}

TEST_CASE("normalize maps {-1000,0,1000} to {0,0.5,1}") {
  Volume v = Volume::make({3, 1, 1}, 1);
  v.data = {-1000.f, 0.f, 1000.f};
  const Volume r = normalize_intensity(v);
  CHECK(r.data[0] == 0.f);
  CHECK(r.data[1] == 0.5f);
  CHECK(r.data[2] == 1.f);
}

TEST_CASE("normalize keeps an exact [0,1] volume unchanged") {
  Volume v = Volume::make({4, 1, 1}, 1);
  v.data = {0.f, 0.25f, 0.75f, 1.f};
  const Volume r = normalize_intensity(v);
  for (std::size_t i = 0; i < v.data.size(); ++i) CHECK(r.data[i] == v.data[i]);
}

TEST_CASE("normalize rejects constant volumes") {
  Volume v = Volume::make({4, 4, 4}, 1, {1, 1, 1}, {0, 0, 0}, 3.f);
  CHECK_THROWS_AS((void)normalize_intensity(v), Error);
}

TEST_CASE("normalize is invariant under positive affine intensity maps") {
  Rng rng(3);
  auto v = random_volume(rng, {6, 5, 4});
  const Volume base = normalize_intensity(v);
  // beta stays moderate; larger offsets destroy the f32 inputs' own precision
  Volume aff = v;
  for (auto& x : aff.data) x = 2.5f * x + 4.f;
  const Volume r = normalize_intensity(aff);
  for (std::size_t i = 0; i < v.data.size(); ++i)
    CHECK(std::abs(r.data[i] - base.data[i]) <= 1e-6f);
}

TEST_CASE("center crop at same size is the identity") {
  Rng rng(4);
  auto v = random_volume(rng, {12, 12, 12});
  const Volume r = crop_centered(v, {6, 6, 6}, {12, 12, 12});
  CHECK(r.dims == v.dims);
  CHECK(std::memcmp(r.data.data(), v.data.data(),
                    v.data.size() * sizeof(float)) == 0);
  CHECK(r.origin_mm == v.origin_mm);
}

TEST_CASE("crop to a larger frame centers the source in zeros") {
  Volume v = Volume::make({4, 4, 4}, 1, {1, 1, 1}, {0, 0, 0}, 1.f);
  const Volume r = crop_centered(v, {2, 2, 2}, {8, 8, 8});
  CHECK(r.dims == std::array<std::int64_t, 3>{8, 8, 8});
  std::int64_t ones = 0;
  for (std::int64_t z = 0; z < 8; ++z)
    for (std::int64_t y = 0; y < 8; ++y)
      for (std::int64_t x = 0; x < 8; ++x) {
        const bool inside = x >= 2 && x < 6 && y >= 2 && y < 6 && z >= 2 && z < 6;
        CHECK(r.at(0, x, y, z) == (inside ? 1.f : 0.f));
        ones += r.at(0, x, y, z) == 1.f;
      }
  CHECK(ones == 64);
  // physical position of retained voxels is preserved
  CHECK(r.origin_mm[0] == -2.0);
}

TEST_CASE("corner crop keeps 1/8 data and 7/8 zeros") {
  Rng rng(5);
  auto v = random_volume(rng, {8, 8, 8});
  for (auto& x : v.data) x = std::abs(x) + 0.1f;  // strictly positive
  const Volume r = crop_centered(v, {0, 0, 0}, {4, 4, 4});
  // brute-force index oracle
  std::int64_t nonzero = 0;
  for (std::int64_t z = 0; z < 4; ++z)
    for (std::int64_t y = 0; y < 4; ++y)
      for (std::int64_t x = 0; x < 4; ++x) {
        const std::int64_t sx = x - 2, sy = y - 2, sz = z - 2;
        const bool inside = sx >= 0 && sy >= 0 && sz >= 0;
        if (inside) {
          CHECK(r.at(0, x, y, z) == v.at(0, sx, sy, sz));
          ++nonzero;
        } else {
          CHECK(r.at(0, x, y, z) == 0.f);
        }
      }
  CHECK(nonzero == 8);  // 2x2x2 of 4^3
}

TEST_CASE("crop output always has the requested dims") {
  Rng rng(6);
  for (int t = 0; t < 20; ++t) {
    auto dims = std::array<std::int64_t, 3>{1 + std::int64_t(rng.below(10)),
                                            1 + std::int64_t(rng.below(10)),
                                            1 + std::int64_t(rng.below(10))};
    auto v = random_volume(rng, dims);
    std::array<std::int64_t, 3> size{1 + std::int64_t(rng.below(14)),
                                     1 + std::int64_t(rng.below(14)),
                                     1 + std::int64_t(rng.below(14))};
    std::array<std::int64_t, 3> center{std::int64_t(rng.below(12)) - 2,
                                       std::int64_t(rng.below(12)) - 2,
                                       std::int64_t(rng.below(12)) - 2};
    CHECK(crop_centered(v, center, size).dims == size);
  }
}

namespace {

// Independent oracle: exhaustive threshold sweep maximizing inter-class
// variance over the same 256-bin quantization.
float brute_force_otsu_threshold_level(const Volume& v) {
  float lo = v.data[0], hi = v.data[0];
  for (float x : v.data) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  const double binw = double(hi - lo) / 256.0;
  auto bin_of = [&](float x) {
    int b = int((double(x) - double(lo)) / binw);
    return std::clamp(b, 0, 255);
  };
  double best = -1;
  int best_k = 0;
  for (int k = 0; k < 255; ++k) {
    double n0 = 0, n1 = 0, s0 = 0, s1 = 0;
    for (float x : v.data) {
      if (bin_of(x) <= k) {
        n0 += 1;
        s0 += bin_of(x);
      } else {
        n1 += 1;
        s1 += bin_of(x);
      }
    }
    if (n0 == 0 || n1 == 0) continue;
    const double d = s0 / n0 - s1 / n1;
    const double between = n0 * n1 * d * d;
    if (between > best) {
      best = between;
      best_k = k;
    }
  }
  return float(double(lo) + binw * (best_k + 1));
}

}  // namespace

TEST_CASE("adaptive mask separates a bimodal object from background") {
  Volume v = Volume::make({10, 10, 10}, 1, {2, 2, 2}, {0, 0, 0}, 0.05f);
  for (std::int64_t z = 3; z < 8; ++z)
    for (std::int64_t y = 3; y < 8; ++y)
      for (std::int64_t x = 3; x < 8; ++x) v.at(0, x, y, z) = 0.9f;
  const float thr = brute_force_otsu_threshold_level(v);
  const MaskVolume m = adaptive_mask(v);
  m.validate();
  for (std::int64_t i = 0; i < v.voxels(); ++i)
    CHECK(m.vol.data[i] == (v.data[i] >= thr ? 1.f : 0.f));
}

TEST_CASE("closing fills an interior pinhole, giving an all-ones mask") {
  Volume v = Volume::make({6, 6, 6}, 1, {1, 1, 1}, {0, 0, 0}, 0.9f);
  v.at(0, 3, 3, 3) = 0.05f;
  const MaskVolume m = adaptive_mask(v);
  for (float x : m.vol.data) CHECK(x == 1.f);
}

TEST_CASE("only the larger of two disjoint blobs is retained") {
  Volume v = Volume::make({16, 8, 8}, 1, {1, 1, 1}, {0, 0, 0}, 0.05f);
  // big blob: 4x4x4; small blob: 2x2x2; both >= 2 voxels from any border so
  // the closing pass cannot bridge to the grid edge
  for (std::int64_t z = 2; z < 6; ++z)
    for (std::int64_t y = 2; y < 6; ++y)
      for (std::int64_t x = 2; x < 6; ++x) v.at(0, x, y, z) = 0.9f;
  for (std::int64_t z = 2; z < 4; ++z)
    for (std::int64_t y = 2; y < 4; ++y)
      for (std::int64_t x = 10; x < 12; ++x) v.at(0, x, y, z) = 0.9f;

  // component-labeling oracle on the thresholded image
  const float thr = brute_force_otsu_threshold_level(v);
  std::set<std::int64_t> big;
  for (std::int64_t i = 0; i < v.voxels(); ++i)
    if (v.data[i] >= thr && i % 16 < 8) big.insert(i);

  const MaskVolume m = adaptive_mask(v);
  CHECK(m.count() == std::int64_t(big.size()));
  for (std::int64_t i : big) CHECK(m.vol.data[i] == 1.f);
}

TEST_CASE("adaptive mask is idempotent under re-masking") {
  Rng rng(7);
  Volume v = Volume::make({12, 12, 12}, 1, {2, 2, 2}, {0, 0, 0});
  for (auto& x : v.data) x = 0.02f + 0.02f * float(rng.uniform());
  for (std::int64_t z = 3; z < 9; ++z)
    for (std::int64_t y = 3; y < 9; ++y)
      for (std::int64_t x = 3; x < 9; ++x)
        v.at(0, x, y, z) = 0.7f + 0.2f * float(rng.uniform());
  const MaskVolume m1 = adaptive_mask(v);
  const Volume masked = apply_mask(v, m1);
  const MaskVolume m2 = adaptive_mask(masked);
  CHECK(std::memcmp(m1.vol.data.data(), m2.vol.data.data(),
                    m1.vol.data.size() * sizeof(float)) == 0);
}

TEST_CASE("adaptive mask rejects a degenerate histogram") {
  Volume v = Volume::make({4, 4, 4}, 1, {1, 1, 1}, {0, 0, 0}, 0.5f);
  CHECK_THROWS_AS((void)adaptive_mask(v), Error);
}
