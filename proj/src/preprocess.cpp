#include "cbctox/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <vector>

#include "cbctox/error.hpp"
#include "cbctox/interp.hpp"
#include "cbctox/parallel.hpp"

namespace cbctox {

Volume resample_isotropic(const Volume& vol, double target_spacing_mm) {
  require(target_spacing_mm > 0, "domain", "target spacing must be > 0");
  std::array<std::int64_t, 3> odims;
  for (int a = 0; a < 3; ++a)
    odims[a] = std::max<std::int64_t>(
        1, std::llround(double(vol.dims[a]) * vol.spacing_mm[a] /
                        target_spacing_mm));
  Volume out = Volume::make(odims, vol.channels,
                            {target_spacing_mm, target_spacing_mm,
                             target_spacing_mm},
                            vol.origin_mm);
  const std::int64_t nvox = out.voxels(), svox = vol.voxels();
  const std::int64_t nx = odims[0], ny = odims[1];
  const double rx = target_spacing_mm / vol.spacing_mm[0];
  const double ry = target_spacing_mm / vol.spacing_mm[1];
  const double rz = target_spacing_mm / vol.spacing_mm[2];

  parallel_for(0, nvox, 4096, [&](std::int64_t b, std::int64_t e) {
    for (std::int64_t i = b; i < e; ++i) {
      const std::int64_t x = i % nx;
      const std::int64_t y = (i / nx) % ny;
      const std::int64_t z = i / (nx * ny);
      const auto tap = trilinear_tap<double>(vol.nx(), vol.ny(), vol.nz(),
                                             double(x) * rx, double(y) * ry,
                                             double(z) * rz);
      for (std::int64_t c = 0; c < vol.channels; ++c)
        out.data[c * nvox + i] =
            float(sample_tap(vol.data.data() + c * svox, tap));
    }
  });
  return out;
}

Volume normalize_intensity(const Volume& vol) {
  require(!vol.data.empty(), "shape", "empty volume");
  float lo = vol.data[0], hi = vol.data[0];
  for (float v : vol.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  require(hi > lo, "domain",
          "normalize_intensity: constant volume has degenerate range");
  Volume out = vol;
  const double dlo = lo, range = double(hi) - double(lo);
  parallel_for(0, out.numel(), 16384, [&](std::int64_t b, std::int64_t e) {
    for (std::int64_t i = b; i < e; ++i)
      out.data[i] = float((double(out.data[i]) - dlo) / range);
  });
  return out;
}

Volume crop_centered(const Volume& vol, std::array<std::int64_t, 3> center,
                     std::array<std::int64_t, 3> size) {
  require(size[0] >= 1 && size[1] >= 1 && size[2] >= 1, "shape",
          "crop size must be >= 1");
  std::array<std::int64_t, 3> start;
  for (int a = 0; a < 3; ++a) start[a] = center[a] - size[a] / 2;

  Volume out = Volume::make(size, vol.channels, vol.spacing_mm, vol.origin_mm);
  for (int a = 0; a < 3; ++a)
    out.origin_mm[a] = vol.origin_mm[a] + double(start[a]) * vol.spacing_mm[a];

  const std::int64_t nvox = out.voxels(), svox = vol.voxels();
  parallel_for(0, nvox, 4096, [&](std::int64_t b, std::int64_t e) {
    for (std::int64_t i = b; i < e; ++i) {
      const std::int64_t x = i % size[0] + start[0];
      const std::int64_t y = (i / size[0]) % size[1] + start[1];
      const std::int64_t z = i / (size[0] * size[1]) + start[2];
      if (x < 0 || y < 0 || z < 0 || x >= vol.nx() || y >= vol.ny() ||
          z >= vol.nz())
        continue;  // already zero
      const std::int64_t si = (z * vol.ny() + y) * vol.nx() + x;
      for (std::int64_t c = 0; c < vol.channels; ++c)
        out.data[c * nvox + i] = vol.data[c * svox + si];
    }
  });
  return out;
}

namespace {

// Between-class variance sweep; returns the split bin k (foreground is any
// bin > k). First maximizer wins.
int otsu_split_bin(const std::vector<std::int64_t>& hist, std::int64_t total) {
  double sum_all = 0;
  for (int i = 0; i < 256; ++i) sum_all += double(i) * double(hist[i]);
  double w0 = 0, sum0 = 0, best = -1.0;
  int best_k = 0;
  for (int k = 0; k < 255; ++k) {
    w0 += double(hist[k]);
    if (w0 == 0) continue;
    const double w1 = double(total) - w0;
    if (w1 == 0) break;
    sum0 += double(k) * double(hist[k]);
    const double mu0 = sum0 / w0;
    const double mu1 = (sum_all - sum0) / w1;
    const double between = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
    if (between > best) {
      best = between;
      best_k = k;
    }
  }
  return best_k;
}

std::vector<std::uint8_t> binary_dilate6(const std::vector<std::uint8_t>& in,
                                         std::int64_t nx, std::int64_t ny,
                                         std::int64_t nz) {
  std::vector<std::uint8_t> out(in.size(), 0);
  parallel_for(0, std::int64_t(in.size()), 8192,
               [&](std::int64_t b, std::int64_t e) {
    for (std::int64_t i = b; i < e; ++i) {
      const std::int64_t x = i % nx, y = (i / nx) % ny, z = i / (nx * ny);
      std::uint8_t v = in[i];
      if (!v && x > 0) v = in[i - 1];
      if (!v && x + 1 < nx) v = in[i + 1];
      if (!v && y > 0) v = in[i - nx];
      if (!v && y + 1 < ny) v = in[i + nx];
      if (!v && z > 0) v = in[i - nx * ny];
      if (!v && z + 1 < nz) v = in[i + nx * ny];
      out[i] = v;
    }
  });
  return out;
}

std::vector<std::uint8_t> binary_erode6(const std::vector<std::uint8_t>& in,
                                        std::int64_t nx, std::int64_t ny,
                                        std::int64_t nz) {
  // outside the grid counts as foreground, keeping closing extensive
  std::vector<std::uint8_t> out(in.size(), 0);
  parallel_for(0, std::int64_t(in.size()), 8192,
               [&](std::int64_t b, std::int64_t e) {
    for (std::int64_t i = b; i < e; ++i) {
      if (!in[i]) continue;
      const std::int64_t x = i % nx, y = (i / nx) % ny, z = i / (nx * ny);
      const bool keep = (x == 0 || in[i - 1]) && (x + 1 == nx || in[i + 1]) &&
                        (y == 0 || in[i - nx]) && (y + 1 == ny || in[i + nx]) &&
                        (z == 0 || in[i - nx * ny]) &&
                        (z + 1 == nz || in[i + nx * ny]);
      out[i] = keep ? 1 : 0;
    }
  });
  return out;
}

}  // namespace

MaskVolume adaptive_mask(const Volume& vol) {
  require(vol.channels == 1, "shape", "adaptive_mask expects a single channel");
  float lo = vol.data[0], hi = vol.data[0];
  for (float v : vol.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  require(hi > lo, "domain",
          "adaptive_mask: degenerate histogram (single occupied bin)");

  std::vector<std::int64_t> hist(256, 0);
  const double binw = double(hi - lo) / 256.0;
  for (float v : vol.data) {
    int b = int((double(v) - double(lo)) / binw);
    b = std::clamp(b, 0, 255);
    ++hist[b];
  }
  const int split = otsu_split_bin(hist, vol.voxels());

  const std::int64_t nx = vol.nx(), ny = vol.ny(), nz = vol.nz();
  std::vector<std::uint8_t> fg(vol.data.size());
  for (std::size_t i = 0; i < vol.data.size(); ++i) {
    int b = int((double(vol.data[i]) - double(lo)) / binw);
    b = std::clamp(b, 0, 255);
    fg[i] = b > split;
  }

  // closing = dilate then erode, one iteration
  fg = binary_erode6(binary_dilate6(fg, nx, ny, nz), nx, ny, nz);

  // largest 6-connected component; ties keep the first in scan order
  std::vector<std::int32_t> label(fg.size(), -1);
  std::int64_t best_count = 0;
  std::int32_t best_label = -1, next = 0;
  std::vector<std::int64_t> stack;
  for (std::int64_t seed = 0; seed < std::int64_t(fg.size()); ++seed) {
    if (!fg[seed] || label[seed] >= 0) continue;
    std::int64_t count = 0;
    stack.push_back(seed);
    label[seed] = next;
    while (!stack.empty()) {
      const std::int64_t i = stack.back();
      stack.pop_back();
      ++count;
      const std::int64_t x = i % nx, y = (i / nx) % ny, z = i / (nx * ny);
      const std::int64_t nbr[6] = {x > 0 ? i - 1 : -1,
                                   x + 1 < nx ? i + 1 : -1,
                                   y > 0 ? i - nx : -1,
                                   y + 1 < ny ? i + nx : -1,
                                   z > 0 ? i - nx * ny : -1,
                                   z + 1 < nz ? i + nx * ny : -1};
      for (std::int64_t j : nbr)
        if (j >= 0 && fg[j] && label[j] < 0) {
          label[j] = next;
          stack.push_back(j);
        }
    }
    if (count > best_count) {
      best_count = count;
      best_label = next;
    }
    ++next;
  }

  MaskVolume m;
  m.vol = Volume::make(vol.dims, 1, vol.spacing_mm, vol.origin_mm);
  if (best_label >= 0)
    for (std::size_t i = 0; i < fg.size(); ++i)
      m.vol.data[i] = label[i] == best_label ? 1.f : 0.f;
  return m;
}

Volume apply_mask(const Volume& vol, const MaskVolume& mask) {
  require(vol.dims == mask.vol.dims, "shape", "apply_mask: grid mismatch");
  Volume out = vol;
  const std::int64_t nvox = vol.voxels();
  for (std::int64_t c = 0; c < vol.channels; ++c)
    for (std::int64_t i = 0; i < nvox; ++i)
      out.data[c * nvox + i] *= mask.vol.data[i];
  return out;
}

}  // namespace cbctox
