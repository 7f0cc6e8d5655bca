#include "cbctox/losses.hpp"

#include <cmath>

#include "cbctox/error.hpp"
#include "cbctox/parallel.hpp"

namespace cbctox {

double ncc(const Volume& a, const Volume& b, const MaskVolume* mask) {
  require(a.same_grid(b) && a.channels == b.channels, "shape",
          "ncc: grid mismatch");
  if (mask)
    require(a.same_grid(mask->vol), "shape", "ncc: mask grid mismatch");
  const std::int64_t n = a.numel();
  const std::int64_t nvox = a.voxels();
  const float* mp = mask ? mask->vol.data.data() : nullptr;

  struct Sums {
    double n = 0, sa = 0, sb = 0;
    Sums operator+(const Sums& o) const {
      return {n + o.n, sa + o.sa, sb + o.sb};
    }
  };
  const Sums s1 = chunked_sum<Sums>(n, [&](std::int64_t lo, std::int64_t hi) {
    Sums s;
    for (std::int64_t i = lo; i < hi; ++i) {
      if (mp && mp[i % nvox] == 0.f) continue;
      s.n += 1;
      s.sa += a.data[i];
      s.sb += b.data[i];
    }
    return s;
  });
  require(s1.n >= 2, "domain", "ncc: fewer than 2 voxels in mask");
  const double ma = s1.sa / s1.n, mb = s1.sb / s1.n;

  struct Cov {
    double ab = 0, aa = 0, bb = 0;
    Cov operator+(const Cov& o) const {
      return {ab + o.ab, aa + o.aa, bb + o.bb};
    }
  };
  const Cov s2 = chunked_sum<Cov>(n, [&](std::int64_t lo, std::int64_t hi) {
    Cov s;
    for (std::int64_t i = lo; i < hi; ++i) {
      if (mp && mp[i % nvox] == 0.f) continue;
      const double da = a.data[i] - ma;
      const double db = b.data[i] - mb;
      s.ab += da * db;
      s.aa += da * da;
      s.bb += db * db;
    }
    return s;
  });
  require(s2.aa > 0 && s2.bb > 0, "domain",
          "ncc: zero variance inside the mask");
  return s2.ab / std::sqrt(s2.aa * s2.bb);
}

double l2_gradient_penalty(const DisplacementField& dvf) {
  const Volume& g = dvf.f;
  const std::int64_t nx = g.nx(), ny = g.ny(), nz = g.nz();
  const std::int64_t nvox = g.voxels();
  const std::int64_t stride[3] = {1, nx, nx * ny};
  const std::int64_t n_axis[3] = {nx, ny, nz};

  const double total = chunked_sum<double>(
      nvox, [&](std::int64_t lo, std::int64_t hi) {
        double s = 0;
        for (std::int64_t i = lo; i < hi; ++i) {
          const std::int64_t pos[3] = {i % nx, (i / nx) % ny, i / (nx * ny)};
          for (int axis = 0; axis < 3; ++axis) {
            if (n_axis[axis] < 2) continue;
            // forward difference; trailing voxel reuses the previous one
            const std::int64_t ii =
                pos[axis] == n_axis[axis] - 1 ? i - stride[axis] : i;
            for (int comp = 0; comp < 3; ++comp) {
              const float* u = g.data.data() + comp * nvox;
              const double d = double(u[ii + stride[axis]]) - double(u[ii]);
              s += d * d;
            }
          }
        }
        return s;
      });
  return total / (3.0 * double(nvox));
}

double dir_loss(const Volume& fixed, const Volume& moving,
                const DisplacementField& dvf, double lambda,
                const MaskVolume* mask) {
  require(lambda >= 0, "domain", "dir_loss: lambda must be >= 0");
  const Volume warped = warp(moving, dvf);
  return -ncc(fixed, warped, mask) + lambda * l2_gradient_penalty(dvf);
}

}  // namespace cbctox
