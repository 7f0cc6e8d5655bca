#include "cbctox/regnet/pyramid.hpp"

#include <algorithm>

#include "cbctox/interp.hpp"
#include "cbctox/parallel.hpp"

namespace cbctox::reg {

namespace {

// smooth one axis with [1,4,6,4,1]/16, border-clamped
void smooth_axis(const Volume& in, Volume& out, int axis) {
  static const double kKernel[5] = {1. / 16, 4. / 16, 6. / 16, 4. / 16,
                                    1. / 16};
  const std::int64_t nx = in.nx(), ny = in.ny(), nz = in.nz();
  const std::int64_t nvox = in.voxels();
  const std::int64_t stride = axis == 0 ? 1 : axis == 1 ? nx : nx * ny;
  const std::int64_t extent = in.dims[std::size_t(axis)];

  for (std::int64_t c = 0; c < in.channels; ++c) {
    const float* src = in.data.data() + c * nvox;
    float* dst = out.data.data() + c * nvox;
    parallel_for(0, nvox, 8192, [&](std::int64_t b, std::int64_t e) {
      for (std::int64_t i = b; i < e; ++i) {
        const std::int64_t pos =
            axis == 0 ? i % nx : axis == 1 ? (i / nx) % ny : i / (nx * ny);
        double acc = 0;
        for (int k = -2; k <= 2; ++k) {
          const std::int64_t p = std::clamp<std::int64_t>(pos + k, 0,
                                                          extent - 1);
          acc += kKernel[k + 2] * double(src[i + (p - pos) * stride]);
        }
        dst[i] = float(acc);
      }
    });
  }
}

}  // namespace

Volume gaussian_smooth(const Volume& v) {
  Volume a = v, b = v;
  smooth_axis(v, a, 0);
  smooth_axis(a, b, 1);
  smooth_axis(b, a, 2);
  return a;
}

Volume downsample2(const Volume& v) {
  const Volume s = gaussian_smooth(v);
  std::array<std::int64_t, 3> odims;
  for (int i = 0; i < 3; ++i) odims[i] = (v.dims[i] + 1) / 2;
  Volume out = Volume::make(odims, v.channels,
                            {v.spacing_mm[0] * 2, v.spacing_mm[1] * 2,
                             v.spacing_mm[2] * 2},
                            v.origin_mm);
  const std::int64_t nvox = out.voxels(), svox = v.voxels();
  parallel_for(0, nvox, 8192, [&](std::int64_t b, std::int64_t e) {
    for (std::int64_t i = b; i < e; ++i) {
      const std::int64_t x = i % odims[0];
      const std::int64_t y = (i / odims[0]) % odims[1];
      const std::int64_t z = i / (odims[0] * odims[1]);
      const std::int64_t si = (2 * z * v.ny() + 2 * y) * v.nx() + 2 * x;
      for (std::int64_t c = 0; c < v.channels; ++c)
        out.data[c * nvox + i] = s.data[c * svox + si];
    }
  });
  return out;
}

std::vector<Volume> build_pyramid(const Volume& v, int levels) {
  std::vector<Volume> pyr{v};
  for (int l = 1; l < levels; ++l) {
    const Volume& prev = pyr.back();
    if (prev.nx() < 4 || prev.ny() < 4 || prev.nz() < 4) break;
    pyr.push_back(downsample2(prev));
  }
  return pyr;
}

DisplacementField upsample_dvf(const DisplacementField& dvf,
                               const Volume& target_grid) {
  DisplacementField out = DisplacementField::zeros_like(target_grid);
  const Volume& src = dvf.f;
  const std::int64_t nvox = target_grid.voxels(), svox = src.voxels();
  const std::int64_t nx = target_grid.nx(), ny = target_grid.ny();
  const double rx = target_grid.spacing_mm[0] / src.spacing_mm[0];
  const double ry = target_grid.spacing_mm[1] / src.spacing_mm[1];
  const double rz = target_grid.spacing_mm[2] / src.spacing_mm[2];
  parallel_for(0, nvox, 8192, [&](std::int64_t b, std::int64_t e) {
    for (std::int64_t i = b; i < e; ++i) {
      const std::int64_t x = i % nx;
      const std::int64_t y = (i / nx) % ny;
      const std::int64_t z = i / (nx * ny);
      const auto tap = trilinear_tap<double>(src.nx(), src.ny(), src.nz(),
                                             double(x) * rx, double(y) * ry,
                                             double(z) * rz);
      for (int c = 0; c < 3; ++c)
        out.f.data[c * nvox + i] =
            float(sample_tap(src.data.data() + c * svox, tap));
    }
  });
  return out;
}

Vec3 center_of_mass_mm(const Volume& v) {
  double wsum = 0, cx = 0, cy = 0, cz = 0;
  for (std::int64_t z = 0; z < v.nz(); ++z)
    for (std::int64_t y = 0; y < v.ny(); ++y)
      for (std::int64_t x = 0; x < v.nx(); ++x) {
        const double w = std::max(0.f, v.at(0, x, y, z));
        wsum += w;
        cx += w * double(x);
        cy += w * double(y);
        cz += w * double(z);
      }
  if (wsum <= 0) {
    return {v.origin_mm[0] + 0.5 * (v.nx() - 1) * v.spacing_mm[0],
            v.origin_mm[1] + 0.5 * (v.ny() - 1) * v.spacing_mm[1],
            v.origin_mm[2] + 0.5 * (v.nz() - 1) * v.spacing_mm[2]};
  }
  return {v.origin_mm[0] + cx / wsum * v.spacing_mm[0],
          v.origin_mm[1] + cy / wsum * v.spacing_mm[1],
          v.origin_mm[2] + cz / wsum * v.spacing_mm[2]};
}

}  // namespace cbctox::reg
