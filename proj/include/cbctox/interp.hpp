#pragma once

// Trilinear sampling in voxel coordinates with border clamping. Shared by
// resampling, warping and the differentiable STN node; integer positions
// reduce to exact gathers (weights are exactly 0/1).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>

namespace cbctox {

template <class T>
struct TrilinearTap {
  std::int64_t i000;  // base corner flat index
  std::int64_t dx, dy, dz;  // strides to the +1 corners (0 when clamped)
  T fx, fy, fz;             // fractional weights
  bool clamped_x, clamped_y, clamped_z;
};

// Positions are clamped to [0, n-1] per axis before the corner split.
template <class T>
inline TrilinearTap<T> trilinear_tap(std::int64_t nx, std::int64_t ny,
                                     std::int64_t nz, T x, T y, T z) {
  TrilinearTap<T> t;
  t.clamped_x = x <= T(0) || x >= T(nx - 1);
  t.clamped_y = y <= T(0) || y >= T(ny - 1);
  t.clamped_z = z <= T(0) || z >= T(nz - 1);
  x = std::clamp(x, T(0), T(nx - 1));
  y = std::clamp(y, T(0), T(ny - 1));
  z = std::clamp(z, T(0), T(nz - 1));
  const std::int64_t x0 = static_cast<std::int64_t>(std::floor(x));
  const std::int64_t y0 = static_cast<std::int64_t>(std::floor(y));
  const std::int64_t z0 = static_cast<std::int64_t>(std::floor(z));
  t.fx = x - T(x0);
  t.fy = y - T(y0);
  t.fz = z - T(z0);
  t.dx = x0 + 1 < nx ? 1 : 0;
  t.dy = y0 + 1 < ny ? nx : 0;
  t.dz = z0 + 1 < nz ? nx * ny : 0;
  t.i000 = (z0 * ny + y0) * nx + x0;
  return t;
}

template <class T, class S>
inline T sample_tap(const S* ch, const TrilinearTap<T>& t) {
  const T v000 = T(ch[t.i000]);
  const T v100 = T(ch[t.i000 + t.dx]);
  const T v010 = T(ch[t.i000 + t.dy]);
  const T v110 = T(ch[t.i000 + t.dy + t.dx]);
  const T v001 = T(ch[t.i000 + t.dz]);
  const T v101 = T(ch[t.i000 + t.dz + t.dx]);
  const T v011 = T(ch[t.i000 + t.dz + t.dy]);
  const T v111 = T(ch[t.i000 + t.dz + t.dy + t.dx]);
  const T gx = T(1) - t.fx, gy = T(1) - t.fy, gz = T(1) - t.fz;
  const T c00 = v000 * gx + v100 * t.fx;
  const T c10 = v010 * gx + v110 * t.fx;
  const T c01 = v001 * gx + v101 * t.fx;
  const T c11 = v011 * gx + v111 * t.fx;
  const T c0 = c00 * gy + c10 * t.fy;
  const T c1 = c01 * gy + c11 * t.fy;
  return c0 * gz + c1 * t.fz;
}

template <class T, class S>
inline T sample_trilinear(const S* ch, std::int64_t nx, std::int64_t ny,
                          std::int64_t nz, T x, T y, T z) {
  return sample_tap(ch, trilinear_tap<T>(nx, ny, nz, x, y, z));
}

// Value and d/d(position); derivative components are zero on clamped axes.
template <class T, class S>
inline T sample_trilinear_grad(const S* ch, const TrilinearTap<T>& t,
                               std::array<T, 3>& dpos) {
  const T v000 = T(ch[t.i000]);
  const T v100 = T(ch[t.i000 + t.dx]);
  const T v010 = T(ch[t.i000 + t.dy]);
  const T v110 = T(ch[t.i000 + t.dy + t.dx]);
  const T v001 = T(ch[t.i000 + t.dz]);
  const T v101 = T(ch[t.i000 + t.dz + t.dx]);
  const T v011 = T(ch[t.i000 + t.dz + t.dy]);
  const T v111 = T(ch[t.i000 + t.dz + t.dy + t.dx]);
  const T gx = T(1) - t.fx, gy = T(1) - t.fy, gz = T(1) - t.fz;

  const T c00 = v000 * gx + v100 * t.fx;
  const T c10 = v010 * gx + v110 * t.fx;
  const T c01 = v001 * gx + v101 * t.fx;
  const T c11 = v011 * gx + v111 * t.fx;
  const T c0 = c00 * gy + c10 * t.fy;
  const T c1 = c01 * gy + c11 * t.fy;

  dpos[0] = t.clamped_x
                ? T(0)
                : ((v100 - v000) * gy + (v110 - v010) * t.fy) * gz +
                      ((v101 - v001) * gy + (v111 - v011) * t.fy) * t.fz;
  dpos[1] = t.clamped_y
                ? T(0)
                : (c10 - c00) * gz + (c11 - c01) * t.fz;
  dpos[2] = t.clamped_z ? T(0) : c1 - c0;
  return c0 * gz + c1 * t.fz;
}

}  // namespace cbctox
