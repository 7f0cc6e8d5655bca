#pragma once

// Differentiable counterparts of the registration math: the STN warp
// (trilinear resampling through a DVF), per-sample global NCC and the L2
// gradient penalty. Conventions match the volume-level versions in
// losses.hpp / field.hpp exactly.

#include <array>

#include "cbctox/interp.hpp"
#include "cbctox/nn/ops.hpp"
#include "cbctox/nn/tensor.hpp"
#include "cbctox/parallel.hpp"

namespace cbctox::nn {

// moving [N,C,D,H,W], dvf [N,3,D,H,W] in mm; out(x) = moving(x + u/spacing).
// Differentiable in both inputs; the moving-image path scatters serially and
// is only exercised by gradcheck (registration trains the DVF path).
template <class T>
Tensor<T> warp_stn(Tensor<T> moving, Tensor<T> dvf,
                   std::array<double, 3> spacing_mm) {
  require(moving.rank() == 5 && dvf.rank() == 5, "shape",
          "warp_stn: need 5-d tensors");
  require(dvf.dim(1) == 3, "shape", "warp_stn: DVF needs 3 channels");
  for (int i : {0, 2, 3, 4})
    require(moving.dim(i) == dvf.dim(i), "shape", "warp_stn: grid mismatch");

  const std::int64_t n = moving.dim(0), c = moving.dim(1);
  const std::int64_t d = moving.dim(2), h = moving.dim(3), w = moving.dim(4);
  const std::int64_t nvox = d * h * w;
  // tensor [D,H,W] has W fastest; the tap helper takes (nx,ny,nz)=(W,H,D)
  const T sx = T(spacing_mm[0]), sy = T(spacing_mm[1]), sz = T(spacing_mm[2]);

  Tensor<T> out = Tensor<T>::result(moving.shape(), {moving.node(), dvf.node()});
  parallel_for(0, n * nvox, 4096, [&](std::int64_t b0, std::int64_t b1) {
    for (std::int64_t t = b0; t < b1; ++t) {
      const std::int64_t smp = t / nvox;
      const std::int64_t i = t % nvox;
      const std::int64_t x = i % w, y = (i / w) % h, z = i / (w * h);
      const T* u = dvf.data() + smp * 3 * nvox;
      const auto tap = trilinear_tap<T>(
          w, h, d, T(x) + u[i] / sx, T(y) + u[nvox + i] / sy,
          T(z) + u[2 * nvox + i] / sz);
      for (std::int64_t ch = 0; ch < c; ++ch)
        out.data()[(smp * c + ch) * nvox + i] =
            sample_tap(moving.data() + (smp * c + ch) * nvox, tap);
    }
  });

  out.set_backprop([moving, dvf, out, n, c, d, h, w, nvox, sx, sy,
                    sz]() mutable {
    const T* gy = out.node()->grad.data();
    if (dvf.requires_grad()) {
      T* gu = dvf.grad();
      parallel_for(0, n * nvox, 4096, [&](std::int64_t b0, std::int64_t b1) {
        for (std::int64_t t = b0; t < b1; ++t) {
          const std::int64_t smp = t / nvox;
          const std::int64_t i = t % nvox;
          const std::int64_t x = i % w, y = (i / w) % h, z = i / (w * h);
          const T* u = dvf.data() + smp * 3 * nvox;
          const auto tap = trilinear_tap<T>(
              w, h, d, T(x) + u[i] / sx, T(y) + u[nvox + i] / sy,
              T(z) + u[2 * nvox + i] / sz);
          T acc[3] = {T(0), T(0), T(0)};
          for (std::int64_t ch = 0; ch < c; ++ch) {
            std::array<T, 3> dpos;
            sample_trilinear_grad(moving.data() + (smp * c + ch) * nvox, tap,
                                  dpos);
            const T g = gy[(smp * c + ch) * nvox + i];
            acc[0] += g * dpos[0];
            acc[1] += g * dpos[1];
            acc[2] += g * dpos[2];
          }
          gu[smp * 3 * nvox + i] += acc[0] / sx;
          gu[smp * 3 * nvox + nvox + i] += acc[1] / sy;
          gu[smp * 3 * nvox + 2 * nvox + i] += acc[2] / sz;
        }
      });
    }
    if (moving.requires_grad()) {
      T* gm = moving.grad();
      for (std::int64_t t = 0; t < n * nvox; ++t) {  // serial scatter
        const std::int64_t smp = t / nvox;
        const std::int64_t i = t % nvox;
        const std::int64_t x = i % w, y = (i / w) % h, z = i / (w * h);
        const T* u = dvf.data() + smp * 3 * nvox;
        const auto tap = trilinear_tap<T>(
            w, h, d, T(x) + u[i] / sx, T(y) + u[nvox + i] / sy,
            T(z) + u[2 * nvox + i] / sz);
        const T wx[2] = {T(1) - tap.fx, tap.fx};
        const T wy[2] = {T(1) - tap.fy, tap.fy};
        const T wz[2] = {T(1) - tap.fz, tap.fz};
        for (std::int64_t ch = 0; ch < c; ++ch) {
          const T g = gy[(smp * c + ch) * nvox + i];
          T* base = gm + (smp * c + ch) * nvox;
          for (int cz = 0; cz < 2; ++cz)
            for (int cy = 0; cy < 2; ++cy)
              for (int cx = 0; cx < 2; ++cx)
                base[tap.i000 + cz * tap.dz + cy * tap.dy + cx * tap.dx] +=
                    g * wz[cz] * wy[cy] * wx[cx];
        }
      }
    }
  });
  return out;
}

// Mean over the batch of per-sample Pearson correlation across all other
// axes. Sums accumulate in double regardless of T.
template <class T>
Tensor<T> ncc_loss(Tensor<T> a, Tensor<T> b) {
  require(a.shape() == b.shape() && a.rank() >= 2, "shape",
          "ncc_loss: shape mismatch");
  const std::int64_t n = a.dim(0);
  const std::int64_t s = a.numel() / n;
  require(s >= 2, "domain", "ncc_loss: needs >= 2 voxels per sample");

  Tensor<T> out = Tensor<T>::result({1}, {a.node(), b.node()});
  auto stats = std::make_shared<std::vector<double>>(std::size_t(n * 5));
  double total = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    const T* av = a.data() + i * s;
    const T* bv = b.data() + i * s;
    struct S2 {
      double sa = 0, sb = 0;
      S2 operator+(const S2& o) const { return {sa + o.sa, sb + o.sb}; }
    };
    const S2 m = chunked_sum<S2>(s, [&](std::int64_t lo, std::int64_t hi) {
      S2 r;
      for (std::int64_t j = lo; j < hi; ++j) {
        r.sa += double(av[j]);
        r.sb += double(bv[j]);
      }
      return r;
    });
    const double ma = m.sa / double(s), mb = m.sb / double(s);
    struct S3 {
      double ab = 0, aa = 0, bb = 0;
      S3 operator+(const S3& o) const {
        return {ab + o.ab, aa + o.aa, bb + o.bb};
      }
    };
    const S3 cv = chunked_sum<S3>(s, [&](std::int64_t lo, std::int64_t hi) {
      S3 r;
      for (std::int64_t j = lo; j < hi; ++j) {
        const double da = double(av[j]) - ma;
        const double db = double(bv[j]) - mb;
        r.ab += da * db;
        r.aa += da * da;
        r.bb += db * db;
      }
      return r;
    });
    require(cv.aa > 0 && cv.bb > 0, "domain", "ncc_loss: zero variance input");
    const double r = cv.ab / std::sqrt(cv.aa * cv.bb);
    (*stats)[std::size_t(i * 5)] = ma;
    (*stats)[std::size_t(i * 5 + 1)] = mb;
    (*stats)[std::size_t(i * 5 + 2)] = cv.ab;
    (*stats)[std::size_t(i * 5 + 3)] = cv.aa;
    (*stats)[std::size_t(i * 5 + 4)] = cv.bb;
    total += r;
  }
  out.data()[0] = T(total / double(n));

  out.set_backprop([a, b, out, stats, n, s]() mutable {
    const double g = double(out.node()->grad[0]) / double(n);
    for (std::int64_t i = 0; i < n; ++i) {
      const double ma = (*stats)[std::size_t(i * 5)];
      const double mb = (*stats)[std::size_t(i * 5 + 1)];
      const double sab = (*stats)[std::size_t(i * 5 + 2)];
      const double saa = (*stats)[std::size_t(i * 5 + 3)];
      const double sbb = (*stats)[std::size_t(i * 5 + 4)];
      const double denom = std::sqrt(saa * sbb);
      const double r = sab / denom;
      const T* av = a.data() + i * s;
      const T* bv = b.data() + i * s;
      // dr/da_j = (b^_j - r * (saa? ...)) — centered forms, means drop out
      if (a.requires_grad()) {
        T* ga = a.grad() + i * s;
        parallel_for(0, s, 8192, [&](std::int64_t lo, std::int64_t hi) {
          for (std::int64_t j = lo; j < hi; ++j) {
            const double da = double(av[j]) - ma;
            const double db = double(bv[j]) - mb;
            ga[j] += T(g * (db / denom - r * da / saa));
          }
        });
      }
      if (b.requires_grad()) {
        T* gb = b.grad() + i * s;
        parallel_for(0, s, 8192, [&](std::int64_t lo, std::int64_t hi) {
          for (std::int64_t j = lo; j < hi; ++j) {
            const double da = double(av[j]) - ma;
            const double db = double(bv[j]) - mb;
            gb[j] += T(g * (da / denom - r * db / sbb));
          }
        });
      }
    }
  });
  return out;
}

// Mean over batch, voxels and components of the summed squared forward
// differences of dvf [N,3,D,H,W] in voxel units; the trailing voxel along an
// axis reuses the preceding difference (matches losses.hpp).
template <class T>
Tensor<T> l2_gradient_loss(Tensor<T> dvf) {
  require(dvf.rank() == 5 && dvf.dim(1) == 3, "shape",
          "l2_gradient_loss: need [N,3,D,H,W]");
  const std::int64_t n = dvf.dim(0);
  const std::int64_t d = dvf.dim(2), h = dvf.dim(3), w = dvf.dim(4);
  const std::int64_t nvox = d * h * w;
  const std::int64_t stride[3] = {1, w, w * h};
  const std::int64_t n_axis[3] = {w, h, d};

  Tensor<T> out = Tensor<T>::result({1}, {dvf.node()});
  double total = 0;
  for (std::int64_t smp = 0; smp < n; ++smp) {
    for (int comp = 0; comp < 3; ++comp) {
      const T* u = dvf.data() + (smp * 3 + comp) * nvox;
      total += chunked_sum<double>(nvox, [&](std::int64_t lo, std::int64_t hi) {
        double acc = 0;
        for (std::int64_t i = lo; i < hi; ++i) {
          const std::int64_t pos[3] = {i % w, (i / w) % h, i / (w * h)};
          for (int axis = 0; axis < 3; ++axis) {
            if (n_axis[axis] < 2) continue;
            const std::int64_t ii =
                pos[axis] == n_axis[axis] - 1 ? i - stride[axis] : i;
            const double df = double(u[ii + stride[axis]]) - double(u[ii]);
            acc += df * df;
          }
        }
        return acc;
      });
    }
  }
  const double denom = 3.0 * double(nvox) * double(n);
  out.data()[0] = T(total / denom);

  out.set_backprop([dvf, out, n, d, h, w, nvox, denom]() mutable {
    if (!dvf.requires_grad()) return;
    const std::int64_t stride[3] = {1, w, w * h};
    const std::int64_t n_axis[3] = {w, h, d};
    const T g2 = T(2.0 * double(out.node()->grad[0]) / denom);
    parallel_for(0, n * 3, 1, [&](std::int64_t p0, std::int64_t p1) {
      for (std::int64_t plane = p0; plane < p1; ++plane) {
        const T* u = dvf.data() + plane * nvox;
        T* gu = dvf.grad() + plane * nvox;
        for (std::int64_t i = 0; i < nvox; ++i) {
          const std::int64_t pos[3] = {i % w, (i / w) % h, i / (w * h)};
          for (int axis = 0; axis < 3; ++axis) {
            if (n_axis[axis] < 2) continue;
            const std::int64_t ii =
                pos[axis] == n_axis[axis] - 1 ? i - stride[axis] : i;
            const T df = u[ii + stride[axis]] - u[ii];
            gu[ii + stride[axis]] += g2 * df;
            gu[ii] -= g2 * df;
          }
        }
      }
    });
  });
  return out;
}

// -ncc(fixed, warp(moving, dvf)) + lambda * l2_gradient_loss(dvf)
template <class T>
Tensor<T> dir_loss_graph(Tensor<T> fixed, Tensor<T> moving, Tensor<T> dvf,
                         std::array<double, 3> spacing_mm, double lambda) {
  Tensor<T> warped = warp_stn(moving, dvf, spacing_mm);
  Tensor<T> sim = scale(ncc_loss(fixed, warped), T(-1));
  if (lambda == 0.0) return sim;
  return add(sim, scale(l2_gradient_loss(dvf), T(lambda)));
}

}  // namespace cbctox::nn
