#pragma once

// Graph ops for the two architectures: conv3d (im2col + GEMM), linear,
// activations, batchnorm, dropout, pooling, nearest upsampling, concat and
// the weighted softmax cross-entropy. Heavy loops run on the kern backends
// and parallelize over disjoint output ranges only, so results are
// independent of the thread count.

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "cbctox/kern/kernels.hpp"
#include "cbctox/nn/tensor.hpp"
#include "cbctox/parallel.hpp"
#include "cbctox/rng.hpp"

namespace cbctox::nn {

// ---- elementwise ------------------------------------------------------------

template <class T>
Tensor<T> add(Tensor<T> a, Tensor<T> b) {
  require(a.shape() == b.shape(), "shape", "add: shape mismatch");
  Tensor<T> out = Tensor<T>::result(a.shape(), {a.node(), b.node()});
  kern::vadd(a.data(), b.data(), out.data(), std::size_t(out.numel()));
  out.set_backprop([a, b, out]() mutable {
    const T* g = out.node()->grad.data();
    const std::size_t n = std::size_t(out.numel());
    if (a.requires_grad()) kern::axpy(T(1), g, a.grad(), n);
    if (b.requires_grad()) kern::axpy(T(1), g, b.grad(), n);
  });
  return out;
}

template <class T>
Tensor<T> mul(Tensor<T> a, Tensor<T> b) {
  require(a.shape() == b.shape(), "shape", "mul: shape mismatch");
  Tensor<T> out = Tensor<T>::result(a.shape(), {a.node(), b.node()});
  kern::vmul(a.data(), b.data(), out.data(), std::size_t(out.numel()));
  out.set_backprop([a, b, out]() mutable {
    const T* g = out.node()->grad.data();
    const std::size_t n = std::size_t(out.numel());
    if (a.requires_grad()) {
      T* ga = a.grad();
      const T* bv = b.data();
      for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * bv[i];
    }
    if (b.requires_grad()) {
      T* gb = b.grad();
      const T* av = a.data();
      for (std::size_t i = 0; i < n; ++i) gb[i] += g[i] * av[i];
    }
  });
  return out;
}

template <class T>
Tensor<T> scale(Tensor<T> a, T c) {
  Tensor<T> out = Tensor<T>::result(a.shape(), {a.node()});
  const T* av = a.data();
  T* ov = out.data();
  for (std::int64_t i = 0; i < a.numel(); ++i) ov[i] = c * av[i];
  out.set_backprop([a, out, c]() mutable {
    if (a.requires_grad())
      kern::axpy(c, out.node()->grad.data(), a.grad(),
                 std::size_t(a.numel()));
  });
  return out;
}

template <class T>
Tensor<T> mean(Tensor<T> a) {
  Tensor<T> out = Tensor<T>::result({1}, {a.node()});
  const std::int64_t n = a.numel();
  out.data()[0] = chunked_sum<T>(n, [&](std::int64_t b, std::int64_t e) {
    return kern::sum(a.data() + b, std::size_t(e - b));
  }) / T(n);
  out.set_backprop([a, out]() mutable {
    if (!a.requires_grad()) return;
    const T g = out.node()->grad[0] / T(a.numel());
    T* ga = a.grad();
    for (std::int64_t i = 0; i < a.numel(); ++i) ga[i] += g;
  });
  return out;
}

// ---- activations ------------------------------------------------------------

template <class T>
Tensor<T> leaky_relu(Tensor<T> a, T slope) {
  Tensor<T> out = Tensor<T>::result(a.shape(), {a.node()});
  kern::leaky_relu(a.data(), slope, out.data(), std::size_t(a.numel()));
  out.set_backprop([a, out, slope]() mutable {
    if (a.requires_grad())
      kern::leaky_relu_backward(a.data(), out.node()->grad.data(), slope,
                                a.grad(), std::size_t(a.numel()));
  });
  return out;
}

template <class T>
Tensor<T> relu(Tensor<T> a) {
  return leaky_relu(a, T(0));
}

// ---- linear -----------------------------------------------------------------

// x [N,F] * w[G,F]^T + b[G] -> [N,G]
template <class T>
Tensor<T> linear(Tensor<T> x, Tensor<T> w, Tensor<T> b) {
  require(x.rank() == 2 && w.rank() == 2 && b.rank() == 1, "shape",
          "linear: bad ranks");
  const std::int64_t n = x.dim(0), f = x.dim(1), g = w.dim(0);
  require(w.dim(1) == f && b.dim(0) == g, "shape", "linear: shape mismatch");

  Tensor<T> out = Tensor<T>::result({n, g}, {x.node(), w.node(), b.node()});
  kern::gemm_nt(x.data(), w.data(), out.data(), std::size_t(n), std::size_t(f),
                std::size_t(g), false);
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < g; ++j) out.data()[i * g + j] += b.data()[j];

  out.set_backprop([x, w, b, out, n, f, g]() mutable {
    const T* gy = out.node()->grad.data();
    if (x.requires_grad())  // dx += gy[N,G] * w[G,F]
      kern::gemm_nn(gy, w.data(), x.grad(), std::size_t(n), std::size_t(g),
                    std::size_t(f), true);
    if (w.requires_grad()) {  // dw[g][f] += sum_n gy[n][g] x[n][f]
      std::vector<T> gyt(std::size_t(g * n));
      for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < g; ++j) gyt[j * n + i] = gy[i * g + j];
      kern::gemm_nn(gyt.data(), x.data(), w.grad(), std::size_t(g),
                    std::size_t(n), std::size_t(f), true);
    }
    if (b.requires_grad()) {
      T* gb = b.grad();
      for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < g; ++j) gb[j] += gy[i * g + j];
    }
  });
  return out;
}

// ---- conv3d -----------------------------------------------------------------

struct ConvDims {
  std::int64_t n, ci, d, h, w;       // input
  std::int64_t co, kd, kh, kw;       // weights
  std::int64_t od, oh, ow;           // output
  std::int64_t stride, pad;
  std::int64_t k() const { return ci * kd * kh * kw; }
  std::int64_t s() const { return od * oh * ow; }
};

template <class T>
ConvDims conv3d_dims(const Tensor<T>& x, const Tensor<T>& w,
                     std::int64_t stride, std::int64_t pad) {
  require(x.rank() == 5 && w.rank() == 5, "shape", "conv3d: need 5-d tensors");
  require(stride >= 1, "shape", "conv3d: stride must be >= 1");
  ConvDims cd;
  cd.n = x.dim(0);
  cd.ci = x.dim(1);
  cd.d = x.dim(2);
  cd.h = x.dim(3);
  cd.w = x.dim(4);
  cd.co = w.dim(0);
  require(w.dim(1) == cd.ci, "shape", "conv3d: channel mismatch");
  cd.kd = w.dim(2);
  cd.kh = w.dim(3);
  cd.kw = w.dim(4);
  cd.stride = stride;
  cd.pad = pad;
  cd.od = (cd.d + 2 * pad - cd.kd) / stride + 1;
  cd.oh = (cd.h + 2 * pad - cd.kh) / stride + 1;
  cd.ow = (cd.w + 2 * pad - cd.kw) / stride + 1;
  require(cd.od >= 1 && cd.oh >= 1 && cd.ow >= 1, "shape",
          "conv3d: kernel larger than padded input");
  return cd;
}

namespace detail {

// col[k][s] for one sample; k = ((ci*kd+kz)*kh+ky)*kw+kx, s = (oz*oh+oy)*ow+ox
template <class T>
void im2col(const T* x, const ConvDims& cd, T* col) {
  const std::int64_t rows = cd.k();
  parallel_for(0, rows, 1, [&](std::int64_t rb, std::int64_t re) {
    for (std::int64_t r = rb; r < re; ++r) {
      const std::int64_t kx = r % cd.kw;
      const std::int64_t ky = (r / cd.kw) % cd.kh;
      const std::int64_t kz = (r / (cd.kw * cd.kh)) % cd.kd;
      const std::int64_t ci = r / (cd.kw * cd.kh * cd.kd);
      T* dst = col + r * cd.s();
      const T* src = x + ci * cd.d * cd.h * cd.w;
      for (std::int64_t oz = 0; oz < cd.od; ++oz) {
        const std::int64_t iz = oz * cd.stride + kz - cd.pad;
        for (std::int64_t oy = 0; oy < cd.oh; ++oy) {
          const std::int64_t iy = oy * cd.stride + ky - cd.pad;
          T* row = dst + (oz * cd.oh + oy) * cd.ow;
          if (iz < 0 || iz >= cd.d || iy < 0 || iy >= cd.h) {
            std::fill(row, row + cd.ow, T(0));
            continue;
          }
          const T* line = src + (iz * cd.h + iy) * cd.w;
          for (std::int64_t ox = 0; ox < cd.ow; ++ox) {
            const std::int64_t ix = ox * cd.stride + kx - cd.pad;
            row[ox] = (ix >= 0 && ix < cd.w) ? line[ix] : T(0);
          }
        }
      }
    }
  });
}

// scatter-add dcol back into dx for one sample; rows grouped by input
// channel so per-channel scatters can run in parallel without collisions
template <class T>
void col2im_add(const T* dcol, const ConvDims& cd, T* dx) {
  const std::int64_t per_ci = cd.kd * cd.kh * cd.kw;
  parallel_for(0, cd.ci, 1, [&](std::int64_t cb, std::int64_t ce) {
    for (std::int64_t ci = cb; ci < ce; ++ci) {
      T* dst = dx + ci * cd.d * cd.h * cd.w;
      for (std::int64_t rk = 0; rk < per_ci; ++rk) {
        const std::int64_t r = ci * per_ci + rk;
        const std::int64_t kx = rk % cd.kw;
        const std::int64_t ky = (rk / cd.kw) % cd.kh;
        const std::int64_t kz = rk / (cd.kw * cd.kh);
        const T* srow = dcol + r * cd.s();
        for (std::int64_t oz = 0; oz < cd.od; ++oz) {
          const std::int64_t iz = oz * cd.stride + kz - cd.pad;
          if (iz < 0 || iz >= cd.d) continue;
          for (std::int64_t oy = 0; oy < cd.oh; ++oy) {
            const std::int64_t iy = oy * cd.stride + ky - cd.pad;
            if (iy < 0 || iy >= cd.h) continue;
            const T* sl = srow + (oz * cd.oh + oy) * cd.ow;
            T* dl = dst + (iz * cd.h + iy) * cd.w;
            for (std::int64_t ox = 0; ox < cd.ow; ++ox) {
              const std::int64_t ix = ox * cd.stride + kx - cd.pad;
              if (ix >= 0 && ix < cd.w) dl[ix] += sl[ox];
            }
          }
        }
      }
    }
  });
}

// parallel over row blocks of C; identical results for any split
template <class T>
void pgemm_nn(const T* a, const T* b, T* c, std::int64_t m, std::int64_t k,
              std::int64_t n, bool accumulate) {
  parallel_for(0, m, 8, [&](std::int64_t i0, std::int64_t i1) {
    kern::gemm_nn(a + i0 * k, b, c + i0 * n, std::size_t(i1 - i0),
                  std::size_t(k), std::size_t(n), accumulate);
  });
}

template <class T>
void pgemm_nt(const T* a, const T* b, T* c, std::int64_t m, std::int64_t k,
              std::int64_t n, bool accumulate) {
  parallel_for(0, m, 8, [&](std::int64_t i0, std::int64_t i1) {
    kern::gemm_nt(a + i0 * k, b, c + i0 * n, std::size_t(i1 - i0),
                  std::size_t(k), std::size_t(n), accumulate);
  });
}

}  // namespace detail

template <class T>
Tensor<T> conv3d(Tensor<T> x, Tensor<T> w, Tensor<T> b, std::int64_t stride,
                 std::int64_t pad) {
  const ConvDims cd = conv3d_dims(x, w, stride, pad);
  require(b.numel() == cd.co, "shape", "conv3d: bias size mismatch");
  Tensor<T> out =
      Tensor<T>::result({cd.n, cd.co, cd.od, cd.oh, cd.ow},
                        {x.node(), w.node(), b.node()});
  const std::int64_t k = cd.k(), s = cd.s();
  std::vector<T> col(std::size_t(k * s));
  for (std::int64_t smp = 0; smp < cd.n; ++smp) {
    detail::im2col(x.data() + smp * cd.ci * cd.d * cd.h * cd.w, cd, col.data());
    T* o = out.data() + smp * cd.co * s;
    detail::pgemm_nn(w.data(), col.data(), o, cd.co, k, s, false);
    parallel_for(0, cd.co, 1, [&](std::int64_t c0, std::int64_t c1) {
      for (std::int64_t co = c0; co < c1; ++co) {
        const T bv = b.data()[co];
        T* row = o + co * s;
        for (std::int64_t i = 0; i < s; ++i) row[i] += bv;
      }
    });
  }

  out.set_backprop([x, w, b, out, cd]() mutable {
    const std::int64_t k = cd.k(), s = cd.s();
    const T* gy = out.node()->grad.data();
    std::vector<T> col;
    if (x.requires_grad() || w.requires_grad())
      col.resize(std::size_t(k * s));
    std::vector<T> wt;  // w transposed to [K, Co] for the dx gemm
    std::vector<T> dcol;
    if (x.requires_grad()) {
      wt.resize(std::size_t(k * cd.co));
      for (std::int64_t co = 0; co < cd.co; ++co)
        for (std::int64_t r = 0; r < k; ++r)
          wt[std::size_t(r * cd.co + co)] = w.data()[co * k + r];
      dcol.resize(std::size_t(k * s));
    }
    for (std::int64_t smp = 0; smp < cd.n; ++smp) {
      const T* gys = gy + smp * cd.co * s;
      if (w.requires_grad() || x.requires_grad())
        detail::im2col(x.data() + smp * cd.ci * cd.d * cd.h * cd.w, cd,
                       col.data());
      if (w.requires_grad())  // dW[co][r] += sum_s gy[co][s] col[r][s]
        detail::pgemm_nt(gys, col.data(), w.grad(), cd.co, s, k, true);
      if (b.requires_grad()) {
        T* gb = b.grad();
        for (std::int64_t co = 0; co < cd.co; ++co)
          gb[co] += kern::sum(gys + co * s, std::size_t(s));
      }
      if (x.requires_grad()) {  // dcol = W^T gy, then scatter
        detail::pgemm_nn(wt.data(), gys, dcol.data(), k, cd.co, s, false);
        detail::col2im_add(dcol.data(), cd,
                           x.grad() + smp * cd.ci * cd.d * cd.h * cd.w);
      }
    }
  });
  return out;
}

// ---- pooling ----------------------------------------------------------------

template <class T>
Tensor<T> maxpool3d(Tensor<T> x, std::int64_t kernel, std::int64_t stride,
                    std::int64_t pad) {
  require(x.rank() == 5, "shape", "maxpool3d: need a 5-d tensor");
  const std::int64_t n = x.dim(0), c = x.dim(1), d = x.dim(2), h = x.dim(3),
                     w = x.dim(4);
  const std::int64_t od = (d + 2 * pad - kernel) / stride + 1;
  const std::int64_t oh = (h + 2 * pad - kernel) / stride + 1;
  const std::int64_t ow = (w + 2 * pad - kernel) / stride + 1;
  require(od >= 1 && oh >= 1 && ow >= 1, "shape", "maxpool3d: empty output");

  Tensor<T> out = Tensor<T>::result({n, c, od, oh, ow}, {x.node()});
  auto argmax = std::make_shared<std::vector<std::int64_t>>(
      std::size_t(out.numel()));
  const std::int64_t so = od * oh * ow, si = d * h * w;

  parallel_for(0, n * c, 1, [&](std::int64_t b0, std::int64_t b1) {
    for (std::int64_t nc = b0; nc < b1; ++nc) {
      const T* src = x.data() + nc * si;
      T* dst = out.data() + nc * so;
      std::int64_t* am = argmax->data() + nc * so;
      for (std::int64_t oz = 0; oz < od; ++oz)
        for (std::int64_t oy = 0; oy < oh; ++oy)
          for (std::int64_t ox = 0; ox < ow; ++ox) {
            T best = T(0);
            std::int64_t best_i = -1;
            for (std::int64_t kz = 0; kz < kernel; ++kz) {
              const std::int64_t iz = oz * stride + kz - pad;
              if (iz < 0 || iz >= d) continue;
              for (std::int64_t ky = 0; ky < kernel; ++ky) {
                const std::int64_t iy = oy * stride + ky - pad;
                if (iy < 0 || iy >= h) continue;
                for (std::int64_t kx = 0; kx < kernel; ++kx) {
                  const std::int64_t ix = ox * stride + kx - pad;
                  if (ix < 0 || ix >= w) continue;
                  const std::int64_t i = (iz * h + iy) * w + ix;
                  if (best_i < 0 || src[i] > best) {
                    best = src[i];
                    best_i = i;
                  }
                }
              }
            }
            dst[(oz * oh + oy) * ow + ox] = best;
            am[(oz * oh + oy) * ow + ox] = best_i;
          }
    }
  });

  out.set_backprop([x, out, argmax, n, c, so, si]() mutable {
    if (!x.requires_grad()) return;
    const T* gy = out.node()->grad.data();
    T* gx = x.grad();
    parallel_for(0, n * c, 1, [&](std::int64_t b0, std::int64_t b1) {
      for (std::int64_t nc = b0; nc < b1; ++nc)
        for (std::int64_t i = 0; i < so; ++i) {
          const std::int64_t am = (*argmax)[std::size_t(nc * so + i)];
          if (am >= 0) gx[nc * si + am] += gy[nc * so + i];
        }
    });
  });
  return out;
}

// [N,C,D,H,W] -> [N,C]
template <class T>
Tensor<T> global_avg_pool(Tensor<T> x) {
  require(x.rank() == 5, "shape", "global_avg_pool: need a 5-d tensor");
  const std::int64_t n = x.dim(0), c = x.dim(1);
  const std::int64_t s = x.dim(2) * x.dim(3) * x.dim(4);
  Tensor<T> out = Tensor<T>::result({n, c}, {x.node()});
  for (std::int64_t nc = 0; nc < n * c; ++nc)
    out.data()[nc] = kern::sum(x.data() + nc * s, std::size_t(s)) / T(s);
  out.set_backprop([x, out, n, c, s]() mutable {
    if (!x.requires_grad()) return;
    const T* gy = out.node()->grad.data();
    T* gx = x.grad();
    for (std::int64_t nc = 0; nc < n * c; ++nc) {
      const T g = gy[nc] / T(s);
      for (std::int64_t i = 0; i < s; ++i) gx[nc * s + i] += g;
    }
  });
  return out;
}

// Nearest-neighbour resize to target spatial dims (src index = floor(i*s/t)).
template <class T>
Tensor<T> upsample_nearest(Tensor<T> x, std::array<std::int64_t, 3> target) {
  require(x.rank() == 5, "shape", "upsample_nearest: need a 5-d tensor");
  const std::int64_t n = x.dim(0), c = x.dim(1), d = x.dim(2), h = x.dim(3),
                     w = x.dim(4);
  const std::int64_t td = target[0], th = target[1], tw = target[2];
  Tensor<T> out = Tensor<T>::result({n, c, td, th, tw}, {x.node()});
  const std::int64_t so = td * th * tw, si = d * h * w;
  parallel_for(0, n * c, 1, [&](std::int64_t b0, std::int64_t b1) {
    for (std::int64_t nc = b0; nc < b1; ++nc) {
      const T* src = x.data() + nc * si;
      T* dst = out.data() + nc * so;
      for (std::int64_t oz = 0; oz < td; ++oz) {
        const std::int64_t iz = oz * d / td;
        for (std::int64_t oy = 0; oy < th; ++oy) {
          const std::int64_t iy = oy * h / th;
          for (std::int64_t ox = 0; ox < tw; ++ox)
            dst[(oz * th + oy) * tw + ox] =
                src[(iz * h + iy) * w + ox * w / tw];
        }
      }
    }
  });
  out.set_backprop([x, out, n, c, d, h, w, td, th, tw, so, si]() mutable {
    if (!x.requires_grad()) return;
    const T* gy = out.node()->grad.data();
    T* gx = x.grad();
    parallel_for(0, n * c, 1, [&](std::int64_t b0, std::int64_t b1) {
      for (std::int64_t nc = b0; nc < b1; ++nc) {
        const T* g = gy + nc * so;
        T* dst = gx + nc * si;
        for (std::int64_t oz = 0; oz < td; ++oz) {
          const std::int64_t iz = oz * d / td;
          for (std::int64_t oy = 0; oy < th; ++oy) {
            const std::int64_t iy = oy * h / th;
            for (std::int64_t ox = 0; ox < tw; ++ox)
              dst[(iz * h + iy) * w + ox * w / tw] +=
                  g[(oz * th + oy) * tw + ox];
          }
        }
      }
    });
  });
  return out;
}

// channel-axis concat of 5-d tensors
template <class T>
Tensor<T> concat_channels(Tensor<T> a, Tensor<T> b) {
  require(a.rank() == 5 && b.rank() == 5, "shape", "concat: need 5-d tensors");
  for (int i : {0, 2, 3, 4})
    require(a.dim(i) == b.dim(i), "shape", "concat: non-channel dims differ");
  const std::int64_t n = a.dim(0), ca = a.dim(1), cb = b.dim(1);
  const std::int64_t s = a.dim(2) * a.dim(3) * a.dim(4);
  Tensor<T> out = Tensor<T>::result({n, ca + cb, a.dim(2), a.dim(3), a.dim(4)},
                                    {a.node(), b.node()});
  for (std::int64_t i = 0; i < n; ++i) {
    std::memcpy(out.data() + i * (ca + cb) * s, a.data() + i * ca * s,
                std::size_t(ca * s) * sizeof(T));
    std::memcpy(out.data() + (i * (ca + cb) + ca) * s, b.data() + i * cb * s,
                std::size_t(cb * s) * sizeof(T));
  }
  out.set_backprop([a, b, out, n, ca, cb, s]() mutable {
    const T* g = out.node()->grad.data();
    if (a.requires_grad())
      for (std::int64_t i = 0; i < n; ++i)
        kern::axpy(T(1), g + i * (ca + cb) * s, a.grad() + i * ca * s,
                   std::size_t(ca * s));
    if (b.requires_grad())
      for (std::int64_t i = 0; i < n; ++i)
        kern::axpy(T(1), g + (i * (ca + cb) + ca) * s, b.grad() + i * cb * s,
                   std::size_t(cb * s));
  });
  return out;
}

// 1-d feature concat, [N,Fa] ++ [N,Fb]
template <class T>
Tensor<T> concat_features(Tensor<T> a, Tensor<T> b) {
  require(a.rank() == 2 && b.rank() == 2 && a.dim(0) == b.dim(0), "shape",
          "concat_features: shape mismatch");
  const std::int64_t n = a.dim(0), fa = a.dim(1), fb = b.dim(1);
  Tensor<T> out = Tensor<T>::result({n, fa + fb}, {a.node(), b.node()});
  for (std::int64_t i = 0; i < n; ++i) {
    std::memcpy(out.data() + i * (fa + fb), a.data() + i * fa,
                std::size_t(fa) * sizeof(T));
    std::memcpy(out.data() + i * (fa + fb) + fa, b.data() + i * fb,
                std::size_t(fb) * sizeof(T));
  }
  out.set_backprop([a, b, out, n, fa, fb]() mutable {
    const T* g = out.node()->grad.data();
    if (a.requires_grad())
      for (std::int64_t i = 0; i < n; ++i)
        kern::axpy(T(1), g + i * (fa + fb), a.grad() + i * fa, std::size_t(fa));
    if (b.requires_grad())
      for (std::int64_t i = 0; i < n; ++i)
        kern::axpy(T(1), g + i * (fa + fb) + fa, b.grad() + i * fb,
                   std::size_t(fb));
  });
  return out;
}

// x [N,C,D,H,W] * mask [N,1,D,H,W], mask broadcast over channels
template <class T>
Tensor<T> mul_mask(Tensor<T> x, Tensor<T> mask) {
  require(x.rank() == 5 && mask.rank() == 5 && mask.dim(1) == 1, "shape",
          "mul_mask: need [N,C,D,H,W] and [N,1,D,H,W]");
  for (int i : {0, 2, 3, 4})
    require(x.dim(i) == mask.dim(i), "shape", "mul_mask: grid mismatch");
  const std::int64_t n = x.dim(0), c = x.dim(1);
  const std::int64_t s = x.dim(2) * x.dim(3) * x.dim(4);
  Tensor<T> out = Tensor<T>::result(x.shape(), {x.node(), mask.node()});
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t ch = 0; ch < c; ++ch)
      kern::vmul(x.data() + (i * c + ch) * s, mask.data() + i * s,
                 out.data() + (i * c + ch) * s, std::size_t(s));
  out.set_backprop([x, mask, out, n, c, s]() mutable {
    const T* g = out.node()->grad.data();
    if (x.requires_grad()) {
      T* gx = x.grad();
      for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t ch = 0; ch < c; ++ch) {
          const T* m = mask.data() + i * s;
          const T* gg = g + (i * c + ch) * s;
          T* d = gx + (i * c + ch) * s;
          for (std::int64_t j = 0; j < s; ++j) d[j] += gg[j] * m[j];
        }
    }
    if (mask.requires_grad()) {
      T* gm = mask.grad();
      for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t ch = 0; ch < c; ++ch) {
          const T* xv = x.data() + (i * c + ch) * s;
          const T* gg = g + (i * c + ch) * s;
          T* d = gm + i * s;
          for (std::int64_t j = 0; j < s; ++j) d[j] += gg[j] * xv[j];
        }
    }
  });
  return out;
}

// ---- batchnorm --------------------------------------------------------------

// Normalizes over all axes but axis 1. Training mode uses batch statistics
// and updates running stats in-place (momentum 0.1, unbiased running var);
// eval mode uses the running stats.
template <class T>
Tensor<T> batchnorm(Tensor<T> x, Tensor<T> gamma, Tensor<T> beta,
                    std::vector<T>& running_mean, std::vector<T>& running_var,
                    bool training, T momentum = T(0.1), T eps = T(1e-5)) {
  require(x.rank() >= 2, "shape", "batchnorm: need at least 2-d input");
  const std::int64_t n = x.dim(0), c = x.dim(1);
  std::int64_t s = 1;
  for (int i = 2; i < x.rank(); ++i) s *= x.dim(i);
  require(gamma.numel() == c && beta.numel() == c, "shape",
          "batchnorm: affine size mismatch");
  require(std::int64_t(running_mean.size()) == c &&
              std::int64_t(running_var.size()) == c,
          "shape", "batchnorm: running stats size mismatch");
  if (training)
    require(n >= 2, "domain", "batchnorm: training needs batch >= 2");

  Tensor<T> out = Tensor<T>::result(x.shape(), {x.node(), gamma.node(),
                                                beta.node()});
  const std::int64_t m = n * s;
  auto xhat = std::make_shared<std::vector<T>>(std::size_t(x.numel()));
  auto ivar = std::make_shared<std::vector<T>>(std::size_t(c));

  parallel_for(0, c, 1, [&](std::int64_t c0, std::int64_t c1) {
    for (std::int64_t ch = c0; ch < c1; ++ch) {
      T mu, var;
      if (training) {
        T sum = T(0);
        for (std::int64_t i = 0; i < n; ++i)
          sum += kern::sum(x.data() + (i * c + ch) * s, std::size_t(s));
        mu = sum / T(m);
        T sq = T(0);
        for (std::int64_t i = 0; i < n; ++i) {
          const T* p = x.data() + (i * c + ch) * s;
          for (std::int64_t j = 0; j < s; ++j) sq += (p[j] - mu) * (p[j] - mu);
        }
        var = sq / T(m);  // biased, used for normalization
        running_mean[std::size_t(ch)] =
            (T(1) - momentum) * running_mean[std::size_t(ch)] + momentum * mu;
        const T unbiased = m > 1 ? sq / T(m - 1) : var;
        running_var[std::size_t(ch)] =
            (T(1) - momentum) * running_var[std::size_t(ch)] +
            momentum * unbiased;
      } else {
        mu = running_mean[std::size_t(ch)];
        var = running_var[std::size_t(ch)];
      }
      const T iv = T(1) / std::sqrt(var + eps);
      (*ivar)[std::size_t(ch)] = iv;
      const T g = gamma.data()[ch], bt = beta.data()[ch];
      for (std::int64_t i = 0; i < n; ++i) {
        const T* p = x.data() + (i * c + ch) * s;
        T* xh = xhat->data() + (i * c + ch) * s;
        T* o = out.data() + (i * c + ch) * s;
        for (std::int64_t j = 0; j < s; ++j) {
          xh[j] = (p[j] - mu) * iv;
          o[j] = g * xh[j] + bt;
        }
      }
    }
  });

  out.set_backprop([x, gamma, beta, out, xhat, ivar, n, c, s, m,
                    training]() mutable {
    const T* gy = out.node()->grad.data();
    T* gg = gamma.requires_grad() ? gamma.grad() : nullptr;
    T* gb = beta.requires_grad() ? beta.grad() : nullptr;
    T* gx = x.requires_grad() ? x.grad() : nullptr;
    parallel_for(0, c, 1, [&](std::int64_t c0, std::int64_t c1) {
      for (std::int64_t ch = c0; ch < c1; ++ch) {
        T sum_gy = T(0), sum_gy_xhat = T(0);
        for (std::int64_t i = 0; i < n; ++i) {
          const T* g = gy + (i * c + ch) * s;
          const T* xh = xhat->data() + (i * c + ch) * s;
          for (std::int64_t j = 0; j < s; ++j) {
            sum_gy += g[j];
            sum_gy_xhat += g[j] * xh[j];
          }
        }
        if (gg) gg[ch] += sum_gy_xhat;
        if (gb) gb[ch] += sum_gy;
        if (!gx) continue;
        const T gv = gamma.data()[ch];
        const T iv = (*ivar)[std::size_t(ch)];
        if (training) {
          // dx = (gamma*ivar/m) * (m*gy - sum_gy - xhat*sum_gy_xhat)
          const T k = gv * iv / T(m);
          for (std::int64_t i = 0; i < n; ++i) {
            const T* g = gy + (i * c + ch) * s;
            const T* xh = xhat->data() + (i * c + ch) * s;
            T* d = gx + (i * c + ch) * s;
            for (std::int64_t j = 0; j < s; ++j)
              d[j] += k * (T(m) * g[j] - sum_gy - xh[j] * sum_gy_xhat);
          }
        } else {
          const T k = gv * iv;
          for (std::int64_t i = 0; i < n; ++i) {
            const T* g = gy + (i * c + ch) * s;
            T* d = gx + (i * c + ch) * s;
            for (std::int64_t j = 0; j < s; ++j) d[j] += k * g[j];
          }
        }
      }
    });
  });
  return out;
}

// ---- dropout ----------------------------------------------------------------

template <class T>
Tensor<T> dropout(Tensor<T> x, double rate, Rng& rng, bool training) {
  require(rate >= 0.0 && rate < 1.0, "domain", "dropout: rate must be in [0,1)");
  if (!training || rate == 0.0) return x;  // identity, shares the node
  Tensor<T> out = Tensor<T>::result(x.shape(), {x.node()});
  const T keep_scale = T(1.0 / (1.0 - rate));
  auto mask = std::make_shared<std::vector<T>>(std::size_t(x.numel()));
  // sequential draws so results do not depend on threading
  for (std::int64_t i = 0; i < x.numel(); ++i)
    (*mask)[std::size_t(i)] = rng.uniform() >= rate ? keep_scale : T(0);
  kern::vmul(x.data(), mask->data(), out.data(), std::size_t(x.numel()));
  out.set_backprop([x, out, mask]() mutable {
    if (!x.requires_grad()) return;
    T* gx = x.grad();
    const T* g = out.node()->grad.data();
    const T* mk = mask->data();
    for (std::int64_t i = 0; i < x.numel(); ++i) gx[i] += g[i] * mk[i];
  });
  return out;
}

// ---- softmax / losses -------------------------------------------------------

// row-wise softmax over the last axis of [N,K]
template <class T>
Tensor<T> softmax(Tensor<T> x) {
  require(x.rank() == 2, "shape", "softmax: need [N,K]");
  const std::int64_t n = x.dim(0), k = x.dim(1);
  Tensor<T> out = Tensor<T>::result(x.shape(), {x.node()});
  for (std::int64_t i = 0; i < n; ++i) {
    const T* row = x.data() + i * k;
    T* o = out.data() + i * k;
    T mx = row[0];
    for (std::int64_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
    T z = T(0);
    for (std::int64_t j = 0; j < k; ++j) {
      o[j] = std::exp(row[j] - mx);
      z += o[j];
    }
    for (std::int64_t j = 0; j < k; ++j) o[j] /= z;
  }
  out.set_backprop([x, out, n, k]() mutable {
    if (!x.requires_grad()) return;
    const T* g = out.node()->grad.data();
    const T* p = out.data();
    T* gx = x.grad();
    for (std::int64_t i = 0; i < n; ++i) {
      T dot = T(0);
      for (std::int64_t j = 0; j < k; ++j) dot += g[i * k + j] * p[i * k + j];
      for (std::int64_t j = 0; j < k; ++j)
        gx[i * k + j] += p[i * k + j] * (g[i * k + j] - dot);
    }
  });
  return out;
}

// mean over samples of w[y] * (-log softmax(logits)[y])
template <class T>
Tensor<T> weighted_cross_entropy(Tensor<T> logits,
                                 const std::vector<int>& labels,
                                 const std::array<double, 2>& class_weights) {
  require(logits.rank() == 2 && logits.dim(1) == 2, "shape",
          "weighted_cross_entropy: need [N,2] logits");
  const std::int64_t n = logits.dim(0);
  require(std::int64_t(labels.size()) == n, "shape",
          "weighted_cross_entropy: label count mismatch");
  require(class_weights[0] > 0 && class_weights[1] > 0, "domain",
          "weighted_cross_entropy: weights must be positive");
  for (int y : labels)
    require(y == 0 || y == 1, "domain",
            "weighted_cross_entropy: labels must be 0 or 1");

  Tensor<T> out = Tensor<T>::result({1}, {logits.node()});
  auto probs = std::make_shared<std::vector<T>>(std::size_t(n * 2));
  T loss = T(0);
  for (std::int64_t i = 0; i < n; ++i) {
    const T a = logits.data()[i * 2], b = logits.data()[i * 2 + 1];
    const T mx = std::max(a, b);
    const T ea = std::exp(a - mx), eb = std::exp(b - mx);
    const T z = ea + eb;
    (*probs)[std::size_t(i * 2)] = ea / z;
    (*probs)[std::size_t(i * 2 + 1)] = eb / z;
    const int y = labels[std::size_t(i)];
    const T logp = (y == 0 ? a : b) - mx - std::log(z);
    loss += T(class_weights[std::size_t(y)]) * -logp;
  }
  out.data()[0] = loss / T(n);

  out.set_backprop([logits, out, probs, labels, class_weights, n]() mutable {
    if (!logits.requires_grad()) return;
    const T g = out.node()->grad[0];
    T* gl = logits.grad();
    for (std::int64_t i = 0; i < n; ++i) {
      const int y = labels[std::size_t(i)];
      const T wy = T(class_weights[std::size_t(y)]);
      for (int j = 0; j < 2; ++j) {
        const T p = (*probs)[std::size_t(i * 2 + j)];
        gl[i * 2 + j] += g * wy * (p - T(j == y)) / T(n);
      }
    }
  });
  return out;
}

}  // namespace cbctox::nn
