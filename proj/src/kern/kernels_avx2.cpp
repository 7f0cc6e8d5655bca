// AVX2 kernel variants. Translation unit is compiled with -mavx2; callers
// reach it only through the dispatcher after a cpuid check. Accumulation
// order matches the scalar reference exactly (see kernels.hpp).

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cmath>
#include <cstddef>

#include "cbctox/kern/kernels.hpp"
#include "kern_detail.hpp"

namespace cbctox::kern::detail::avx2 {

namespace {

// Matches the scalar fold tree for 8 float lanes:
// half=4 (lo+hi), half=2 (movehl), half=1 (lane1).
inline float hsum(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  __m128 hi = _mm256_extractf128_ps(v, 1);
  __m128 s4 = _mm_add_ps(lo, hi);
  __m128 s2 = _mm_add_ps(s4, _mm_movehl_ps(s4, s4));
  __m128 s1 = _mm_add_ss(s2, _mm_shuffle_ps(s2, s2, 0x55));
  return _mm_cvtss_f32(s1);
}

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  __m128d s2 = _mm_add_pd(lo, hi);
  __m128d s1 = _mm_add_sd(s2, _mm_unpackhi_pd(s2, s2));
  return _mm_cvtsd_f64(s1);
}

template <int MR>
void nn_tile16(const float* a, const float* b, float* c, std::size_t K,
               std::size_t lda, std::size_t ldb, std::size_t ldc,
               std::size_t i0, std::size_t j0, bool accumulate) {
  __m256 acc[MR][2];
  for (int r = 0; r < MR; ++r) {
    if (accumulate) {
      acc[r][0] = _mm256_loadu_ps(c + (i0 + r) * ldc + j0);
      acc[r][1] = _mm256_loadu_ps(c + (i0 + r) * ldc + j0 + 8);
    } else {
      acc[r][0] = _mm256_setzero_ps();
      acc[r][1] = _mm256_setzero_ps();
    }
  }
  for (std::size_t kk = 0; kk < K; ++kk) {
    const __m256 b0 = _mm256_loadu_ps(b + kk * ldb + j0);
    const __m256 b1 = _mm256_loadu_ps(b + kk * ldb + j0 + 8);
    for (int r = 0; r < MR; ++r) {
      const __m256 av = _mm256_set1_ps(a[(i0 + r) * lda + kk]);
      acc[r][0] = _mm256_add_ps(acc[r][0], _mm256_mul_ps(av, b0));
      acc[r][1] = _mm256_add_ps(acc[r][1], _mm256_mul_ps(av, b1));
    }
  }
  for (int r = 0; r < MR; ++r) {
    _mm256_storeu_ps(c + (i0 + r) * ldc + j0, acc[r][0]);
    _mm256_storeu_ps(c + (i0 + r) * ldc + j0 + 8, acc[r][1]);
  }
}

}  // namespace

float sum(const float* x, std::size_t n) {
  __m256 acc = _mm256_setzero_ps();
  const std::size_t vn = n - n % 8;
  for (std::size_t i = 0; i < vn; i += 8)
    acc = _mm256_add_ps(acc, _mm256_loadu_ps(x + i));
  float s = hsum(acc);
  for (std::size_t i = vn; i < n; ++i) s = s + x[i];
  return s;
}

double sum(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  const std::size_t vn = n - n % 4;
  for (std::size_t i = 0; i < vn; i += 4)
    acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  double s = hsum(acc);
  for (std::size_t i = vn; i < n; ++i) s = s + x[i];
  return s;
}

float dot(const float* x, const float* y, std::size_t n) {
  __m256 acc = _mm256_setzero_ps();
  const std::size_t vn = n - n % 8;
  for (std::size_t i = 0; i < vn; i += 8)
    acc = _mm256_add_ps(
        acc, _mm256_mul_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
  float s = hsum(acc);
  for (std::size_t i = vn; i < n; ++i) s = s + x[i] * y[i];
  return s;
}

double dot(const double* x, const double* y, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  const std::size_t vn = n - n % 4;
  for (std::size_t i = 0; i < vn; i += 4)
    acc = _mm256_add_pd(
        acc, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  double s = hsum(acc);
  for (std::size_t i = vn; i < n; ++i) s = s + x[i] * y[i];
  return s;
}

void axpy(float a, const float* x, float* y, std::size_t n) {
  const __m256 av = _mm256_set1_ps(a);
  const std::size_t vn = n - n % 8;
  for (std::size_t i = 0; i < vn; i += 8)
    _mm256_storeu_ps(
        y + i, _mm256_add_ps(_mm256_loadu_ps(y + i),
                             _mm256_mul_ps(av, _mm256_loadu_ps(x + i))));
  for (std::size_t i = vn; i < n; ++i) y[i] = y[i] + a * x[i];
}
void axpy(double a, const double* x, double* y, std::size_t n) {
  const __m256d av = _mm256_set1_pd(a);
  const std::size_t vn = n - n % 4;
  for (std::size_t i = 0; i < vn; i += 4)
    _mm256_storeu_pd(
        y + i, _mm256_add_pd(_mm256_loadu_pd(y + i),
                             _mm256_mul_pd(av, _mm256_loadu_pd(x + i))));
  for (std::size_t i = vn; i < n; ++i) y[i] = y[i] + a * x[i];
}

void scale(float a, float* x, std::size_t n) {
  const __m256 av = _mm256_set1_ps(a);
  const std::size_t vn = n - n % 8;
  for (std::size_t i = 0; i < vn; i += 8)
    _mm256_storeu_ps(x + i, _mm256_mul_ps(av, _mm256_loadu_ps(x + i)));
  for (std::size_t i = vn; i < n; ++i) x[i] = a * x[i];
}
void scale(double a, double* x, std::size_t n) {
  const __m256d av = _mm256_set1_pd(a);
  const std::size_t vn = n - n % 4;
  for (std::size_t i = 0; i < vn; i += 4)
    _mm256_storeu_pd(x + i, _mm256_mul_pd(av, _mm256_loadu_pd(x + i)));
  for (std::size_t i = vn; i < n; ++i) x[i] = a * x[i];
}

void vadd(const float* x, const float* y, float* out, std::size_t n) {
  const std::size_t vn = n - n % 8;
  for (std::size_t i = 0; i < vn; i += 8)
    _mm256_storeu_ps(
        out + i, _mm256_add_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
  for (std::size_t i = vn; i < n; ++i) out[i] = x[i] + y[i];
}
void vadd(const double* x, const double* y, double* out, std::size_t n) {
  const std::size_t vn = n - n % 4;
  for (std::size_t i = 0; i < vn; i += 4)
    _mm256_storeu_pd(
        out + i, _mm256_add_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (std::size_t i = vn; i < n; ++i) out[i] = x[i] + y[i];
}
void vmul(const float* x, const float* y, float* out, std::size_t n) {
  const std::size_t vn = n - n % 8;
  for (std::size_t i = 0; i < vn; i += 8)
    _mm256_storeu_ps(
        out + i, _mm256_mul_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
  for (std::size_t i = vn; i < n; ++i) out[i] = x[i] * y[i];
}
void vmul(const double* x, const double* y, double* out, std::size_t n) {
  const std::size_t vn = n - n % 4;
  for (std::size_t i = 0; i < vn; i += 4)
    _mm256_storeu_pd(
        out + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (std::size_t i = vn; i < n; ++i) out[i] = x[i] * y[i];
}

void relu(const float* x, float* out, std::size_t n) {
  const __m256 zero = _mm256_setzero_ps();
  const std::size_t vn = n - n % 8;
  for (std::size_t i = 0; i < vn; i += 8)
    _mm256_storeu_ps(out + i, _mm256_max_ps(_mm256_loadu_ps(x + i), zero));
  for (std::size_t i = vn; i < n; ++i) out[i] = x[i] > 0.f ? x[i] : 0.f;
}
void relu(const double* x, double* out, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  const std::size_t vn = n - n % 4;
  for (std::size_t i = 0; i < vn; i += 4)
    _mm256_storeu_pd(out + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
  for (std::size_t i = vn; i < n; ++i) out[i] = x[i] > 0. ? x[i] : 0.;
}

void leaky_relu(const float* x, float slope, float* out, std::size_t n) {
  const __m256 zero = _mm256_setzero_ps();
  const __m256 sl = _mm256_set1_ps(slope);
  const std::size_t vn = n - n % 8;
  for (std::size_t i = 0; i < vn; i += 8) {
    const __m256 xv = _mm256_loadu_ps(x + i);
    const __m256 pos = _mm256_cmp_ps(xv, zero, _CMP_GT_OQ);
    _mm256_storeu_ps(out + i,
                     _mm256_blendv_ps(_mm256_mul_ps(sl, xv), xv, pos));
  }
  for (std::size_t i = vn; i < n; ++i)
    out[i] = x[i] > 0.f ? x[i] : slope * x[i];
}
void leaky_relu(const double* x, double slope, double* out, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  const __m256d sl = _mm256_set1_pd(slope);
  const std::size_t vn = n - n % 4;
  for (std::size_t i = 0; i < vn; i += 4) {
    const __m256d xv = _mm256_loadu_pd(x + i);
    const __m256d pos = _mm256_cmp_pd(xv, zero, _CMP_GT_OQ);
    _mm256_storeu_pd(out + i,
                     _mm256_blendv_pd(_mm256_mul_pd(sl, xv), xv, pos));
  }
  for (std::size_t i = vn; i < n; ++i)
    out[i] = x[i] > 0. ? x[i] : slope * x[i];
}

void leaky_relu_backward(const float* x, const float* gy, float slope,
                         float* gx, std::size_t n) {
  const __m256 zero = _mm256_setzero_ps();
  const __m256 sl = _mm256_set1_ps(slope);
  const std::size_t vn = n - n % 8;
  for (std::size_t i = 0; i < vn; i += 8) {
    const __m256 xv = _mm256_loadu_ps(x + i);
    const __m256 gv = _mm256_loadu_ps(gy + i);
    const __m256 pos = _mm256_cmp_ps(xv, zero, _CMP_GT_OQ);
    const __m256 g = _mm256_blendv_ps(_mm256_mul_ps(sl, gv), gv, pos);
    _mm256_storeu_ps(gx + i, _mm256_add_ps(_mm256_loadu_ps(gx + i), g));
  }
  for (std::size_t i = vn; i < n; ++i)
    gx[i] = gx[i] + (x[i] > 0.f ? gy[i] : slope * gy[i]);
}
void leaky_relu_backward(const double* x, const double* gy, double slope,
                         double* gx, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  const __m256d sl = _mm256_set1_pd(slope);
  const std::size_t vn = n - n % 4;
  for (std::size_t i = 0; i < vn; i += 4) {
    const __m256d xv = _mm256_loadu_pd(x + i);
    const __m256d gv = _mm256_loadu_pd(gy + i);
    const __m256d pos = _mm256_cmp_pd(xv, zero, _CMP_GT_OQ);
    const __m256d g = _mm256_blendv_pd(_mm256_mul_pd(sl, gv), gv, pos);
    _mm256_storeu_pd(gx + i, _mm256_add_pd(_mm256_loadu_pd(gx + i), g));
  }
  for (std::size_t i = vn; i < n; ++i)
    gx[i] = gx[i] + (x[i] > 0. ? gy[i] : slope * gy[i]);
}

void adam_update(float* p, const float* g, float* m, float* v, std::size_t n,
                 float step_size, float b1, float b2, float eps, float bc2) {
  const __m256 b1v = _mm256_set1_ps(b1), om1 = _mm256_set1_ps(1.f - b1);
  const __m256 b2v = _mm256_set1_ps(b2), om2 = _mm256_set1_ps(1.f - b2);
  const __m256 sv = _mm256_set1_ps(step_size), ev = _mm256_set1_ps(eps);
  const __m256 c2 = _mm256_set1_ps(bc2);
  const std::size_t vn = n - n % 8;
  for (std::size_t i = 0; i < vn; i += 8) {
    const __m256 gv = _mm256_loadu_ps(g + i);
    __m256 mv = _mm256_loadu_ps(m + i);
    __m256 vv = _mm256_loadu_ps(v + i);
    mv = _mm256_add_ps(_mm256_mul_ps(b1v, mv), _mm256_mul_ps(om1, gv));
    vv = _mm256_add_ps(_mm256_mul_ps(b2v, vv),
                       _mm256_mul_ps(om2, _mm256_mul_ps(gv, gv)));
    const __m256 den =
        _mm256_add_ps(_mm256_sqrt_ps(_mm256_mul_ps(vv, c2)), ev);
    const __m256 pv = _mm256_sub_ps(
        _mm256_loadu_ps(p + i), _mm256_mul_ps(sv, _mm256_div_ps(mv, den)));
    _mm256_storeu_ps(m + i, mv);
    _mm256_storeu_ps(v + i, vv);
    _mm256_storeu_ps(p + i, pv);
  }
  const float om1s = 1.f - b1, om2s = 1.f - b2;
  for (std::size_t i = vn; i < n; ++i) {
    m[i] = b1 * m[i] + om1s * g[i];
    v[i] = b2 * v[i] + om2s * (g[i] * g[i]);
    p[i] = p[i] - step_size * (m[i] / (std::sqrt(v[i] * bc2) + eps));
  }
}
void adam_update(double* p, const double* g, double* m, double* v,
                 std::size_t n, double step_size, double b1, double b2,
                 double eps, double bc2) {
  const double om1 = 1. - b1, om2 = 1. - b2;
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = b1 * m[i] + om1 * g[i];
    v[i] = b2 * v[i] + om2 * (g[i] * g[i]);
    p[i] = p[i] - step_size * (m[i] / (std::sqrt(v[i] * bc2) + eps));
  }
}

void gemm_nn(const float* a, const float* b, float* c, std::size_t m,
             std::size_t k, std::size_t n, bool accumulate) {
  constexpr std::size_t MR = 6, NR = 16;
  const std::size_t n16 = n - n % NR;
  std::size_t i0 = 0;
  for (; i0 + MR <= m; i0 += MR)
    for (std::size_t j0 = 0; j0 < n16; j0 += NR)
      nn_tile16<MR>(a, b, c, k, k, n, n, i0, j0, accumulate);
  for (std::size_t j0 = 0; j0 < n16; j0 += NR) {
    switch (m - i0) {
      case 1: nn_tile16<1>(a, b, c, k, k, n, n, i0, j0, accumulate); break;
      case 2: nn_tile16<2>(a, b, c, k, k, n, n, i0, j0, accumulate); break;
      case 3: nn_tile16<3>(a, b, c, k, k, n, n, i0, j0, accumulate); break;
      case 4: nn_tile16<4>(a, b, c, k, k, n, n, i0, j0, accumulate); break;
      case 5: nn_tile16<5>(a, b, c, k, k, n, n, i0, j0, accumulate); break;
      default: break;
    }
  }
  // remainder columns, same k order as the scalar reference
  if (n16 < n) {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = n16; j < n; ++j) {
        float c0 = accumulate ? c[i * n + j] : 0.f;
        for (std::size_t kk = 0; kk < k; ++kk)
          c0 = c0 + a[i * k + kk] * b[kk * n + j];
        c[i * n + j] = c0;
      }
  }
}
void gemm_nn(const double* a, const double* b, double* c, std::size_t m,
             std::size_t k, std::size_t n, bool accumulate) {
  // double gemm only runs at gradcheck scale
  scalar::gemm_nn(a, b, c, m, k, n, accumulate);
}

void gemm_nt(const float* a, const float* b, float* c, std::size_t m,
             std::size_t k, std::size_t n, bool accumulate) {
  // each element is an independent dot, so blocking order is free
  constexpr std::size_t JB = 32;
  for (std::size_t j0 = 0; j0 < n; j0 += JB) {
    const std::size_t j1 = j0 + JB < n ? j0 + JB : n;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = j0; j < j1; ++j) {
        const float d = dot(a + i * k, b + j * k, k);
        c[i * n + j] = accumulate ? c[i * n + j] + d : d;
      }
  }
}
void gemm_nt(const double* a, const double* b, double* c, std::size_t m,
             std::size_t k, std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double d = dot(a + i * k, b + j * k, k);
      c[i * n + j] = accumulate ? c[i * n + j] + d : d;
    }
}

}  // namespace cbctox::kern::detail::avx2

#endif  // x86-64
