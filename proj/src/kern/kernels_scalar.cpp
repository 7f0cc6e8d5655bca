// Scalar reference kernels. These spell out the accumulation-order contract
// the SIMD variants must reproduce bit-for-bit: LANES strided partial sums
// folded with a halving tree, sequential tail, and mul-then-add everywhere.

#include <cmath>
#include <cstddef>

#include "cbctox/kern/kernels.hpp"
#include "kern_detail.hpp"

namespace cbctox::kern::detail::scalar {

namespace {

template <class T>
T sum_impl(const T* x, std::size_t n) {
  constexpr int L = reduce_lanes<T>::value;
  T acc[L] = {};
  const std::size_t vn = n - n % L;
  for (std::size_t i = 0; i < vn; i += L)
    for (int l = 0; l < L; ++l) acc[l] = acc[l] + x[i + l];
  for (int half = L / 2; half >= 1; half /= 2)
    for (int j = 0; j < half; ++j) acc[j] = acc[j] + acc[j + half];
  T s = acc[0];
  for (std::size_t i = vn; i < n; ++i) s = s + x[i];
  return s;
}

template <class T>
T dot_impl(const T* x, const T* y, std::size_t n) {
  constexpr int L = reduce_lanes<T>::value;
  T acc[L] = {};
  const std::size_t vn = n - n % L;
  for (std::size_t i = 0; i < vn; i += L)
    for (int l = 0; l < L; ++l) acc[l] = acc[l] + x[i + l] * y[i + l];
  for (int half = L / 2; half >= 1; half /= 2)
    for (int j = 0; j < half; ++j) acc[j] = acc[j] + acc[j + half];
  T s = acc[0];
  for (std::size_t i = vn; i < n; ++i) s = s + x[i] * y[i];
  return s;
}

template <class T>
void adam_impl(T* p, const T* g, T* m, T* v, std::size_t n, T step_size, T b1,
               T b2, T eps, T bc2) {
  const T om1 = T(1) - b1;
  const T om2 = T(1) - b2;
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = b1 * m[i] + om1 * g[i];
    v[i] = b2 * v[i] + om2 * (g[i] * g[i]);
    p[i] = p[i] - step_size * (m[i] / (std::sqrt(v[i] * bc2) + eps));
  }
}

// k swept in order per output element; i-k-j loop order for locality.
template <class T>
void gemm_nn_impl(const T* a, const T* b, T* c, std::size_t m, std::size_t k,
                  std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    if (!accumulate)
      for (std::size_t j = 0; j < n; ++j) crow[j] = T(0);
    for (std::size_t kk = 0; kk < k; ++kk) {
      const T av = a[i * k + kk];
      const T* brow = b + kk * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] = crow[j] + av * brow[j];
    }
  }
}

template <class T>
void gemm_nt_impl(const T* a, const T* b, T* c, std::size_t m, std::size_t k,
                  std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const T d = dot_impl(a + i * k, b + j * k, k);
      c[i * n + j] = accumulate ? c[i * n + j] + d : d;
    }
}

}  // namespace

float sum(const float* x, std::size_t n) { return sum_impl(x, n); }
double sum(const double* x, std::size_t n) { return sum_impl(x, n); }
float dot(const float* x, const float* y, std::size_t n) {
  return dot_impl(x, y, n);
}
double dot(const double* x, const double* y, std::size_t n) {
  return dot_impl(x, y, n);
}

void axpy(float a, const float* x, float* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = y[i] + a * x[i];
}
void axpy(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = y[i] + a * x[i];
}
void scale(float a, float* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] = a * x[i];
}
void scale(double a, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] = a * x[i];
}
void vadd(const float* x, const float* y, float* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] + y[i];
}
void vadd(const double* x, const double* y, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] + y[i];
}
void vmul(const float* x, const float* y, float* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] * y[i];
}
void vmul(const double* x, const double* y, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] * y[i];
}

void relu(const float* x, float* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > 0.f ? x[i] : 0.f;
}
void relu(const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > 0. ? x[i] : 0.;
}
void leaky_relu(const float* x, float slope, float* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    out[i] = x[i] > 0.f ? x[i] : slope * x[i];
}
void leaky_relu(const double* x, double slope, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > 0. ? x[i] : slope * x[i];
}
void leaky_relu_backward(const float* x, const float* gy, float slope,
                         float* gx, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    gx[i] = gx[i] + (x[i] > 0.f ? gy[i] : slope * gy[i]);
}
void leaky_relu_backward(const double* x, const double* gy, double slope,
                         double* gx, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    gx[i] = gx[i] + (x[i] > 0. ? gy[i] : slope * gy[i]);
}

void adam_update(float* p, const float* g, float* m, float* v, std::size_t n,
                 float step_size, float b1, float b2, float eps, float bc2) {
  adam_impl(p, g, m, v, n, step_size, b1, b2, eps, bc2);
}
void adam_update(double* p, const double* g, double* m, double* v,
                 std::size_t n, double step_size, double b1, double b2,
                 double eps, double bc2) {
  adam_impl(p, g, m, v, n, step_size, b1, b2, eps, bc2);
}

void gemm_nn(const float* a, const float* b, float* c, std::size_t m,
             std::size_t k, std::size_t n, bool accumulate) {
  gemm_nn_impl(a, b, c, m, k, n, accumulate);
}
void gemm_nn(const double* a, const double* b, double* c, std::size_t m,
             std::size_t k, std::size_t n, bool accumulate) {
  gemm_nn_impl(a, b, c, m, k, n, accumulate);
}
void gemm_nt(const float* a, const float* b, float* c, std::size_t m,
             std::size_t k, std::size_t n, bool accumulate) {
  gemm_nt_impl(a, b, c, m, k, n, accumulate);
}
void gemm_nt(const double* a, const double* b, double* c, std::size_t m,
             std::size_t k, std::size_t n, bool accumulate) {
  gemm_nt_impl(a, b, c, m, k, n, accumulate);
}

}  // namespace cbctox::kern::detail::scalar
