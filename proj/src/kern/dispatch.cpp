#include "cbctox/kern/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

#include "kern_detail.hpp"

namespace cbctox::kern {

bool cpu_supports_avx2() {
#if defined(__x86_64__) || defined(_M_X64)
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

namespace {

Backend pick_default() {
  if (const char* e = std::getenv("CBCTOX_KERNEL")) {
    if (std::strcmp(e, "scalar") == 0) return Backend::scalar;
    if (std::strcmp(e, "avx2") == 0 && cpu_supports_avx2())
      return Backend::avx2;
  }
  return cpu_supports_avx2() ? Backend::avx2 : Backend::scalar;
}

std::atomic<Backend>& backend_slot() {
  static std::atomic<Backend> slot{pick_default()};
  return slot;
}

}  // namespace

Backend active_backend() { return backend_slot().load(std::memory_order_relaxed); }

void set_backend(Backend b) {
  if (b == Backend::avx2 && !cpu_supports_avx2()) b = Backend::scalar;
  backend_slot().store(b, std::memory_order_relaxed);
}

const char* backend_name(Backend b) {
  return b == Backend::avx2 ? "avx2" : "scalar";
}

#if defined(__x86_64__) || defined(_M_X64)
#define CBCTOX_DISPATCH(call) \
  return active_backend() == Backend::avx2 ? detail::avx2::call : detail::scalar::call
#define CBCTOX_DISPATCH_VOID(call)                   \
  do {                                               \
    if (active_backend() == Backend::avx2)           \
      detail::avx2::call;                            \
    else                                             \
      detail::scalar::call;                          \
  } while (0)
#else
#define CBCTOX_DISPATCH(call) return detail::scalar::call
#define CBCTOX_DISPATCH_VOID(call) detail::scalar::call
#endif

float sum(const float* x, std::size_t n) { CBCTOX_DISPATCH(sum(x, n)); }
double sum(const double* x, std::size_t n) { CBCTOX_DISPATCH(sum(x, n)); }
float dot(const float* x, const float* y, std::size_t n) {
  CBCTOX_DISPATCH(dot(x, y, n));
}
double dot(const double* x, const double* y, std::size_t n) {
  CBCTOX_DISPATCH(dot(x, y, n));
}

void axpy(float a, const float* x, float* y, std::size_t n) {
  CBCTOX_DISPATCH_VOID(axpy(a, x, y, n));
}
void axpy(double a, const double* x, double* y, std::size_t n) {
  CBCTOX_DISPATCH_VOID(axpy(a, x, y, n));
}
void scale(float a, float* x, std::size_t n) {
  CBCTOX_DISPATCH_VOID(scale(a, x, n));
}
void scale(double a, double* x, std::size_t n) {
  CBCTOX_DISPATCH_VOID(scale(a, x, n));
}
void vadd(const float* x, const float* y, float* out, std::size_t n) {
  CBCTOX_DISPATCH_VOID(vadd(x, y, out, n));
}
void vadd(const double* x, const double* y, double* out, std::size_t n) {
  CBCTOX_DISPATCH_VOID(vadd(x, y, out, n));
}
void vmul(const float* x, const float* y, float* out, std::size_t n) {
  CBCTOX_DISPATCH_VOID(vmul(x, y, out, n));
}
void vmul(const double* x, const double* y, double* out, std::size_t n) {
  CBCTOX_DISPATCH_VOID(vmul(x, y, out, n));
}
void relu(const float* x, float* out, std::size_t n) {
  CBCTOX_DISPATCH_VOID(relu(x, out, n));
}
void relu(const double* x, double* out, std::size_t n) {
  CBCTOX_DISPATCH_VOID(relu(x, out, n));
}
void leaky_relu(const float* x, float slope, float* out, std::size_t n) {
  CBCTOX_DISPATCH_VOID(leaky_relu(x, slope, out, n));
}
void leaky_relu(const double* x, double slope, double* out, std::size_t n) {
  CBCTOX_DISPATCH_VOID(leaky_relu(x, slope, out, n));
}
void leaky_relu_backward(const float* x, const float* gy, float slope,
                         float* gx, std::size_t n) {
  CBCTOX_DISPATCH_VOID(leaky_relu_backward(x, gy, slope, gx, n));
}
void leaky_relu_backward(const double* x, const double* gy, double slope,
                         double* gx, std::size_t n) {
  CBCTOX_DISPATCH_VOID(leaky_relu_backward(x, gy, slope, gx, n));
}
void adam_update(float* p, const float* g, float* m, float* v, std::size_t n,
                 float step_size, float b1, float b2, float eps, float bc2) {
  CBCTOX_DISPATCH_VOID(adam_update(p, g, m, v, n, step_size, b1, b2, eps, bc2));
}
void adam_update(double* p, const double* g, double* m, double* v,
                 std::size_t n, double step_size, double b1, double b2,
                 double eps, double bc2) {
  CBCTOX_DISPATCH_VOID(adam_update(p, g, m, v, n, step_size, b1, b2, eps, bc2));
}
void gemm_nn(const float* a, const float* b, float* c, std::size_t m,
             std::size_t k, std::size_t n, bool accumulate) {
  CBCTOX_DISPATCH_VOID(gemm_nn(a, b, c, m, k, n, accumulate));
}
void gemm_nn(const double* a, const double* b, double* c, std::size_t m,
             std::size_t k, std::size_t n, bool accumulate) {
  CBCTOX_DISPATCH_VOID(gemm_nn(a, b, c, m, k, n, accumulate));
}
void gemm_nt(const float* a, const float* b, float* c, std::size_t m,
             std::size_t k, std::size_t n, bool accumulate) {
  CBCTOX_DISPATCH_VOID(gemm_nt(a, b, c, m, k, n, accumulate));
}
void gemm_nt(const double* a, const double* b, double* c, std::size_t m,
             std::size_t k, std::size_t n, bool accumulate) {
  CBCTOX_DISPATCH_VOID(gemm_nt(a, b, c, m, k, n, accumulate));
}

#undef CBCTOX_DISPATCH
#undef CBCTOX_DISPATCH_VOID

}  // namespace cbctox::kern
