#pragma once

#include <cstddef>

// Internal: per-backend entry points. The public functions in kernels.hpp
// dispatch to one of these sets.

namespace cbctox::kern::detail {

#define CBCTOX_KERN_DECL(ns)                                                   \
  namespace ns {                                                               \
  float sum(const float* x, std::size_t n);                                    \
  double sum(const double* x, std::size_t n);                                  \
  float dot(const float* x, const float* y, std::size_t n);                    \
  double dot(const double* x, const double* y, std::size_t n);                 \
  void axpy(float a, const float* x, float* y, std::size_t n);                 \
  void axpy(double a, const double* x, double* y, std::size_t n);              \
  void scale(float a, float* x, std::size_t n);                                \
  void scale(double a, double* x, std::size_t n);                              \
  void vadd(const float* x, const float* y, float* out, std::size_t n);        \
  void vadd(const double* x, const double* y, double* out, std::size_t n);     \
  void vmul(const float* x, const float* y, float* out, std::size_t n);        \
  void vmul(const double* x, const double* y, double* out, std::size_t n);     \
  void relu(const float* x, float* out, std::size_t n);                        \
  void relu(const double* x, double* out, std::size_t n);                      \
  void leaky_relu(const float* x, float slope, float* out, std::size_t n);     \
  void leaky_relu(const double* x, double slope, double* out, std::size_t n);  \
  void leaky_relu_backward(const float* x, const float* gy, float slope,       \
                           float* gx, std::size_t n);                          \
  void leaky_relu_backward(const double* x, const double* gy, double slope,    \
                           double* gx, std::size_t n);                         \
  void adam_update(float* p, const float* g, float* m, float* v,               \
                   std::size_t n, float step_size, float b1, float b2,         \
                   float eps, float bc2);                                      \
  void adam_update(double* p, const double* g, double* m, double* v,           \
                   std::size_t n, double step_size, double b1, double b2,      \
                   double eps, double bc2);                                    \
  void gemm_nn(const float* a, const float* b, float* c, std::size_t m,        \
               std::size_t k, std::size_t n, bool accumulate);                 \
  void gemm_nn(const double* a, const double* b, double* c, std::size_t m,     \
               std::size_t k, std::size_t n, bool accumulate);                 \
  void gemm_nt(const float* a, const float* b, float* c, std::size_t m,        \
               std::size_t k, std::size_t n, bool accumulate);                 \
  void gemm_nt(const double* a, const double* b, double* c, std::size_t m,     \
               std::size_t k, std::size_t n, bool accumulate);                 \
  }

CBCTOX_KERN_DECL(scalar)
#if defined(__x86_64__) || defined(_M_X64)
CBCTOX_KERN_DECL(avx2)
#endif

#undef CBCTOX_KERN_DECL

}  // namespace cbctox::kern::detail
