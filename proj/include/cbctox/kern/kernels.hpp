#pragma once

// Arithmetic kernels behind the hot loops: reductions, elementwise maps, the
// fused Adam update and the two GEMM flavours used by the conv/linear layers.
//
// Every kernel exists as a scalar reference and (on x86-64) an AVX2 variant,
// selected at runtime. Both variants follow the same accumulation order, so
// their results are bit-identical:
//   - reductions accumulate into LANES strided partial sums (8 for float,
//     4 for double) that are folded with a fixed halving tree; the tail is
//     added sequentially in index order,
//   - gemm_nn sweeps k = 0..K-1 in order for every output element,
//   - gemm_nt computes each output element with dot(), i.e. the lane tree.
// No fma is used anywhere (and -ffp-contract=off keeps the compiler from
// introducing one), so a*b+c means exactly mul-then-add in both variants.

#include <cstddef>
#include <cstdint>

namespace cbctox::kern {

enum class Backend { scalar, avx2 };

// Number of strided partial accumulators in the reduction contract.
template <class T> struct reduce_lanes;
template <> struct reduce_lanes<float> { static constexpr int value = 8; };
template <> struct reduce_lanes<double> { static constexpr int value = 4; };

bool cpu_supports_avx2();
Backend active_backend();
// Testing hook; also honours the CBCTOX_KERNEL=scalar|avx2 environment
// variable on first use. Requests for an unsupported backend fall back to
// scalar.
void set_backend(Backend b);
const char* backend_name(Backend b);

// ---- reductions -----------------------------------------------------------
float sum(const float* x, std::size_t n);
double sum(const double* x, std::size_t n);
float dot(const float* x, const float* y, std::size_t n);
double dot(const double* x, const double* y, std::size_t n);

// ---- elementwise ----------------------------------------------------------
void axpy(float a, const float* x, float* y, std::size_t n);  // y += a*x
void axpy(double a, const double* x, double* y, std::size_t n);
void scale(float a, float* x, std::size_t n);  // x *= a
void scale(double a, double* x, std::size_t n);
void vadd(const float* x, const float* y, float* out, std::size_t n);
void vadd(const double* x, const double* y, double* out, std::size_t n);
void vmul(const float* x, const float* y, float* out, std::size_t n);
void vmul(const double* x, const double* y, double* out, std::size_t n);

void relu(const float* x, float* out, std::size_t n);
void relu(const double* x, double* out, std::size_t n);
void leaky_relu(const float* x, float slope, float* out, std::size_t n);
void leaky_relu(const double* x, double slope, double* out, std::size_t n);
// gx += gy where x > 0, gx += slope*gy elsewhere (slope 0 for plain relu)
void leaky_relu_backward(const float* x, const float* gy, float slope,
                         float* gx, std::size_t n);
void leaky_relu_backward(const double* x, const double* gy, double slope,
                         double* gx, std::size_t n);

// Fused Adam step with bias correction already folded into `step_size` and
// `bc2` (step_size = lr/(1-b1^t), bc2 = 1/(1-b2^t)):
//   m = b1*m + (1-b1)*g
//   v = b2*v + (1-b2)*g*g
//   p -= step_size * m / (sqrt(v*bc2) + eps)
void adam_update(float* p, const float* g, float* m, float* v, std::size_t n,
                 float step_size, float b1, float b2, float eps, float bc2);
void adam_update(double* p, const double* g, double* m, double* v,
                 std::size_t n, double step_size, double b1, double b2,
                 double eps, double bc2);

// ---- GEMM -----------------------------------------------------------------
// C[M,N] (+)= A[M,K] * B[K,N], all row-major. k is swept 0..K-1 per element.
void gemm_nn(const float* a, const float* b, float* c, std::size_t m,
             std::size_t k, std::size_t n, bool accumulate);
void gemm_nn(const double* a, const double* b, double* c, std::size_t m,
             std::size_t k, std::size_t n, bool accumulate);
// C[M,N] (+)= A[M,K] * B[N,K]^T; each element is dot(A row, B row).
void gemm_nt(const float* a, const float* b, float* c, std::size_t m,
             std::size_t k, std::size_t n, bool accumulate);
void gemm_nt(const double* a, const double* b, double* c, std::size_t m,
             std::size_t k, std::size_t n, bool accumulate);

}  // namespace cbctox::kern
