// Backend equivalence: every dispatched kernel must produce bit-identical
// results under the scalar and AVX2 variants, including ragged tails.

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "cbctox/kern/kernels.hpp"
#include "cbctox/parallel.hpp"
#include "cbctox/rng.hpp"

using namespace cbctox;
namespace k = cbctox::kern;

namespace {

struct BackendGuard {
  k::Backend saved;
  BackendGuard() : saved(k::active_backend()) {}
  ~BackendGuard() { k::set_backend(saved); }
};

template <class T>
std::vector<T> random_vec(Rng& rng, std::size_t n, double scale = 1.0) {
  std::vector<T> v(n);
  for (auto& x : v) x = T(rng.normal(0.0, scale));
  return v;
}

const std::vector<std::size_t> kSizes = {0,  1,  2,  7,   8,   9,   15, 16,
                                         17, 31, 63, 100, 255, 4096, 4099};

template <class T>
void check_reductions() {
  if (!k::cpu_supports_avx2()) return;
  BackendGuard guard;
  Rng rng(42);
  for (std::size_t n : kSizes) {
    auto x = random_vec<T>(rng, n);
    auto y = random_vec<T>(rng, n);
    k::set_backend(k::Backend::scalar);
    const T s_sum = k::sum(x.data(), n);
    const T s_dot = k::dot(x.data(), y.data(), n);
    k::set_backend(k::Backend::avx2);
    const T a_sum = k::sum(x.data(), n);
    const T a_dot = k::dot(x.data(), y.data(), n);
    CHECK(std::memcmp(&s_sum, &a_sum, sizeof(T)) == 0);
    CHECK(std::memcmp(&s_dot, &a_dot, sizeof(T)) == 0);
  }
}

template <class T>
void check_elementwise() {
  if (!k::cpu_supports_avx2()) return;
  BackendGuard guard;
  Rng rng(7);
  for (std::size_t n : kSizes) {
    auto x = random_vec<T>(rng, n);
    auto y = random_vec<T>(rng, n);
    auto g = random_vec<T>(rng, n);

    auto run = [&](k::Backend be) {
      k::set_backend(be);
      struct Out {
        std::vector<T> axpy_y, scl, add, mul, rl, lrl, gx;
      } o;
      o.axpy_y = y;
      k::axpy(T(0.37), x.data(), o.axpy_y.data(), n);
      o.scl = x;
      k::scale(T(-1.25), o.scl.data(), n);
      o.add.resize(n);
      k::vadd(x.data(), y.data(), o.add.data(), n);
      o.mul.resize(n);
      k::vmul(x.data(), y.data(), o.mul.data(), n);
      o.rl.resize(n);
      k::relu(x.data(), o.rl.data(), n);
      o.lrl.resize(n);
      k::leaky_relu(x.data(), T(0.2), o.lrl.data(), n);
      o.gx = y;
      k::leaky_relu_backward(x.data(), g.data(), T(0.2), o.gx.data(), n);
      return o;
    };
    auto s = run(k::Backend::scalar);
    auto a = run(k::Backend::avx2);
    auto same = [&](const std::vector<T>& u, const std::vector<T>& v) {
      return n == 0 || std::memcmp(u.data(), v.data(), n * sizeof(T)) == 0;
    };
    CHECK(same(s.axpy_y, a.axpy_y));
    CHECK(same(s.scl, a.scl));
    CHECK(same(s.add, a.add));
    CHECK(same(s.mul, a.mul));
    CHECK(same(s.rl, a.rl));
    CHECK(same(s.lrl, a.lrl));
    CHECK(same(s.gx, a.gx));
  }
}

}  // namespace

TEST_CASE("reductions agree bitwise across backends") {
  check_reductions<float>();
  check_reductions<double>();
}

TEST_CASE("elementwise kernels agree bitwise across backends") {
  check_elementwise<float>();
  check_elementwise<double>();
}

TEST_CASE("adam updates agree bitwise across backends") {
  if (!k::cpu_supports_avx2()) return;
  BackendGuard guard;
  Rng rng(3);
  for (std::size_t n : {1u, 8u, 9u, 100u, 1000u}) {
    auto p0 = random_vec<float>(rng, n);
    auto g = random_vec<float>(rng, n);
    auto m0 = random_vec<float>(rng, n, 0.01);
    std::vector<float> v0(n);
    for (auto& v : v0) v = float(rng.uniform()) * 0.01f;

    auto run = [&](k::Backend be) {
      k::set_backend(be);
      auto p = p0, m = m0, v = v0;
      k::adam_update(p.data(), g.data(), m.data(), v.data(), n, 1e-3f, 0.9f,
                     0.999f, 1e-8f, 1.f / (1.f - 0.999f));
      return std::tuple(p, m, v);
    };
    auto [ps, ms, vs] = run(k::Backend::scalar);
    auto [pa, ma, va] = run(k::Backend::avx2);
    CHECK(std::memcmp(ps.data(), pa.data(), n * sizeof(float)) == 0);
    CHECK(std::memcmp(ms.data(), ma.data(), n * sizeof(float)) == 0);
    CHECK(std::memcmp(vs.data(), va.data(), n * sizeof(float)) == 0);
  }
}

TEST_CASE("gemm_nn and gemm_nt agree bitwise across backends") {
  if (!k::cpu_supports_avx2()) return;
  BackendGuard guard;
  Rng rng(11);
  const std::size_t shapes[][3] = {{1, 1, 1},   {2, 3, 4},    {6, 16, 16},
                                   {7, 5, 17},  {13, 40, 33}, {6, 27, 64},
                                   {64, 100, 129}, {5, 7, 3}};
  for (auto& sh : shapes) {
    const std::size_t m = sh[0], kk = sh[1], n = sh[2];
    auto a = random_vec<float>(rng, m * kk);
    auto b = random_vec<float>(rng, kk * n);
    auto bt = random_vec<float>(rng, n * kk);
    auto c0 = random_vec<float>(rng, m * n);
    for (bool acc : {false, true}) {
      auto run_nn = [&](k::Backend be) {
        k::set_backend(be);
        auto c = c0;
        k::gemm_nn(a.data(), b.data(), c.data(), m, kk, n, acc);
        return c;
      };
      auto run_nt = [&](k::Backend be) {
        k::set_backend(be);
        auto c = c0;
        k::gemm_nt(a.data(), bt.data(), c.data(), m, kk, n, acc);
        return c;
      };
      auto nn_s = run_nn(k::Backend::scalar);
      auto nn_a = run_nn(k::Backend::avx2);
      CHECK(std::memcmp(nn_s.data(), nn_a.data(), m * n * sizeof(float)) == 0);
      auto nt_s = run_nt(k::Backend::scalar);
      auto nt_a = run_nt(k::Backend::avx2);
      CHECK(std::memcmp(nt_s.data(), nt_a.data(), m * n * sizeof(float)) == 0);
    }
  }
}

TEST_CASE("gemm matches a plain triple loop") {
  Rng rng(19);
  const std::size_t m = 9, kk = 23, n = 21;
  auto a = random_vec<double>(rng, m * kk);
  auto b = random_vec<double>(rng, kk * n);
  std::vector<double> c(m * n);
  k::gemm_nn(a.data(), b.data(), c.data(), m, kk, n, false);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0;
      for (std::size_t k2 = 0; k2 < kk; ++k2) s += a[i * kk + k2] * b[k2 * n + j];
      CHECK(c[i * n + j] == doctest::Approx(s).epsilon(1e-12));
    }
}

TEST_CASE("chunked_sum is invariant to thread count") {
  Rng rng(5);
  auto x = random_vec<float>(rng, 100000);
  auto run = [&] {
    return chunked_sum<double>(std::int64_t(x.size()),
                               [&](std::int64_t b, std::int64_t e) {
                                 double s = 0;
                                 for (std::int64_t i = b; i < e; ++i)
                                   s += x[std::size_t(i)];
                                 return s;
                               });
  };
  auto& pool = ThreadPool::instance();
  const int saved = pool.threads();
  pool.set_threads(1);
  const double s1 = run();
  pool.set_threads(4);
  const double s4 = run();
  pool.set_threads(saved);
  CHECK(std::memcmp(&s1, &s4, sizeof(double)) == 0);
}

TEST_CASE("parallel_for covers the range exactly once") {
  std::vector<int> hits(10000, 0);
  parallel_for(0, std::int64_t(hits.size()), 13,
               [&](std::int64_t b, std::int64_t e) {
                 for (std::int64_t i = b; i < e; ++i) hits[std::size_t(i)]++;
               });
  for (int h : hits) CHECK(h == 1);
}
