#include <doctest.h>

#include <cmath>
#include <cstring>

#include "cbctox/error.hpp"
#include "cbctox/field.hpp"
#include "cbctox/losses.hpp"
#include "cbctox/rng.hpp"

using namespace cbctox;

namespace {

Volume random_volume(Rng& rng, std::array<std::int64_t, 3> dims,
                     std::array<double, 3> spacing = {2, 2, 2}) {
  Volume v = Volume::make(dims, 1, spacing);
  for (auto& x : v.data) x = float(rng.uniform());
  return v;
}

DisplacementField uniform_field(const Volume& grid, Vec3 u_mm) {
  DisplacementField d = DisplacementField::zeros_like(grid);
  const std::int64_t nvox = grid.voxels();
  for (int c = 0; c < 3; ++c)
    for (std::int64_t i = 0; i < nvox; ++i)
      d.f.data[c * nvox + i] = float(u_mm[std::size_t(c)]);
  return d;
}

// u(x) = A * x_mm with x_mm measured from the origin
DisplacementField linear_field(const Volume& grid, const Mat3& a) {
  DisplacementField d = DisplacementField::zeros_like(grid);
  const std::int64_t nvox = grid.voxels();
  for (std::int64_t z = 0; z < grid.nz(); ++z)
    for (std::int64_t y = 0; y < grid.ny(); ++y)
      for (std::int64_t x = 0; x < grid.nx(); ++x) {
        const Vec3 p = {double(x) * grid.spacing_mm[0],
                        double(y) * grid.spacing_mm[1],
                        double(z) * grid.spacing_mm[2]};
        const std::int64_t i = (z * grid.ny() + y) * grid.nx() + x;
        for (int r = 0; r < 3; ++r)
          d.f.data[r * nvox + i] = float(a[std::size_t(r)][0] * p[0] +
                                         a[std::size_t(r)][1] * p[1] +
                                         a[std::size_t(r)][2] * p[2]);
      }
  return d;
}

}  // namespace

TEST_CASE("rigid transform composed with its inverse is identity") {
  RigidTransform t;
  t.rotation_zyx = {0.3, -0.2, 0.45};
  t.translation_mm = {5.0, -7.5, 2.25};
  t.center_mm = {10, 12, 14};
  const RigidTransform id = RigidTransform::compose(t, t.inverse());
  for (int i = 0; i < 3; ++i) {
    CHECK(std::abs(id.rotation_zyx[std::size_t(i)]) < 1e-9);
    CHECK(std::abs(id.translation_mm[std::size_t(i)]) < 1e-9);
  }
  // and as a point map
  const Vec3 p{3.0, -4.0, 5.0};
  const Vec3 q = t.inverse().apply(t.apply(p));
  for (int i = 0; i < 3; ++i)
    CHECK(std::abs(q[std::size_t(i)] - p[std::size_t(i)]) < 1e-9);
}

TEST_CASE("warp with a zero DVF is the exact identity") {
  Rng rng(1);
  auto v = random_volume(rng, {7, 6, 5});
  const Volume w = warp(v, DisplacementField::zeros_like(v));
  CHECK(std::memcmp(w.data.data(), v.data.data(),
                    v.data.size() * sizeof(float)) == 0);
}

TEST_CASE("one-voxel x translation shifts the interior exactly") {
  Rng rng(2);
  auto v = random_volume(rng, {8, 6, 5});
  // sampling position x + u/s; u = +2mm at s=2mm pulls from x+1
  const Volume w = warp(v, uniform_field(v, {2.0, 0.0, 0.0}));
  for (std::int64_t z = 0; z < 5; ++z)
    for (std::int64_t y = 0; y < 6; ++y)
      for (std::int64_t x = 0; x < 7; ++x)
        CHECK(w.at(0, x, y, z) == v.at(0, x + 1, y, z));
}

TEST_CASE("half-voxel shift on a linear ramp gives half-step values") {
  Volume v = Volume::make({9, 4, 4}, 1, {2, 2, 2});
  for (std::int64_t z = 0; z < 4; ++z)
    for (std::int64_t y = 0; y < 4; ++y)
      for (std::int64_t x = 0; x < 9; ++x)
        v.at(0, x, y, z) = 10.f * float(x);
  const Volume w = warp(v, uniform_field(v, {1.0, 0.0, 0.0}));  // 0.5 voxel
  for (std::int64_t x = 0; x < 8; ++x)
    CHECK(w.at(0, x, 2, 2) == doctest::Approx(10.0 * (double(x) + 0.5)));
}

TEST_CASE("apply_rigid with the identity transform is exact") {
  Rng rng(3);
  auto v = random_volume(rng, {6, 6, 6});
  const Volume w = apply_rigid(v, RigidTransform::identity());
  for (std::size_t i = 0; i < v.data.size(); ++i)
    CHECK(w.data[i] == doctest::Approx(v.data[i]).epsilon(1e-7));
}

TEST_CASE("apply_rigid translation by one spacing shifts the interior") {
  Rng rng(4);
  auto v = random_volume(rng, {8, 6, 6});
  RigidTransform t;
  t.translation_mm = {2.0, 0, 0};  // content moves +1 voxel in x
  const Volume w = apply_rigid(v, t);
  for (std::int64_t z = 0; z < 6; ++z)
    for (std::int64_t y = 0; y < 6; ++y)
      for (std::int64_t x = 1; x < 8; ++x)
        CHECK(w.at(0, x, y, z) ==
              doctest::Approx(v.at(0, x - 1, y, z)).epsilon(1e-6));
}

TEST_CASE("full-turn rotation reproduces the input within tolerance") {
  Rng rng(5);
  auto v = random_volume(rng, {10, 10, 10});
  RigidTransform t;
  t.rotation_zyx = {2.0 * std::acos(-1.0), 0, 0};
  t.center_mm = {9, 9, 9};  // volume center in mm
  const Volume w = apply_rigid(v, t);
  for (std::size_t i = 0; i < v.data.size(); ++i)
    CHECK(std::abs(w.data[i] - v.data[i]) < 1e-4f);
}

TEST_CASE("compose with a zero field is exact in both orders") {
  Rng rng(6);
  auto grid = random_volume(rng, {6, 5, 4});
  DisplacementField u = DisplacementField::zeros_like(grid);
  for (auto& x : u.f.data) x = float(rng.uniform(-3.0, 3.0));
  const DisplacementField zero = DisplacementField::zeros_like(grid);

  const DisplacementField a = compose(u, zero);
  const DisplacementField b = compose(zero, u);
  CHECK(std::memcmp(a.f.data.data(), u.f.data.data(),
                    u.f.data.size() * sizeof(float)) == 0);
  CHECK(std::memcmp(b.f.data.data(), u.f.data.data(),
                    u.f.data.size() * sizeof(float)) == 0);
}

TEST_CASE("two uniform translations compose to their vector sum") {
  Rng rng(7);
  auto grid = random_volume(rng, {6, 6, 6});
  const DisplacementField c =
      compose(uniform_field(grid, {2, -4, 6}), uniform_field(grid, {4, 2, -2}));
  const std::int64_t nvox = grid.voxels();
  for (std::int64_t i = 0; i < nvox; ++i) {
    CHECK(c.f.data[i] == 6.f);
    CHECK(c.f.data[nvox + i] == -2.f);
    CHECK(c.f.data[2 * nvox + i] == 4.f);
  }
}

TEST_CASE("compose is associative for integer translation fields") {
  Rng rng(8);
  auto grid = random_volume(rng, {5, 5, 5});
  const auto a = uniform_field(grid, {2, 0, -4});
  const auto b = uniform_field(grid, {6, 2, 0});
  const auto c = uniform_field(grid, {-2, 4, 2});
  const auto lhs = compose(compose(a, b), c);
  const auto rhs = compose(a, compose(b, c));
  CHECK(std::memcmp(lhs.f.data.data(), rhs.f.data.data(),
                    lhs.f.data.size() * sizeof(float)) == 0);
}

TEST_CASE("warp-warp equals warp of compose for integer shifts, bit-exact") {
  Rng rng(9);
  auto v = random_volume(rng, {8, 7, 6});
  // same sign per axis so border clamping agrees between the two routes
  const auto u1 = uniform_field(v, {2.0, -2.0, 4.0});
  const auto u2 = uniform_field(v, {4.0, -4.0, 2.0});
  const Volume two_step = warp(warp(v, u1), u2);
  const Volume one_step = warp(v, compose(u1, u2));
  CHECK(std::memcmp(two_step.data.data(), one_step.data.data(),
                    v.data.size() * sizeof(float)) == 0);
}

TEST_CASE("jacobian of zero and uniform fields is the identity") {
  Rng rng(10);
  auto grid = random_volume(rng, {5, 5, 5});
  for (const auto& d : {DisplacementField::zeros_like(grid),
                        uniform_field(grid, {3.0, -1.0, 2.0})}) {
    const JacobianField j = jacobian_field(d);
    const std::int64_t nvox = grid.voxels();
    for (int ch = 0; ch < 9; ++ch)
      for (std::int64_t i = 0; i < nvox; ++i)
        CHECK(j.f.data[ch * nvox + i] == (ch % 4 == 0 ? 1.f : 0.f));
  }
}

TEST_CASE("jacobian of a linear field is I+A at interior voxels") {
  // power-of-two entries and integer coordinates keep u representable, so
  // central differences are exact
  Volume grid = Volume::make({6, 6, 6}, 1, {2, 2, 2});
  Mat3 a{{{0.125, 0.0625, 0.0}, {0.0, -0.25, 0.03125}, {0.0625, 0.0, 0.5}}};
  const DisplacementField d = linear_field(grid, a);
  const JacobianField j = jacobian_field(d);
  const std::int64_t nvox = grid.voxels();
  for (std::int64_t z = 1; z < 5; ++z)
    for (std::int64_t y = 1; y < 5; ++y)
      for (std::int64_t x = 1; x < 5; ++x) {
        const std::int64_t i = (z * 6 + y) * 6 + x;
        for (int r = 0; r < 3; ++r)
          for (int cidx = 0; cidx < 3; ++cidx) {
            const double expect = (r == cidx ? 1.0 : 0.0) +
                                  a[std::size_t(r)][std::size_t(cidx)];
            CHECK(std::abs(double(j.f.data[(r * 3 + cidx) * nvox + i]) -
                           expect) < 1e-10);
          }
      }
}

TEST_CASE("jacobian_field rejects grids smaller than 3") {
  Volume grid = Volume::make({2, 5, 5}, 1);
  CHECK_THROWS_AS((void)jacobian_field(DisplacementField::zeros_like(grid)),
                  Error);
}

TEST_CASE("determinant of the identity jacobian is one") {
  Rng rng(11);
  auto grid = random_volume(rng, {4, 4, 4});
  const JacobianField j = jacobian_field(DisplacementField::zeros_like(grid));
  const Volume det = jacobian_determinant(j);
  for (float x : det.data) CHECK(x == 1.f);
}

TEST_CASE("determinant of 2I is 8") {
  Volume f = Volume::make({3, 3, 3}, 9, {2, 2, 2});
  const std::int64_t nvox = f.voxels();
  for (int ch : {0, 4, 8})
    for (std::int64_t i = 0; i < nvox; ++i) f.data[ch * nvox + i] = 2.f;
  const Volume det = jacobian_determinant(JacobianField::wrap(std::move(f)));
  for (float x : det.data) CHECK(x == 8.f);
}

TEST_CASE("determinant of diag(1.1,1,1) field is 1.1 at interior voxels") {
  Volume grid = Volume::make({6, 6, 6}, 1, {2, 2, 2});
  Mat3 a{{{0.1, 0, 0}, {0, 0, 0}, {0, 0, 0}}};
  const Volume det = jacobian_determinant(jacobian_field(linear_field(grid, a)));
  for (std::int64_t z = 1; z < 5; ++z)
    for (std::int64_t y = 1; y < 5; ++y)
      for (std::int64_t x = 1; x < 5; ++x)
        CHECK(det.at(0, x, y, z) == doctest::Approx(1.1).epsilon(1e-6));
}

TEST_CASE("deformed fraction thresholds as expected") {
  Volume grid = Volume::make({6, 6, 6}, 1, {2, 2, 2});
  const auto zero = DisplacementField::zeros_like(grid);
  CHECK(deformed_fraction(jacobian_field(zero), 1e-6) == 0.0);

  Mat3 a{{{0.1, 0, 0}, {0, 0, 0}, {0, 0, 0}}};
  const JacobianField j = jacobian_field(linear_field(grid, a));
  // ||J-I||_F = 0.1 everywhere (central diffs are exact on linear fields,
  // one-sided ones too), so a small eps counts every voxel...
  CHECK(deformed_fraction(j, 1e-3) == 1.0);
  // ...and an eps above the deviation counts none
  CHECK(deformed_fraction(j, 0.2) == 0.0);
}

TEST_CASE("grid mismatches are rejected") {
  Rng rng(12);
  auto v = random_volume(rng, {5, 5, 5});
  auto other = random_volume(rng, {6, 5, 5});
  CHECK_THROWS_AS((void)warp(v, DisplacementField::zeros_like(other)), Error);
  CHECK_THROWS_AS((void)compose(DisplacementField::zeros_like(v),
                                DisplacementField::zeros_like(other)),
                  Error);
}
