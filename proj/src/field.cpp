#include "cbctox/field.hpp"

#include <cmath>

#include "cbctox/error.hpp"
#include "cbctox/interp.hpp"
#include "cbctox/parallel.hpp"

namespace cbctox {

namespace {

Mat3 matmul(const Mat3& a, const Mat3& b) {
  Mat3 r{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double s = 0;
      for (int k = 0; k < 3; ++k) s += a[i][k] * b[k][j];
      r[i][j] = s;
    }
  return r;
}

Vec3 matvec(const Mat3& m, const Vec3& v) {
  return {m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
          m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
          m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2]};
}

Mat3 transpose(const Mat3& m) {
  return Mat3{{{m[0][0], m[1][0], m[2][0]},
               {m[0][1], m[1][1], m[2][1]},
               {m[0][2], m[1][2], m[2][2]}}};
}

// R = Rz(a)·Ry(b)·Rx(c) -> (a, b, c)
Vec3 euler_zyx_from_matrix(const Mat3& r) {
  const double sb = -r[2][0];
  const double b = std::asin(std::clamp(sb, -1.0, 1.0));
  const double cb = std::cos(b);
  if (std::abs(cb) < 1e-10) {  // gimbal: fold roll into yaw
    return {std::atan2(-r[0][1], r[1][1]), b, 0.0};
  }
  return {std::atan2(r[1][0], r[0][0]), b, std::atan2(r[2][1], r[2][2])};
}

}  // namespace

Mat3 RigidTransform::rotation_matrix() const {
  const double ca = std::cos(rotation_zyx[0]), sa = std::sin(rotation_zyx[0]);
  const double cb = std::cos(rotation_zyx[1]), sb = std::sin(rotation_zyx[1]);
  const double cg = std::cos(rotation_zyx[2]), sg = std::sin(rotation_zyx[2]);
  const Mat3 rz{{{ca, -sa, 0}, {sa, ca, 0}, {0, 0, 1}}};
  const Mat3 ry{{{cb, 0, sb}, {0, 1, 0}, {-sb, 0, cb}}};
  const Mat3 rx{{{1, 0, 0}, {0, cg, -sg}, {0, sg, cg}}};
  return matmul(rz, matmul(ry, rx));
}

Vec3 RigidTransform::apply(const Vec3& p) const {
  const Mat3 r = rotation_matrix();
  const Vec3 q = matvec(
      r, {p[0] - center_mm[0], p[1] - center_mm[1], p[2] - center_mm[2]});
  return {q[0] + center_mm[0] + translation_mm[0],
          q[1] + center_mm[1] + translation_mm[1],
          q[2] + center_mm[2] + translation_mm[2]};
}

RigidTransform RigidTransform::inverse() const {
  // T^-1(q) = R^T(q - c) + c - R^T t
  const Mat3 rt = transpose(rotation_matrix());
  RigidTransform inv;
  inv.rotation_zyx = euler_zyx_from_matrix(rt);
  inv.center_mm = center_mm;
  const Vec3 rtt = matvec(rt, translation_mm);
  inv.translation_mm = {-rtt[0], -rtt[1], -rtt[2]};
  return inv;
}

RigidTransform RigidTransform::compose(const RigidTransform& a,
                                       const RigidTransform& b) {
  RigidTransform r;
  r.center_mm = a.center_mm;
  r.rotation_zyx =
      euler_zyx_from_matrix(matmul(a.rotation_matrix(), b.rotation_matrix()));
  const Vec3 at_c = a.apply(b.apply(a.center_mm));
  r.translation_mm = {at_c[0] - a.center_mm[0], at_c[1] - a.center_mm[1],
                      at_c[2] - a.center_mm[2]};
  return r;
}

DisplacementField DisplacementField::zeros_like(const Volume& grid) {
  DisplacementField d;
  d.f = Volume::make(grid.dims, 3, grid.spacing_mm, grid.origin_mm, 0.f);
  return d;
}

DisplacementField DisplacementField::wrap(Volume v) {
  require(v.channels == 3, "shape", "displacement field needs 3 channels");
  DisplacementField d;
  d.f = std::move(v);
  return d;
}

void DisplacementField::validate() const {
  require(f.channels == 3, "shape", "displacement field needs 3 channels");
  for (float v : f.data)
    require(std::isfinite(v), "domain", "displacement field has non-finite values");
}

JacobianField JacobianField::wrap(Volume v) {
  require(v.channels == 9, "shape", "jacobian field needs 9 channels");
  JacobianField j;
  j.f = std::move(v);
  return j;
}

Volume warp(const Volume& vol, const DisplacementField& dvf) {
  require(vol.same_grid(dvf.f), "shape", "warp: volume/DVF grid mismatch");
  const std::int64_t nx = vol.nx(), ny = vol.ny(), nz = vol.nz();
  const std::int64_t nvox = vol.voxels();
  Volume out = Volume::make(vol.dims, vol.channels, vol.spacing_mm,
                            vol.origin_mm);
  const float* ux = dvf.f.channel(0);
  const float* uy = dvf.f.channel(1);
  const float* uz = dvf.f.channel(2);
  const double sx = vol.spacing_mm[0], sy = vol.spacing_mm[1],
               sz = vol.spacing_mm[2];

  parallel_for(0, nvox, 4096, [&](std::int64_t b, std::int64_t e) {
    for (std::int64_t i = b; i < e; ++i) {
      const std::int64_t x = i % nx;
      const std::int64_t y = (i / nx) % ny;
      const std::int64_t z = i / (nx * ny);
      const auto tap = trilinear_tap<double>(
          nx, ny, nz, double(x) + double(ux[i]) / sx,
          double(y) + double(uy[i]) / sy, double(z) + double(uz[i]) / sz);
      for (std::int64_t c = 0; c < vol.channels; ++c)
        out.data[c * nvox + i] =
            float(sample_tap(vol.data.data() + c * nvox, tap));
    }
  });
  return out;
}

Volume apply_rigid(const Volume& vol, const RigidTransform& t) {
  const std::int64_t nx = vol.nx(), ny = vol.ny(), nz = vol.nz();
  const std::int64_t nvox = vol.voxels();
  Volume out = Volume::make(vol.dims, vol.channels, vol.spacing_mm,
                            vol.origin_mm);
  const Mat3 rt = transpose(t.rotation_matrix());
  // precompute T^-1 as q -> rt*q + shift
  const Vec3 cpt = {t.center_mm[0] + t.translation_mm[0],
                    t.center_mm[1] + t.translation_mm[1],
                    t.center_mm[2] + t.translation_mm[2]};
  const Vec3 rc = matvec(rt, cpt);
  const Vec3 shift = {t.center_mm[0] - rc[0], t.center_mm[1] - rc[1],
                      t.center_mm[2] - rc[2]};

  parallel_for(0, nvox, 4096, [&](std::int64_t b, std::int64_t e) {
    for (std::int64_t i = b; i < e; ++i) {
      const std::int64_t x = i % nx;
      const std::int64_t y = (i / nx) % ny;
      const std::int64_t z = i / (nx * ny);
      const Vec3 p = vol.to_mm(double(x), double(y), double(z));
      const Vec3 q = matvec(rt, p);
      const Vec3 src = vol.to_voxel(
          {q[0] + shift[0], q[1] + shift[1], q[2] + shift[2]});
      const auto tap =
          trilinear_tap<double>(nx, ny, nz, src[0], src[1], src[2]);
      for (std::int64_t c = 0; c < vol.channels; ++c)
        out.data[c * nvox + i] =
            float(sample_tap(vol.data.data() + c * nvox, tap));
    }
  });
  return out;
}

DisplacementField compose(const DisplacementField& u_first,
                          const DisplacementField& u_second) {
  require(u_first.f.same_grid(u_second.f), "shape",
          "compose: DVF grid mismatch");
  const Volume& g = u_second.f;
  const std::int64_t nx = g.nx(), ny = g.ny(), nz = g.nz();
  const std::int64_t nvox = g.voxels();
  DisplacementField out = DisplacementField::zeros_like(g);
  const double sx = g.spacing_mm[0], sy = g.spacing_mm[1], sz = g.spacing_mm[2];

  parallel_for(0, nvox, 4096, [&](std::int64_t b, std::int64_t e) {
    for (std::int64_t i = b; i < e; ++i) {
      const std::int64_t x = i % nx;
      const std::int64_t y = (i / nx) % ny;
      const std::int64_t z = i / (nx * ny);
      const double u2x = u_second.f.data[i];
      const double u2y = u_second.f.data[nvox + i];
      const double u2z = u_second.f.data[2 * nvox + i];
      const auto tap = trilinear_tap<double>(nx, ny, nz, double(x) + u2x / sx,
                                             double(y) + u2y / sy,
                                             double(z) + u2z / sz);
      out.f.data[i] = float(u2x + sample_tap(u_first.f.channel(0), tap));
      out.f.data[nvox + i] =
          float(u2y + sample_tap(u_first.f.channel(1), tap));
      out.f.data[2 * nvox + i] =
          float(u2z + sample_tap(u_first.f.channel(2), tap));
    }
  });
  return out;
}

JacobianField jacobian_field(const DisplacementField& dvf) {
  const Volume& g = dvf.f;
  require(g.nx() >= 3 && g.ny() >= 3 && g.nz() >= 3, "shape",
          "jacobian_field needs dims >= 3 per axis");
  const std::int64_t nx = g.nx(), ny = g.ny(), nz = g.nz();
  const std::int64_t nvox = g.voxels();
  const std::int64_t stride[3] = {1, nx, nx * ny};
  const std::int64_t n_axis[3] = {nx, ny, nz};

  Volume jf = Volume::make(g.dims, 9, g.spacing_mm, g.origin_mm);
  parallel_for(0, nvox, 4096, [&](std::int64_t b, std::int64_t e) {
    for (std::int64_t i = b; i < e; ++i) {
      const std::int64_t pos[3] = {i % nx, (i / nx) % ny, i / (nx * ny)};
      for (int axis = 0; axis < 3; ++axis) {
        const std::int64_t p = pos[axis];
        const double s = g.spacing_mm[axis];
        std::int64_t ia, ib;
        double denom;
        if (p == 0) {
          ia = i + stride[axis];
          ib = i;
          denom = s;
        } else if (p == n_axis[axis] - 1) {
          ia = i;
          ib = i - stride[axis];
          denom = s;
        } else {
          ia = i + stride[axis];
          ib = i - stride[axis];
          denom = 2.0 * s;
        }
        for (int comp = 0; comp < 3; ++comp) {
          const float* u = g.data.data() + comp * nvox;
          const double d = (double(u[ia]) - double(u[ib])) / denom;
          jf.data[(comp * 3 + axis) * nvox + i] =
              float((comp == axis ? 1.0 : 0.0) + d);
        }
      }
    }
  });
  return JacobianField::wrap(std::move(jf));
}

Volume jacobian_determinant(const JacobianField& jf) {
  const Volume& f = jf.f;
  const std::int64_t nvox = f.voxels();
  Volume det = Volume::make(f.dims, 1, f.spacing_mm, f.origin_mm);
  parallel_for(0, nvox, 4096, [&](std::int64_t b, std::int64_t e) {
    for (std::int64_t i = b; i < e; ++i) {
      const double a = f.data[0 * nvox + i], b1 = f.data[1 * nvox + i],
                   c = f.data[2 * nvox + i];
      const double d = f.data[3 * nvox + i], e1 = f.data[4 * nvox + i],
                   ff = f.data[5 * nvox + i];
      const double gg = f.data[6 * nvox + i], h = f.data[7 * nvox + i],
                   k = f.data[8 * nvox + i];
      det.data[i] = float(a * (e1 * k - ff * h) - b1 * (d * k - ff * gg) +
                          c * (d * h - e1 * gg));
    }
  });
  return det;
}

double deformed_fraction(const JacobianField& jf, double eps) {
  require(eps > 0, "domain", "deformed_fraction needs eps > 0");
  const Volume& f = jf.f;
  const std::int64_t nvox = f.voxels();
  const double eps2 = eps * eps;
  const std::int64_t count = chunked_sum<std::int64_t>(
      nvox, [&](std::int64_t b, std::int64_t e) {
        std::int64_t c = 0;
        for (std::int64_t i = b; i < e; ++i) {
          double s = 0;
          for (int ch = 0; ch < 9; ++ch) {
            const double dev =
                double(f.data[ch * nvox + i]) - (ch % 4 == 0 ? 1.0 : 0.0);
            s += dev * dev;
          }
          c += s > eps2;
        }
        return c;
      });
  return double(count) / double(nvox);
}

}  // namespace cbctox
