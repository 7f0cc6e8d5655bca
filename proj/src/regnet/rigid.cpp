#include "cbctox/regnet/rigid.hpp"

#include <chrono>
#include <cmath>

#include "cbctox/error.hpp"
#include "cbctox/losses.hpp"
#include "cbctox/regnet/pyramid.hpp"

namespace cbctox::reg {

namespace {

RigidTransform params_to_transform(const double p[6], double angle_scale,
                                   const Vec3& center) {
  RigidTransform t;
  t.rotation_zyx = {p[0] * angle_scale, p[1] * angle_scale,
                    p[2] * angle_scale};
  t.translation_mm = {p[3], p[4], p[5]};
  t.center_mm = center;
  return t;
}

}  // namespace

RigidTransform rigid_register(const Volume& fixed, const Volume& moving,
                              RegistrationReport& report,
                              const RigidConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  require(fixed.channels == 1 && moving.channels == 1, "shape",
          "rigid_register expects single-channel volumes");

  const auto fpyr = build_pyramid(fixed, cfg.levels);
  const auto mpyr = build_pyramid(moving, cfg.levels);
  const int levels = int(std::min(fpyr.size(), mpyr.size()));

  const Vec3 center = {
      fixed.origin_mm[0] + 0.5 * (fixed.nx() - 1) * fixed.spacing_mm[0],
      fixed.origin_mm[1] + 0.5 * (fixed.ny() - 1) * fixed.spacing_mm[1],
      fixed.origin_mm[2] + 0.5 * (fixed.nz() - 1) * fixed.spacing_mm[2]};

  // center-of-mass initialization: content should move by com_f - com_m
  const Vec3 com_f = center_of_mass_mm(fixed);
  const Vec3 com_m = center_of_mass_mm(moving);
  double p[6] = {0, 0, 0, com_f[0] - com_m[0], com_f[1] - com_m[1],
                 com_f[2] - com_m[2]};

  report = {};
  report.engine = "rigid-adam-pyramid";
  report.initial_ncc = ncc(fixed, moving);

  std::int64_t iters_total = 0;
  for (int level = levels - 1; level >= 0; --level) {
    const Volume& f = fpyr[std::size_t(level)];
    const Volume& m = mpyr[std::size_t(level)];
    auto objective = [&](const double q[6]) {
      // negated NCC; invalid overlaps count as no correlation
      try {
        return -ncc(f, apply_rigid(m, params_to_transform(q, cfg.angle_scale,
                                                          center)));
      } catch (const Error&) {
        return 1.0;
      }
    };

    double m1[6] = {0}, m2[6] = {0};
    double best[6];
    std::copy(p, p + 6, best);
    double best_loss = objective(p);
    const double h_trans = cfg.fd_step_trans_vox * f.spacing_mm[0];
    const double h_angle = cfg.fd_step_angle / cfg.angle_scale;
    // most of the work happens at the coarse levels
    const int level_iters =
        std::max(12, cfg.iters_per_level >> (levels - 1 - level));

    for (int it = 0; it < level_iters; ++it) {
      ++iters_total;
      double grad[6];
      for (int i = 0; i < 6; ++i) {
        const double h = i < 3 ? h_angle : h_trans;
        double qp[6], qm[6];
        std::copy(p, p + 6, qp);
        std::copy(p, p + 6, qm);
        qp[i] += h;
        qm[i] -= h;
        grad[i] = (objective(qp) - objective(qm)) / (2 * h);
      }
      // cosine-annealed Adam step within the level
      const double lr =
          cfg.lr * 0.5 *
          (1.0 + std::cos(3.14159265358979 * double(it) /
                          double(level_iters)));
      const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
      const double bc1 = 1.0 - std::pow(b1, it + 1);
      const double bc2 = 1.0 - std::pow(b2, it + 1);
      for (int i = 0; i < 6; ++i) {
        m1[i] = b1 * m1[i] + (1 - b1) * grad[i];
        m2[i] = b2 * m2[i] + (1 - b2) * grad[i] * grad[i];
        p[i] -= lr * (m1[i] / bc1) / (std::sqrt(m2[i] / bc2) + eps);
      }
      const double loss = objective(p);
      if (loss < best_loss) {
        best_loss = loss;
        std::copy(p, p + 6, best);
      }
    }
    std::copy(best, best + 6, p);
  }

  // the registered result must never be worse than no registration
  RigidTransform out = params_to_transform(p, cfg.angle_scale, center);
  double final_ncc = ncc(fixed, apply_rigid(moving, out));
  if (final_ncc < report.initial_ncc) {
    out = RigidTransform::identity();
    out.center_mm = center;
    final_ncc = report.initial_ncc;
  }
  report.ncc_value = final_ncc;
  report.final_loss = -final_ncc;
  report.iterations = iters_total;
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return out;
}

}  // namespace cbctox::reg
