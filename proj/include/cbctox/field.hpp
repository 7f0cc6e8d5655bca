#pragma once

// Geometric transforms: rigid maps, DVF warping (the resampler behind the
// STN), field composition and Jacobian-matrix extraction.

#include <array>
#include <cstdint>

#include "cbctox/volume.hpp"

namespace cbctox {

using Mat3 = std::array<std::array<double, 3>, 3>;
using Vec3 = std::array<double, 3>;

// p -> R(p - center) + center + translation, R = Rz(a)·Ry(b)·Rx(c)
struct RigidTransform {
  Vec3 rotation_zyx{0, 0, 0};  // radians (a, b, c)
  Vec3 translation_mm{0, 0, 0};
  Vec3 center_mm{0, 0, 0};

  Mat3 rotation_matrix() const;
  Vec3 apply(const Vec3& p) const;
  RigidTransform inverse() const;
  // (a ∘ b): apply b first; the result keeps a's center.
  static RigidTransform compose(const RigidTransform& a,
                                const RigidTransform& b);
  static RigidTransform identity() { return {}; }
};

// 3-channel Volume holding per-voxel displacements u(x) in mm, stored on the
// fixed-image grid (pull-back convention).
struct DisplacementField {
  Volume f;

  Vec3 u_at(std::int64_t x, std::int64_t y, std::int64_t z) const {
    return {f.at(0, x, y, z), f.at(1, x, y, z), f.at(2, x, y, z)};
  }
  static DisplacementField zeros_like(const Volume& grid);
  static DisplacementField wrap(Volume v);  // validates channels == 3
  void validate() const;                    // 3 channels, finite values
};

// 9-channel Volume, row-major J11,J12,J13,J21..J33.
struct JacobianField {
  Volume f;

  static JacobianField wrap(Volume v);  // validates channels == 9
};

// out(x) = vol(x + u(x)/spacing), trilinear, border clamp.
Volume warp(const Volume& vol, const DisplacementField& dvf);

// Pull-back resampling through the inverse of t.
Volume apply_rigid(const Volume& vol, const RigidTransform& t);

// u12(x) = u_second(x) + u_first(x + u_second(x)); u_first sampled trilinearly.
DisplacementField compose(const DisplacementField& u_first,
                          const DisplacementField& u_second);

// J(x) = I + du/dx in mm/mm; central differences inside, one-sided at the
// grid boundary. Requires dims >= 3 per axis.
JacobianField jacobian_field(const DisplacementField& dvf);

Volume jacobian_determinant(const JacobianField& jf);

// Fraction of voxels with ||J(x) - I||_F > eps.
double deformed_fraction(const JacobianField& jf, double eps);

// Corresponding points; fixed lives on the DVF grid (CBCT side), moving on
// the pCT side, both in mm.
struct LandmarkPair {
  Vec3 fixed_mm{0, 0, 0};
  Vec3 moving_mm{0, 0, 0};
};

}  // namespace cbctox
