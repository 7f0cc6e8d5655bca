#pragma once

// Registration objective pieces: global NCC (whole-volume Pearson
// correlation) and the L2 penalty on forward differences of the DVF, plus
// the combined objective. Differentiable counterparts for training live in
// nn/field_ops.hpp; both share the conventions fixed here.

#include <optional>

#include "cbctox/field.hpp"
#include "cbctox/volume.hpp"

namespace cbctox {

// Pearson correlation of in-mask voxel values, in [-1, 1]. The training
// loss is the negative of this. Errors when either input has zero variance
// in the mask or fewer than 2 voxels are in the mask.
double ncc(const Volume& a, const Volume& b,
           const MaskVolume* mask = nullptr);

// Mean over voxels and components of the summed squared forward differences
// (voxel units; the trailing voxel along an axis reuses the preceding
// difference, so a unit ramp scores exactly 1/3).
double l2_gradient_penalty(const DisplacementField& dvf);

// -ncc(fixed, warp(moving, dvf)) + lambda * l2_gradient_penalty(dvf)
double dir_loss(const Volume& fixed, const Volume& moving,
                const DisplacementField& dvf, double lambda,
                const MaskVolume* mask = nullptr);

}  // namespace cbctox
