#pragma once

// Preprocessing: isotropic resampling, [0,1] intensity normalization,
// fixed-size centered cropping with zero padding, and the adaptive head mask
// (Otsu threshold + closing + largest component).

#include "cbctox/volume.hpp"

namespace cbctox {

// Trilinear resampling onto an isotropic grid; output dims are
// round(dims_i * spacing_i / target), at least 1; origin preserved.
Volume resample_isotropic(const Volume& vol, double target_spacing_mm);

// (v - min) / (max - min); errors on constant input.
Volume normalize_intensity(const Volume& vol);

// Output has exactly `size` dims; regions outside the source are zero.
// Origin shifts so retained voxels keep their physical coordinates.
Volume crop_centered(const Volume& vol, std::array<std::int64_t, 3> center,
                     std::array<std::int64_t, 3> size);

// Otsu threshold on a 256-bin histogram, then one closing pass with the
// 6-connected radius-1 element, then retention of the largest 6-connected
// component. Input is a normalized single-channel volume.
MaskVolume adaptive_mask(const Volume& vol);

// Zeroes voxels outside the mask (all channels).
Volume apply_mask(const Volume& vol, const MaskVolume& mask);

}  // namespace cbctox
