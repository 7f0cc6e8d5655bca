#pragma once

// Gaussian pyramid pieces shared by the rigid and deformable engines:
// separable [1,4,6,4,1]/16 smoothing, stride-2 decimation, and trilinear
// DVF upsampling between resolution levels.

#include <vector>

#include "cbctox/field.hpp"
#include "cbctox/volume.hpp"

namespace cbctox::reg {

Volume gaussian_smooth(const Volume& v);
Volume downsample2(const Volume& v);  // smooth + decimate; spacing doubles

// levels[0] is the input resolution, each next level halves it
std::vector<Volume> build_pyramid(const Volume& v, int levels);

// resample field values (mm) onto the target grid
DisplacementField upsample_dvf(const DisplacementField& dvf,
                               const Volume& target_grid);

// intensity-weighted center of mass in mm
Vec3 center_of_mass_mm(const Volume& v);

}  // namespace cbctox::reg
